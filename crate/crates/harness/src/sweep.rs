//! Step-size sweeps: one run per (method, h), reduced to max-over-trajectory
//! errors, plus log–log slopes per method and observable.

use magsplit::analytic::PenningExact;
use magsplit::integrators::{run, Observer, Stepper};
use magsplit::structure::{
    drift_and_period, energy, invariant_i, magnetic_moment, relative_error, AngleTracker, GradB2dOrbit,
};
use magsplit::{FieldModel, State};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, MethodEntry, Observable};
use crate::error::Result;
use crate::experiments::{steps_in, Units};
use crate::fit::{asymptotic_fit, loglog_fit, Fit};
use crate::reference::{make_reference, Provenance, Reference};

/// Centre about which the angle `α` is measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AngleFrame {
    /// The `z`-axis (Penning traps).
    Axis,
    /// The drifting orbit centre `(x_mid, v_d t)` of the ∇B problem.
    Drift { x_mid: f64, v_d: f64 },
}

impl AngleFrame {
    pub fn of(cfg: &ExperimentConfig) -> Self {
        match cfg.field {
            FieldModel::Gradb2d => {
                let orbit = gradb2d_orbit(cfg);
                AngleFrame::Drift { x_mid: orbit.x_mid(), v_d: orbit.drift_velocity() }
            }
            _ => AngleFrame::Axis,
        }
    }

    pub fn relative(&self, t: f64, y: &State) -> (f64, f64) {
        match *self {
            AngleFrame::Axis => (y.q.x, y.q.y),
            AngleFrame::Drift { x_mid, v_d } => (y.q.x - x_mid, y.q.y - v_d * t),
        }
    }
}

pub fn gradb2d_orbit(cfg: &ExperimentConfig) -> GradB2dOrbit {
    GradB2dOrbit { v: cfg.initial.state().p.norm() / cfg.particle.m }
}

/// Angle error relative to the angle the reference has swept since `t = 0`,
/// never normalised by less than one full turn.
pub fn alpha_error(alpha: f64, alpha_ref: f64, alpha_ref0: f64) -> f64 {
    (alpha - alpha_ref).abs() / (alpha_ref - alpha_ref0).abs().max(2.0 * std::f64::consts::PI)
}

/// One summary value of a sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub method: String,
    pub h: f64,
    pub fp_iters: u32,
    pub observable: Observable,
    /// Final time of the run.
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeRow {
    pub method: String,
    pub fp_iters: u32,
    pub observable: Observable,
    pub all: Option<Fit>,
    pub asymptotic: Option<Fit>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub slopes: Vec<SlopeRow>,
    pub reference: Option<Provenance>,
    /// `(method, h, reason)` for runs that left the domain or blew up.
    pub diverged: Vec<(String, f64, String)>,
}

impl SweepResult {
    /// Values of one observable for one method label, sorted by `h`.
    pub fn curve(&self, method: &str, observable: Observable) -> Vec<(f64, f64)> {
        let mut c: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.method == method && r.observable == observable)
            .map(|r| (r.h, r.value))
            .collect();
        c.sort_by(|a, b| a.0.total_cmp(&b.0));
        c
    }

    pub fn slope(&self, method: &str, observable: Observable) -> Option<&SlopeRow> {
        self.slopes.iter().find(|s| s.method == method && s.observable == observable)
    }
}

struct Tracker<'a> {
    cfg: &'a ExperimentConfig,
    want: &'a [Observable],
    reference: Option<&'a Reference>,
    compare_stride: u64,
    frame: AngleFrame,
    e0: f64,
    i0: f64,
    mu0: f64,
    max: [f64; 5],
    angle: AngleTracker,
    ref_angle: AngleTracker,
    ref_alpha0: Option<f64>,
    samples: Option<Vec<(f64, State)>>,
}

const ENERGY: usize = 0;
const INVARIANT: usize = 1;
const MOMENT: usize = 2;
const POSITION: usize = 3;
const ALPHA: usize = 4;

fn bump(slot: &mut f64, v: f64) {
    if v.is_nan() {
        *slot = f64::INFINITY;
    } else if v > *slot {
        *slot = v;
    }
}

impl<'a> Tracker<'a> {
    fn new(cfg: &'a ExperimentConfig, want: &'a [Observable], reference: Option<&'a Reference>, compare_stride: u64) -> Result<Self> {
        let y0 = cfg.initial.state();
        let has = |o| want.contains(&o);
        let e0 = if has(Observable::EnergyError) { energy(&cfg.field, &cfg.particle, &y0)? } else { 0.0 };
        let i0 = if has(Observable::InvariantError) { invariant_i(&cfg.particle, &y0)? } else { 0.0 };
        let mu0 = if has(Observable::MagneticMoment) { magnetic_moment(&cfg.field, &cfg.particle, &y0)? } else { 0.0 };
        let dense = has(Observable::DriftVelocity) || has(Observable::Period);
        Ok(Self {
            cfg,
            want,
            reference,
            compare_stride,
            frame: AngleFrame::of(cfg),
            e0,
            i0,
            mu0,
            max: [0.0; 5],
            angle: AngleTracker::default(),
            ref_angle: AngleTracker::default(),
            ref_alpha0: None,
            samples: dense.then(Vec::new),
        })
    }

    fn reference_state(&self, k: u64, t: f64) -> Option<State> {
        match self.reference? {
            Reference::Analytic(ex) => Some(ex.state(t)),
            Reference::Sampled { samples, .. } => {
                if k % self.compare_stride != 0 {
                    return None;
                }
                samples.get((k / self.compare_stride) as usize).copied()
            }
        }
    }
}

impl Observer for Tracker<'_> {
    fn observe(&mut self, k: u64, t: f64, y: &State) -> magsplit::Result<()> {
        let (f, pp) = (&self.cfg.field, &self.cfg.particle);
        for o in self.want {
            match o {
                Observable::EnergyError => bump(&mut self.max[ENERGY], relative_error(energy(f, pp, y)?, self.e0)),
                Observable::InvariantError => bump(&mut self.max[INVARIANT], relative_error(invariant_i(pp, y)?, self.i0)),
                Observable::MagneticMoment => bump(&mut self.max[MOMENT], relative_error(magnetic_moment(f, pp, y)?, self.mu0)),
                _ => {}
            }
        }
        let (ax, ay) = self.frame.relative(t, y);
        let alpha = self.angle.push(ax, ay);
        if let Some(s) = self.samples.as_mut() {
            s.push((t, *y));
        }
        if let Some(r) = self.reference_state(k, t) {
            if self.want.contains(&Observable::PositionError) {
                bump(&mut self.max[POSITION], (y.q - r.q).norm());
            }
            let (rx, ry) = self.frame.relative(t, &r);
            let alpha_ref = self.ref_angle.push(rx, ry);
            let a0 = *self.ref_alpha0.get_or_insert(alpha_ref);
            if self.want.contains(&Observable::AlphaError) {
                bump(&mut self.max[ALPHA], alpha_error(alpha, alpha_ref, a0));
            }
        }
        Ok(())
    }
}

/// Outcome of a single (method, h) run.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub values: Vec<(Observable, f64)>,
    pub final_time: f64,
    pub diverged: Option<String>,
}

/// Runs one sweep point. `h` is in absolute time units.
pub fn run_point(
    cfg: &ExperimentConfig,
    units: &Units,
    reference: Option<&Reference>,
    entry: &MethodEntry,
    h: f64,
) -> Result<PointResult> {
    let stepper = Stepper::new(entry.stepper_config(h, &cfg.compositions)?)?;
    stepper.check_field(&cfg.field)?;
    let n_steps = steps_in(units.duration(&cfg.duration, h)?, h);
    let compare_stride = match reference.and_then(Reference::interval) {
        Some(every) => ((every / h).round() as u64).max(1),
        None => 1,
    };
    let want = &cfg.observables;
    let mut tracker = Tracker::new(cfg, want, reference, compare_stride)?;
    let outcome = run(&stepper, &cfg.field, &cfg.particle, &cfg.initial.state(), n_steps, 1, &mut [&mut tracker]);
    let final_time = n_steps as f64 * h;
    let diverged = match outcome {
        Ok(_) => None,
        Err(e @ (magsplit::Error::Config(_) | magsplit::Error::Unsupported(_))) => return Err(e.into()),
        // blow-up or leaving the field's domain is a result, not a failure
        Err(e) => Some(e.to_string()),
    };
    let mut values = Vec::new();
    let drift = match (&tracker.samples, &diverged) {
        (Some(s), None) => drift_and_period(s, &gradb2d_orbit(cfg)).ok(),
        _ => None,
    };
    let orbit = gradb2d_orbit(cfg);
    for &o in want {
        let v = if diverged.is_some() {
            f64::INFINITY
        } else {
            match o {
                Observable::EnergyError => tracker.max[ENERGY],
                Observable::InvariantError => tracker.max[INVARIANT],
                Observable::MagneticMoment => tracker.max[MOMENT],
                Observable::PositionError => tracker.max[POSITION],
                Observable::AlphaError => tracker.max[ALPHA],
                // left out when the orbit is sampled too coarsely to locate crossings
                Observable::DriftVelocity => match &drift {
                    Some(d) => relative_error(d.v_d_avg, orbit.drift_velocity()),
                    None => continue,
                },
                Observable::Period => match &drift {
                    Some(d) => relative_error(d.period_avg, orbit.period()),
                    None => continue,
                },
            }
        };
        values.push((o, v));
    }
    Ok(PointResult { values, final_time, diverged })
}

/// Runs every (method, h) of the configuration. Points run in parallel;
/// rows come out ordered by method list position, then by the sweep order of `h`.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let units = Units::of(cfg)?;
    let needs_ref = cfg.observables.iter().any(|o| o.needs_reference());
    let reference = if needs_ref { Some(make_reference(cfg)?) } else { None };
    let hs: Vec<f64> = cfg.sweep.h.iter().map(|&h| units.to_time(h, cfg.sweep.unit)).collect::<Result<_>>()?;
    let jobs: Vec<(&MethodEntry, f64)> = cfg.methods.iter().flat_map(|m| hs.iter().map(move |&h| (m, h))).collect();
    let results: Vec<Result<PointResult>> =
        jobs.par_iter().map(|(m, h)| run_point(cfg, &units, reference.as_ref(), m, *h)).collect();

    let mut rows = Vec::new();
    let mut diverged = Vec::new();
    for ((m, h), r) in jobs.iter().zip(results) {
        let r = r?;
        if let Some(why) = r.diverged {
            diverged.push((m.label(), *h, why));
        }
        for (o, v) in r.values {
            rows.push(SweepRow { method: m.label(), h: *h, fp_iters: m.fp_iters(), observable: o, t: r.final_time, value: v });
        }
    }
    let mut slopes = Vec::new();
    for m in &cfg.methods {
        let label = m.label();
        for &o in &cfg.observables {
            let pts: Vec<(f64, f64)> =
                rows.iter().filter(|r| r.method == label && r.observable == o).map(|r| (r.h, r.value)).collect();
            if pts.is_empty() {
                continue;
            }
            slopes.push(SlopeRow {
                method: label.clone(),
                fp_iters: m.fp_iters(),
                observable: o,
                all: loglog_fit(&pts),
                asymptotic: asymptotic_fit(&pts),
            });
        }
    }
    Ok(SweepResult { rows, slopes, reference: reference.map(|r| r.provenance()), diverged })
}

/// Exact solution of the ideal trap of `cfg`, when it has one.
pub fn exact_solution(cfg: &ExperimentConfig) -> Option<PenningExact> {
    match cfg.field {
        FieldModel::PenningIdeal { .. } => {
            PenningExact::new(&cfg.field.penning_params()?, &cfg.particle, &cfg.initial.state()).ok()
        }
        _ => None,
    }
}
