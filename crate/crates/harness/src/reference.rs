//! Reference trajectories for position and angle errors.
//!
//! The ideal trap has a closed-form solution. Every other setup is
//! integrated with a sixth-order full-step composition of the implicit
//! midpoint scheme, and the run is repeated at half the step to confirm
//! that the samples have converged.

use magsplit::analytic::PenningExact;
use magsplit::fields::{eval_force, eval_omega};
use magsplit::integrators::Composition;
use magsplit::smallmat::phi1_mat;
use magsplit::{Field, FieldModel, ParticleParams, State, Vec3};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::experiments::{steps_in, Units};

/// Fixed-point sweeps of the reference integrator's mid-step.
pub const REFERENCE_ITERS: u32 = 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    Numerical {
        method: String,
        h_ref: f64,
        divisor: f64,
        /// Max-norm change of the samples when `h_ref` is halved.
        self_check: Option<f64>,
        tolerance: f64,
    },
}

#[derive(Debug, Clone)]
pub enum Reference {
    Analytic(PenningExact),
    /// `samples[j]` is the state at `t = j · interval`.
    Sampled { interval: f64, samples: Vec<State>, provenance: Provenance },
}

impl Reference {
    pub fn provenance(&self) -> Provenance {
        match self {
            Reference::Analytic(_) => Provenance::Analytic,
            Reference::Sampled { provenance, .. } => provenance.clone(),
        }
    }

    /// Spacing of comparison points; `None` when any time may be evaluated.
    pub fn interval(&self) -> Option<f64> {
        match self {
            Reference::Analytic(_) => None,
            Reference::Sampled { interval, .. } => Some(*interval),
        }
    }
}

/// Absolute spacing of comparisons against a sampled reference: the
/// configured `compare_every` or the largest sweep step.
pub fn compare_interval(cfg: &ExperimentConfig, units: &Units) -> Result<f64> {
    let hmax = cfg.sweep.h.iter().copied().fold(0.0, f64::max);
    let every = units.to_time(cfg.sweep.compare_every.unwrap_or(hmax), cfg.sweep.unit)?;
    for &h in &cfg.sweep.h {
        let h = units.to_time(h, cfg.sweep.unit)?;
        let k = (every / h).round();
        if k < 1.0 || ((k * h - every) / every).abs() > 1e-9 {
            return Err(HarnessError::Config(format!("step {h} does not divide the comparison interval {every}")));
        }
    }
    Ok(every)
}

/// Longest sweep run, in time units.
pub fn sweep_horizon(cfg: &ExperimentConfig, units: &Units) -> Result<f64> {
    let mut t: f64 = 0.0;
    for &h in &cfg.sweep.h {
        let h = units.to_time(h, cfg.sweep.unit)?;
        t = t.max(steps_in(units.duration(&cfg.duration, h)?, h) as f64 * h);
    }
    Ok(t)
}

/// State kept as the unevaluated sum `hi + lo`. Every update is an
/// increment added with Kahan summation, so round-off stays near the size
/// of the increments instead of the size of the state.
#[derive(Debug, Clone, Copy)]
pub struct CompensatedState {
    hi: State,
    lo: State,
}

fn kahan(hi: &mut Vec3, lo: &mut Vec3, d: Vec3) {
    let y = d + *lo;
    let t = *hi + y;
    *lo = y - (t - *hi);
    *hi = t;
}

impl CompensatedState {
    pub fn new(y: State) -> Self {
        Self { hi: y, lo: State::new(Vec3::zeros(), Vec3::zeros()) }
    }

    pub fn state(&self) -> State {
        State { q: self.hi.q + self.lo.q, p: self.hi.p + self.lo.p }
    }

    fn kick<F: Field + ?Sized>(&mut self, tau: f64, field: &F, pp: &ParticleParams) -> Result<()> {
        let d = eval_force(field, pp, &self.hi.q)? * tau;
        kahan(&mut self.hi.p, &mut self.lo.p, d);
        Ok(())
    }

    /// One implicit-midpoint helix step with `iters` fixed-point sweeps,
    /// using `exp(hΩ) − I = hΩ φ₁(hΩ)` to form the momentum increment.
    fn helix<F: Field + ?Sized>(&mut self, h: f64, iters: u32, field: &F, pp: &ParticleParams) -> Result<()> {
        let (q0, p0) = (self.hi.q, self.hi.p);
        let (mut dq, mut dp) = (Vec3::zeros(), Vec3::zeros());
        for _ in 0..iters {
            let omega = eval_omega(field, pp, &(q0 + dq * 0.5))?;
            let u = phi1_mat(h, &omega) * p0;
            dq = u * (h / pp.m);
            dp = u.cross(&omega) * h;
        }
        kahan(&mut self.hi.q, &mut self.lo.q, dq);
        kahan(&mut self.hi.p, &mut self.lo.p, dp);
        Ok(())
    }

    /// The full-step composition `∏ ImplMidpoint(γᵢ h)`.
    pub fn step<F: Field + ?Sized>(&mut self, table: &[f64], h: f64, iters: u32, field: &F, pp: &ParticleParams) -> Result<()> {
        for &g in table {
            let hs = g * h;
            self.kick(0.5 * hs, field, pp)?;
            self.helix(hs, iters, field, pp)?;
            self.kick(0.5 * hs, field, pp)?;
        }
        Ok(())
    }
}

/// States at `t = j · interval` for `j = 0..=n`, integrated with steps of
/// `interval / steps_per_interval`.
pub fn integrate_samples(
    field: &FieldModel,
    cfg: &ExperimentConfig,
    interval: f64,
    steps_per_interval: u64,
    n: usize,
) -> Result<Vec<State>> {
    let table = Composition::triple_jump_sixth().0;
    let h = interval / steps_per_interval as f64;
    let mut y = CompensatedState::new(cfg.initial.state());
    let mut out = Vec::with_capacity(n + 1);
    out.push(y.state());
    for j in 1..=n {
        for _ in 0..steps_per_interval {
            y.step(&table, h, REFERENCE_ITERS, field, &cfg.particle)?;
        }
        let s = y.state();
        if !s.is_finite() {
            return Err(HarnessError::Numerical(format!("reference trajectory is not finite at t = {}", j as f64 * interval)));
        }
        out.push(s);
    }
    Ok(out)
}

/// Builds the reference used by the sweep of `cfg`.
pub fn make_reference(cfg: &ExperimentConfig) -> Result<Reference> {
    let units = Units::of(cfg)?;
    if cfg.reference.analytic {
        if let (FieldModel::PenningIdeal { .. }, Some(tp)) = (&cfg.field, cfg.field.penning_params()) {
            return Ok(Reference::Analytic(PenningExact::new(&tp, &cfg.particle, &cfg.initial.state())?));
        }
    }
    let interval = compare_interval(cfg, &units)?;
    let horizon = sweep_horizon(cfg, &units)?;
    let n = (horizon / interval - 1e-9).ceil().max(1.0) as usize;
    let hmin = cfg.sweep.h.iter().copied().fold(f64::INFINITY, f64::min);
    let nominal = units.to_time(hmin, cfg.sweep.unit)? / cfg.reference.divisor;
    let per = (interval / nominal - 1e-9).ceil().max(1.0) as u64;
    let samples = integrate_samples(&cfg.field, cfg, interval, per, n)?;
    let self_check = if cfg.reference.self_check {
        let fine = integrate_samples(&cfg.field, cfg, interval, 2 * per, n)?;
        let dev = samples.iter().zip(&fine).map(|(a, b)| a.max_abs_diff(b)).fold(0.0, f64::max);
        if !(dev < cfg.reference.tolerance) {
            return Err(HarnessError::Reference(format!(
                "halving h_ref = {:e} changed the samples by {dev:e} (tolerance {:e})",
                interval / per as f64,
                cfg.reference.tolerance
            )));
        }
        Some(dev)
    } else {
        None
    };
    Ok(Reference::Sampled {
        interval,
        samples,
        provenance: Provenance::Numerical {
            method: format!("sixth-order triple jump of ImplMidpoint({REFERENCE_ITERS})"),
            h_ref: interval / per as f64,
            divisor: cfg.reference.divisor,
            self_check,
            tolerance: cfg.reference.tolerance,
        },
    })
}
