//! Long single-method runs reduced to per-window extrema.

use magsplit::analytic::PenningExact;
use magsplit::integrators::Stepper;
use magsplit::structure::{energy, magnetic_moment, relative_error, AngleTracker, WindowedExtrema};
use magsplit::{FieldModel, State};
use serde::Serialize;

use crate::config::{ExperimentConfig, MethodEntry, Observable, TimeUnit};
use crate::error::{HarnessError, Result};
use crate::experiments::{steps_in, Units, MAGNETRON_FIT_PERIODS};
use crate::fit::least_squares;
use crate::reference::integrate_samples;
use crate::sweep::{alpha_error, exact_solution, AngleFrame};

/// What to integrate; `h` is in absolute time.
#[derive(Debug, Clone, PartialEq)]
pub struct LongrunPlan {
    pub method: MethodEntry,
    pub h: f64,
    pub n_steps: u64,
    pub window: u64,
}

/// Command-line style overrides of the `longrun` section.
#[derive(Debug, Clone, Default)]
pub struct LongrunOverrides {
    pub method: Option<MethodEntry>,
    pub h: Option<(f64, TimeUnit)>,
    pub n_steps: Option<u64>,
    pub window: Option<u64>,
}

impl LongrunPlan {
    pub fn from_config(cfg: &ExperimentConfig, o: &LongrunOverrides) -> Result<Self> {
        let units = Units::of(cfg)?;
        let spec = cfg.longrun.as_ref();
        let method = o
            .method
            .clone()
            .or_else(|| spec.map(|s| s.method.clone()))
            .ok_or_else(|| HarnessError::Config("no longrun method configured".into()))?;
        let (h, unit) = o
            .h
            .or_else(|| spec.map(|s| (s.h, s.unit)))
            .ok_or_else(|| HarnessError::Config("no longrun step size configured".into()))?;
        let n_steps = o
            .n_steps
            .or_else(|| spec.map(|s| s.n_steps))
            .ok_or_else(|| HarnessError::Config("no longrun step count configured".into()))?;
        let window = o.window.unwrap_or(cfg.window);
        if window == 0 || n_steps == 0 || !(h > 0.0) {
            return Err(HarnessError::Config("longrun needs positive h, steps and window".into()));
        }
        Ok(Self { method, h: units.to_time(h, unit)?, n_steps, window })
    }
}

/// Reference angle as a function of time.
#[derive(Debug, Clone)]
pub enum PhaseModel {
    Exact(PenningExact),
    /// `α(t) ≈ a + ω t`, fitted to a short reference run.
    Linear { a: f64, omega: f64 },
}

/// Fits the mean rotation rate of a reference run spanning two slow periods.
pub fn phase_model(cfg: &ExperimentConfig, h: f64) -> Result<PhaseModel> {
    if let Some(ex) = exact_solution(cfg) {
        return Ok(PhaseModel::Exact(ex));
    }
    let units = Units::of(cfg)?;
    let span = match (&cfg.field, units.magnetron, units.orbit) {
        (_, Some(m), _) => MAGNETRON_FIT_PERIODS * m,
        (FieldModel::Gradb2d, _, Some(p)) => 10.0 * p,
        _ => 100.0 * units.cyclotron,
    };
    let n = steps_in(span, h) as usize;
    let samples = integrate_samples(&cfg.field, cfg, h, 2, n)?;
    let frame = AngleFrame::of(cfg);
    let mut tr = AngleTracker::default();
    let (ts, angles): (Vec<f64>, Vec<f64>) = samples
        .iter()
        .enumerate()
        .map(|(j, y)| {
            let t = j as f64 * h;
            let (x, yy) = frame.relative(t, y);
            (t, tr.push(x, yy))
        })
        .unzip();
    let (a, omega) = least_squares(&ts, &angles).ok_or_else(|| HarnessError::Numerical("phase fit failed".into()))?;
    Ok(PhaseModel::Linear { a, omega })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LongrunResult {
    pub method: String,
    pub h: f64,
    pub fp_iters: u32,
    pub window: u64,
    pub steps_done: u64,
    /// Step at which the state stopped being finite or left the domain.
    pub diverged_at: Option<u64>,
    /// Windowed max of the relative energy error.
    pub energy: Vec<f64>,
    pub mu_max: Vec<f64>,
    pub mu_min: Vec<f64>,
    /// Windowed max of `|μ − μ₀|`.
    pub mu_drift: Vec<f64>,
    pub alpha: Option<Vec<f64>>,
}

/// Growth summary of a windowed series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Trend {
    /// Last complete window over the first.
    pub ratio: f64,
    /// Slope of `log10 value` against `log10 window number`.
    pub slope: f64,
    pub non_finite: bool,
}

impl LongrunResult {
    /// Windows covering `window` steps each; a trailing partial window is dropped.
    pub fn complete<'a>(&self, series: &'a [f64]) -> &'a [f64] {
        let full = (self.steps_done / self.window) as usize;
        if self.diverged_at.is_some() {
            series
        } else {
            &series[..full.min(series.len())]
        }
    }

    pub fn trend(&self, series: &[f64]) -> Trend {
        let s = self.complete(series);
        let non_finite = s.iter().any(|v| !v.is_finite());
        if s.is_empty() {
            return Trend { ratio: f64::NAN, slope: f64::NAN, non_finite };
        }
        let ratio = s[s.len() - 1] / s[0];
        let (xs, ys): (Vec<f64>, Vec<f64>) = s
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite() && **v > 0.0)
            .map(|(i, v)| (((i + 1) as f64).log10(), v.log10()))
            .unzip();
        let slope = least_squares(&xs, &ys).map_or(f64::NAN, |(_, b)| b);
        Trend { ratio, slope, non_finite }
    }

    /// Grows when the series blows up, or rises both overall and in its fitted trend.
    pub fn grows(&self, series: &[f64]) -> bool {
        let t = self.trend(series);
        t.non_finite || (t.ratio > 2.0 && t.slope > 0.0)
    }

    /// Spread `max − min` of `μ` in the first window.
    pub fn first_mu_spread(&self) -> f64 {
        self.mu_max[0] - self.mu_min[0]
    }
}

/// Integrates `plan.n_steps` steps, recording window extrema. Blow-up ends
/// the run early and is reported through `diverged_at`.
pub fn run_longrun(cfg: &ExperimentConfig, plan: &LongrunPlan) -> Result<LongrunResult> {
    let stepper = Stepper::new(plan.method.stepper_config(plan.h, &cfg.compositions)?)?;
    stepper.check_field(&cfg.field)?;
    let (f, pp) = (&cfg.field, &cfg.particle);
    let y0 = cfg.initial.state();
    let e0 = energy(f, pp, &y0)?;
    let mu0 = magnetic_moment(f, pp, &y0)?;
    let phase = if cfg.observables.contains(&Observable::AlphaError) { Some(phase_model(cfg, plan.h)?) } else { None };
    let frame = AngleFrame::of(cfg);

    let mut w_energy = WindowedExtrema::new(plan.window);
    let mut w_mu = WindowedExtrema::new(plan.window);
    let mut w_drift = WindowedExtrema::new(plan.window);
    let mut w_alpha = WindowedExtrema::new(plan.window);
    let mut angle = AngleTracker::default();
    let mut ref_angle = AngleTracker::default();
    let alpha_ref0 = match &phase {
        Some(PhaseModel::Exact(ex)) => {
            let (x, y) = frame.relative(0.0, &ex.state(0.0));
            ref_angle.push(x, y)
        }
        Some(PhaseModel::Linear { a, .. }) => *a,
        None => 0.0,
    };
    if phase.is_some() {
        let (x, y) = frame.relative(0.0, &y0);
        angle.push(x, y);
    }

    let mut y = y0;
    let mut diverged_at = None;
    let mut steps_done = 0;
    for k in 1..=plan.n_steps {
        let t = k as f64 * plan.h;
        let next = stepper.step(f, pp, &y).ok().filter(State::is_finite);
        let sample = next.and_then(|s| Some((s, energy(f, pp, &s).ok()?, magnetic_moment(f, pp, &s).ok()?)));
        let Some((s, e, mu)) = sample else {
            diverged_at = Some(k);
            for w in [&mut w_energy, &mut w_mu, &mut w_drift, &mut w_alpha] {
                w.push(f64::NAN);
            }
            steps_done = k;
            break;
        };
        y = s;
        w_energy.push(relative_error(e, e0));
        w_mu.push(mu);
        w_drift.push((mu - mu0).abs());
        if let Some(p) = &phase {
            let (x, yy) = frame.relative(t, &y);
            let alpha = angle.push(x, yy);
            let alpha_ref = match p {
                PhaseModel::Exact(ex) => {
                    let (rx, ry) = frame.relative(t, &ex.state(t));
                    ref_angle.push(rx, ry)
                }
                PhaseModel::Linear { a, omega } => a + omega * t,
            };
            w_alpha.push(alpha_error(alpha, alpha_ref, alpha_ref0));
        }
        steps_done = k;
    }
    for w in [&mut w_energy, &mut w_mu, &mut w_drift, &mut w_alpha] {
        w.finish();
    }
    Ok(LongrunResult {
        method: plan.method.label(),
        h: plan.h,
        fp_iters: plan.method.fp_iters(),
        window: plan.window,
        steps_done,
        diverged_at,
        energy: w_energy.maxima,
        mu_max: w_mu.maxima,
        mu_min: w_mu.minima,
        mu_drift: w_drift.maxima,
        alpha: phase.map(|_| w_alpha.maxima),
    })
}
