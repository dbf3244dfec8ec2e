//! Observables and numerical structure-preservation probes.

use nalgebra::{Matrix6, Vector6};

use crate::error::{Error, Result};
use crate::fields::{eval_omega, eval_potential, Field, ParticleParams};
use crate::flows::State;
use crate::integrators::Observer;
use crate::smallmat::{skew, Vec3};

pub type Mat6 = Matrix6<f64>;

/// Total energy `‖p‖²/2m + c Φ(q)`.
pub fn energy<F: Field + ?Sized>(field: &F, pp: &ParticleParams, y: &State) -> Result<f64> {
    Ok(0.5 * y.p.norm_squared() / pp.m + pp.c * eval_potential(field, &y.q)?)
}

/// Canonical `y`-momentum `m q̇_y − c/q_x` of the `b_z = 1/q_x²` field; with
/// `c = −1` this is `p_y + 1/q_x`.
pub fn invariant_i(pp: &ParticleParams, y: &State) -> Result<f64> {
    if y.q.x == 0.0 {
        return Err(Error::OutOfDomain { field: "gradb2d".into(), q: [y.q.x, y.q.y, y.q.z] });
    }
    Ok(y.p.y - pp.c / y.q.x)
}

fn perpendicular_rate<F: Field + ?Sized>(field: &F, pp: &ParticleParams, y: &State) -> Result<(Vec3, Vec3)> {
    let b = field.magnetic(&y.q)?;
    if b.norm() == 0.0 {
        return Err(Error::OutOfDomain { field: field.name().into(), q: [y.q.x, y.q.y, y.q.z] });
    }
    let omega = eval_omega(field, pp, &y.q)?;
    Ok((b, skew(&omega) * y.p))
}

/// Magnetic moment `(m/2c²) ‖Ω(q)p‖² / ‖b(q)‖³`.
pub fn magnetic_moment<F: Field + ?Sized>(field: &F, pp: &ParticleParams, y: &State) -> Result<f64> {
    let (b, om_p) = perpendicular_rate(field, pp, y)?;
    Ok(pp.m / (2.0 * pp.c * pp.c) * om_p.norm_squared() / b.norm().powi(3))
}

/// The same moment written through the gyrofrequency, `(|c|/2m²) ‖Ω(q)p‖² / ω_c³`.
pub fn magnetic_moment_gyro<F: Field + ?Sized>(field: &F, pp: &ParticleParams, y: &State) -> Result<f64> {
    let (b, om_p) = perpendicular_rate(field, pp, y)?;
    let wc = pp.ratio().abs() * b.norm();
    Ok(pp.c.abs() / (2.0 * pp.m * pp.m) * om_p.norm_squared() / wc.powi(3))
}

/// Structure matrix `B(y) = [[0, I], [−I, mΩ(q)]]`.
pub struct PoissonTensor<'a, F: Field + ?Sized> {
    pub field: &'a F,
    pub pp: ParticleParams,
}

impl<'a, F: Field + ?Sized> PoissonTensor<'a, F> {
    pub fn new(field: &'a F, pp: ParticleParams) -> Self {
        Self { field, pp }
    }

    pub fn eval(&self, y: &State) -> Result<Mat6> {
        let omega = eval_omega(self.field, &self.pp, &y.q)?;
        let block = skew(&omega) * self.pp.m;
        let mut b = Mat6::zeros();
        for i in 0..3 {
            b[(i, i + 3)] = 1.0;
            b[(i + 3, i)] = -1.0;
            for j in 0..3 {
                b[(i + 3, j + 3)] = block[(i, j)];
            }
        }
        Ok(b)
    }

    /// Largest violation of the Jacobi identity, with `∂B/∂q` by central differences.
    pub fn jacobi_residual(&self, y: &State, delta: f64) -> Result<f64> {
        let b = self.eval(y)?;
        let mut db = [Mat6::zeros(); 6];
        for (l, d) in db.iter_mut().enumerate().take(3) {
            let mut yp = *y;
            let mut ym = *y;
            yp.q[l] += delta;
            ym.q[l] -= delta;
            *d = (self.eval(&yp)? - self.eval(&ym)?) / (2.0 * delta);
        }
        let mut worst = 0.0_f64;
        for i in 0..6 {
            for j in 0..6 {
                for k in 0..6 {
                    let s: f64 = (0..6)
                        .map(|l| db[l][(i, j)] * b[(l, k)] + db[l][(j, k)] * b[(l, i)] + db[l][(k, i)] * b[(l, j)])
                        .sum();
                    worst = worst.max(s.abs());
                }
            }
        }
        Ok(worst)
    }
}

/// Default relative finite-difference step, `ε^{1/3}`.
pub fn fd_step() -> f64 {
    f64::EPSILON.cbrt()
}

/// Central-difference Jacobian of a one-step map, with per-component steps
/// `δ (1 + |yᵢ|)`.
pub fn jacobian_fd<S>(step: S, y: &State, delta: f64) -> Result<Mat6>
where
    S: Fn(&State) -> Result<State>,
{
    if !(delta > 0.0) {
        return Err(Error::Config(format!("finite-difference step must be positive, got {delta}")));
    }
    let y0 = y.to_vector();
    let mut jac = Mat6::zeros();
    for j in 0..6 {
        let dj = delta * (1.0 + y0[j].abs());
        let mut yp = y0;
        let mut ym = y0;
        yp[j] += dj;
        ym[j] -= dj;
        let fp = step(&State::from_vector(&yp))?.to_vector();
        let fm = step(&State::from_vector(&ym))?.to_vector();
        let col: Vector6<f64> = (fp - fm) / (2.0 * dj);
        jac.set_column(j, &col);
    }
    Ok(jac)
}

/// `‖y − step_{−h}(step_h(y))‖_∞`.
pub fn check_time_symmetry<S>(step: S, y: &State, h: f64) -> Result<f64>
where
    S: Fn(f64, &State) -> Result<State>,
{
    let forward = step(h, y)?;
    let back = step(-h, &forward)?;
    Ok(y.max_abs_diff(&back))
}

/// `|det J − 1|` for the finite-difference Jacobian.
pub fn check_volume<S>(step: S, y: &State) -> Result<f64>
where
    S: Fn(&State) -> Result<State>,
{
    let jac = jacobian_fd(step, y, fd_step())?;
    Ok((jac.determinant() - 1.0).abs())
}

/// `‖J B(y₀) Jᵀ − B(y₁)‖_∞` (largest entry).
pub fn check_poisson<F, S>(step: S, tensor: &PoissonTensor<'_, F>, y: &State) -> Result<f64>
where
    F: Field + ?Sized,
    S: Fn(&State) -> Result<State>,
{
    let y1 = step(y)?;
    let jac = jacobian_fd(&step, y, fd_step())?;
    let lhs = jac * tensor.eval(y)? * jac.transpose();
    Ok((lhs - tensor.eval(&y1)?).amax())
}

/// Analytic ∇B-drift quantities of the `b_z = 1/q_x²` orbit with initial
/// speed `v` (charge −1, unit mass, starting at `x = 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradB2dOrbit {
    pub v: f64,
}

impl GradB2dOrbit {
    pub fn drift_velocity(&self) -> f64 {
        self.v * self.v / (1.0 + self.v)
    }

    pub fn x_mid(&self) -> f64 {
        (1.0 + self.v) / (1.0 + 2.0 * self.v)
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI * (1.0 + self.v) / (1.0 + 2.0 * self.v).powf(1.5)
    }

    /// Semi-axes of the drift-reduced ellipse (x, y).
    pub fn semi_axes(&self) -> (f64, f64) {
        let v = self.v;
        (v / (1.0 + 2.0 * v), v / ((1.0 + v) + (1.0 + 2.0 * v).sqrt()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftAnalysis {
    pub v_d_avg: f64,
    pub period_avg: f64,
    pub n_periods: usize,
    /// Unwrapped angle about the drifting orbit centre.
    pub alpha: Vec<(f64, f64)>,
}

/// Average drift velocity and orbit period from upward crossings of
/// `x = x_mid`, linearly interpolated between samples.
pub fn drift_and_period(samples: &[(f64, State)], orbit: &GradB2dOrbit) -> Result<DriftAnalysis> {
    let x_mid = orbit.x_mid();
    let mut crossings: Vec<(f64, f64, usize)> = Vec::new();
    for (k, w) in samples.windows(2).enumerate() {
        let (t0, a) = (w[0].0, &w[0].1);
        let (t1, b) = (w[1].0, &w[1].1);
        let s0 = a.q.x - x_mid;
        let s1 = b.q.x - x_mid;
        if s0 < 0.0 && s1 >= 0.0 {
            let frac = -s0 / (s1 - s0);
            crossings.push((t0 + frac * (t1 - t0), a.q.y + frac * (b.q.y - a.q.y), k));
        }
    }
    if crossings.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least two upward crossings of x = {x_mid}, found {}",
            crossings.len()
        )));
    }
    let (ta, ya, ka) = crossings[0];
    let (tb, yb, kb) = crossings[crossings.len() - 1];
    let n_periods = crossings.len() - 1;
    let per_period = (kb - ka) as f64 / n_periods as f64;
    if per_period.round() < 50.0 {
        return Err(Error::InsufficientData(format!(
            "orbit sampled with {per_period:.1} points per period, need at least 50"
        )));
    }
    let v_d_avg = (yb - ya) / (tb - ta);
    let period_avg = (tb - ta) / n_periods as f64;
    let centre = |t: f64| (x_mid, orbit.drift_velocity() * t);
    let alpha = unwrapped_angles(samples.iter().map(|(t, y)| {
        let (cx, cy) = centre(*t);
        (*t, y.q.x - cx, y.q.y - cy)
    }));
    Ok(DriftAnalysis { v_d_avg, period_avg, n_periods, alpha })
}

/// Continuous polar angle of a sequence of in-plane points.
pub fn unwrapped_angles<I>(points: I) -> Vec<(f64, f64)>
where
    I: IntoIterator<Item = (f64, f64, f64)>,
{
    let mut tracker = AngleTracker::default();
    points.into_iter().map(|(t, x, y)| (t, tracker.push(x, y))).collect()
}

/// Streaming phase unwrapping of `atan2(y, x)`.
#[derive(Debug, Clone, Default)]
pub struct AngleTracker {
    last_raw: Option<f64>,
    turns: f64,
}

impl AngleTracker {
    pub fn push(&mut self, x: f64, y: f64) -> f64 {
        use std::f64::consts::PI;
        let raw = y.atan2(x);
        if let Some(prev) = self.last_raw {
            let d = raw - prev;
            if d > PI {
                self.turns -= 1.0;
            } else if d < -PI {
                self.turns += 1.0;
            }
        }
        self.last_raw = Some(raw);
        raw + 2.0 * PI * self.turns
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    Raw,
    WindowedMax,
}

/// Named `(t, value)` series.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSeries {
    pub name: String,
    pub reduction: Reduction,
    pub points: Vec<(f64, f64)>,
}

/// Maxima over contiguous windows of `window` values; NaN counts as +∞.
pub fn windowed_max(values: &[f64], window: usize) -> Vec<f64> {
    assert!(window > 0, "window must be positive");
    values
        .chunks(window)
        .map(|c| c.iter().fold(f64::NEG_INFINITY, |m, &v| if v.is_nan() { f64::INFINITY } else { m.max(v) }))
        .collect()
}

/// Streaming form of [`windowed_max`] that also tracks the window minimum.
#[derive(Debug, Clone)]
pub struct WindowedExtrema {
    window: u64,
    filled: u64,
    cur_max: f64,
    cur_min: f64,
    pub maxima: Vec<f64>,
    pub minima: Vec<f64>,
}

impl WindowedExtrema {
    pub fn new(window: u64) -> Self {
        assert!(window > 0, "window must be positive");
        Self {
            window,
            filled: 0,
            cur_max: f64::NEG_INFINITY,
            cur_min: f64::INFINITY,
            maxima: Vec::new(),
            minima: Vec::new(),
        }
    }

    pub fn push(&mut self, v: f64) {
        if v.is_nan() {
            self.cur_max = f64::INFINITY;
            self.cur_min = f64::NEG_INFINITY;
        } else {
            self.cur_max = self.cur_max.max(v);
            self.cur_min = self.cur_min.min(v);
        }
        self.filled += 1;
        if self.filled == self.window {
            self.flush();
        }
    }

    fn flush(&mut self) {
        self.maxima.push(self.cur_max);
        self.minima.push(self.cur_min);
        self.filled = 0;
        self.cur_max = f64::NEG_INFINITY;
        self.cur_min = f64::INFINITY;
    }

    /// Closes a trailing partial window.
    pub fn finish(&mut self) {
        if self.filled > 0 {
            self.flush();
        }
    }
}

/// `|H(t) − H(0)| / |H(0)|`, falling back to the absolute error when `H(0) = 0`.
pub fn relative_error(value: f64, initial: f64) -> f64 {
    let scale = if initial == 0.0 { 1.0 } else { initial.abs() };
    (value - initial).abs() / scale
}

/// Tracks the running maximum of some scalar function of the state.
pub struct MaxObserver<G> {
    g: G,
    pub max: f64,
    pub last: f64,
}

impl<G: FnMut(f64, &State) -> Result<f64>> MaxObserver<G> {
    pub fn new(g: G) -> Self {
        Self { g, max: 0.0, last: 0.0 }
    }
}

impl<G: FnMut(f64, &State) -> Result<f64>> Observer for MaxObserver<G> {
    fn observe(&mut self, _step: u64, t: f64, y: &State) -> Result<()> {
        let v = (self.g)(t, y)?;
        self.last = v;
        if v.is_nan() || v > self.max {
            self.max = if v.is_nan() { f64::INFINITY } else { v };
        }
        Ok(())
    }
}

/// Relative energy error tracker.
pub fn energy_error_observer<'a, F: Field + ?Sized>(
    field: &'a F,
    pp: ParticleParams,
    y0: &State,
) -> Result<MaxObserver<impl FnMut(f64, &State) -> Result<f64> + 'a>> {
    let h0 = energy(field, &pp, y0)?;
    Ok(MaxObserver::new(move |_, y: &State| Ok(relative_error(energy(field, &pp, y)?, h0))))
}
