//! One-step methods built from the exact subflows, and the trajectory driver.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{eval_force, eval_omega, Field, ParticleParams};
use crate::flows::{flow_e, flow_eb, flow_t, flow_tb_frozen, State};
use crate::smallmat::{cayley, rodrigues_exp, PhiKernels, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MethodId {
    BorisCayley,
    BorisExp,
    ChinA,
    ChinB,
    Scovel,
    ImplStrang,
    ImplMidpoint,
    Composed,
    SpreiterWalter,
    VelocityVerlet,
}

impl MethodId {
    pub const ALL: [MethodId; 10] = [
        MethodId::BorisCayley,
        MethodId::BorisExp,
        MethodId::ChinA,
        MethodId::ChinB,
        MethodId::Scovel,
        MethodId::ImplStrang,
        MethodId::ImplMidpoint,
        MethodId::Composed,
        MethodId::SpreiterWalter,
        MethodId::VelocityVerlet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodId::BorisCayley => "BorisCayley",
            MethodId::BorisExp => "BorisExp",
            MethodId::ChinA => "ChinA",
            MethodId::ChinB => "ChinB",
            MethodId::Scovel => "Scovel",
            MethodId::ImplStrang => "ImplStrang",
            MethodId::ImplMidpoint => "ImplMidpoint",
            MethodId::Composed => "Composed",
            MethodId::SpreiterWalter => "SpreiterWalter",
            MethodId::VelocityVerlet => "VelocityVerlet",
        }
    }

    /// Methods whose mid-step is solved by fixed-point iteration.
    pub fn is_implicit(self) -> bool {
        matches!(self, MethodId::ImplStrang | MethodId::ImplMidpoint | MethodId::Composed)
    }

    pub fn default_fp_iters(self) -> u32 {
        match self {
            MethodId::ImplStrang => 5,
            MethodId::ImplMidpoint => 6,
            MethodId::Composed => 16,
            _ => 0,
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodId {
    type Err = Error;

    /// Case-insensitive; underscores and hyphens are ignored (`impl_midpoint`).
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| *c != '_' && *c != '-').collect();
        MethodId::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(&key))
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// Coefficients `γᵢ` of a symmetric composition `∏ mid(γᵢ h)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Composition(pub Vec<f64>);

impl Composition {
    /// Fourth-order triple jump `(γ, 1 − 2γ, γ)` with `γ = 1/(2 − 2^{1/3})`.
    pub fn triple_jump() -> Self {
        let g = 1.0 / (2.0 - 2f64.powf(1.0 / 3.0));
        Composition(vec![g, 1.0 - 2.0 * g, g])
    }

    /// Sixth-order composition: the triple jump applied to a fourth-order base.
    pub fn triple_jump_sixth() -> Self {
        let g = 1.0 / (2.0 - 2f64.powf(1.0 / 5.0));
        let base = Self::triple_jump().0;
        let outer = [g, 1.0 - 2.0 * g, g];
        Composition(outer.iter().flat_map(|o| base.iter().map(move |b| o * b)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.0;
        if c.is_empty() {
            return Err(Error::Config("composition table is empty".into()));
        }
        if c.iter().any(|g| !g.is_finite()) {
            return Err(Error::Config("composition table has non-finite entries".into()));
        }
        let sum: f64 = c.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("composition coefficients sum to {sum}, expected 1")));
        }
        let n = c.len();
        for i in 0..n / 2 {
            if (c[i] - c[n - 1 - i]).abs() > 1e-14 * (1.0 + c[i].abs()) {
                return Err(Error::Config("composition table is not palindromic".into()));
            }
        }
        Ok(())
    }
}

fn default_composition() -> Composition {
    Composition(Vec::new())
}

/// Method choice plus its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperConfig {
    pub method: MethodId,
    pub h: f64,
    #[serde(default)]
    pub fp_iters: Option<u32>,
    #[serde(default = "default_composition", skip_serializing_if = "Composition::is_empty")]
    pub composition: Composition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<MethodId>,
}

impl StepperConfig {
    pub fn new(method: MethodId, h: f64) -> Self {
        Self { method, h, fp_iters: None, composition: default_composition(), inner: None }
    }

    pub fn with_fp_iters(mut self, k: u32) -> Self {
        self.fp_iters = Some(k);
        self
    }

    pub fn with_composition(mut self, composition: Composition, inner: MethodId) -> Self {
        self.composition = composition;
        self.inner = Some(inner);
        self
    }

    pub fn fp_iters(&self) -> u32 {
        self.fp_iters.unwrap_or_else(|| self.method.default_fp_iters())
    }
}

/// Which implicit mid-step approximates `φ_h^{T+B}` for nonuniform fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MidStep {
    Strang,
    Midpoint,
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    BorisCayley,
    BorisExp,
    ChinA,
    ChinB,
    Scovel,
    Implicit { mid: MidStep, iters: u32 },
    Composed { mid: MidStep, iters: u32, coefficients: Vec<f64> },
    SpreiterWalter,
    VelocityVerlet,
}

/// A validated one-step map `y₀ ↦ y₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stepper {
    config: StepperConfig,
    kind: Kind,
}

impl Stepper {
    pub fn new(config: StepperConfig) -> Result<Self> {
        if !(config.h.is_finite() && config.h > 0.0) {
            return Err(Error::Config(format!("step size must be positive, got {}", config.h)));
        }
        let iters = config.fp_iters();
        let kind = match config.method {
            MethodId::BorisCayley => Kind::BorisCayley,
            MethodId::BorisExp => Kind::BorisExp,
            MethodId::ChinA => Kind::ChinA,
            MethodId::ChinB => Kind::ChinB,
            MethodId::Scovel => Kind::Scovel,
            MethodId::SpreiterWalter => Kind::SpreiterWalter,
            MethodId::VelocityVerlet => Kind::VelocityVerlet,
            MethodId::ImplStrang | MethodId::ImplMidpoint => {
                if iters == 0 {
                    return Err(Error::Config(format!("{} needs fp_iters ≥ 1", config.method)));
                }
                let mid = if config.method == MethodId::ImplStrang { MidStep::Strang } else { MidStep::Midpoint };
                Kind::Implicit { mid, iters }
            }
            MethodId::Composed => {
                if iters == 0 {
                    return Err(Error::Config("Composed needs fp_iters ≥ 1".into()));
                }
                let mid = match config.inner.unwrap_or(MethodId::ImplMidpoint) {
                    MethodId::ImplStrang => MidStep::Strang,
                    MethodId::ImplMidpoint => MidStep::Midpoint,
                    other => {
                        return Err(Error::Config(format!(
                            "Composed wraps ImplStrang or ImplMidpoint, not {other}"
                        )))
                    }
                };
                let table = if config.composition.is_empty() {
                    Composition::triple_jump()
                } else {
                    config.composition.clone()
                };
                table.validate()?;
                Kind::Composed { mid, iters, coefficients: table.0 }
            }
        };
        Ok(Self { config, kind })
    }

    pub fn config(&self) -> &StepperConfig {
        &self.config
    }

    pub fn method(&self) -> MethodId {
        self.config.method
    }

    pub fn h(&self) -> f64 {
        self.config.h
    }

    /// Rejects field models a method cannot handle.
    pub fn check_field<F: Field + ?Sized>(&self, field: &F) -> Result<()> {
        if self.kind == Kind::SpreiterWalter && !field.uniform_b() {
            return Err(Error::Config(format!(
                "SpreiterWalter requires a homogeneous magnetic field, `{}` is not",
                field.name()
            )));
        }
        Ok(())
    }

    /// False when the method is only approximately symmetric on this field
    /// (Scovel's frozen mid-step on a nonuniform field).
    pub fn exact_on<F: Field + ?Sized>(&self, field: &F) -> bool {
        !(self.kind == Kind::Scovel && !field.uniform_b())
    }

    pub fn step<F: Field + ?Sized>(&self, field: &F, pp: &ParticleParams, y: &State) -> Result<State> {
        self.step_h(self.config.h, field, pp, y)
    }

    /// One step of length `h` (any sign), with all other parameters as configured.
    pub fn step_h<F: Field + ?Sized>(&self, h: f64, field: &F, pp: &ParticleParams, y: &State) -> Result<State> {
        match &self.kind {
            Kind::BorisCayley => boris_cayley_step(h, field, pp, y),
            Kind::BorisExp => boris_exp_step(h, field, pp, y),
            Kind::ChinA => chin_a_step(h, field, pp, y),
            Kind::ChinB => chin_b_step(h, field, pp, y),
            Kind::Scovel => scovel_step(h, field, pp, y),
            Kind::Implicit { mid: MidStep::Strang, iters } => impl_strang_step(h, *iters, field, pp, y),
            Kind::Implicit { mid: MidStep::Midpoint, iters } => impl_midpoint_step(h, *iters, field, pp, y),
            Kind::Composed { mid, iters, coefficients } => {
                composed_step(h, *mid == MidStep::Strang, *iters, coefficients, field, pp, y)
            }
            Kind::SpreiterWalter => {
                self.check_field(field)?;
                spreiter_walter_step(h, field, pp, y)
            }
            Kind::VelocityVerlet => velocity_verlet_step(h, field, pp, y),
        }
    }
}

fn boris_step_with<F, R>(h: f64, field: &F, pp: &ParticleParams, y: &State, rotation: R) -> Result<State>
where
    F: Field + ?Sized,
    R: Fn(f64, &Vec3) -> crate::smallmat::Mat3,
{
    let half = flow_t(0.5 * h, pp.m, y);
    let (e, b) = field.fields(&half.q)?;
    let kick = e * (pp.c * 0.5 * h);
    let omega = b * pp.ratio();
    let p_plus = half.p + kick;
    let p_rot = rotation(h, &omega) * p_plus;
    let p1 = p_rot + kick;
    Ok(flow_t(0.5 * h, pp.m, &State { q: half.q, p: p1 }))
}

/// Boris–Buneman step `T(h/2) E(h/2) Ĉ(h) E(h/2) T(h/2)` with the Cayley rotation
/// evaluated at the half-drift position.
pub fn boris_cayley_step<F: Field + ?Sized>(h: f64, field: &F, pp: &ParticleParams, y: &State) -> Result<State> {
    boris_step_with(h, field, pp, y, |h, w| cayley(0.5 * h, w))
}

/// Boris step with the exact rotation `exp(hΩ)` in place of the Cayley transform.
pub fn boris_exp_step<F: Field + ?Sized>(h: f64, field: &F, pp: &ParticleParams, y: &State) -> Result<State> {
    boris_step_with(h, field, pp, y, rodrigues_exp)
}

/// Cross-product form of the Boris rotation.
pub fn boris_crossproduct_oracle(h: f64, omega_half: &Vec3, p_plus: &Vec3) -> Vec3 {
    let t = omega_half * (0.5 * h);
    let s = t * (2.0 / (1.0 + t.norm_squared()));
    let p_prime = p_plus + p_plus.cross(&t);
    p_plus + p_prime.cross(&s)
}

/// Chin-a: `(E+B)(h/2) T(h) (E+B)(h/2)`.
pub fn chin_a_step<F: Field + ?Sized>(h: f64, field: &F, pp: &ParticleParams, y: &State) -> Result<State> {
    let y = flow_eb(0.5 * h, field, pp, y)?;
    let y = flow_t(h, pp.m, &y);
    flow_eb(0.5 * h, field, pp, &y)
}

/// Chin-b: `T(h/2) (E+B)(h) T(h/2)`.
pub fn chin_b_step<F: Field + ?Sized>(h: f64, field: &F, pp: &ParticleParams, y: &State) -> Result<State> {
    let y = flow_t(0.5 * h, pp.m, y);
    let y = flow_eb(h, field, pp, &y)?;
    Ok(flow_t(0.5 * h, pp.m, &y))
}

fn omega_at<F: Field + ?Sized>(field: &F, pp: &ParticleParams, q: &Vec3) -> Result<Vec3> {
    eval_omega(field, pp, q)
}

/// Strang splitting of the Hamiltonian with the exact helical mid-step for the
/// gyro-vector frozen at the mid-step entry point.
pub fn scovel_step<F: Field + ?Sized>(h: f64, field: &F, pp: &ParticleParams, y: &State) -> Result<State> {
    let w0 = flow_e(0.5 * h, field, pp, y)?;
    let omega = omega_at(field, pp, &w0.q)?;
    let w1 = flow_tb_frozen(h, pp.m, &omega, &w0);
    flow_e(0.5 * h, field, pp, &w1)
}

/// Two half-step helices, the second frozen at the (iterated) end point.
fn strang_mid<F: Field + ?Sized>(h: f64, iters: u32, field: &F, pp: &ParticleParams, w0: &State) -> Result<State> {
    let half = 0.5 * h;
    let predictor = flow_tb_frozen(half, pp.m, &omega_at(field, pp, &w0.q)?, w0);
    let mut w = predictor;
    for _ in 0..iters {
        let omega = omega_at(field, pp, &w.q)?;
        w = flow_tb_frozen(half, pp.m, &omega, &predictor);
    }
    Ok(w)
}

/// One full helix frozen at the (iterated) midpoint of start and end.
fn midpoint_mid<F: Field + ?Sized>(h: f64, iters: u32, field: &F, pp: &ParticleParams, w0: &State) -> Result<State> {
    let mut w = *w0;
    for _ in 0..iters {
        let omega = omega_at(field, pp, &((w.q + w0.q) * 0.5))?;
        w = flow_tb_frozen(h, pp.m, &omega, w0);
    }
    Ok(w)
}

fn strang_shell<F, M>(h: f64, field: &F, pp: &ParticleParams, y: &State, mid: M) -> Result<State>
where
    F: Field + ?Sized,
    M: FnOnce(&State) -> Result<State>,
{
    let w0 = flow_e(0.5 * h, field, pp, y)?;
    let w1 = mid(&w0)?;
    flow_e(0.5 * h, field, pp, &w1)
}

/// Hamiltonian Strang splitting with the two-half-helix implicit mid-step
/// solved by exactly `iters` fixed-point sweeps.
pub fn impl_strang_step<F: Field + ?Sized>(
    h: f64,
    iters: u32,
    field: &F,
    pp: &ParticleParams,
    y: &State,
) -> Result<State> {
    strang_shell(h, field, pp, y, |w0| strang_mid(h, iters, field, pp, w0))
}

/// Hamiltonian Strang splitting with the implicit-midpoint helix mid-step.
pub fn impl_midpoint_step<F: Field + ?Sized>(
    h: f64,
    iters: u32,
    field: &F,
    pp: &ParticleParams,
    y: &State,
) -> Result<State> {
    strang_shell(h, field, pp, y, |w0| midpoint_mid(h, iters, field, pp, w0))
}

/// Strang shell around a composition of implicit mid-steps; the electric
/// force is evaluated once per step.
pub fn composed_step<F: Field + ?Sized>(
    h: f64,
    strang_inner: bool,
    iters: u32,
    coefficients: &[f64],
    field: &F,
    pp: &ParticleParams,
    y: &State,
) -> Result<State> {
    strang_shell(h, field, pp, y, |w0| {
        coefficients.iter().try_fold(*w0, |w, &g| {
            if strang_inner {
                strang_mid(g * h, iters, field, pp, &w)
            } else {
                midpoint_mid(g * h, iters, field, pp, &w)
            }
        })
    })
}

/// Exponential velocity-Verlet scheme of Spreiter and Walter (homogeneous `b`).
pub fn spreiter_walter_step<F: Field + ?Sized>(h: f64, field: &F, pp: &ParticleParams, y: &State) -> Result<State> {
    let omega = omega_at(field, pp, &y.q)?;
    let f0 = eval_force(field, pp, &y.q)?;
    let k = PhiKernels::new(h, &omega);
    let q1 = y.q + k.phi1 * y.p * (h / pp.m) + k.phi2 * f0 * (h * h / pp.m);
    let f1 = eval_force(field, pp, &q1)?;
    let p1 = k.exp * y.p + k.phi1 * f0 * h + k.phi2 * (f1 - f0) * h;
    Ok(State { q: q1, p: p1 })
}

pub fn velocity_verlet_step<F: Field + ?Sized>(h: f64, field: &F, pp: &ParticleParams, y: &State) -> Result<State> {
    let f0 = eval_force(field, pp, &y.q)?;
    let q1 = y.q + y.p * (h / pp.m) + f0 * (0.5 * h * h / pp.m);
    let f1 = eval_force(field, pp, &q1)?;
    Ok(State { q: q1, p: y.p + (f0 + f1) * (0.5 * h) })
}

/// Callback invoked on sampled states during integration.
pub trait Observer {
    fn observe(&mut self, step: u64, t: f64, y: &State) -> Result<()>;
}

impl<T: FnMut(u64, f64, &State) -> Result<()>> Observer for T {
    fn observe(&mut self, step: u64, t: f64, y: &State) -> Result<()> {
        self(step, t, y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySummary {
    pub n_steps: u64,
    pub final_time: f64,
    pub final_state: State,
    pub max_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub h: f64,
    pub stride: u64,
    pub samples: Vec<(f64, State)>,
    pub summary: TrajectorySummary,
}

impl Trajectory {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|(t, _)| *t)
    }
}

/// Advances `n_steps` steps, calling every observer at step indices that are
/// multiples of `observe_stride` (including step 0). Returns the final state.
pub fn run<F: Field + ?Sized>(
    stepper: &Stepper,
    field: &F,
    pp: &ParticleParams,
    y0: &State,
    n_steps: u64,
    observe_stride: u64,
    observers: &mut [&mut dyn Observer],
) -> Result<State> {
    if observe_stride == 0 {
        return Err(Error::Config("observer stride must be at least 1".into()));
    }
    stepper.check_field(field)?;
    let h = stepper.h();
    let mut y = *y0;
    for obs in observers.iter_mut() {
        obs.observe(0, 0.0, &y)?;
    }
    for k in 1..=n_steps {
        y = stepper
            .step(field, pp, &y)
            .map_err(|e| Error::Step { step: k, source: Box::new(e) })?;
        if !y.is_finite() {
            return Err(Error::NonFinite { step: k });
        }
        if k % observe_stride == 0 {
            let t = k as f64 * h;
            for obs in observers.iter_mut() {
                obs.observe(k, t, &y)?;
            }
        }
    }
    Ok(y)
}

/// Integrates and records samples every `sample_stride` steps.
pub fn integrate<F: Field + ?Sized>(
    stepper: &Stepper,
    field: &F,
    pp: &ParticleParams,
    y0: &State,
    n_steps: u64,
    sample_stride: u64,
    observers: &mut [&mut dyn Observer],
) -> Result<Trajectory> {
    if n_steps == 0 {
        return Err(Error::Config("integrate needs at least one step".into()));
    }
    let mut samples = Vec::with_capacity((n_steps / sample_stride.max(1)) as usize + 1);
    let mut max_radius = 0.0_f64;
    let mut recorder = |_: u64, t: f64, y: &State| {
        max_radius = max_radius.max(y.q.norm());
        samples.push((t, *y));
        Ok(())
    };
    let final_state = {
        let mut all: Vec<&mut dyn Observer> = Vec::with_capacity(observers.len() + 1);
        all.push(&mut recorder);
        for o in observers.iter_mut() {
            all.push(&mut **o);
        }
        run(stepper, field, pp, y0, n_steps, sample_stride, &mut all)?
    };
    Ok(Trajectory {
        h: stepper.h(),
        stride: sample_stride,
        samples,
        summary: TrajectorySummary {
            n_steps,
            final_time: n_steps as f64 * stepper.h(),
            final_state,
            max_radius,
        },
    })
}

/// Applies a full step for each coefficient: `∏ step(γᵢ h)`.
pub fn composed_full_step<F: Field + ?Sized>(
    stepper: &Stepper,
    coefficients: &[f64],
    h: f64,
    field: &F,
    pp: &ParticleParams,
    y: &State,
) -> Result<State> {
    coefficients.iter().try_fold(*y, |w, &g| stepper.step_h(g * h, field, pp, &w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::FieldModel;
    use approx::assert_abs_diff_eq;

    fn unit() -> ParticleParams {
        ParticleParams::new(1.0, 1.0).unwrap()
    }

    fn penning() -> FieldModel {
        FieldModel::penning_ideal(10.0, 100.0)
    }

    fn y0() -> State {
        State::new(Vec3::new(1.0 / 3.0, 0.0, 0.5), Vec3::new(0.0, 1.0, 0.0))
    }

    #[test]
    fn method_names_round_trip() {
        for m in MethodId::ALL {
            assert_eq!(m.name().parse::<MethodId>().unwrap(), m);
        }
        assert!("Leapfrog".parse::<MethodId>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(Stepper::new(StepperConfig::new(MethodId::BorisCayley, 0.0)).is_err());
        assert!(Stepper::new(StepperConfig::new(MethodId::BorisCayley, f64::NAN)).is_err());
        assert!(Stepper::new(StepperConfig::new(MethodId::ImplStrang, 0.1).with_fp_iters(0)).is_err());
        let bad = StepperConfig::new(MethodId::Composed, 0.1).with_composition(Composition(vec![0.5, 0.6]), MethodId::ImplMidpoint);
        assert!(Stepper::new(bad).is_err());
        let asym = StepperConfig::new(MethodId::Composed, 0.1).with_composition(Composition(vec![0.2, 0.8]), MethodId::ImplMidpoint);
        assert!(Stepper::new(asym).is_err());
        let wrong_inner = StepperConfig::new(MethodId::Composed, 0.1).with_composition(Composition(vec![1.0]), MethodId::ChinA);
        assert!(Stepper::new(wrong_inner).is_err());
        assert_eq!(StepperConfig::new(MethodId::ImplStrang, 0.1).fp_iters(), 5);
        assert_eq!(StepperConfig::new(MethodId::ImplMidpoint, 0.1).fp_iters(), 6);
        assert_eq!(StepperConfig::new(MethodId::Composed, 0.1).fp_iters(), 16);
    }

    #[test]
    fn composition_tables_are_consistent() {
        Composition::triple_jump().validate().unwrap();
        let six = Composition::triple_jump_sixth();
        assert_eq!(six.len(), 9);
        six.validate().unwrap();
    }

    #[test]
    fn free_particle_is_a_drift() {
        let free = FieldModel::uniform(Vec3::zeros());
        let y = y0();
        let drift = flow_t(0.3, 1.0, &y);
        for m in [MethodId::BorisCayley, MethodId::BorisExp, MethodId::ChinA, MethodId::ChinB] {
            let s = Stepper::new(StepperConfig::new(m, 0.3)).unwrap();
            assert_abs_diff_eq!(s.step(&free, &unit(), &y).unwrap().q, drift.q, epsilon = 1e-15);
        }
    }

    #[test]
    fn boris_rotation_angles() {
        let b = FieldModel::uniform(Vec3::new(0.0, 0.0, 100.0));
        let y = State::new(Vec3::zeros(), Vec3::new(0.0, 1.0, 0.0));
        let cay = boris_cayley_step(0.02, &b, &unit(), &y).unwrap();
        // 2·atan(1) = π/2: (0,1,0) rotates to (1,0,0) under p' = p × ω
        assert_abs_diff_eq!(cay.p, Vec3::new(1.0, 0.0, 0.0), epsilon = 1e-15);
        let ex = boris_exp_step(0.02, &b, &unit(), &y).unwrap();
        assert_abs_diff_eq!(ex.p, Vec3::new(2f64.sin(), 2f64.cos(), 0.0), epsilon = 1e-15);
    }

    #[test]
    fn cross_product_oracle_limits() {
        let p = Vec3::new(0.3, -1.0, 2.0);
        assert_eq!(boris_crossproduct_oracle(0.1, &Vec3::zeros(), &p), p);
        let parallel = boris_crossproduct_oracle(0.1, &(p * 3.0), &p);
        assert_abs_diff_eq!(parallel, p, epsilon = 1e-15);
    }

    #[test]
    fn chin_b_equals_boris_exp_without_electric_field() {
        let g = FieldModel::gradb2d();
        let pp = ParticleParams::new(1.0, -1.0).unwrap();
        let y = State::new(Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 0.5, 0.0));
        let a = chin_b_step(0.05, &g, &pp, &y).unwrap();
        let b = boris_exp_step(0.05, &g, &pp, &y).unwrap();
        assert!(a.max_abs_diff(&b) <= 1e-14);
    }

    #[test]
    fn implicit_methods_reduce_to_scovel_on_uniform_fields() {
        let f = penning();
        let y = y0();
        let h = 0.01;
        let sc = scovel_step(h, &f, &unit(), &y).unwrap();
        for k in [1, 3, 7] {
            assert!(impl_strang_step(h, k, &f, &unit(), &y).unwrap().max_abs_diff(&sc) <= 1e-14);
            assert!(impl_midpoint_step(h, k, &f, &unit(), &y).unwrap().max_abs_diff(&sc) <= 1e-14);
        }
        assert_eq!(impl_strang_step(0.0, 4, &f, &unit(), &y).unwrap(), y);
        assert_eq!(impl_midpoint_step(0.0, 4, &f, &unit(), &y).unwrap(), y);
    }

    #[test]
    fn single_entry_composition_is_the_plain_method() {
        let f = FieldModel::penning_bottle(10.0, 100.0, 200.0);
        let y = y0();
        let a = composed_step(0.01, false, 6, &[1.0], &f, &unit(), &y).unwrap();
        let b = impl_midpoint_step(0.01, 6, &f, &unit(), &y).unwrap();
        assert_eq!(a, b);
        let a = composed_step(0.01, true, 5, &[1.0], &f, &unit(), &y).unwrap();
        let b = impl_strang_step(0.01, 5, &f, &unit(), &y).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn spreiter_walter_limits() {
        let y = y0();
        let quad = FieldModel::penning_ideal(10.0, 0.0);
        let sw = spreiter_walter_step(0.01, &quad, &unit(), &y).unwrap();
        let vv = velocity_verlet_step(0.01, &quad, &unit(), &y).unwrap();
        assert!(sw.max_abs_diff(&vv) <= 1e-14);
        let b = FieldModel::uniform(Vec3::new(1.0, 2.0, 3.0));
        let sw = spreiter_walter_step(0.1, &b, &unit(), &y).unwrap();
        let helix = flow_tb_frozen(0.1, 1.0, &Vec3::new(1.0, 2.0, 3.0), &y);
        assert!(sw.max_abs_diff(&helix) <= 1e-15);
    }

    #[test]
    fn spreiter_walter_rejects_nonuniform_fields() {
        let s = Stepper::new(StepperConfig::new(MethodId::SpreiterWalter, 0.01)).unwrap();
        let asym = FieldModel::penning_asym(10.0, 100.0, 50.0);
        assert!(matches!(s.step(&asym, &unit(), &y0()), Err(Error::Config(_))));
        assert!(s.check_field(&penning()).is_ok());
    }

    #[test]
    fn velocity_verlet_limits() {
        let free = FieldModel::uniform(Vec3::zeros());
        let y = y0();
        assert_eq!(velocity_verlet_step(0.2, &free, &unit(), &y).unwrap(), flow_t(0.2, 1.0, &y));
        assert_eq!(velocity_verlet_step(0.0, &penning(), &unit(), &y).unwrap(), y);
    }

    #[test]
    fn scovel_flags_nonuniform_fields() {
        let s = Stepper::new(StepperConfig::new(MethodId::Scovel, 0.01)).unwrap();
        assert!(s.exact_on(&penning()));
        assert!(!s.exact_on(&FieldModel::penning_bottle(10.0, 100.0, 200.0)));
    }

    #[test]
    fn integrate_samples_on_integer_grid() {
        let s = Stepper::new(StepperConfig::new(MethodId::BorisCayley, 0.1)).unwrap();
        let traj = integrate(&s, &penning(), &unit(), &y0(), 1, 1, &mut []).unwrap();
        assert_eq!(traj.samples.len(), 2);
        assert_eq!(traj.samples[0].0, 0.0);
        assert_eq!(traj.samples[1].0, 0.1);

        let traj = integrate(&s, &penning(), &unit(), &y0(), 1000, 10, &mut []).unwrap();
        assert_eq!(traj.samples.len(), 101);
        for (k, (t, _)) in traj.samples.iter().enumerate() {
            assert_eq!(*t, (10 * k) as f64 * 0.1);
        }
        assert!(integrate(&s, &penning(), &unit(), &y0(), 0, 1, &mut []).is_err());
    }

    #[test]
    fn integrate_reports_failing_step() {
        let s = Stepper::new(StepperConfig::new(MethodId::BorisCayley, 0.5)).unwrap();
        let g = FieldModel::gradb2d();
        let pp = ParticleParams::new(1.0, -1.0).unwrap();
        // drifting straight into the x = 0 plane
        let y = State::new(Vec3::new(1.0, 0.0, 0.0), Vec3::new(-10.0, 0.0, 0.0));
        match integrate(&s, &g, &pp, &y, 10, 1, &mut []) {
            Err(Error::Step { step, .. }) => assert_eq!(step, 1),
            other => panic!("expected a step error, got {other:?}"),
        }
    }
}
