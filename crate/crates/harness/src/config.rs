//! Experiment configuration: a TOML file whose keys mirror [`ExperimentConfig`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use magsplit::fields::Field;
use magsplit::integrators::{Composition, MethodId, StepperConfig};
use magsplit::{FieldModel, ParticleParams, State, Vec3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    Gradb2d,
    PenningIdeal,
    PenningBottle,
    PenningAsym,
    Custom,
}

impl ExperimentId {
    pub const BUILTIN: [ExperimentId; 4] =
        [ExperimentId::Gradb2d, ExperimentId::PenningIdeal, ExperimentId::PenningBottle, ExperimentId::PenningAsym];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Gradb2d => "gradb2d",
            ExperimentId::PenningIdeal => "penning_ideal",
            ExperimentId::PenningBottle => "penning_bottle",
            ExperimentId::PenningAsym => "penning_asym",
            ExperimentId::Custom => "custom",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        [ExperimentId::Custom]
            .into_iter()
            .chain(ExperimentId::BUILTIN)
            .find(|e| e.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown experiment `{s}`")))
    }
}

/// Unit in which step sizes and durations are written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TimeUnit {
    #[default]
    Absolute,
    /// Cyclotron period `2π/ω_c` with the field taken at the initial position.
    Cyclotron,
    /// Magnetron period: closed form for the ideal trap, measured from a
    /// reference run for the others.
    Magnetron,
    /// Orbit period of the ∇B-drift problem.
    Orbit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub q: [f64; 3],
    pub p: [f64; 3],
}

impl InitialState {
    pub fn state(&self) -> State {
        State::new(Vec3::from(self.q), Vec3::from(self.p))
    }
}

/// One integrator entry of the method list; `h` comes from the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodEntry {
    pub method: MethodId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fp_iters: Option<u32>,
    /// Name of a composition table: `triple_jump`, `triple_jump_sixth` or a
    /// key of the `compositions` section.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub composition: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<MethodId>,
}

impl MethodEntry {
    pub fn new(method: MethodId) -> Self {
        Self { method, fp_iters: None, composition: None, inner: None }
    }

    pub fn iters(mut self, k: u32) -> Self {
        self.fp_iters = Some(k);
        self
    }

    pub fn composed(table: &str, inner: MethodId) -> Self {
        Self { method: MethodId::Composed, fp_iters: None, composition: Some(table.into()), inner: Some(inner) }
    }

    /// Label used in the `method` CSV column.
    pub fn label(&self) -> String {
        let mut s = self.method.name().to_string();
        if self.method == MethodId::Composed {
            let table = self.composition.as_deref().unwrap_or("triple_jump");
            let inner = self.inner.unwrap_or(MethodId::ImplMidpoint);
            s = format!("{s}[{table}/{inner}]");
        }
        s
    }

    pub fn fp_iters(&self) -> u32 {
        self.fp_iters.unwrap_or_else(|| self.method.default_fp_iters())
    }

    pub fn stepper_config(&self, h: f64, tables: &BTreeMap<String, Vec<f64>>) -> Result<StepperConfig> {
        let mut c = StepperConfig::new(self.method, h);
        c.fp_iters = self.fp_iters;
        if self.method == MethodId::Composed {
            let name = self.composition.as_deref().unwrap_or("triple_jump");
            let table = lookup_table(name, tables)?;
            c = c.with_composition(table, self.inner.unwrap_or(MethodId::ImplMidpoint));
        } else if self.composition.is_some() || self.inner.is_some() {
            return Err(HarnessError::Config(format!(
                "{}: composition and inner only apply to Composed",
                self.method
            )));
        }
        Ok(c)
    }
}

pub fn lookup_table(name: &str, tables: &BTreeMap<String, Vec<f64>>) -> Result<Composition> {
    match name {
        "triple_jump" => Ok(Composition::triple_jump()),
        "triple_jump_sixth" => Ok(Composition::triple_jump_sixth()),
        other => tables
            .get(other)
            .map(|v| Composition(v.clone()))
            .ok_or_else(|| HarnessError::Config(format!("unknown composition table `{other}`"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum DurationSpec {
    Steps { n_steps: u64 },
    Periods { n_periods: f64, unit: TimeUnit },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub h: Vec<f64>,
    #[serde(default)]
    pub unit: TimeUnit,
    /// Spacing of position comparisons against a numerical reference, in
    /// `unit`; defaults to the largest step. Each step must divide it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare_every: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    EnergyError,
    PositionError,
    InvariantError,
    AlphaError,
    MagneticMoment,
    DriftVelocity,
    Period,
}

impl Observable {
    pub fn name(self) -> &'static str {
        match self {
            Observable::EnergyError => "energy_error",
            Observable::PositionError => "position_error",
            Observable::InvariantError => "invariant_error",
            Observable::AlphaError => "alpha_error",
            Observable::MagneticMoment => "magnetic_moment",
            Observable::DriftVelocity => "drift_velocity",
            Observable::Period => "period",
        }
    }

    pub fn needs_reference(self) -> bool {
        matches!(self, Observable::PositionError | Observable::AlphaError)
    }
}

fn default_divisor() -> f64 {
    50.0
}

fn default_self_check() -> bool {
    true
}

fn default_tolerance() -> f64 {
    1e-10
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    /// `h_ref = min(h) / divisor`.
    #[serde(default = "default_divisor")]
    pub divisor: f64,
    #[serde(default = "default_self_check")]
    pub self_check: bool,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Use the closed-form solution when the experiment has one.
    #[serde(default = "default_true")]
    pub analytic: bool,
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        Self { divisor: default_divisor(), self_check: true, tolerance: default_tolerance(), analytic: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LongrunSpec {
    pub method: MethodEntry,
    /// Step size in `unit`.
    pub h: f64,
    #[serde(default)]
    pub unit: TimeUnit,
    pub n_steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub field: FieldModel,
    pub particle: ParticleParams,
    pub initial: InitialState,
    pub methods: Vec<MethodEntry>,
    pub duration: DurationSpec,
    pub sweep: SweepSpec,
    pub observables: Vec<Observable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub window: u64,
    #[serde(default)]
    pub reference: ReferenceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub longrun: Option<LongrunSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub compositions: BTreeMap<String, Vec<f64>>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: ExperimentConfig = toml::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Content hash of the canonical serialization (first 16 hex digits of SHA-256).
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        hex::encode(digest)[..16].to_string()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        self.particle.validate()?;
        if self.methods.is_empty() {
            return bad("method list is empty".into());
        }
        if self.sweep.h.is_empty() {
            return bad("sweep needs at least one step size".into());
        }
        for (i, &h) in self.sweep.h.iter().enumerate() {
            if !(h.is_finite() && h > 0.0) {
                return bad(format!("step size {h} is not positive"));
            }
            if self.sweep.h[..i].contains(&h) {
                return bad(format!("step size {h} listed twice"));
            }
        }
        match self.duration {
            DurationSpec::Steps { n_steps } if n_steps == 0 => return bad("duration must be positive".into()),
            DurationSpec::Periods { n_periods, .. } if !(n_periods.is_finite() && n_periods > 0.0) => {
                return bad("duration must be positive".into())
            }
            _ => {}
        }
        if self.window == 0 {
            return bad("window must be at least 1".into());
        }
        if !(self.reference.divisor >= 1.0) {
            return bad("reference divisor must be at least 1".into());
        }
        for (name, table) in &self.compositions {
            Composition(table.clone()).validate().map_err(|e| HarnessError::Config(format!("table `{name}`: {e}")))?;
        }
        let mut entries: Vec<&MethodEntry> = self.methods.iter().collect();
        if let Some(l) = &self.longrun {
            if !(l.h.is_finite() && l.h > 0.0) || l.n_steps == 0 {
                return bad("longrun needs positive h and n_steps".into());
            }
            entries.push(&l.method);
        }
        for m in entries {
            let cfg = m.stepper_config(1.0, &self.compositions)?;
            let stepper = magsplit::Stepper::new(cfg)?;
            stepper.check_field(&self.field)?;
        }
        let gradb = matches!(self.field, FieldModel::Gradb2d);
        for o in &self.observables {
            match o {
                Observable::InvariantError | Observable::DriftVelocity | Observable::Period if !gradb => {
                    return bad(format!("observable {} needs the gradb2d field", o.name()))
                }
                _ => {}
            }
        }
        // the field must be defined at the start point
        self.field.magnetic(&self.initial.state().q)?;
        Ok(())
    }
}
