//! Built-in experiment setups and conversion of configured time units.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use magsplit::analytic::PenningExact;
use magsplit::fields::{eval_omega, Field};
use magsplit::integrators::MethodId;
use magsplit::structure::{AngleTracker, GradB2dOrbit};
use magsplit::{FieldModel, ParticleParams};

use crate::config::{
    DurationSpec, ExperimentConfig, ExperimentId, InitialState, LongrunSpec, MethodEntry, Observable, ReferenceSpec,
    SweepSpec, TimeUnit,
};
use crate::error::{HarnessError, Result};
use crate::fit::least_squares;
use crate::reference::integrate_samples;

/// Coefficients of a 15-stage symmetric eighth-order composition (Yoshida's
/// solution A), shipped as the `yoshida8` table of the asym config. Its large
/// coefficients make it drift at step sizes where `kahan_li8` stays bounded.
pub const YOSHIDA8_SIDE: [f64; 7] = [
    -1.615_823_741_500_97,
    -2.446_991_823_705_24,
    -0.007_169_894_197_081_20,
    2.440_027_324_167_35,
    0.157_739_928_123_617,
    1.820_206_308_707_14,
    1.042_426_208_699_91,
];

/// Palindromic 15-entry table `[w7 … w1, w0, w1 … w7]`.
pub fn yoshida8() -> Vec<f64> {
    let w0 = 1.0 - 2.0 * YOSHIDA8_SIDE.iter().sum::<f64>();
    let mut t: Vec<f64> = YOSHIDA8_SIDE.iter().rev().copied().collect();
    t.push(w0);
    t.extend(YOSHIDA8_SIDE);
    t
}

/// Kahan and Li's 15-stage symmetric eighth-order composition: same stage
/// count as `yoshida8` with all coefficients below 0.8 in magnitude.
pub const KAHAN_LI8_SIDE: [f64; 7] = [
    0.741670364350613,
    -0.4091008258000316,
    0.1907547102962384,
    -0.5738624711160822,
    0.2990641813036559,
    0.33462491824529816,
    0.3152930923967666,
];
pub const KAHAN_LI8_CENTRE: f64 = -0.7968879393529164;

/// Palindromic 15-entry table `[g1 … g7, g8, g7 … g1]`.
pub fn kahan_li8() -> Vec<f64> {
    let mut t = KAHAN_LI8_SIDE.to_vec();
    t.push(KAHAN_LI8_CENTRE);
    t.extend(KAHAN_LI8_SIDE.iter().rev());
    t
}

/// Desk runs fit a CI budget; full scale uses the long durations of the
/// original experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scale {
    #[default]
    Desk,
    Full,
}

/// Characteristic periods of a configured experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Units {
    pub cyclotron: f64,
    pub magnetron: Option<f64>,
    pub orbit: Option<f64>,
}

impl Units {
    pub fn of(cfg: &ExperimentConfig) -> Result<Self> {
        let pp = &cfg.particle;
        let y0 = cfg.initial.state();
        // cyclotron frequency at the initial position
        let probe = y0.q;
        let wc = eval_omega(&cfg.field, pp, &probe)?.norm();
        if !(wc > 0.0) {
            return Err(HarnessError::Config(format!("field `{}` vanishes at {probe:?}", cfg.field.name())));
        }
        let magnetron = match cfg.field.penning_params() {
            Some(tp) => match PenningExact::new(&tp, pp, &y0).ok().map(|ex| 2.0 * PI / ex.omega_minus().abs()) {
                Some(t) if !matches!(cfg.field, FieldModel::PenningIdeal { .. }) => Some(measured_magnetron(cfg, t, wc)?),
                other => other,
            },
            None => None,
        };
        let orbit = match cfg.field {
            FieldModel::Gradb2d => Some(GradB2dOrbit { v: y0.p.norm() / pp.m }.period()),
            _ => None,
        };
        Ok(Self { cyclotron: 2.0 * PI / wc, magnetron, orbit })
    }

    pub fn period(&self, unit: TimeUnit) -> Result<f64> {
        match unit {
            TimeUnit::Absolute => Ok(1.0),
            TimeUnit::Cyclotron => Ok(self.cyclotron),
            TimeUnit::Magnetron => {
                self.magnetron.ok_or_else(|| HarnessError::Config("magnetron unit needs a confining Penning trap".into()))
            }
            TimeUnit::Orbit => self.orbit.ok_or_else(|| HarnessError::Config("orbit unit needs the gradb2d field".into())),
        }
    }

    pub fn to_time(&self, value: f64, unit: TimeUnit) -> Result<f64> {
        Ok(value * self.period(unit)?)
    }

    pub fn duration(&self, d: &DurationSpec, h: f64) -> Result<f64> {
        match *d {
            DurationSpec::Steps { n_steps } => Ok(n_steps as f64 * h),
            DurationSpec::Periods { n_periods, unit } => self.to_time(n_periods, unit),
        }
    }
}

/// Number of magnetron periods over which mean rotation rates are fitted.
/// The asymmetric trap's rate modulates, so short fits are off by percents.
pub const MAGNETRON_FIT_PERIODS: f64 = 20.0;

/// Magnetron period of a nonideal trap, read off the mean rotation rate about
/// the axis of a reference run spanning `MAGNETRON_FIT_PERIODS` periods
/// `guess` of its ideal part.
/// Results are memoised per field, particle and start point.
fn measured_magnetron(cfg: &ExperimentConfig, guess: f64, wc: f64) -> Result<f64> {
    static CACHE: OnceLock<Mutex<HashMap<String, f64>>> = OnceLock::new();
    let key = format!("{:?}|{:?}|{:?}", cfg.field, cfg.particle, cfg.initial);
    let cache = CACHE.get_or_init(Default::default);
    if let Some(&t) = cache.lock().map_err(|_| HarnessError::Numerical("period cache poisoned".into()))?.get(&key) {
        return Ok(t);
    }
    let h = 0.1 * 2.0 * PI / wc;
    let n = (MAGNETRON_FIT_PERIODS * guess / h).ceil() as usize;
    let samples = integrate_samples(&cfg.field, cfg, h, 2, n)?;
    let mut tracker = AngleTracker::default();
    let (ts, angles): (Vec<f64>, Vec<f64>) =
        samples.iter().enumerate().map(|(j, y)| (j as f64 * h, tracker.push(y.q.x, y.q.y))).unzip();
    let rate = least_squares(&ts, &angles).map(|(_, b)| b.abs()).filter(|b| *b > 0.0);
    let t = 2.0 * PI / rate.ok_or_else(|| HarnessError::Numerical("no mean rotation about the trap axis".into()))?;
    cache.lock().map_err(|_| HarnessError::Numerical("period cache poisoned".into()))?.insert(key, t);
    Ok(t)
}

/// Integer number of steps of size `h` in `t` (rounded, at least one).
pub fn steps_in(t: f64, h: f64) -> u64 {
    ((t / h).round() as u64).max(1)
}

const PENNING_KAPPA: f64 = 10.0;
const PENNING_BZ: f64 = 100.0;

fn penning_base(id: ExperimentId, field: FieldModel) -> ExperimentConfig {
    ExperimentConfig {
        experiment: id,
        field,
        particle: ParticleParams { m: 1.0, c: 1.0 },
        initial: InitialState { q: [1.0 / 3.0, 0.0, 0.5], p: [0.0, 1.0, 0.0] },
        methods: Vec::new(),
        duration: DurationSpec::Periods { n_periods: 2.0, unit: TimeUnit::Magnetron },
        sweep: SweepSpec { h: Vec::new(), unit: TimeUnit::Cyclotron, compare_every: None },
        observables: vec![Observable::EnergyError, Observable::PositionError],
        output: None,
        window: 10_000,
        reference: ReferenceSpec::default(),
        longrun: None,
        compositions: Default::default(),
    }
}

fn scaled(base: f64, divisors: &[f64]) -> Vec<f64> {
    divisors.iter().map(|n| base / n).collect()
}

fn explicit_methods() -> Vec<MethodEntry> {
    [MethodId::BorisCayley, MethodId::BorisExp, MethodId::ChinA, MethodId::ChinB, MethodId::Scovel]
        .into_iter()
        .map(MethodEntry::new)
        .collect()
}

/// The four experiments with their standard parameters.
pub fn builtin_experiment(id: ExperimentId, scale: Scale) -> Result<ExperimentConfig> {
    let full = scale == Scale::Full;
    let cfg = match id {
        ExperimentId::Gradb2d => {
            let mut methods = explicit_methods();
            methods.retain(|m| m.method != MethodId::Scovel);
            methods.push(MethodEntry::new(MethodId::ImplStrang));
            methods.push(MethodEntry::new(MethodId::ImplMidpoint));
            ExperimentConfig {
                experiment: id,
                field: FieldModel::gradb2d(),
                particle: ParticleParams { m: 1.0, c: -1.0 },
                initial: InitialState { q: [1.0, 0.0, 0.0], p: [0.0, 0.5, 0.0] },
                methods,
                duration: DurationSpec::Periods { n_periods: if full { 20_000.0 } else { 100.0 }, unit: TimeUnit::Orbit },
                sweep: SweepSpec {
                    h: scaled(1.0, &[20.0, 25.0, 40.0, 50.0, 100.0, 200.0, 400.0, 500.0, 1000.0, 2000.0]),
                    unit: TimeUnit::Orbit,
                    compare_every: Some(0.2),
                },
                observables: vec![
                    Observable::EnergyError,
                    Observable::PositionError,
                    Observable::InvariantError,
                    Observable::DriftVelocity,
                    Observable::Period,
                    Observable::AlphaError,
                ],
                output: None,
                window: 10_000,
                // the sixth-order reference is already far below round-off at h_min
                reference: ReferenceSpec { divisor: 1.0, ..ReferenceSpec::default() },
                longrun: None,
                compositions: Default::default(),
            }
        }
        ExperimentId::PenningIdeal => {
            let mut c = penning_base(id, FieldModel::penning_ideal(PENNING_KAPPA, PENNING_BZ));
            c.methods = explicit_methods();
            c.methods.extend([
                MethodEntry::new(MethodId::ImplStrang),
                MethodEntry::new(MethodId::ImplMidpoint),
                MethodEntry::new(MethodId::SpreiterWalter),
            ]);
            c.sweep.h = scaled(
                2.4,
                &[1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 24.0, 48.0, 60.0, 120.0, 240.0, 300.0, 480.0, 600.0, 1200.0],
            );
            c.observables.push(Observable::AlphaError);
            c.longrun = Some(LongrunSpec {
                method: MethodEntry::new(MethodId::BorisCayley),
                h: 0.1,
                unit: TimeUnit::Cyclotron,
                n_steps: if full { 1_000_000_000 } else { 100_000 },
            });
            c
        }
        ExperimentId::PenningBottle => {
            let mut c = penning_base(id, FieldModel::penning_bottle(PENNING_KAPPA, PENNING_BZ, 200.0));
            c.methods = vec![
                MethodEntry::new(MethodId::BorisCayley),
                MethodEntry::new(MethodId::ChinB),
                MethodEntry::new(MethodId::Scovel),
                MethodEntry::new(MethodId::ImplStrang),
                MethodEntry::new(MethodId::ImplMidpoint),
                MethodEntry::composed("triple_jump", MethodId::ImplMidpoint),
            ];
            c.sweep.h = scaled(0.4, &[1.0, 2.0, 4.0, 5.0, 10.0, 20.0, 25.0, 50.0, 100.0, 200.0]);
            c.observables.push(Observable::MagneticMoment);
            c.reference.divisor = 1.0;
            c.longrun = Some(LongrunSpec {
                method: MethodEntry::new(MethodId::ImplMidpoint),
                h: 0.4,
                unit: TimeUnit::Cyclotron,
                n_steps: if full { 1_000_000_000 } else { 10_000_000 },
            });
            c.window = if full { 1_000_000 } else { 10_000 };
            c
        }
        ExperimentId::PenningAsym => {
            let mut c = penning_base(id, FieldModel::penning_asym(PENNING_KAPPA, PENNING_BZ, 50.0));
            c.methods = vec![
                MethodEntry::new(MethodId::BorisCayley),
                MethodEntry::new(MethodId::ChinB),
                MethodEntry::new(MethodId::ImplStrang),
                MethodEntry::new(MethodId::ImplMidpoint),
                MethodEntry::composed("kahan_li8", MethodId::ImplMidpoint),
            ];
            c.compositions.insert("yoshida8".into(), yoshida8());
            c.compositions.insert("kahan_li8".into(), kahan_li8());
            c.sweep.h = scaled(0.1, &[1.0, 2.0, 4.0, 5.0, 10.0, 20.0, 25.0, 50.0, 100.0]);
            c.observables.push(Observable::MagneticMoment);
            c.reference.divisor = 1.0;
            c.longrun = Some(LongrunSpec {
                method: MethodEntry::composed("kahan_li8", MethodId::ImplMidpoint),
                h: 0.1,
                unit: TimeUnit::Cyclotron,
                n_steps: if full { 2_000_000_000 } else { 20_000_000 },
            });
            c.window = if full { 1_000_000 } else { 10_000 };
            c
        }
        ExperimentId::Custom => {
            return Err(HarnessError::Config("`custom` experiments need a config file".into()));
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn yoshida_table_is_consistent() {
        let t = yoshida8();
        assert_eq!(t.len(), 15);
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!((t[7] + 1.780_828_620_589_451_5).abs() < 1e-13);
        magsplit::Composition(t).validate().unwrap();
    }

    #[test]
    fn kahan_li_table_meets_the_odd_moment_conditions() {
        let t = kahan_li8();
        assert_eq!(t.len(), 15);
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        for k in [3, 5, 7] {
            let s: f64 = t.iter().map(|g| g.powi(k)).sum();
            assert!(s.abs() < 1e-14, "sum of powers {k}: {s:e}");
        }
        magsplit::Composition(t).validate().unwrap();
    }

    #[test]
    fn penning_units() {
        let c = builtin_experiment(ExperimentId::PenningIdeal, Scale::Desk).unwrap();
        let u = Units::of(&c).unwrap();
        assert!((u.cyclotron - 2.0 * PI / 100.0).abs() < 1e-15);
        let wm = 2.0 * PI / u.magnetron.unwrap();
        assert!((wm - 0.100_100_200_501_401_56).abs() < 1e-12);
        assert!(u.orbit.is_none());
        assert!(u.period(TimeUnit::Orbit).is_err());
    }

    #[test]
    fn gradb2d_units() {
        let c = builtin_experiment(ExperimentId::Gradb2d, Scale::Desk).unwrap();
        let u = Units::of(&c).unwrap();
        assert!((u.orbit.unwrap() - 3.0 * PI / (2.0 * 2f64.sqrt())).abs() < 1e-12);
        assert!((u.cyclotron - 2.0 * PI).abs() < 1e-15);
        assert!(u.magnetron.is_none());
    }

    #[test]
    fn builtins_validate() {
        for id in ExperimentId::BUILTIN {
            for s in [Scale::Desk, Scale::Full] {
                builtin_experiment(id, s).unwrap();
            }
        }
        assert!(builtin_experiment(ExperimentId::Custom, Scale::Desk).is_err());
    }

    #[test]
    fn steps_round() {
        assert_eq!(steps_in(1.0, 0.1), 10);
        assert_eq!(steps_in(0.0, 0.1), 1);
    }
}
