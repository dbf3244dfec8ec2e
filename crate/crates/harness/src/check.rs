//! Structure probes across methods and field models.

use std::f64::consts::PI;

use magsplit::fields::{check_divergence_free, Field};
use magsplit::integrators::{MethodId, Stepper, StepperConfig};
use magsplit::structure::{check_poisson, check_time_symmetry, check_volume, PoissonTensor};
use magsplit::{FieldModel, ParticleParams, State, Vec3};

use crate::error::Result;
use crate::fit::least_squares;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRow {
    pub subject: String,
    pub field: String,
    pub probe: &'static str,
    pub value: f64,
    /// `None` for informational rows.
    pub limit: Option<Limit>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Limit {
    AtMost(f64),
    AtLeast(f64),
}

impl ProbeRow {
    pub fn passed(&self) -> bool {
        match self.limit {
            None => true,
            Some(Limit::AtMost(l)) => self.value <= l,
            Some(Limit::AtLeast(l)) => self.value >= l,
        }
    }
}

/// Field models of the standard experiments, each with a start point inside its domain.
pub fn probe_fields() -> Vec<(FieldModel, ParticleParams, State)> {
    let trap = State::new(Vec3::new(1.0 / 3.0, 0.0, 0.5), Vec3::new(0.0, 1.0, 0.0));
    let unit = ParticleParams { m: 1.0, c: 1.0 };
    vec![
        (FieldModel::uniform(Vec3::new(0.0, 0.0, 100.0)), unit, trap),
        (FieldModel::penning_ideal(10.0, 100.0), unit, trap),
        (FieldModel::penning_bottle(10.0, 100.0, 200.0), unit, trap),
        (FieldModel::penning_asym(10.0, 100.0, 50.0), unit, trap),
        (
            FieldModel::gradb2d(),
            ParticleParams { m: 1.0, c: -1.0 },
            State::new(Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 0.5, 0.0)),
        ),
    ]
}

/// Deterministic lattice in `[−1, 1]³`, shifted into `x > 0` for the ∇B field.
fn lattice(field: &FieldModel) -> Vec<Vec3> {
    let g = [-0.9, -0.45, 0.1, 0.55, 1.0];
    let mut pts = Vec::new();
    for &x in &g {
        for &y in &g {
            for &z in &g {
                let x = if matches!(field, FieldModel::Gradb2d) { 0.55 + 0.5 * x } else { x };
                pts.push(Vec3::new(x, y, z));
            }
        }
    }
    pts
}

/// Fitted log-log slope of the symmetry defect over four steps `h0 · 0.9^i`.
pub fn symmetry_slope(m: MethodId, k: u32, field: &FieldModel, pp: &ParticleParams, y: &State, h0: f64) -> Result<f64> {
    let s = Stepper::new(StepperConfig::new(m, 1.0).with_fp_iters(k))?;
    let hs: Vec<f64> = (0..4).map(|i| h0 * 0.9f64.powi(i)).collect();
    let mut ds = Vec::new();
    for &h in &hs {
        ds.push(check_time_symmetry(|h, y| s.step_h(h, field, pp, y), y, h)?);
    }
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = ds.iter().map(|d| d.ln()).collect();
    Ok(least_squares(&xs, &ys).map_or(f64::NAN, |(_, b)| b))
}

/// Largest steps (in cyclotron periods) at which the symmetry defect of `k`
/// sweeps still sits well above round-off on the bottle trap.
pub const SYMMETRY_H0: [f64; 5] = [0.1, 0.1, 0.2, 0.25, 0.3];

/// Runs every probe; `h = 0.02` cyclotron periods of the strongest field.
pub fn run_checks() -> Result<Vec<ProbeRow>> {
    let fc = 100.0 / (2.0 * PI);
    let h = 0.02 / fc;
    let mut rows = Vec::new();
    let explicit = [MethodId::BorisCayley, MethodId::BorisExp, MethodId::ChinA, MethodId::ChinB];
    for (field, pp, y) in probe_fields() {
        let name = field.name().to_string();
        let div = check_divergence_free(&field, &lattice(&field), 1e-6)?;
        rows.push(ProbeRow { subject: "field".into(), field: name.clone(), probe: "max |div b|", value: div.max_abs, limit: Some(Limit::AtMost(1e-6)) });
        let tensor = PoissonTensor::new(&field, pp);
        let jac = tensor.jacobi_residual(&y, 1e-4)?;
        rows.push(ProbeRow { subject: "field".into(), field: name.clone(), probe: "Jacobi residual", value: jac, limit: Some(Limit::AtMost(1e-5)) });

        let uniform = field.uniform_b();
        for m in [
            MethodId::BorisCayley,
            MethodId::BorisExp,
            MethodId::ChinA,
            MethodId::ChinB,
            MethodId::Scovel,
            MethodId::ImplStrang,
            MethodId::ImplMidpoint,
            MethodId::Composed,
            MethodId::SpreiterWalter,
        ] {
            let s = Stepper::new(StepperConfig::new(m, h))?;
            if s.check_field(&field).is_err() {
                continue;
            }
            let exact = explicit.contains(&m) || (m == MethodId::Scovel && uniform);
            let sym = check_time_symmetry(|h, y| s.step_h(h, &field, &pp, y), &y, h)?;
            let sym_limit = (exact && m != MethodId::SpreiterWalter).then_some(Limit::AtMost(1e-12));
            rows.push(ProbeRow { subject: m.name().into(), field: name.clone(), probe: "symmetry defect", value: sym, limit: sym_limit });
            let vol = check_volume(|y| s.step(&field, &pp, y), &y)?;
            let vol_limit = (explicit.contains(&m) || (uniform && m != MethodId::SpreiterWalter)).then_some(Limit::AtMost(1e-5));
            rows.push(ProbeRow { subject: m.name().into(), field: name.clone(), probe: "|det J - 1|", value: vol, limit: vol_limit });
            if uniform {
                let r = check_poisson(|y| s.step(&field, &pp, y), &tensor, &y)?;
                let limit = (m != MethodId::SpreiterWalter && !explicit.contains(&m)).then_some(Limit::AtMost(1e-5));
                rows.push(ProbeRow { subject: m.name().into(), field: name.clone(), probe: "Poisson residual", value: r, limit });
            }
        }
    }
    let (bottle, pp, y) = probe_fields().swap_remove(2);
    for m in [MethodId::ImplStrang, MethodId::ImplMidpoint] {
        for k in 1..=5u32 {
            let slope = symmetry_slope(m, k, &bottle, &pp, &y, SYMMETRY_H0[k as usize - 1] / fc)?;
            rows.push(ProbeRow {
                subject: format!("{}(k={k})", m.name()),
                field: bottle.name().into(),
                probe: "symmetry defect order",
                value: slope,
                limit: Some(Limit::AtLeast(k as f64)),
            });
        }
    }
    Ok(rows)
}

pub fn render_table(rows: &[ProbeRow]) -> String {
    let mut out = format!("{:<22} {:<15} {:<22} {:>12} {:>14}  result\n", "subject", "field", "probe", "value", "limit");
    for r in rows {
        let limit = match r.limit {
            None => "-".to_string(),
            Some(Limit::AtMost(l)) => format!("<= {l:.0e}"),
            Some(Limit::AtLeast(l)) => format!(">= {l}"),
        };
        let verdict = match (r.limit, r.passed()) {
            (None, _) => "info",
            (_, true) => "PASS",
            (_, false) => "FAIL",
        };
        out.push_str(&format!("{:<22} {:<15} {:<22} {:>12.3e} {:>14}  {verdict}\n", r.subject, r.field, r.probe, r.value, limit));
    }
    out
}
