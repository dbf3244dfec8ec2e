use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};

use magsplit::analytic::PenningExact;
use magsplit::fields::{eval_omega, Field};
use magsplit::flows::State;
use magsplit::integrators::*;
use magsplit::smallmat::skew;
use magsplit::structure::*;
use magsplit::{FieldModel, ParticleParams, Result, Vec3};
use magsplit_oracles::rk4;

const FC: f64 = 100.0 / (2.0 * PI);

fn unit() -> ParticleParams {
    ParticleParams::new(1.0, 1.0).unwrap()
}

fn y0() -> State {
    State::new(Vec3::new(1.0 / 3.0, 0.0, 0.5), Vec3::new(0.0, 1.0, 0.0))
}

fn all_fields() -> Vec<FieldModel> {
    vec![
        FieldModel::uniform(Vec3::new(0.0, 0.0, 100.0)),
        FieldModel::penning_ideal(10.0, 100.0),
        FieldModel::penning_bottle(10.0, 100.0, 200.0),
        FieldModel::penning_asym(10.0, 100.0, 50.0),
        FieldModel::gradb2d(),
    ]
}

fn start_for(f: &FieldModel) -> State {
    if matches!(f, FieldModel::Gradb2d) {
        State::new(Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 0.5, 0.0))
    } else {
        y0()
    }
}

fn slope(hs: &[f64], es: &[f64]) -> f64 {
    let n = hs.len() as f64;
    let (x, y): (Vec<f64>, Vec<f64>) = hs.iter().zip(es).map(|(h, e)| (h.ln(), e.ln())).unzip();
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Max position error over one cyclotron period against the exact solution.
fn penning_error<S: Fn(f64, &State) -> Result<State>>(step: S, h: f64) -> f64 {
    let f = FieldModel::penning_ideal(10.0, 100.0);
    let ex = PenningExact::new(&f.penning_params().unwrap(), &unit(), &y0()).unwrap();
    let n = (1.0 / FC / h).round() as u64;
    let mut y = y0();
    let mut worst: f64 = 0.0;
    for k in 1..=n {
        y = step(h, &y).unwrap();
        worst = worst.max((y.q - ex.state(k as f64 * h).q).norm());
    }
    worst
}

#[test]
fn second_order_methods_converge_at_order_two() {
    let f = FieldModel::penning_ideal(10.0, 100.0);
    let hs: Vec<f64> = [2.0, 4.0, 5.0, 10.0, 20.0].iter().map(|n| 0.1 / FC / n).collect();
    let configs = vec![
        StepperConfig::new(MethodId::BorisCayley, 1.0),
        StepperConfig::new(MethodId::BorisExp, 1.0),
        StepperConfig::new(MethodId::ChinA, 1.0),
        StepperConfig::new(MethodId::ChinB, 1.0),
        StepperConfig::new(MethodId::Scovel, 1.0),
        StepperConfig::new(MethodId::ImplStrang, 1.0).with_fp_iters(3),
        StepperConfig::new(MethodId::ImplStrang, 1.0),
        StepperConfig::new(MethodId::ImplMidpoint, 1.0).with_fp_iters(3),
        StepperConfig::new(MethodId::ImplMidpoint, 1.0),
        StepperConfig::new(MethodId::Composed, 1.0),
        StepperConfig::new(MethodId::SpreiterWalter, 1.0),
    ];
    for c in configs {
        let s = Stepper::new(c.clone()).unwrap();
        let es: Vec<f64> = hs.iter().map(|&h| penning_error(|h, y| s.step_h(h, &f, &unit(), y), h)).collect();
        let p = slope(&hs, &es);
        assert!((p - 2.0).abs() <= 0.2, "{} slope {p}", c.method);
    }
}

#[test]
fn full_step_compositions_raise_the_order() {
    let f = FieldModel::penning_ideal(10.0, 100.0);
    let s = Stepper::new(StepperConfig::new(MethodId::Scovel, 1.0)).unwrap();
    let hs: Vec<f64> = [2.0, 4.0, 5.0, 10.0].iter().map(|n| 0.1 / FC / n).collect();
    for (table, order) in [(Composition::triple_jump(), 4.0), (Composition::triple_jump_sixth(), 6.0)] {
        let es: Vec<f64> = hs
            .iter()
            .map(|&h| penning_error(|h, y| composed_full_step(&s, &table.0, h, &f, &unit(), y), h))
            .collect();
        let p = slope(&hs, &es);
        assert!((p - order).abs() <= 0.3, "order {order}: slope {p}");
    }
}

#[test]
fn composed_mid_step_on_uniform_field_is_scovel() {
    let f = FieldModel::penning_ideal(10.0, 100.0);
    let h = 0.05 / FC;
    let a = Stepper::new(StepperConfig::new(MethodId::Composed, h)).unwrap().step(&f, &unit(), &y0()).unwrap();
    let b = scovel_step(h, &f, &unit(), &y0()).unwrap();
    assert!(a.max_abs_diff(&b) <= 1e-13);
}

/// Local error of the composed mid-step (no electric field) against RK4 on the T+B subsystem.
#[test]
fn composed_mid_step_local_order() {
    let pp = unit();
    let f = FieldModel::penning_bottle(0.0, 100.0, 200.0);
    let rhs = |y: &[f64; 6]| {
        let q = Vec3::new(y[0], y[1], y[2]);
        let p = Vec3::new(y[3], y[4], y[5]);
        let dp = skew(&eval_omega(&f, &pp, &q).unwrap()) * p;
        [p.x, p.y, p.z, dp.x, dp.y, dp.z]
    };
    let y = y0();
    let ya = [y.q.x, y.q.y, y.q.z, y.p.x, y.p.y, y.p.z];
    for (table, strang, local) in [
        (Composition::triple_jump(), false, 5.0),
        (Composition::triple_jump(), true, 5.0),
        (Composition::triple_jump_sixth(), false, 7.0),
    ] {
        let hs: Vec<f64> = (0..4).map(|i| 0.1 / FC * 0.5f64.powi(i)).collect();
        let es: Vec<f64> = hs
            .iter()
            .map(|&h| {
                let got = composed_step(h, strang, 16, &table.0, &f, &pp, &y).unwrap();
                let r = rk4(rhs, ya, h, 4000);
                got.max_abs_diff(&State::new(Vec3::new(r[0], r[1], r[2]), Vec3::new(r[3], r[4], r[5])))
            })
            .collect();
        let p = slope(&hs, &es);
        assert!((p - local).abs() <= 0.5, "expected local order {local}, got {p} ({es:?})");
    }
}

struct Counting<'a> {
    inner: &'a FieldModel,
    b_calls: AtomicU64,
    e_calls: AtomicU64,
}

impl Field for Counting<'_> {
    fn name(&self) -> &str {
        "counting"
    }
    fn electric(&self, q: &Vec3) -> Result<Vec3> {
        self.e_calls.fetch_add(1, Ordering::Relaxed);
        self.inner.electric(q)
    }
    fn magnetic(&self, q: &Vec3) -> Result<Vec3> {
        self.b_calls.fetch_add(1, Ordering::Relaxed);
        self.inner.magnetic(q)
    }
    fn potential(&self, q: &Vec3) -> Result<f64> {
        self.inner.potential(q)
    }
    fn uniform_b(&self) -> bool {
        self.inner.uniform_b()
    }
    fn has_potential(&self) -> bool {
        true
    }
}

fn count_calls(cfg: StepperConfig) -> (u64, u64) {
    let base = FieldModel::penning_bottle(10.0, 100.0, 200.0);
    let f = Counting { inner: &base, b_calls: AtomicU64::new(0), e_calls: AtomicU64::new(0) };
    Stepper::new(cfg).unwrap().step(&f, &unit(), &y0()).unwrap();
    (f.b_calls.load(Ordering::Relaxed), f.e_calls.load(Ordering::Relaxed))
}

#[test]
fn field_evaluation_counts() {
    let h = 0.01;
    let fifteen = Composition(vec![1.0 / 15.0; 15]);
    let mp = StepperConfig::new(MethodId::Composed, h).with_composition(fifteen.clone(), MethodId::ImplMidpoint);
    let st = StepperConfig::new(MethodId::Composed, h).with_composition(fifteen, MethodId::ImplStrang);
    assert_eq!(count_calls(mp), (240, 2));
    assert_eq!(count_calls(st), (255, 2));
    assert_eq!(count_calls(StepperConfig::new(MethodId::ImplStrang, h)), (6, 2));
    assert_eq!(count_calls(StepperConfig::new(MethodId::ImplMidpoint, h)), (6, 2));
    assert_eq!(count_calls(StepperConfig::new(MethodId::BorisCayley, h)), (1, 1));
    assert_eq!(count_calls(StepperConfig::new(MethodId::ChinA, h)), (2, 2));
}

#[test]
fn explicit_methods_are_time_symmetric_and_volume_preserving() {
    let h = 0.02 / FC;
    for f in all_fields() {
        let y = start_for(&f);
        for m in [MethodId::BorisCayley, MethodId::BorisExp, MethodId::ChinA, MethodId::ChinB] {
            let s = Stepper::new(StepperConfig::new(m, h)).unwrap();
            let d = check_time_symmetry(|h, y| s.step_h(h, &f, &unit(), y), &y, h).unwrap();
            assert!(d <= 1e-12, "{m} on {}: defect {d:e}", f.name());
            let v = check_volume(|y| s.step(&f, &unit(), y), &y).unwrap();
            assert!(v <= 1e-5, "{m} on {}: volume {v:e}", f.name());
        }
    }
}

#[test]
fn implicit_symmetry_defect_order_at_least_iteration_count() {
    let f = FieldModel::penning_bottle(10.0, 100.0, 200.0);
    for m in [MethodId::ImplStrang, MethodId::ImplMidpoint] {
        for k in 1..=5u32 {
            // keep the defects above round-off
            let h0 = [0.1, 0.1, 0.2, 0.25, 0.3][k as usize - 1] / FC;
            let hs: Vec<f64> = (0..4).map(|i| h0 * 0.9f64.powi(i)).collect();
            let s = Stepper::new(StepperConfig::new(m, 1.0).with_fp_iters(k)).unwrap();
            let ds: Vec<f64> = hs
                .iter()
                .map(|&h| check_time_symmetry(|h, y| s.step_h(h, &f, &unit(), y), &y0(), h).unwrap())
                .collect();
            assert!(ds.iter().all(|&d| d > 1e-14), "{m} k={k}: defects at round-off {ds:?}");
            let p = slope(&hs, &ds);
            assert!(p >= k as f64, "{m} k={k}: slope {p} {ds:?}");
        }
    }
}

#[test]
fn scovel_family_is_poisson_on_uniform_fields() {
    let h = 0.02 / FC;
    let pp = unit();
    for f in [FieldModel::uniform(Vec3::new(0.0, 0.0, 100.0)), FieldModel::penning_ideal(10.0, 100.0)] {
        let t = PoissonTensor::new(&f, pp);
        for m in [MethodId::Scovel, MethodId::ImplStrang, MethodId::ImplMidpoint] {
            let s = Stepper::new(StepperConfig::new(m, h)).unwrap();
            let r = check_poisson(|y| s.step(&f, &pp, y), &t, &y0()).unwrap();
            assert!(r <= 1e-5, "{m}: {r:e}");
        }
    }
}

#[test]
fn spreiter_walter_is_not_poisson() {
    let f = FieldModel::penning_ideal(10.0, 100.0);
    let pp = unit();
    let t = PoissonTensor::new(&f, pp);
    let hs: Vec<f64> = (0..4).map(|i| 0.2 / FC * 0.5f64.powi(i)).collect();
    let rs: Vec<f64> = hs
        .iter()
        .map(|&h| check_poisson(|y| spreiter_walter_step(h, &f, &pp, y), &t, &y0()).unwrap())
        .collect();
    let p = slope(&hs, &rs);
    assert!(p > 2.5 && p < 4.5, "residual slope {p} ({rs:?})");
    assert!(rs.iter().all(|&r| r > 1e-7));
    // and not symmetric beyond O(h³)
    let ds: Vec<f64> = hs
        .iter()
        .map(|&h| check_time_symmetry(|h, y| spreiter_walter_step(h, &f, &pp, y), &y0(), h).unwrap())
        .collect();
    let p = slope(&hs, &ds);
    assert!(p < 4.5, "symmetry defect slope {p}");
}

#[test]
fn chin_methods_conserve_kinetic_energy_without_electric_field() {
    let f = FieldModel::gradb2d();
    let pp = ParticleParams::new(1.0, -1.0).unwrap();
    let y = start_for(&f);
    for step in [chin_a_step::<FieldModel>, chin_b_step::<FieldModel>] {
        let mut cur = y;
        for _ in 0..100 {
            let next = step(0.01, &f, &pp, &cur).unwrap();
            let (e0, e1) = (cur.p.norm_squared(), next.p.norm_squared());
            assert!((e1 - e0).abs() <= 1e-13 * e0);
            cur = next;
        }
    }
}

#[test]
fn boris_energy_bounded_on_uniform_penning() {
    let f = FieldModel::penning_ideal(10.0, 100.0);
    let s = Stepper::new(StepperConfig::new(MethodId::BorisCayley, 0.02 / FC)).unwrap();
    let mut obs = energy_error_observer(&f, unit(), &y0()).unwrap();
    run(&s, &f, &unit(), &y0(), 10_000, 1, &mut [&mut obs]).unwrap();
    assert!(obs.max < 1e-2, "{}", obs.max);
    assert!(obs.max > 0.0);
}

#[test]
fn forward_then_backward_returns_home() {
    let f = FieldModel::penning_bottle(10.0, 100.0, 200.0);
    let h = 0.05 / FC;
    for (m, tol) in [(MethodId::BorisCayley, 1e-10), (MethodId::ChinB, 1e-10), (MethodId::ImplMidpoint, 1e-8)] {
        let s = Stepper::new(StepperConfig::new(m, h)).unwrap();
        let mut y = y0();
        for _ in 0..1000 {
            y = s.step_h(h, &f, &unit(), &y).unwrap();
        }
        for _ in 0..1000 {
            y = s.step_h(-h, &f, &unit(), &y).unwrap();
        }
        assert!(y.max_abs_diff(&y0()) <= tol, "{m}: {}", y.max_abs_diff(&y0()));
    }
}

#[test]
fn scovel_loses_symmetry_on_nonuniform_fields() {
    let f = FieldModel::penning_bottle(10.0, 100.0, 200.0);
    let s = Stepper::new(StepperConfig::new(MethodId::Scovel, 0.05 / FC)).unwrap();
    assert!(!s.exact_on(&f));
    let d = check_time_symmetry(|h, y| s.step_h(h, &f, &unit(), y), &y0(), 0.05 / FC).unwrap();
    assert!(d > 1e-8, "{d:e}");
}
