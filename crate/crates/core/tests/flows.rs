use magsplit::fields::{eval_force, eval_omega};
use magsplit::flows::*;
use magsplit::smallmat::skew;
use magsplit::{FieldModel, ParticleParams, State, Vec3};
use magsplit_oracles::rk4;

fn to_arr(y: &State) -> [f64; 6] {
    [y.q.x, y.q.y, y.q.z, y.p.x, y.p.y, y.p.z]
}

fn from_arr(a: &[f64; 6]) -> State {
    State::new(Vec3::new(a[0], a[1], a[2]), Vec3::new(a[3], a[4], a[5]))
}

fn linear_rhs(m: f64, drift: bool, w: Vec3, force: Vec3) -> impl Fn(&[f64; 6]) -> [f64; 6] {
    move |y| {
        let s = from_arr(y);
        let dq = if drift { s.p / m } else { Vec3::zeros() };
        let dp = skew(&w) * s.p + force;
        to_arr(&State::new(dq, dp))
    }
}

fn y0() -> State {
    State::new(Vec3::new(0.3, -0.2, 0.5), Vec3::new(0.4, 1.0, -0.7))
}

#[test]
fn helix_matches_rk4() {
    let (m, h) = (1.7, 0.8);
    for w in [Vec3::new(0.0, 0.0, 3.0), Vec3::new(1.0, -2.0, 2.5), Vec3::new(1e-6, 0.0, 0.0)] {
        let exact = rk4(linear_rhs(m, true, w, Vec3::zeros()), to_arr(&y0()), h, 1000);
        let got = flow_tb_frozen(h, m, &w, &y0());
        assert!(got.max_abs_diff(&from_arr(&exact)) <= 1e-11, "ω = {w:?}");
        let rot = flow_b_frozen(h, &w, &y0());
        let exact = rk4(linear_rhs(m, false, w, Vec3::zeros()), to_arr(&y0()), h, 1000);
        assert!(rot.max_abs_diff(&from_arr(&exact)) <= 1e-11);
    }
}

#[test]
fn kick_rotation_matches_rk4() {
    let pp = ParticleParams::new(1.0, 1.0).unwrap();
    let h = 0.05;
    for f in [FieldModel::penning_bottle(10.0, 100.0, 200.0), FieldModel::penning_asym(10.0, 100.0, 50.0)] {
        let y = y0();
        let w = eval_omega(&f, &pp, &y.q).unwrap();
        let force = eval_force(&f, &pp, &y.q).unwrap();
        let exact = rk4(linear_rhs(pp.m, false, w, force), to_arr(&y), h, 20000);
        let got = flow_eb(h, &f, &pp, &y).unwrap();
        let d = got.max_abs_diff(&from_arr(&exact));
        assert!(d <= 1e-11, "{d:e}");
    }
}

#[test]
fn constant_field_flow_matches_rk4() {
    let (m, h) = (2.0, 1.3);
    let w = Vec3::new(0.7, 0.2, -1.9);
    let force = Vec3::new(0.5, -1.0, 0.25);
    let exact = rk4(linear_rhs(m, true, w, force), to_arr(&y0()), h, 1000);
    let got = flow_full_const(h, m, &w, &force, &y0());
    assert!(got.max_abs_diff(&from_arr(&exact)) <= 1e-11);
}

#[test]
fn rotation_example_quarter_turn_family() {
    // ω = (0,0,100), h = 0.02: angle 2, p = (0,1,0) ↦ (sin 2, cos 2, 0)
    let y = State::new(Vec3::zeros(), Vec3::new(0.0, 1.0, 0.0));
    let r = flow_b_frozen(0.02, &Vec3::new(0.0, 0.0, 100.0), &y);
    assert!((r.p - Vec3::new(2f64.sin(), 2f64.cos(), 0.0)).amax() <= 1e-15);
}

#[test]
fn subflows_are_time_symmetric() {
    let pp = ParticleParams::new(1.3, -0.7).unwrap();
    let f = FieldModel::penning_asym(10.0, 100.0, 50.0);
    let w = Vec3::new(3.0, 1.0, -2.0);
    let y = y0();
    let h = 0.37;
    assert!(flow_tb_frozen(-h, pp.m, &w, &flow_tb_frozen(h, pp.m, &w, &y)).max_abs_diff(&y) <= 1e-14);
    assert!(flow_eb(-h, &f, &pp, &flow_eb(h, &f, &pp, &y).unwrap()).unwrap().max_abs_diff(&y) <= 1e-12);
    let force = Vec3::new(1.0, 0.0, -1.0);
    let fwd = flow_full_const(h, pp.m, &w, &force, &y);
    assert!(flow_full_const(-h, pp.m, &w, &force, &fwd).max_abs_diff(&y) <= 1e-14);
}
