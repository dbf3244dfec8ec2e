use magsplit::integrators::boris_crossproduct_oracle;
use magsplit::smallmat::*;
use magsplit_oracles::{cayley_exact, phi_series, resolvent_exact};
use proptest::prelude::*;

const ANGLES: [f64; 6] = [1e-8, 1e-4, 0.1, 1.0, 3.0, 10.0];

fn arr(m: &Mat3) -> [[f64; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

fn max_diff(a: &Mat3, b: &[[f64; 3]; 3]) -> f64 {
    (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| (a[(i, j)] - b[i][j]).abs()).fold(0.0, f64::max)
}

fn directions() -> Vec<Vec3> {
    vec![
        Vec3::new(0.0, 0.0, 1.0),
        Vec3::new(1.0, 2.0, -2.0) / 3.0,
        Vec3::new(-0.48, 0.6, 0.64),
    ]
}

#[test]
fn phi_kernels_match_exact_series() {
    let h = 0.5;
    for x in ANGLES {
        for n in directions() {
            let w = n * (x / h);
            let z = arr(&(skew(&w) * h));
            for (l, m) in [(0, rodrigues_exp(h, &w)), (1, phi1_mat(h, &w)), (2, phi2_mat(h, &w))] {
                let d = max_diff(&m, &phi_series(l, &z));
                assert!(d <= 1e-12, "phi_{l} at x = {x}: {d:e}");
                let d = max_diff(&phi_mat(l, h, &w), &phi_series(l, &z));
                assert!(d <= 1e-12, "phi_mat({l}) at x = {x}: {d:e}");
            }
            let d = max_diff(&phi_mat(3, h, &w), &phi_series(3, &z));
            assert!(d <= 1e-12, "phi_3 at x = {x}: {d:e}");
        }
    }
}

#[test]
fn cayley_and_resolvent_match_exact_inverse() {
    for x in ANGLES {
        for n in directions() {
            let hh = 0.01;
            let w = n * (x / hh);
            let a = arr(&(skew(&w) * hh));
            assert!(max_diff(&cayley(hh, &w), &cayley_exact(&a)) <= 1e-12, "cayley at {x}");
            assert!(max_diff(&resolvent(hh, &w), &resolvent_exact(&a)) <= 1e-12, "resolvent at {x}");
        }
    }
}

#[test]
fn augmented_phi_block_identity() {
    let (h, m) = (0.3, 2.0);
    for x in [0.1, 1.0, 3.0] {
        let w = Vec3::new(0.36, -0.48, 0.8) * (x / h);
        let om = skew(&w);
        let mut big = [[0.0; 6]; 6];
        for i in 0..3 {
            big[i][i + 3] = h / m;
            for j in 0..3 {
                big[i + 3][j + 3] = h * om[(i, j)];
            }
        }
        for l in 0..=2usize {
            let s = phi_series(l, &big);
            let inv_fact = [1.0, 1.0, 0.5][l];
            let upper = phi_mat(l + 1, h, &w) * (h / m);
            let lower = phi_mat(l, h, &w);
            for i in 0..3 {
                for j in 0..3 {
                    let id = if i == j { inv_fact } else { 0.0 };
                    assert!((s[i][j] - id).abs() <= 1e-13);
                    assert!((s[i][j + 3] - upper[(i, j)]).abs() <= 1e-13, "l={l} upper");
                    assert!(s[i + 3][j].abs() <= 1e-13);
                    assert!((s[i + 3][j + 3] - lower[(i, j)]).abs() <= 1e-13, "l={l} lower");
                }
            }
        }
    }
}

fn vec3() -> impl Strategy<Value = Vec3> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b, c)| Vec3::new(a, b, c))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn rotations_are_orthogonal(n in vec3(), x in 0.0..20.0f64, h in 0.01..2.0f64) {
        prop_assume!(n.norm() > 1e-3);
        let w = n.normalize() * (x / h);
        for r in [rodrigues_exp(h, &w), cayley(0.5 * h, &w)] {
            prop_assert!((r.transpose() * r - Mat3::identity()).amax() <= 1e-13);
            prop_assert!((r.determinant() - 1.0).abs() <= 1e-13);
            prop_assert!((r * w - w).amax() <= 1e-13 * w.norm().max(1.0));
        }
    }

    #[test]
    fn exp_preserves_norm_and_field_projection(n in vec3(), p in vec3(), x in 0.0..20.0f64) {
        prop_assume!(n.norm() > 1e-3);
        let w = n.normalize() * x;
        let p1 = rodrigues_exp(1.0, &w) * p;
        prop_assert!((p1.norm() - p.norm()).abs() <= 1e-14);
        prop_assert!((p1.dot(&w) - p.dot(&w)).abs() <= 1e-13 * x.max(1.0));
    }

    #[test]
    fn skew_identities(w in vec3(), p in vec3()) {
        let om = skew(&w);
        prop_assert!((om * p - p.cross(&w)).amax() <= 1e-15);
        let s = OmegaScalars::new(&w);
        prop_assert!((om * om - s.skew_squared()).amax() <= 1e-15);
        prop_assert!((om * om * om + om * s.omega_c.powi(2)).amax() <= 1e-15);
    }

    #[test]
    fn cayley_identities(w in vec3(), hh in 0.0..5.0f64) {
        let om = skew(&w);
        let id = Mat3::identity();
        let res = resolvent(hh, &w);
        prop_assert!(((id - om * hh) * res - id).amax() <= 1e-13);
        prop_assert!((res * (id + om * hh) - cayley(hh, &w)).amax() <= 1e-13);
        prop_assert!((cayley(hh, &w) * cayley(-hh, &w) - id).amax() <= 1e-13);
    }

    #[test]
    fn cross_product_boris_matches_cayley(w in vec3(), p in vec3(), h in 0.0..3.0f64, scale in 0.0..100.0f64) {
        let w = w * scale;
        let a = boris_crossproduct_oracle(h, &w, &p);
        let b = cayley(0.5 * h, &w) * p;
        prop_assert!((a - b).amax() <= 1e-14 * p.norm().max(1e-300));
    }
}
