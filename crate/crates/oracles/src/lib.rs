//! Reference computations that share no code with the integrators: big
//! fixed-point Taylor sums, exact rational matrix inversion and a classical
//! RK4 driver.

use num::{BigInt, BigRational, FromPrimitive, One, ToPrimitive, Zero};

type Q = BigRational;
type QMat<const N: usize> = [[Q; N]; N];

fn to_q(x: f64) -> Q {
    Q::from_f64(x).expect("finite input")
}

fn to_f64(x: &Q) -> f64 {
    x.to_f64().expect("representable result")
}

fn q_mat<const N: usize>(a: &[[f64; N]; N]) -> QMat<N> {
    std::array::from_fn(|i| std::array::from_fn(|j| to_q(a[i][j])))
}

fn f_mat<const N: usize>(a: &QMat<N>) -> [[f64; N]; N] {
    std::array::from_fn(|i| std::array::from_fn(|j| to_f64(&a[i][j])))
}

fn identity<const N: usize>() -> QMat<N> {
    std::array::from_fn(|i| std::array::from_fn(|j| if i == j { Q::one() } else { Q::zero() }))
}

fn mul<const N: usize>(a: &QMat<N>, b: &QMat<N>) -> QMat<N> {
    std::array::from_fn(|i| {
        std::array::from_fn(|j| (0..N).fold(Q::zero(), |acc, k| acc + &a[i][k] * &b[k][j]))
    })
}

fn inf_norm<const N: usize>(a: &[[f64; N]; N]) -> f64 {
    a.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Fractional bits of the fixed-point big integers used by [`phi_series`].
const FRAC_BITS: u32 = 384;

type Fix<const N: usize> = [[BigInt; N]; N];

fn to_fix(x: f64) -> BigInt {
    (to_q(x) * Q::from_integer(BigInt::one() << FRAC_BITS)).round().to_integer()
}

fn fix_to_f64(x: &BigInt) -> f64 {
    to_f64(&Q::new(x.clone(), BigInt::one() << FRAC_BITS))
}

/// `φ_ℓ(Z) = Σ_j Z^j / (j+ℓ)!` summed in 384-bit fixed point until the tail is
/// below `1e−60 · max(1, ‖Z‖)`, then rounded once to `f64`.
pub fn phi_series<const N: usize>(l: usize, z: &[[f64; N]; N]) -> [[f64; N]; N] {
    let zf: Fix<N> = std::array::from_fn(|i| std::array::from_fn(|j| to_fix(z[i][j])));
    let norm = inf_norm(z);
    let one = BigInt::one() << FRAC_BITS;
    let lfact = (1..=l).fold(BigInt::one(), |a, k| a * BigInt::from(k));
    // term_j = Z^j / (j+ℓ)!
    let mut term: Fix<N> =
        std::array::from_fn(|i| std::array::from_fn(|j| if i == j { &one / &lfact } else { BigInt::zero() }));
    let mut sum = term.clone();
    let mut bound = 1.0 / (1..=l).fold(1.0, |a, k| a * k as f64);
    let mut j = 0usize;
    loop {
        j += 1;
        let d = BigInt::from(j + l);
        term = std::array::from_fn(|r| {
            std::array::from_fn(|c| {
                let acc = (0..N).fold(BigInt::zero(), |acc, k| acc + &term[r][k] * &zf[k][c]);
                (acc >> FRAC_BITS) / &d
            })
        });
        for (srow, trow) in sum.iter_mut().zip(term.iter()) {
            for (s, t) in srow.iter_mut().zip(trow.iter()) {
                *s += t;
            }
        }
        bound *= norm / (j + l) as f64;
        // geometric tail once the ratio drops below one half
        if norm / ((j + l + 1) as f64) < 0.5 && bound < 1e-60 * norm.max(1.0) {
            break;
        }
    }
    std::array::from_fn(|r| std::array::from_fn(|c| fix_to_f64(&sum[r][c])))
}

/// Exact `(I − A)⁻¹` by Gauss–Jordan elimination over the rationals.
pub fn resolvent_exact<const N: usize>(a: &[[f64; N]; N]) -> [[f64; N]; N] {
    f_mat(&resolvent_q(a))
}

fn resolvent_q<const N: usize>(a: &[[f64; N]; N]) -> QMat<N> {
    let aq = q_mat(a);
    let mut m: QMat<N> = std::array::from_fn(|i| {
        std::array::from_fn(|j| if i == j { Q::one() - &aq[i][j] } else { -aq[i][j].clone() })
    });
    let mut inv = identity::<N>();
    for col in 0..N {
        let pivot = (col..N).find(|&r| !m[r][col].is_zero()).expect("nonsingular matrix");
        m.swap(col, pivot);
        inv.swap(col, pivot);
        let p = m[col][col].clone();
        for k in 0..N {
            m[col][k] = &m[col][k] / &p;
            inv[col][k] = &inv[col][k] / &p;
        }
        for r in 0..N {
            if r != col && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                for k in 0..N {
                    let (mk, ik) = (&m[col][k] * &f, &inv[col][k] * &f);
                    m[r][k] -= mk;
                    inv[r][k] -= ik;
                }
            }
        }
    }
    inv
}

/// Exact Cayley transform `(I − A)⁻¹ (I + A)`.
pub fn cayley_exact<const N: usize>(a: &[[f64; N]; N]) -> [[f64; N]; N] {
    let aq = q_mat(a);
    let plus: QMat<N> = std::array::from_fn(|i| {
        std::array::from_fn(|j| if i == j { Q::one() + &aq[i][j] } else { aq[i][j].clone() })
    });
    f_mat(&mul(&resolvent_q(a), &plus))
}

/// Classical fourth-order Runge–Kutta with `n` uniform substeps over `[0, t]`.
pub fn rk4<const N: usize, F>(f: F, y0: [f64; N], t: f64, n: usize) -> [f64; N]
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    let dt = t / n as f64;
    let axpy = |y: &[f64; N], k: &[f64; N], s: f64| -> [f64; N] { std::array::from_fn(|i| y[i] + s * k[i]) };
    let mut y = y0;
    for _ in 0..n {
        let k1 = f(&y);
        let k2 = f(&axpy(&y, &k1, 0.5 * dt));
        let k3 = f(&axpy(&y, &k2, 0.5 * dt));
        let k4 = f(&axpy(&y, &k3, dt));
        y = std::array::from_fn(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
    y
}
