//! Closed-form 3×3 matrix functions of the skew-symmetric gyro matrix.
//!
//! For a gyro-vector `ω` the matrix `Ω = skew(ω)` satisfies `Ω p = p × ω`,
//! `Ω² = ωωᵀ − ω_c² I` and `Ω³ = −ω_c² Ω` with `ω_c = ‖ω‖`. Every entire
//! function of `hΩ` therefore collapses to `αI + βΩ + γΩ²`, and the
//! coefficients only depend on the rotation angle `x = h ω_c`.
//!
//! The coefficient functions used here are
//!
//! ```text
//! g_n(x) = Σ_{k≥0} (−1)^k x^{2k} / (2k + n)!
//! ```
//!
//! so that `exp(hΩ) = I + h g₁ Ω + h² g₂ Ω²`,
//! `φ₁(hΩ) = I + h g₂ Ω + h² g₃ Ω²` and `φ₂(hΩ) = ½I + h g₃ Ω + h² g₄ Ω²`.

use nalgebra::{Matrix3, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Below this angle the coefficients are summed from their Taylor series.
///
/// `g₃` and `g₄` lose `ε/x³`-ish relative accuracy in closed form; at 0.5 the
/// direct formulas are good to a few 1e−15 and the truncated series is exact
/// to machine precision, so both branches agree at the crossover.
pub const SERIES_THRESHOLD: f64 = 0.5;
const SERIES_TERMS: usize = 10;

/// Gyro-vector together with its magnitude, computed once per kernel call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaScalars {
    pub omega: Vec3,
    pub omega_c: f64,
}

impl OmegaScalars {
    pub fn new(omega: &Vec3) -> Self {
        let omega_c = (omega.x * omega.x + omega.y * omega.y + omega.z * omega.z).sqrt();
        Self { omega: *omega, omega_c }
    }

    /// `Ω² = ωωᵀ − ω_c² I`, assembled entrywise so the result is exactly symmetric.
    pub fn skew_squared(&self) -> Mat3 {
        let w = self.omega;
        let wc2 = self.omega_c * self.omega_c;
        Mat3::new(
            w.x * w.x - wc2, w.x * w.y, w.x * w.z,
            w.y * w.x, w.y * w.y - wc2, w.y * w.z,
            w.z * w.x, w.z * w.y, w.z * w.z - wc2,
        )
    }
}

/// The matrix `Ω` with `Ω p = p × ω`.
#[rustfmt::skip]
pub fn skew(omega: &Vec3) -> Mat3 {
    Mat3::new(
         0.0,      omega.z, -omega.y,
        -omega.z,  0.0,      omega.x,
         omega.y, -omega.x,  0.0,
    )
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

fn coeff_series(n: usize, x: f64) -> f64 {
    let x2 = x * x;
    let mut term = 1.0 / factorial(n);
    let mut sum = term;
    for k in 1..SERIES_TERMS {
        let a = (2 * k + n - 1) as f64;
        let b = (2 * k + n) as f64;
        term *= -x2 / (a * b);
        sum += term;
    }
    sum
}

fn coeff_closed(n: usize, x: f64) -> f64 {
    let half_sin = (0.5 * x).sin();
    // 1 − cos x written without cancellation
    let one_minus_cos = 2.0 * half_sin * half_sin;
    match n {
        1 => x.sin() / x,
        2 => one_minus_cos / (x * x),
        3 => (x - x.sin()) / (x * x * x),
        4 => (0.5 * x * x - one_minus_cos) / (x * x * x * x),
        5 => (x * x * x / 6.0 - x + x.sin()) / (x * x * x * x * x),
        _ => unreachable!("coefficient index {n} is not used"),
    }
}

/// `g_n(x)` for `n ∈ 1..=5`.
pub fn coeff(n: usize, x: f64) -> f64 {
    assert!((1..=5).contains(&n), "coefficient index must be in 1..=5");
    if x.abs() < SERIES_THRESHOLD {
        coeff_series(n, x)
    } else {
        coeff_closed(n, x)
    }
}

fn combine(diag: f64, c1: f64, c2: f64, s: &OmegaScalars) -> Mat3 {
    Mat3::identity() * diag + skew(&s.omega) * c1 + s.skew_squared() * c2
}

/// Rodrigues formula for `exp(hΩ)`.
pub fn rodrigues_exp(h: f64, omega: &Vec3) -> Mat3 {
    let s = OmegaScalars::new(omega);
    let x = h * s.omega_c;
    combine(1.0, h * coeff(1, x), h * h * coeff(2, x), &s)
}

/// `φ₁(hΩ) = (exp(hΩ) − I)/(hΩ)` in closed form.
pub fn phi1_mat(h: f64, omega: &Vec3) -> Mat3 {
    let s = OmegaScalars::new(omega);
    let x = h * s.omega_c;
    combine(1.0, h * coeff(2, x), h * h * coeff(3, x), &s)
}

/// `φ₂(hΩ) = (φ₁(hΩ) − I)/(hΩ)` in closed form.
pub fn phi2_mat(h: f64, omega: &Vec3) -> Mat3 {
    let s = OmegaScalars::new(omega);
    let x = h * s.omega_c;
    combine(0.5, h * coeff(3, x), h * h * coeff(4, x), &s)
}

/// `φ_ℓ(hΩ)` for `ℓ ∈ 0..=3`, with `φ₀ = exp`.
pub fn phi_mat(l: usize, h: f64, omega: &Vec3) -> Mat3 {
    assert!(l <= 3, "phi index must be in 0..=3");
    let s = OmegaScalars::new(omega);
    let x = h * s.omega_c;
    let diag = [1.0, 1.0, 0.5, 1.0 / 6.0][l];
    combine(diag, h * coeff(l + 1, x), h * h * coeff(l + 2, x), &s)
}

/// `exp(hΩ)`, `φ₁(hΩ)` and `φ₂(hΩ)` sharing a single trigonometric evaluation.
#[derive(Debug, Clone, Copy)]
pub struct PhiKernels {
    pub exp: Mat3,
    pub phi1: Mat3,
    pub phi2: Mat3,
}

impl PhiKernels {
    pub fn new(h: f64, omega: &Vec3) -> Self {
        let s = OmegaScalars::new(omega);
        let x = h * s.omega_c;
        let g: [f64; 4] = std::array::from_fn(|i| coeff(i + 1, x));
        let om = skew(&s.omega);
        let om2 = s.skew_squared();
        let id = Mat3::identity();
        let h2 = h * h;
        Self {
            exp: id + om * (h * g[0]) + om2 * (h2 * g[1]),
            phi1: id + om * (h * g[1]) + om2 * (h2 * g[2]),
            phi2: id * 0.5 + om * (h * g[2]) + om2 * (h2 * g[3]),
        }
    }
}

fn cayley_kappa(hhalf: f64, s: &OmegaScalars) -> f64 {
    1.0 / (1.0 + hhalf * hhalf * s.omega_c * s.omega_c)
}

/// Cayley transform `R(hhalf·Ω) = (I − hhalf·Ω)⁻¹ (I + hhalf·Ω)`.
///
/// The Boris rotation uses `hhalf = h/2`.
pub fn cayley(hhalf: f64, omega: &Vec3) -> Mat3 {
    let s = OmegaScalars::new(omega);
    let k = cayley_kappa(hhalf, &s);
    combine(1.0, 2.0 * k * hhalf, 2.0 * k * hhalf * hhalf, &s)
}

/// Resolvent `(I − hhalf·Ω)⁻¹`.
pub fn resolvent(hhalf: f64, omega: &Vec3) -> Mat3 {
    let s = OmegaScalars::new(omega);
    let k = cayley_kappa(hhalf, &s);
    combine(1.0, k * hhalf, k * hhalf * hhalf, &s)
}
