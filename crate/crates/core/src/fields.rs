//! Static electromagnetic field models.
//!
//! A field supplies the electric field `e(q)`, the magnetic field `b(q)` and,
//! when it exists, the scalar potential `Φ(q)` with `e = −∇Φ`. The particle
//! sees the force `F(q) = c e(q)` and the gyro-vector `ω(q) = (c/m) b(q)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::smallmat::Vec3;

/// Mass and charge of the particle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleParams {
    pub m: f64,
    pub c: f64,
}

impl ParticleParams {
    pub fn new(m: f64, c: f64) -> Result<Self> {
        let pp = Self { m, c };
        pp.validate()?;
        Ok(pp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m.is_finite() && self.m > 0.0) {
            return Err(Error::Config(format!("mass must be positive, got {}", self.m)));
        }
        if !(self.c.is_finite() && self.c != 0.0) {
            return Err(Error::Config(format!("charge must be nonzero, got {}", self.c)));
        }
        Ok(())
    }

    /// Charge-to-mass ratio `c/m`.
    pub fn ratio(&self) -> f64 {
        self.c / self.m
    }
}

/// A static field model.
pub trait Field: Send + Sync {
    fn name(&self) -> &str;

    /// Electric field `e(q)`.
    fn electric(&self, q: &Vec3) -> Result<Vec3>;

    /// Magnetic field `b(q)`.
    fn magnetic(&self, q: &Vec3) -> Result<Vec3>;

    /// Scalar potential `Φ(q)`; fields without one return [`Error::Unsupported`].
    fn potential(&self, _q: &Vec3) -> Result<f64> {
        Err(Error::Unsupported(format!("field `{}` has no scalar potential", self.name())))
    }

    fn uniform_b(&self) -> bool;

    fn has_potential(&self) -> bool;

    /// `e(q)` and `b(q)` in one call.
    fn fields(&self, q: &Vec3) -> Result<(Vec3, Vec3)> {
        Ok((self.electric(q)?, self.magnetic(q)?))
    }
}

/// Trap parameters shared by the Penning family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenningParams {
    pub kappa: f64,
    pub b_z: f64,
    #[serde(default)]
    pub beta: f64,
}

impl PenningParams {
    /// Cyclotron frequency `(c/m) b_z` of the homogeneous part.
    pub fn omega_c(&self, pp: &ParticleParams) -> f64 {
        pp.ratio() * self.b_z
    }

    /// Axial frequency `√(2 (c/m) κ)`.
    pub fn omega_z(&self, pp: &ParticleParams) -> f64 {
        (2.0 * pp.ratio() * self.kappa).sqrt()
    }

    /// Radial confinement requires `ω_c² > 2 ω_z²`.
    pub fn is_stable(&self, pp: &ParticleParams) -> bool {
        let wc = self.omega_c(pp);
        let wz = self.omega_z(pp);
        pp.ratio() * self.kappa > 0.0 && wc * wc > 2.0 * wz * wz
    }
}

/// Built-in field models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldModel {
    /// Homogeneous magnetic field, no electric field.
    Uniform { b: [f64; 3] },
    /// `b = (0, 0, 1/x²)` with `Φ = 0`, defined for `x > 0`.
    Gradb2d,
    /// Quadrupole `e = κ(x, y, −2z)` with homogeneous `b = (0, 0, b_z)`.
    PenningIdeal { kappa: f64, b_z: f64 },
    /// Quadrupole trap with a magnetic bottle of strength `β`.
    PenningBottle { kappa: f64, b_z: f64, beta: f64 },
    /// Quadrupole trap with the curl- and divergence-free asymmetric field
    /// `b = b_z(1/3, 0, 1) + β(y − z, x + z, y − x)`.
    PenningAsym { kappa: f64, b_z: f64, beta: f64 },
}

impl FieldModel {
    pub fn uniform(b: Vec3) -> Self {
        Self::Uniform { b: [b.x, b.y, b.z] }
    }

    pub fn gradb2d() -> Self {
        Self::Gradb2d
    }

    pub fn penning_ideal(kappa: f64, b_z: f64) -> Self {
        Self::PenningIdeal { kappa, b_z }
    }

    pub fn penning_bottle(kappa: f64, b_z: f64, beta: f64) -> Self {
        Self::PenningBottle { kappa, b_z, beta }
    }

    pub fn penning_asym(kappa: f64, b_z: f64, beta: f64) -> Self {
        Self::PenningAsym { kappa, b_z, beta }
    }

    pub fn penning_params(&self) -> Option<PenningParams> {
        match *self {
            Self::PenningIdeal { kappa, b_z } => Some(PenningParams { kappa, b_z, beta: 0.0 }),
            Self::PenningBottle { kappa, b_z, beta } | Self::PenningAsym { kappa, b_z, beta } => {
                Some(PenningParams { kappa, b_z, beta })
            }
            _ => None,
        }
    }

    fn quadrupole(kappa: f64, q: &Vec3) -> Vec3 {
        Vec3::new(kappa * q.x, kappa * q.y, -2.0 * kappa * q.z)
    }
}

impl Field for FieldModel {
    fn name(&self) -> &str {
        match self {
            Self::Uniform { .. } => "uniform",
            Self::Gradb2d => "gradb2d",
            Self::PenningIdeal { .. } => "penning_ideal",
            Self::PenningBottle { .. } => "penning_bottle",
            Self::PenningAsym { .. } => "penning_asym",
        }
    }

    fn electric(&self, q: &Vec3) -> Result<Vec3> {
        match *self {
            Self::Uniform { .. } => Ok(Vec3::zeros()),
            Self::Gradb2d => {
                check_gradb2d_domain(q)?;
                Ok(Vec3::zeros())
            }
            Self::PenningIdeal { kappa, .. }
            | Self::PenningBottle { kappa, .. }
            | Self::PenningAsym { kappa, .. } => Ok(Self::quadrupole(kappa, q)),
        }
    }

    fn magnetic(&self, q: &Vec3) -> Result<Vec3> {
        match *self {
            Self::Uniform { b } => Ok(Vec3::from(b)),
            Self::Gradb2d => {
                check_gradb2d_domain(q)?;
                Ok(Vec3::new(0.0, 0.0, 1.0 / (q.x * q.x)))
            }
            Self::PenningIdeal { b_z, .. } => Ok(Vec3::new(0.0, 0.0, b_z)),
            Self::PenningBottle { b_z, beta, .. } => {
                let (x, y, z) = (q.x, q.y, q.z);
                Ok(Vec3::new(-beta * x * z, -beta * y * z, b_z + beta * (z * z - 0.5 * (x * x + y * y))))
            }
            Self::PenningAsym { b_z, beta, .. } => {
                let (x, y, z) = (q.x, q.y, q.z);
                Ok(Vec3::new(
                    b_z / 3.0 + beta * (y - z),
                    beta * (x + z),
                    b_z + beta * (y - x),
                ))
            }
        }
    }

    fn potential(&self, q: &Vec3) -> Result<f64> {
        match *self {
            Self::Uniform { .. } => Ok(0.0),
            Self::Gradb2d => {
                check_gradb2d_domain(q)?;
                Ok(0.0)
            }
            // gauge Φ(0) = 0
            Self::PenningIdeal { kappa, .. }
            | Self::PenningBottle { kappa, .. }
            | Self::PenningAsym { kappa, .. } => {
                Ok(-0.5 * kappa * (q.x * q.x + q.y * q.y) + kappa * q.z * q.z)
            }
        }
    }

    fn uniform_b(&self) -> bool {
        matches!(self, Self::Uniform { .. } | Self::PenningIdeal { .. })
    }

    fn has_potential(&self) -> bool {
        true
    }
}

fn check_gradb2d_domain(q: &Vec3) -> Result<()> {
    if q.x > 0.0 {
        Ok(())
    } else {
        Err(Error::OutOfDomain { field: "gradb2d".into(), q: [q.x, q.y, q.z] })
    }
}

/// Electric force `F(q) = c e(q)`.
pub fn eval_force<F: Field + ?Sized>(field: &F, pp: &ParticleParams, q: &Vec3) -> Result<Vec3> {
    Ok(field.electric(q)? * pp.c)
}

/// Gyro-vector `ω(q) = (c/m) b(q)`.
pub fn eval_omega<F: Field + ?Sized>(field: &F, pp: &ParticleParams, q: &Vec3) -> Result<Vec3> {
    Ok(field.magnetic(q)? * pp.ratio())
}

pub fn eval_potential<F: Field + ?Sized>(field: &F, q: &Vec3) -> Result<f64> {
    if !field.has_potential() {
        return Err(Error::Unsupported(format!("field `{}` has no scalar potential", field.name())));
    }
    field.potential(q)
}

/// Central-difference divergence of `b` at each probe point.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceReport {
    pub divergence: Vec<f64>,
    pub max_abs: f64,
    pub tol: f64,
    pub passed: bool,
}

pub const DIVERGENCE_STEP: f64 = 1e-4;

pub fn divergence_fd<F: Field + ?Sized>(field: &F, q: &Vec3, delta: f64) -> Result<f64> {
    let mut div = 0.0;
    for i in 0..3 {
        let mut qp = *q;
        let mut qm = *q;
        qp[i] += delta;
        qm[i] -= delta;
        div += (field.magnetic(&qp)?[i] - field.magnetic(&qm)?[i]) / (2.0 * delta);
    }
    Ok(div)
}

pub fn check_divergence_free<F: Field + ?Sized>(
    field: &F,
    sample_points: &[Vec3],
    tol: f64,
) -> Result<DivergenceReport> {
    let divergence = sample_points
        .iter()
        .map(|q| divergence_fd(field, q, DIVERGENCE_STEP))
        .collect::<Result<Vec<_>>>()?;
    let max_abs = divergence.iter().fold(0.0_f64, |acc, d| acc.max(d.abs()));
    Ok(DivergenceReport { divergence, max_abs, tol, passed: max_abs <= tol })
}

/// `‖e(q) + ∇Φ(q)‖` with the gradient taken by central differences.
pub fn potential_gradient_residual<F: Field + ?Sized>(field: &F, q: &Vec3, delta: f64) -> Result<f64> {
    let mut grad = Vec3::zeros();
    for i in 0..3 {
        let mut qp = *q;
        let mut qm = *q;
        qp[i] += delta;
        qm[i] -= delta;
        grad[i] = (eval_potential(field, &qp)? - eval_potential(field, &qm)?) / (2.0 * delta);
    }
    Ok((field.electric(q)? + grad).norm())
}
