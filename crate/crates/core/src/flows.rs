//! Exact flows of the split vector fields.
//!
//! The right-hand side `q' = p/m`, `p' = F(q) + Ω(q)p` is split into the drift
//! `T`, the electric kick `E` and the magnetic rotation `B`. Each map below is
//! the exact solution of one piece (or of a sum of pieces with the magnetic
//! field frozen at a given point), so every one of them is time symmetric.

use nalgebra::Vector6;

use crate::error::Result;
use crate::fields::{eval_force, eval_omega, Field, ParticleParams};
use crate::smallmat::{rodrigues_exp, PhiKernels, Vec3};

/// Phase-space point: position `q` and kinetic momentum `p = m q̇`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State {
    pub q: Vec3,
    pub p: Vec3,
}

impl State {
    pub fn new(q: Vec3, p: Vec3) -> Self {
        Self { q, p }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(self.q.x, self.q.y, self.q.z, self.p.x, self.p.y, self.p.z)
    }

    pub fn from_vector(y: &Vector6<f64>) -> Self {
        Self { q: Vec3::new(y[0], y[1], y[2]), p: Vec3::new(y[3], y[4], y[5]) }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.p.iter()).all(|v| v.is_finite())
    }

    /// Componentwise max-norm distance.
    pub fn max_abs_diff(&self, other: &State) -> f64 {
        (self.to_vector() - other.to_vector()).amax()
    }

    /// Average of two states, used to freeze the field at a midpoint.
    pub fn midpoint(&self, other: &State) -> State {
        State { q: (self.q + other.q) * 0.5, p: (self.p + other.p) * 0.5 }
    }
}

/// Drift: `q₁ = q₀ + (h/m) p₀`.
pub fn flow_t(h: f64, m: f64, y: &State) -> State {
    State { q: y.q + y.p * (h / m), p: y.p }
}

/// Electric kick: `p₁ = p₀ + h F(q₀)`.
pub fn flow_e<F: Field + ?Sized>(h: f64, field: &F, pp: &ParticleParams, y: &State) -> Result<State> {
    let force = eval_force(field, pp, &y.q)?;
    Ok(State { q: y.q, p: y.p + force * h })
}

/// Rotation of the momentum about a frozen gyro-vector: `p₁ = exp(hΩ*) p₀`.
pub fn flow_b_frozen(h: f64, omega_star: &Vec3, y: &State) -> State {
    State { q: y.q, p: rodrigues_exp(h, omega_star) * y.p }
}

/// Drift plus rotation about a frozen gyro-vector (helical motion).
pub fn flow_tb_frozen(h: f64, m: f64, omega_star: &Vec3, y: &State) -> State {
    let k = PhiKernels::new(h, omega_star);
    State { q: y.q + k.phi1 * y.p * (h / m), p: k.exp * y.p }
}

/// Electric kick plus rotation with both fields taken at `q₀`, which stays
/// fixed along this subflow (variation of constants).
pub fn flow_eb<F: Field + ?Sized>(h: f64, field: &F, pp: &ParticleParams, y: &State) -> Result<State> {
    let force = eval_force(field, pp, &y.q)?;
    let omega = eval_omega(field, pp, &y.q)?;
    let k = PhiKernels::new(h, &omega);
    Ok(State { q: y.q, p: k.exp * y.p + k.phi1 * force * h })
}

/// Full flow for spatially constant `ω` and `F`.
pub fn flow_full_const(h: f64, m: f64, omega: &Vec3, force: &Vec3, y: &State) -> State {
    let k = PhiKernels::new(h, omega);
    State {
        q: y.q + k.phi1 * y.p * (h / m) + k.phi2 * force * (h * h / m),
        p: k.exp * y.p + k.phi1 * force * h,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::FieldModel;
    use approx::assert_abs_diff_eq;

    fn state(q: [f64; 3], p: [f64; 3]) -> State {
        State::new(Vec3::from(q), Vec3::from(p))
    }

    #[test]
    fn drift() {
        let y = state([0.0; 3], [1.0, 2.0, 3.0]);
        let y1 = flow_t(0.5, 1.0, &y);
        assert_eq!(y1, state([0.5, 1.0, 1.5], [1.0, 2.0, 3.0]));
        assert_eq!(flow_t(0.0, 2.0, &y), y);
        let y = state([0.25, -1.0, 0.5], [1.0, 2.0, 3.0]);
        assert_eq!(flow_t(-0.5, 1.0, &flow_t(0.5, 1.0, &y)), y);
    }

    #[test]
    fn electric_kick_in_penning_trap() {
        let f = FieldModel::penning_ideal(10.0, 100.0);
        let pp = ParticleParams::new(1.0, 1.0).unwrap();
        let y = state([1.0 / 3.0, 0.0, 0.5], [0.0, 1.0, 0.0]);
        let y1 = flow_e(0.1, &f, &pp, &y).unwrap();
        assert_eq!(y1.q, y.q);
        assert_abs_diff_eq!(y1.p, y.p + Vec3::new(1.0 / 3.0, 0.0, -1.0), epsilon = 1e-15);
        let back = flow_e(-0.1, &f, &pp, &y1).unwrap();
        assert_abs_diff_eq!(back.p, y.p, epsilon = 1e-15);

        let g = FieldModel::gradb2d();
        let y = state([0.8, 0.0, 0.0], [0.1, 0.2, 0.3]);
        assert_eq!(flow_e(0.3, &g, &pp, &y).unwrap(), y);
    }

    #[test]
    fn frozen_rotation_limits() {
        let y = state([1.0, 2.0, 3.0], [0.3, -0.4, 1.2]);
        assert_eq!(flow_b_frozen(0.7, &Vec3::zeros(), &y), y);
        assert_eq!(flow_tb_frozen(0.7, 2.0, &Vec3::zeros(), &y), flow_t(0.7, 2.0, &y));
        assert_eq!(flow_tb_frozen(0.0, 2.0, &Vec3::new(1.0, 2.0, 3.0), &y), y);
        let w = Vec3::new(3.0, -1.0, 2.0);
        assert_abs_diff_eq!(flow_b_frozen(0.4, &w, &y).p.norm(), y.p.norm(), epsilon = 1e-14);
    }

    #[test]
    fn eb_flow_limits() {
        let pp = ParticleParams::new(1.0, 1.0).unwrap();
        let y = state([0.5, 0.2, 0.1], [0.3, -0.4, 1.2]);
        let u = FieldModel::uniform(Vec3::new(0.0, 0.0, 3.0));
        assert_eq!(flow_eb(0.2, &u, &pp, &y).unwrap(), flow_b_frozen(0.2, &Vec3::new(0.0, 0.0, 3.0), &y));
        let free = FieldModel::uniform(Vec3::zeros());
        assert_eq!(flow_eb(0.2, &free, &pp, &y).unwrap(), flow_e(0.2, &free, &pp, &y).unwrap());
    }

    #[test]
    fn constant_field_flow_reduces_to_free_fall() {
        let y = state([0.5, 0.2, 0.1], [0.3, -0.4, 1.2]);
        let f = Vec3::new(1.0, -2.0, 0.5);
        let (h, m) = (0.3, 2.0);
        let y1 = flow_full_const(h, m, &Vec3::zeros(), &f, &y);
        assert_abs_diff_eq!(y1.q, y.q + y.p * (h / m) + f * (h * h / (2.0 * m)), epsilon = 1e-15);
        assert_abs_diff_eq!(y1.p, y.p + f * h, epsilon = 1e-15);
        assert_eq!(flow_full_const(h, m, &Vec3::zeros(), &Vec3::zeros(), &y), flow_t(h, m, &y));
    }
}
