//! Closed-form motion in the ideal Penning trap.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::{ParticleParams, PenningParams};
use crate::flows::State;
use crate::smallmat::Vec3;

/// Exact solution for a uniform axial field plus the quadrupole potential.
///
/// In the plane, `u = x + iy = A e^{−iω₊t} + B e^{−iω₋t}`; axially `z` is a
/// harmonic oscillator at `ω_z`.
#[derive(Debug, Clone, Copy)]
pub struct PenningExact {
    m: f64,
    omega_plus: f64,
    omega_minus: f64,
    omega_z: f64,
    a: Complex64,
    b: Complex64,
    z0: f64,
    vz0: f64,
}

impl PenningExact {
    pub fn new(params: &PenningParams, pp: &ParticleParams, y0: &State) -> Result<Self> {
        let w = pp.ratio() * params.b_z;
        let wz2 = 2.0 * pp.c * params.kappa / pp.m;
        let disc = w * w - 2.0 * wz2;
        if !(wz2 > 0.0) || !(disc > 0.0) {
            return Err(Error::Config(format!(
                "trap is not confining for kappa = {}, b_z = {}",
                params.kappa, params.b_z
            )));
        }
        let root = disc.sqrt();
        let omega_plus = 0.5 * (w + root);
        let omega_minus = 0.5 * (w - root);
        let u0 = Complex64::new(y0.q.x, y0.q.y);
        let v0 = Complex64::new(y0.p.x, y0.p.y) / pp.m;
        let a = (Complex64::i() * v0 - omega_minus * u0) / (omega_plus - omega_minus);
        Ok(Self {
            m: pp.m,
            omega_plus,
            omega_minus,
            omega_z: wz2.sqrt(),
            a,
            b: u0 - a,
            z0: y0.q.z,
            vz0: y0.p.z / pp.m,
        })
    }

    /// Modified cyclotron frequency.
    pub fn omega_plus(&self) -> f64 {
        self.omega_plus
    }

    /// Magnetron frequency.
    pub fn omega_minus(&self) -> f64 {
        self.omega_minus
    }

    pub fn omega_z(&self) -> f64 {
        self.omega_z
    }

    pub fn state(&self, t: f64) -> State {
        let ep = Complex64::from_polar(1.0, -self.omega_plus * t);
        let em = Complex64::from_polar(1.0, -self.omega_minus * t);
        let u = self.a * ep + self.b * em;
        let du = -Complex64::i() * (self.omega_plus * self.a * ep + self.omega_minus * self.b * em);
        let (s, c) = (self.omega_z * t).sin_cos();
        let z = self.z0 * c + self.vz0 / self.omega_z * s;
        let vz = -self.z0 * self.omega_z * s + self.vz0 * c;
        State::new(Vec3::new(u.re, u.im, z), Vec3::new(du.re, du.im, vz) * self.m)
    }

    /// Phase of the magnetron (slow) component at time `t`.
    pub fn magnetron_phase(&self, t: f64) -> f64 {
        self.b.arg() - self.omega_minus * t
    }
}
