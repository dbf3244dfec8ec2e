//! Splitting integrators for charged particles in static electromagnetic fields.
//!
//! The equations of motion `q' = p/m`, `p' = c e(q) + Ω(q) p` are split into
//! exactly solvable pieces, which are recombined into symmetric one-step maps.

pub mod analytic;
pub mod error;
pub mod fields;
pub mod flows;
pub mod integrators;
pub mod smallmat;
pub mod structure;

pub use error::{Error, Result};
pub use fields::{Field, FieldModel, ParticleParams};
pub use flows::State;
pub use integrators::{Composition, MethodId, Stepper, StepperConfig};
pub use smallmat::{Mat3, Vec3};
