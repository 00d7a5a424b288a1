//! Linear stability analysis and kinetic simulation of a speed-alignment
//! flocking model and its mean-field game counterpart.

// `!(x <= tol)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod config;
pub mod error;
pub mod forward;
pub mod kinetic;
pub mod linalg;
pub mod mfg;
pub mod model;

pub use config::{Branch, ModelConfig};
pub use error::{Error, Result};
pub use model::{Equilibrium, EquilibriumKind};
pub use num_complex::Complex64;
