//! Numerical laboratory for the steady Prandtl boundary layer in Von Mises
//! variables: Blasius reference profile, degenerate parabolic marching,
//! decay diagnostics and barrier certification.

pub mod barrier;
pub mod blasius;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod march;
pub mod numerics;
pub mod von_mises;

pub use error::{Error, Result};
