//! Numerical laboratory for Lojasiewicz-type inequalities near generalized
//! cylinders `Γ̊ × R` in Euclidean space.

pub mod cylinder;
pub mod error;
pub mod field;
pub mod graphgeom;
pub mod harness;
pub mod jacobi;
pub mod jet;
pub mod profile;
pub mod stencil;
pub mod variation;

pub use error::{LabError, Result};
