//! Invariants of hypersurfaces in S^n×R and H^n×R.

pub mod acceptance;
pub mod ambient;
pub mod classify;
pub mod error;
pub mod geometry;
pub mod profiles;
pub mod surface;
pub mod taylor;

pub use ambient::{AmbientSpace, AmbientVector, Epsilon};
pub use error::{GeomError, Result};
