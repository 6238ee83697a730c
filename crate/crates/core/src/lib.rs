//! Discontinuous Galerkin spectral element solver for the linearized Serre
//! equations, built on summation-by-parts operators with simultaneous
//! approximation terms at element interfaces and domain boundaries.

pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod mesh;
pub mod model;
pub mod operators;
pub mod quadrature;
pub mod scheme;
pub mod timeloop;

pub use error::{Result, SolverError};
