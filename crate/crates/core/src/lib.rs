//! Streamline-diffusion finite elements on Shishkin triangular meshes for
//! `-eps Lap u + b.grad u + c u = f` on the unit square, with error norms,
//! convergence tables and quadratic macrotriangle postprocessing.

pub mod acceptance;
pub mod analysis;
pub mod assembly;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod mesh;
pub mod postprocess;
pub mod problem;
pub mod quadrature;

pub use error::{Result, SdfemError};
