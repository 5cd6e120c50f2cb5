//! Sparse storage, a dense LU oracle and restarted GMRES.

mod csr;
mod dense;
mod gmres;

pub use csr::{CsrMatrix, TripletBuilder};
pub use dense::{dense_lu_solve, DenseMatrix};
pub use gmres::{gmres, GmresOptions, Preconditioner, SolveStats};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}
