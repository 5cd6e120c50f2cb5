//! Restarted GMRES with optional right preconditioning.
//!
//! Right preconditioning keeps the minimised quantity equal to the true
//! residual `b - A x`, so the stopping test and the reported residual refer to
//! the same norm. Arnoldi uses classical Gram-Schmidt with one
//! reorthogonalisation pass.

use serde::{Deserialize, Serialize};

use super::{dot, norm2, CsrMatrix};
use crate::error::{Result, SdfemError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preconditioner {
    None,
    /// Diagonal scaling.
    Jacobi,
    /// One forward Gauss-Seidel sweep, `M = D + L`.
    #[serde(alias = "gauss-seidel", alias = "gs")]
    GaussSeidel,
    /// Forward then backward Gauss-Seidel sweep, `M = (D + L) D^{-1} (D + U)`.
    #[serde(alias = "symmetric-gauss-seidel", alias = "sgs")]
    SymmetricGaussSeidel,
}

/// `z = M^{-1} v` for the chosen preconditioner.
struct RightPreconditioner<'a> {
    kind: Preconditioner,
    a: &'a CsrMatrix,
    inv_diag: Vec<f64>,
}

impl<'a> RightPreconditioner<'a> {
    fn new(a: &'a CsrMatrix, kind: Preconditioner) -> Result<Self> {
        let diag = a.diagonal();
        let inv_diag = match kind {
            Preconditioner::None => vec![1.0; diag.len()],
            Preconditioner::Jacobi => diag
                .iter()
                .map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 })
                .collect(),
            Preconditioner::GaussSeidel | Preconditioner::SymmetricGaussSeidel => {
                if let Some(column) = diag.iter().position(|&d| d == 0.0) {
                    return Err(SdfemError::SingularMatrix { column, pivot: 0.0 });
                }
                diag.iter().map(|&d| 1.0 / d).collect()
            }
        };
        Ok(Self { kind, a, inv_diag })
    }

    fn apply(&self, v: &[f64], z: &mut [f64]) {
        match self.kind {
            Preconditioner::None => z.copy_from_slice(v),
            Preconditioner::Jacobi => {
                for ((zi, vi), di) in z.iter_mut().zip(v).zip(&self.inv_diag) {
                    *zi = vi * di;
                }
            }
            Preconditioner::GaussSeidel => {
                let (offsets, cols, vals) =
                    (self.a.row_offsets(), self.a.col_indices(), self.a.values());
                for i in 0..z.len() {
                    let mut s = v[i];
                    for k in offsets[i]..offsets[i + 1] {
                        let j = cols[k];
                        if j >= i {
                            break;
                        }
                        s -= vals[k] * z[j];
                    }
                    z[i] = s * self.inv_diag[i];
                }
            }
            Preconditioner::SymmetricGaussSeidel => {
                let (offsets, cols, vals) =
                    (self.a.row_offsets(), self.a.col_indices(), self.a.values());
                // (D + L) t = v, then (D + U) z = D t.
                for i in 0..z.len() {
                    let mut s = v[i];
                    for k in offsets[i]..offsets[i + 1] {
                        let j = cols[k];
                        if j >= i {
                            break;
                        }
                        s -= vals[k] * z[j];
                    }
                    z[i] = s * self.inv_diag[i];
                }
                for i in (0..z.len()).rev() {
                    let mut s = z[i] / self.inv_diag[i];
                    for k in (offsets[i]..offsets[i + 1]).rev() {
                        let j = cols[k];
                        if j <= i {
                            break;
                        }
                        s -= vals[k] * z[j];
                    }
                    z[i] = s * self.inv_diag[i];
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmresOptions {
    /// Relative residual target `||b - Ax|| / ||b||`.
    pub tol: f64,
    pub restart: usize,
    /// Limit on the total number of Arnoldi steps.
    pub max_iters: usize,
    pub preconditioner: Preconditioner,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            restart: 50,
            max_iters: 20_000,
            preconditioner: Preconditioner::SymmetricGaussSeidel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    /// Recomputed explicitly from the returned iterate.
    pub relative_residual: f64,
    pub converged: bool,
    pub restarts: usize,
    /// Least-squares residual estimate after every Arnoldi step, relative to
    /// `||b||`.
    #[serde(skip)]
    pub residual_history: Vec<f64>,
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}

fn true_residual(a: &CsrMatrix, b: &[f64], x: &[f64], b_norm: f64) -> Result<f64> {
    let ax = a.spmv(x)?;
    let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    Ok(norm2(&r) / b_norm)
}

pub fn gmres(a: &CsrMatrix, b: &[f64], opts: &GmresOptions) -> Result<(Vec<f64>, SolveStats)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(SdfemError::DimensionMismatch {
            expected: n,
            found: a.ncols(),
        });
    }
    if b.len() != n {
        return Err(SdfemError::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    if !(opts.tol > 0.0) || opts.restart == 0 {
        return Err(SdfemError::Config(
            "GMRES needs tol > 0 and restart >= 1".into(),
        ));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(SdfemError::Config("right-hand side is not finite".into()));
    }

    let mut stats = SolveStats {
        iterations: 0,
        relative_residual: 0.0,
        converged: true,
        restarts: 0,
        residual_history: Vec::new(),
    };
    let b_norm = norm2(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok((x, stats));
    }

    let precond = RightPreconditioner::new(a, opts.preconditioner)?;

    let m = opts.restart.min(n.max(1));
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut hess = vec![vec![0.0; m]; m + 1];
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];
    let mut z = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut best = (f64::INFINITY, x.clone());
    let mut cycles = 0usize;

    loop {
        let ax = a.spmv(&x)?;
        let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let beta = norm2(&r);
        let rel = beta / b_norm;
        if rel < best.0 {
            best = (rel, x.clone());
        }
        if rel <= opts.tol {
            stats.relative_residual = rel;
            stats.converged = true;
            stats.restarts = cycles.saturating_sub(1);
            return Ok((x, stats));
        }
        if stats.iterations >= opts.max_iters {
            break;
        }
        cycles += 1;

        basis.clear();
        basis.push(r.iter().map(|v| v / beta).collect());
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;
        let mut steps = 0;
        let mut breakdown = false;

        for k in 0..m {
            precond.apply(&basis[k], &mut z);
            a.spmv_into(&z, &mut w)?;
            let w_norm = norm2(&w);

            let mut h = vec![0.0; k + 2];
            for _pass in 0..2 {
                let coeffs: Vec<f64> = basis.iter().map(|v| dot(v, &w)).collect();
                for (v, c) in basis.iter().zip(&coeffs) {
                    for (wi, vi) in w.iter_mut().zip(v) {
                        *wi -= c * vi;
                    }
                }
                for (hi, c) in h.iter_mut().zip(&coeffs) {
                    *hi += c;
                }
            }
            let h_next = norm2(&w);
            h[k + 1] = h_next;

            for i in 0..k {
                let t = cs[i] * h[i] + sn[i] * h[i + 1];
                h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
                h[i] = t;
            }
            let (c, s) = givens(h[k], h[k + 1]);
            cs[k] = c;
            sn[k] = s;
            h[k] = c * h[k] + s * h[k + 1];
            h[k + 1] = 0.0;
            g[k + 1] = -s * g[k];
            g[k] *= c;
            for i in 0..=k {
                hess[i][k] = h[i];
            }

            steps = k + 1;
            stats.iterations += 1;
            let estimate = g[k + 1].abs() / b_norm;
            stats.residual_history.push(estimate);

            // Krylov space numerically invariant.
            if h_next <= 1e-14 * w_norm {
                breakdown = true;
                break;
            }
            if estimate <= opts.tol || stats.iterations >= opts.max_iters {
                break;
            }
            basis.push(w.iter().map(|v| v / h_next).collect());
        }

        // Back substitution for the least-squares coefficients.
        let mut y = vec![0.0; steps];
        for i in (0..steps).rev() {
            let s: f64 = ((i + 1)..steps).map(|j| hess[i][j] * y[j]).sum();
            y[i] = if hess[i][i] != 0.0 {
                (g[i] - s) / hess[i][i]
            } else {
                0.0
            };
        }
        let mut update = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            for (ui, vi) in update.iter_mut().zip(&basis[j]) {
                *ui += yj * vi;
            }
        }
        precond.apply(&update, &mut z);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += zi;
        }

        if breakdown {
            let rel = true_residual(a, b, &x, b_norm)?;
            if rel <= opts.tol {
                stats.relative_residual = rel;
                stats.converged = true;
                stats.restarts = cycles.saturating_sub(1);
                return Ok((x, stats));
            }
            return Err(SdfemError::Breakdown {
                iteration: stats.iterations,
                residual: rel,
            });
        }
    }

    let (rel, x_best) = best;
    stats.relative_residual = rel;
    stats.converged = false;
    stats.restarts = cycles.saturating_sub(1);
    Ok((x_best, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dense_lu_solve, DenseMatrix, TripletBuilder};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_in_one_iteration() {
        let a = CsrMatrix::identity(5);
        let b = vec![1.0, -2.0, 3.0, 0.5, 4.0];
        let (x, stats) = gmres(&a, &b, &GmresOptions::default()).unwrap();
        assert!(stats.converged);
        assert_eq!(stats.iterations, 1);
        for (p, q) in x.iter().zip(&b) {
            assert!((p - q).abs() < 1e-15);
        }
    }

    #[test]
    fn two_by_two() {
        let a = CsrMatrix::from_dense(&[vec![4.0, 1.0], vec![1.0, 3.0]]);
        for pre in [
            Preconditioner::None,
            Preconditioner::Jacobi,
            Preconditioner::GaussSeidel,
            Preconditioner::SymmetricGaussSeidel,
        ] {
            let opts = GmresOptions {
                preconditioner: pre,
                ..Default::default()
            };
            let (x, stats) = gmres(&a, &[1.0, 2.0], &opts).unwrap();
            assert!(stats.converged);
            assert!((x[0] - 1.0 / 11.0).abs() < 1e-14);
            assert!((x[1] - 7.0 / 11.0).abs() < 1e-14);
        }
    }

    fn random_nonsymmetric(n: usize, seed: u64) -> CsrMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.push(i, i, 4.0 + rng.random_range(0.0..1.0));
            if i + 1 < n {
                b.push(i, i + 1, rng.random_range(-1.5..0.0));
                b.push(i + 1, i, rng.random_range(-2.5..0.0));
            }
            if i + 7 < n {
                b.push(i, i + 7, rng.random_range(-0.5..0.5));
            }
        }
        b.build()
    }

    #[test]
    fn matches_dense_lu_with_restarts() {
        let n = 300;
        let a = random_nonsymmetric(n, 3);
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let opts = GmresOptions {
            restart: 10,
            preconditioner: Preconditioner::Jacobi,
            ..Default::default()
        };
        let (x, stats) = gmres(&a, &rhs, &opts).unwrap();
        assert!(stats.converged);
        assert!(stats.restarts > 0);
        assert!(stats.relative_residual <= 1e-12);
        let dense = DenseMatrix::from_rows(&a.to_dense()).unwrap();
        let reference = dense_lu_solve(&dense, &rhs).unwrap();
        let err = x
            .iter()
            .zip(&reference)
            .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn gauss_seidel_exact_for_lower_triangular() {
        let a = CsrMatrix::from_dense(&[
            vec![2.0, 0.0, 0.0],
            vec![1.0, 4.0, 0.0],
            vec![-1.0, 3.0, 5.0],
        ]);
        let opts = GmresOptions {
            preconditioner: Preconditioner::GaussSeidel,
            ..Default::default()
        };
        let (x, stats) = gmres(&a, &[2.0, 9.0, 12.0], &opts).unwrap();
        assert_eq!(stats.iterations, 1);
        for (p, q) in x.iter().zip([1.0, 2.0, 1.4]) {
            assert!((p - q).abs() < 1e-14);
        }
        // The symmetric sweep reduces to D + U on an upper triangular matrix.
        let upper = CsrMatrix::from_dense(&[
            vec![2.0, 1.0, -1.0],
            vec![0.0, 4.0, 3.0],
            vec![0.0, 0.0, 5.0],
        ]);
        let sgs = GmresOptions {
            preconditioner: Preconditioner::SymmetricGaussSeidel,
            ..Default::default()
        };
        let (x, stats) = gmres(&upper, &[2.6, 12.2, 7.0], &sgs).unwrap();
        assert_eq!(stats.iterations, 1);
        for (p, q) in x.iter().zip([1.0, 2.0, 1.4]) {
            assert!((p - q).abs() < 1e-14);
        }
        let singular = CsrMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!(matches!(
            gmres(&singular, &[1.0, 1.0], &opts),
            Err(SdfemError::SingularMatrix { column: 0, .. })
        ));
    }

    #[test]
    fn preconditioners_agree() {
        let n = 150;
        let a = random_nonsymmetric(n, 17);
        let rhs: Vec<f64> = (0..n).map(|i| 1.0 + (i % 5) as f64).collect();
        let solve = |p| {
            let opts = GmresOptions {
                preconditioner: p,
                restart: 20,
                ..Default::default()
            };
            gmres(&a, &rhs, &opts).unwrap()
        };
        let (x_gs, s_gs) = solve(Preconditioner::GaussSeidel);
        let (x_j, s_j) = solve(Preconditioner::Jacobi);
        let (x_s, s_s) = solve(Preconditioner::SymmetricGaussSeidel);
        assert!(s_gs.converged && s_j.converged && s_s.converged);
        assert!(s_gs.iterations <= s_j.iterations);
        for x in [&x_gs, &x_s] {
            let diff = x
                .iter()
                .zip(&x_j)
                .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
            assert!(diff < 1e-10);
        }
    }

    #[test]
    fn residual_estimate_monotone_within_cycle() {
        let a = random_nonsymmetric(200, 11);
        let rhs = vec![1.0; 200];
        let opts = GmresOptions {
            restart: 25,
            preconditioner: Preconditioner::None,
            ..Default::default()
        };
        let (_, stats) = gmres(&a, &rhs, &opts).unwrap();
        for cycle in stats.residual_history.chunks(25) {
            for w in cycle.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn exhaustion_reports_not_converged() {
        let a = random_nonsymmetric(200, 5);
        let rhs = vec![1.0; 200];
        let opts = GmresOptions {
            restart: 2,
            max_iters: 4,
            preconditioner: Preconditioner::None,
            ..Default::default()
        };
        let (x, stats) = gmres(&a, &rhs, &opts).unwrap();
        assert!(!stats.converged);
        assert_eq!(stats.iterations, 4);
        assert!(x.iter().all(|v| v.is_finite()));
        assert!(stats.relative_residual < 1.0);
    }

    #[test]
    fn singular_system_breaks_down() {
        // A maps e0 -> 0; b = e0 has no solution, and the Krylov space
        // collapses after one step.
        let a = CsrMatrix::from_dense(&[vec![0.0, 0.0], vec![0.0, 1.0]]);
        let opts = GmresOptions {
            preconditioner: Preconditioner::None,
            ..Default::default()
        };
        assert!(matches!(
            gmres(&a, &[1.0, 0.0], &opts),
            Err(SdfemError::Breakdown { .. })
        ));
    }

    #[test]
    fn zero_rhs() {
        let (x, stats) =
            gmres(&CsrMatrix::identity(3), &[0.0; 3], &GmresOptions::default()).unwrap();
        assert_eq!(x, vec![0.0; 3]);
        assert!(stats.converged);
    }
}
