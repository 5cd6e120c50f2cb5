use crate::error::{Result, SdfemError};

/// Largest system the dense oracle accepts.
pub const MAX_DENSE_SIZE: usize = 4096;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(SdfemError::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            m.data[i * n..(i + 1) * n].copy_from_slice(row);
        }
        Ok(m)
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.data
            .chunks_exact(self.n)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Solves `A x = b` by LU factorisation with partial pivoting.
pub fn dense_lu_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.size();
    if n > MAX_DENSE_SIZE {
        return Err(SdfemError::Config(format!(
            "dense solve limited to {MAX_DENSE_SIZE} unknowns, got {n}"
        )));
    }
    if b.len() != n {
        return Err(SdfemError::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    let mut lu = a.data.clone();
    let mut x = b.to_vec();
    for k in 0..n {
        let pivot_row = (k..n)
            .max_by(|&i, &j| lu[i * n + k].abs().total_cmp(&lu[j * n + k].abs()))
            .unwrap();
        let pivot = lu[pivot_row * n + k];
        if pivot.abs() < 1e-300 {
            return Err(SdfemError::SingularMatrix { column: k, pivot });
        }
        if pivot_row != k {
            for j in 0..n {
                lu.swap(k * n + j, pivot_row * n + j);
            }
            x.swap(k, pivot_row);
        }
        for i in (k + 1)..n {
            let factor = lu[i * n + k] / pivot;
            if factor == 0.0 {
                continue;
            }
            lu[i * n + k] = factor;
            for j in (k + 1)..n {
                lu[i * n + j] -= factor * lu[k * n + j];
            }
            x[i] -= factor * x[k];
        }
    }
    for i in (0..n).rev() {
        let s: f64 = ((i + 1)..n).map(|j| lu[i * n + j] * x[j]).sum();
        x[i] = (x[i] - s) / lu[i * n + i];
    }
    Ok(x)
}
