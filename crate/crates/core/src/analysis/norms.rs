use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{DiscreteField, ElementGeometry, LinearSystem, NormMatrices};
use crate::error::{Result, SdfemError};
use crate::linalg::norm2;
use crate::mesh::{ShishkinMesh, Subdomain, TriangleRef};
use crate::problem::ExactSolution;
use crate::quadrature::QuadRule;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormWeights {
    pub mu0: f64,
    pub epsilon: f64,
}

impl NormWeights {
    pub fn new(mu0: f64, epsilon: f64) -> Result<Self> {
        if !(mu0 > 0.0 && epsilon > 0.0) {
            return Err(SdfemError::Config(format!(
                "norm weights must be positive (mu0 = {mu0}, epsilon = {epsilon})"
            )));
        }
        Ok(Self { mu0, epsilon })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteNorms {
    /// `(eps |v|_1^2 + mu0 ||v||^2)^(1/2)`.
    pub energy: f64,
    /// Energy norm plus the streamline term.
    pub sd: f64,
}

pub fn nodal_interpolant<F>(mesh: &ShishkinMesh, g: F) -> DiscreteField
where
    F: Fn(f64, f64) -> f64,
{
    DiscreteField {
        values: (0..mesh.num_nodes())
            .map(|id| {
                let [x, y] = mesh.node_coords(id);
                g(x, y)
            })
            .collect(),
    }
}

pub fn discrete_norms(
    field: &DiscreteField,
    matrices: &NormMatrices,
    weights: &NormWeights,
) -> Result<DiscreteNorms> {
    let v = &field.values;
    let k = matrices.stiffness.quadratic_form(v)?;
    let m = matrices.mass.quadratic_form(v)?;
    let s = matrices.streamline.quadratic_form(v)?;
    // Round-off can make tiny semi-definite forms slightly negative.
    let energy_sq = (weights.epsilon * k + weights.mu0 * m).max(0.0);
    Ok(DiscreteNorms {
        energy: energy_sq.sqrt(),
        sd: (energy_sq + s.max(0.0)).sqrt(),
    })
}

/// A function that is polynomial on every fine triangle.
pub trait PiecewiseField: Sync {
    /// Value and gradient at `point`, which lies in `tri` with barycentric
    /// coordinates `bary`.
    fn eval_in(
        &self,
        tri: &TriangleRef,
        geo: &ElementGeometry,
        bary: &[f64; 3],
        point: [f64; 2],
    ) -> (f64, [f64; 2]);
}

/// Piecewise-linear view of nodal values.
pub struct LinearField<'a> {
    pub field: &'a DiscreteField,
}

impl<'a> LinearField<'a> {
    pub fn new(field: &'a DiscreteField) -> Self {
        Self { field }
    }
}

impl PiecewiseField for LinearField<'_> {
    fn eval_in(
        &self,
        _tri: &TriangleRef,
        geo: &ElementGeometry,
        bary: &[f64; 3],
        _point: [f64; 2],
    ) -> (f64, [f64; 2]) {
        let v = geo.nodes.map(|n| self.field.values[n]);
        let value = bary[0] * v[0] + bary[1] * v[1] + bary[2] * v[2];
        let grad = [
            v[0] * geo.grads[0][0] + v[1] * geo.grads[1][0] + v[2] * geo.grads[2][0],
            v[0] * geo.grads[0][1] + v[1] * geo.grads[1][1] + v[2] * geo.grads[2][1],
        ];
        (value, grad)
    }
}

/// `(sum_K int_K eps |grad(u - w)|^2 + mu0 (u - w)^2)^(1/2)` by per-element
/// quadrature.
pub fn continuous_error_energy_norm(
    mesh: &ShishkinMesh,
    exact: &ExactSolution,
    discrete: &dyn PiecewiseField,
    weights: &NormWeights,
    quad: &QuadRule,
) -> Result<f64> {
    if quad.degree < 6 {
        return Err(SdfemError::Config(format!(
            "error norms need a rule of degree >= 6, got {}",
            quad.degree
        )));
    }
    let tris: Vec<TriangleRef> = mesh.triangles().collect();
    let contributions: Vec<f64> = tris
        .par_iter()
        .map(|tri| -> Result<f64> {
            let geo = ElementGeometry::new(mesh, tri)?;
            let mut sum = 0.0;
            for (bary, w) in quad.points.iter().zip(&quad.weights) {
                let p = geo.point(bary);
                let (value, grad) = discrete.eval_in(tri, &geo, bary, p);
                let e = (exact.u)(p[0], p[1]) - value;
                let ex = (exact.u_x)(p[0], p[1]) - grad[0];
                let ey = (exact.u_y)(p[0], p[1]) - grad[1];
                sum += w * (weights.epsilon * (ex * ex + ey * ey) + weights.mu0 * e * e);
            }
            Ok(sum * geo.area)
        })
        .collect::<Result<_>>()?;
    Ok(contributions.iter().sum::<f64>().sqrt())
}

/// Relative algebraic residual `||b - Ax|| / ||b||`; zero exactly when the
/// discrete Galerkin orthogonality holds for every interior test function.
pub fn verify_orthogonality(system: &LinearSystem, solution: &[f64]) -> Result<f64> {
    let ax = system.matrix.spmv(solution)?;
    let r: Vec<f64> = system.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let b_norm = norm2(&system.rhs);
    Ok(if b_norm > 0.0 {
        norm2(&r) / b_norm
    } else {
        norm2(&r)
    })
}

/// Maximum sampled `|u - u^I|` per subdomain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationBoundReport {
    pub n: usize,
    /// Indexed like [`Subdomain::ALL`].
    pub max_error: [f64; 4],
    pub n_inv2: f64,
    pub n_inv2_ln2: f64,
}

/// Interior sample points (barycentric) used per triangle.
const SAMPLE_POINTS: [[f64; 3]; 7] = [
    [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
    [0.5, 0.5, 0.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];

pub fn interpolation_bound_report<F>(mesh: &ShishkinMesh, u: F) -> Result<InterpolationBoundReport>
where
    F: Fn(f64, f64) -> f64,
{
    let interp = nodal_interpolant(mesh, &u);
    let linear = LinearField::new(&interp);
    let mut max_error = [0.0f64; 4];
    for tri in mesh.triangles() {
        let geo = ElementGeometry::new(mesh, &tri)?;
        let sub = Subdomain::from_cell(tri.i, tri.j, mesh.n());
        let slot = Subdomain::ALL.iter().position(|s| *s == sub).unwrap();
        for bary in &SAMPLE_POINTS {
            let p = geo.point(bary);
            let (value, _) = linear.eval_in(&tri, &geo, bary, p);
            max_error[slot] = max_error[slot].max((u(p[0], p[1]) - value).abs());
        }
    }
    let n = mesh.n() as f64;
    Ok(InterpolationBoundReport {
        n: mesh.n(),
        max_error,
        n_inv2: n.powi(-2),
        n_inv2_ln2: n.powi(-2) * n.ln().powi(2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_norm_matrices, assemble_system};
    use crate::linalg::{gmres, GmresOptions};
    use crate::mesh::{build_mesh, MeshParams};
    use crate::problem::{make_linear_problem, make_test_problem};
    use std::sync::Arc;

    fn mesh(n: usize, eps: f64) -> ShishkinMesh {
        build_mesh(&MeshParams::new(n, eps, 2.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn interpolant_of_hat_is_unit_vector() {
        let m = mesh(8, 1e-3);
        let k = m.node_id(3, 5);
        let [xk, yk] = m.node_coords(k);
        let v = nodal_interpolant(&m, |x, y| if x == xk && y == yk { 1.0 } else { 0.0 });
        for (id, &val) in v.values.iter().enumerate() {
            assert_eq!(val, if id == k { 1.0 } else { 0.0 });
        }
        let p = make_test_problem(1e-3);
        let u = nodal_interpolant(&m, |x, y| p.eval_exact(x, y).unwrap().0);
        assert!(u.boundary_is_zero(&m));
    }

    #[test]
    fn linear_function_energy_closed_form() {
        // Uniform N = 4 mesh; the interpolant reproduces x + y exactly.
        let m = mesh(4, 0.3);
        let p = make_test_problem(0.3);
        let mats = assemble_norm_matrices(&m, &p, 0.0).unwrap();
        let v = nodal_interpolant(&m, |x, y| x + y);
        for (eps, mu0) in [(0.01, 1.0), (1.0, 2.0)] {
            let w = NormWeights::new(mu0, eps).unwrap();
            let norms = discrete_norms(&v, &mats, &w).unwrap();
            let expected = (2.0 * eps + 7.0 / 6.0 * mu0).sqrt();
            assert!((norms.energy - expected).abs() < 1e-12);
            assert_eq!(norms.sd, norms.energy);
        }
    }

    #[test]
    fn zero_field_has_zero_norms() {
        let m = mesh(8, 1e-4);
        let p = make_test_problem(1e-4);
        let mats = assemble_norm_matrices(&m, &p, 1.0).unwrap();
        let n = discrete_norms(
            &DiscreteField::zeros(m.num_nodes()),
            &mats,
            &NormWeights::new(1.0, 1e-4).unwrap(),
        )
        .unwrap();
        assert_eq!((n.energy, n.sd), (0.0, 0.0));
    }

    #[test]
    fn discrete_and_continuous_norms_agree() {
        let m = mesh(16, 1e-4);
        let p = make_test_problem(1e-4);
        let mats = assemble_norm_matrices(&m, &p, 1.0).unwrap();
        let w = NormWeights::new(1.0, 1e-4).unwrap();
        let v = nodal_interpolant(&m, |x, y| (3.0 * x).sin() * y * (1.0 - y));
        let discrete = discrete_norms(&v, &mats, &w).unwrap().energy;
        let zero = ExactSolution {
            u: Arc::new(|_, _| 0.0),
            u_x: Arc::new(|_, _| 0.0),
            u_y: Arc::new(|_, _| 0.0),
        };
        let continuous = continuous_error_energy_norm(
            &m,
            &zero,
            &LinearField::new(&v),
            &w,
            &QuadRule::dunavant_6(),
        )
        .unwrap();
        assert!(
            (discrete - continuous).abs() < 1e-12,
            "{discrete} vs {continuous}"
        );
        assert!(continuous_error_energy_norm(
            &m,
            &zero,
            &LinearField::new(&v),
            &w,
            &QuadRule::dunavant_4()
        )
        .is_err());
    }

    #[test]
    fn self_error_vanishes_for_linear_exact() {
        let m = mesh(8, 1e-3);
        let p = make_linear_problem(1e-3);
        let v = nodal_interpolant(&m, |x, y| x + 2.0 * y);
        let w = NormWeights::new(1.0, 1e-3).unwrap();
        let e = continuous_error_energy_norm(
            &m,
            p.exact.as_ref().unwrap(),
            &LinearField::new(&v),
            &w,
            &QuadRule::dunavant_6(),
        )
        .unwrap();
        assert!(e < 1e-12, "{e}");
    }

    #[test]
    fn orthogonality_residuals() {
        let m = mesh(8, 1e-4);
        let p = make_test_problem(1e-4);
        let sys = assemble_system(&m, &p, 1.0).unwrap();
        let zero = vec![0.0; sys.num_dofs()];
        assert_eq!(verify_orthogonality(&sys, &zero).unwrap(), 1.0);

        let (x, stats) = gmres(&sys.matrix, &sys.rhs, &GmresOptions::default()).unwrap();
        assert!(stats.converged);
        let r0 = verify_orthogonality(&sys, &x).unwrap();
        assert!(r0 <= 1e-12);

        // A perturbation along e_k raises the residual by delta ||A e_k|| / ||b||.
        let k = 20;
        let delta = 1e-3;
        let mut xp = x.clone();
        xp[k] += delta;
        let mut ek = vec![0.0; sys.num_dofs()];
        ek[k] = 1.0;
        let col = sys.matrix.spmv(&ek).unwrap();
        let expected = delta * norm2(&col) / norm2(&sys.rhs);
        let got = verify_orthogonality(&sys, &xp).unwrap();
        assert!((got - expected).abs() <= r0 + 1e-15, "{got} vs {expected}");
    }

    #[test]
    fn interpolation_report_zero_for_linear() {
        let m = mesh(16, 1e-4);
        let p = make_linear_problem(1e-4);
        let exact = p.exact.unwrap();
        let r = interpolation_bound_report(&m, |x, y| (exact.u)(x, y)).unwrap();
        assert!(r.max_error.iter().all(|&e| e < 1e-13), "{:?}", r.max_error);
    }
}
