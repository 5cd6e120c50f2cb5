//! Streamline-diffusion assembly for piecewise-linear elements.
//!
//! For interior hat functions the discrete operator is
//!
//! ```text
//! A[i][j] = eps (grad phi_j, grad phi_i) + (b.grad phi_j + c phi_j, phi_i)
//!         + sum_K delta_K (b.grad phi_j + c phi_j, b.grad phi_i)_K
//! ```
//!
//! with right-hand side `(f, phi_i) + sum_K delta_K (f, b.grad phi_i)_K`.
//! The `-eps Lap u` part of the element residual vanishes for linear
//! functions and is not assembled.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SdfemError};
use crate::linalg::{CsrMatrix, TripletBuilder};
use crate::mesh::{ShishkinMesh, Subdomain, TriangleRef};
use crate::problem::ProblemSpec;
use crate::quadrature::QuadRule;

/// Default stabilisation constant.
pub const DEFAULT_C_STAR: f64 = 1.0;

/// Vertex coordinates, area and constant hat-function gradients of a
/// linear triangle.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub nodes: [usize; 3],
    pub vertices: [[f64; 2]; 3],
    pub area: f64,
    pub grads: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn new(mesh: &ShishkinMesh, tri: &TriangleRef) -> Result<Self> {
        let nodes = mesh.triangle_nodes(tri);
        let v = mesh.triangle_vertices(tri);
        let twice_area =
            (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
        if !(twice_area > 0.0) {
            return Err(SdfemError::Assembly(format!(
                "degenerate triangle {tri:?} (signed area {:e})",
                0.5 * twice_area
            )));
        }
        let mut grads = [[0.0; 2]; 3];
        for a in 0..3 {
            let (p, q) = (v[(a + 1) % 3], v[(a + 2) % 3]);
            grads[a] = [(p[1] - q[1]) / twice_area, (q[0] - p[0]) / twice_area];
        }
        Ok(Self {
            nodes,
            vertices: v,
            area: 0.5 * twice_area,
            grads,
        })
    }

    #[inline]
    pub fn point(&self, bary: &[f64; 3]) -> [f64; 2] {
        let v = &self.vertices;
        [
            bary[0] * v[0][0] + bary[1] * v[1][0] + bary[2] * v[2][0],
            bary[0] * v[0][1] + bary[1] * v[1][1] + bary[2] * v[2][1],
        ]
    }
}

/// Stabilisation parameter: `c_star / N` on the coarse subdomain, else 0.
pub fn delta_k(mesh: &ShishkinMesh, tri: &TriangleRef, c_star: f64) -> f64 {
    match Subdomain::from_cell(tri.i, tri.j, mesh.n()) {
        Subdomain::S => c_star / mesh.n() as f64,
        _ => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssemblyOptions {
    pub c_star: f64,
    /// Exactness degree for bilinear-form integrals.
    pub galerkin_degree: usize,
    /// Exactness degree for load integrals.
    pub rhs_degree: usize,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            c_star: DEFAULT_C_STAR,
            galerkin_degree: 4,
            rhs_degree: 6,
        }
    }
}

impl AssemblyOptions {
    pub fn with_c_star(c_star: f64) -> Self {
        Self {
            c_star,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSystem {
    /// `matrix[i][j] = a_SD(phi_j, phi_i)` restricted to the element.
    pub matrix: [[f64; 3]; 3],
    pub rhs: [f64; 3],
}

pub fn local_element(
    tri: &TriangleRef,
    mesh: &ShishkinMesh,
    problem: &ProblemSpec,
    c_star: f64,
    quad_galerkin: &QuadRule,
    quad_rhs: &QuadRule,
) -> Result<LocalSystem> {
    let geo = ElementGeometry::new(mesh, tri)?;
    let delta = delta_k(mesh, tri, c_star);
    let g = &geo.grads;
    let mut matrix = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let grad_dot = g[j][0] * g[i][0] + g[j][1] * g[i][1];
            matrix[i][j] = problem.epsilon * (geo.area * grad_dot);
        }
    }

    for (bary, w) in quad_galerkin.points.iter().zip(&quad_galerkin.weights) {
        let [x, y] = geo.point(bary);
        let b = problem.convection(x, y);
        let c = (problem.c)(x, y);
        let scale = w * geo.area;
        let bg = [0, 1, 2].map(|a| b[0] * g[a][0] + b[1] * g[a][1]);
        for j in 0..3 {
            let residual_j = bg[j] + c * bary[j];
            for i in 0..3 {
                matrix[i][j] += scale * residual_j * (bary[i] + delta * bg[i]);
            }
        }
    }

    let mut rhs = [0.0; 3];
    for (bary, w) in quad_rhs.points.iter().zip(&quad_rhs.weights) {
        let [x, y] = geo.point(bary);
        let b = problem.convection(x, y);
        let f = (problem.f)(x, y) * w * geo.area;
        for i in 0..3 {
            let bg = b[0] * g[i][0] + b[1] * g[i][1];
            rhs[i] += f * (bary[i] + delta * bg);
        }
    }

    Ok(LocalSystem { matrix, rhs })
}

/// Nodal values of a piecewise-linear function on all `(N+1)^2` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteField {
    pub values: Vec<f64>,
}

impl DiscreteField {
    pub fn zeros(num_nodes: usize) -> Self {
        Self {
            values: vec![0.0; num_nodes],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn boundary_is_zero(&self, mesh: &ShishkinMesh) -> bool {
        (0..mesh.num_nodes())
            .filter(|&id| mesh.is_boundary_node(id))
            .all(|id| self.values[id] == 0.0)
    }

    pub fn sub(&self, other: &DiscreteField) -> Result<DiscreteField> {
        if self.len() != other.len() {
            return Err(SdfemError::DimensionMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(DiscreteField {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }
}

/// SDFEM system over interior degrees of freedom.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Global node id of every unknown.
    pub dof_to_node: Vec<usize>,
    pub node_to_dof: Vec<Option<usize>>,
}

impl LinearSystem {
    pub fn num_dofs(&self) -> usize {
        self.dof_to_node.len()
    }

    /// Extends interior values by zero boundary values.
    pub fn expand(&self, interior: &[f64]) -> Result<DiscreteField> {
        if interior.len() != self.num_dofs() {
            return Err(SdfemError::DimensionMismatch {
                expected: self.num_dofs(),
                found: interior.len(),
            });
        }
        let mut field = DiscreteField::zeros(self.node_to_dof.len());
        for (&node, &v) in self.dof_to_node.iter().zip(interior) {
            field.values[node] = v;
        }
        Ok(field)
    }

    pub fn restrict(&self, field: &DiscreteField) -> Vec<f64> {
        self.dof_to_node.iter().map(|&n| field.values[n]).collect()
    }
}

pub fn interior_numbering(mesh: &ShishkinMesh) -> (Vec<usize>, Vec<Option<usize>>) {
    let mut dof_to_node = Vec::with_capacity((mesh.n() - 1) * (mesh.n() - 1));
    let mut node_to_dof = vec![None; mesh.num_nodes()];
    for id in 0..mesh.num_nodes() {
        if !mesh.is_boundary_node(id) {
            node_to_dof[id] = Some(dof_to_node.len());
            dof_to_node.push(id);
        }
    }
    (dof_to_node, node_to_dof)
}

pub fn assemble_system(
    mesh: &ShishkinMesh,
    problem: &ProblemSpec,
    c_star: f64,
) -> Result<LinearSystem> {
    assemble_system_with(mesh, problem, &AssemblyOptions::with_c_star(c_star))
}

pub fn assemble_system_with(
    mesh: &ShishkinMesh,
    problem: &ProblemSpec,
    opts: &AssemblyOptions,
) -> Result<LinearSystem> {
    let quad_gal = QuadRule::for_degree(opts.galerkin_degree);
    let quad_rhs = QuadRule::for_degree(opts.rhs_degree);
    let tris: Vec<TriangleRef> = mesh.triangles().collect();
    // Element kernels run in parallel; the scatter below is sequential in
    // element order, which makes the result independent of thread count.
    let locals: Vec<LocalSystem> = tris
        .par_iter()
        .map(|t| local_element(t, mesh, problem, opts.c_star, &quad_gal, &quad_rhs))
        .collect::<Result<_>>()?;

    let (dof_to_node, node_to_dof) = interior_numbering(mesh);
    let ndof = dof_to_node.len();
    let mut builder = TripletBuilder::with_capacity(ndof, ndof, 9 * tris.len());
    let mut rhs = vec![0.0; ndof];
    for (tri, local) in tris.iter().zip(&locals) {
        let nodes = mesh.triangle_nodes(tri);
        for a in 0..3 {
            let Some(row) = node_to_dof[nodes[a]] else {
                continue;
            };
            rhs[row] += local.rhs[a];
            for b in 0..3 {
                if let Some(col) = node_to_dof[nodes[b]] {
                    builder.push(row, col, local.matrix[a][b]);
                }
            }
        }
    }
    Ok(LinearSystem {
        matrix: builder.build(),
        rhs,
        dof_to_node,
        node_to_dof,
    })
}

/// Matrices of the norm building blocks over all nodes.
#[derive(Debug, Clone)]
pub struct NormMatrices {
    /// `(grad phi_j, grad phi_i)`.
    pub stiffness: CsrMatrix,
    /// `(phi_j, phi_i)`.
    pub mass: CsrMatrix,
    /// `sum_K delta_K (b.grad phi_j, b.grad phi_i)_K`.
    pub streamline: CsrMatrix,
}

pub fn assemble_norm_matrices(
    mesh: &ShishkinMesh,
    problem: &ProblemSpec,
    c_star: f64,
) -> Result<NormMatrices> {
    let quad = QuadRule::dunavant_4();
    let n = mesh.num_nodes();
    let cap = 9 * mesh.num_triangles();
    let mut stiffness = TripletBuilder::with_capacity(n, n, cap);
    let mut mass = TripletBuilder::with_capacity(n, n, cap);
    let mut streamline = TripletBuilder::with_capacity(n, n, cap);
    for tri in mesh.triangles() {
        let geo = ElementGeometry::new(mesh, &tri)?;
        let delta = delta_k(mesh, &tri, c_star);
        let g = &geo.grads;
        let mut s_local = [[0.0; 3]; 3];
        if delta != 0.0 {
            for (bary, w) in quad.points.iter().zip(&quad.weights) {
                let [x, y] = geo.point(bary);
                let b = problem.convection(x, y);
                let bg = [0, 1, 2].map(|a| b[0] * g[a][0] + b[1] * g[a][1]);
                for i in 0..3 {
                    for j in 0..3 {
                        s_local[i][j] += delta * w * geo.area * bg[i] * bg[j];
                    }
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let (ni, nj) = (geo.nodes[i], geo.nodes[j]);
                let grad_dot = g[j][0] * g[i][0] + g[j][1] * g[i][1];
                stiffness.push(ni, nj, geo.area * grad_dot);
                let m = if i == j {
                    geo.area / 6.0
                } else {
                    geo.area / 12.0
                };
                mass.push(ni, nj, m);
                streamline.push(ni, nj, s_local[i][j]);
            }
        }
    }
    Ok(NormMatrices {
        stiffness: stiffness.build(),
        mass: mass.build(),
        streamline: streamline.build(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, MeshParams, Orientation};
    use crate::problem::make_test_problem;
    use std::sync::Arc;

    fn mesh(n: usize, eps: f64) -> ShishkinMesh {
        build_mesh(&MeshParams::new(n, eps, 2.0, 1.0).unwrap()).unwrap()
    }

    fn pure_diffusion(eps: f64) -> ProblemSpec {
        let mut p = make_test_problem(eps);
        p.b1 = Arc::new(|_, _| 0.0);
        p.b2 = Arc::new(|_, _| 0.0);
        p.c = Arc::new(|_, _| 0.0);
        p
    }

    #[test]
    fn delta_values() {
        let m = mesh(8, 1e-4);
        assert_eq!(delta_k(&m, &TriangleRef::k1(0, 0), 1.0), 0.125);
        assert_eq!(delta_k(&m, &TriangleRef::k2(5, 1), 1.0), 0.0);
        let m = mesh(1024, 1e-8);
        assert_eq!(delta_k(&m, &TriangleRef::k1(3, 3), 1.0), 9.765625e-4);
    }

    #[test]
    fn diffusion_block_on_right_triangle() {
        // N = 4 with clamped lambda: every K1 is a right triangle with legs h.
        let m = mesh(4, 0.3);
        let p = pure_diffusion(0.7);
        let q = QuadRule::dunavant_4();
        let local = local_element(&TriangleRef::k1(1, 2), &m, &p, 1.0, &q, &q).unwrap();
        let expected = [[2.0, -1.0, -1.0], [-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((local.matrix[i][j] - 0.7 * 0.5 * expected[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn layer_element_has_no_stabilisation() {
        let m = mesh(8, 1e-4);
        let p = make_test_problem(1e-4);
        let q = QuadRule::dunavant_4();
        let tri = TriangleRef::k1(6, 2);
        let with = local_element(&tri, &m, &p, 1.0, &q, &q).unwrap();
        let without = local_element(&tri, &m, &p, 0.0, &q, &q).unwrap();
        assert_eq!(with, without);
    }

    #[test]
    fn stabilisation_block_matches_brute_force() {
        // b = (2, 1), c = 0, eps small on the unit-ish right triangle of a
        // clamped N = 4 mesh, compared against a high-order rule applied to
        // the defining integrand.
        let m = mesh(4, 0.3);
        let mut p = make_test_problem(1e-3);
        p.c = Arc::new(|_, _| 0.0);
        let tri = TriangleRef::k1(0, 0);
        let q = QuadRule::dunavant_4();
        let with = local_element(&tri, &m, &p, 1.0, &q, &q).unwrap();
        let without = local_element(&tri, &m, &p, 0.0, &q, &q).unwrap();
        let tau = delta_k(&m, &tri, 1.0);

        let geo = ElementGeometry::new(&m, &tri).unwrap();
        let hi = QuadRule::collapsed_gauss(10);
        for i in 0..3 {
            for j in 0..3 {
                let mut integral = 0.0;
                for w in &hi.weights {
                    let bgi = 2.0 * geo.grads[i][0] + geo.grads[i][1];
                    let bgj = 2.0 * geo.grads[j][0] + geo.grads[j][1];
                    integral += w * geo.area * bgi * bgj;
                }
                let stab = with.matrix[i][j] - without.matrix[i][j];
                assert!((stab - tau * integral).abs() < 1e-14, "{i}{j}");
            }
        }
    }

    #[test]
    fn system_size_and_structure() {
        let m = mesh(4, 1.0);
        let sys = assemble_system(&m, &make_test_problem(1.0), 1.0).unwrap();
        assert_eq!(sys.num_dofs(), 9);
        assert_eq!(sys.matrix.nrows(), 9);
        assert!(sys.matrix.is_structurally_symmetric());
    }

    #[test]
    fn reduces_to_scaled_stiffness() {
        let m = mesh(8, 1e-3);
        let p = pure_diffusion(1e-3);
        let sys = assemble_system(&m, &p, 0.0).unwrap();
        let norms = assemble_norm_matrices(&m, &p, 0.0).unwrap();
        let k = norms.stiffness.restrict(&sys.node_to_dof, sys.num_dofs());
        for r in 0..sys.num_dofs() {
            let (cols, vals) = k.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let a = sys.matrix.get(r, c);
                assert!(
                    (a - 1e-3 * v).abs() <= 1e-15 * a.abs().max(1e-300),
                    "{r} {c}"
                );
            }
        }
    }

    #[test]
    fn norm_matrix_identities() {
        let m = mesh(8, 1e-3);
        let p = make_test_problem(1e-3);
        let norms = assemble_norm_matrices(&m, &p, 1.0).unwrap();
        let ones = vec![1.0; m.num_nodes()];
        assert!((norms.mass.quadratic_form(&ones).unwrap() - 1.0).abs() < 1e-12);
        let xs: Vec<f64> = (0..m.num_nodes()).map(|id| m.node_coords(id)[0]).collect();
        assert!((norms.stiffness.quadratic_form(&xs).unwrap() - 1.0).abs() < 1e-12);
        let none = assemble_norm_matrices(&m, &p, 0.0).unwrap();
        assert!(none.streamline.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn degenerate_geometry_is_rejected() {
        let mut m = mesh(4, 0.3);
        m.xs[1] = m.xs[0];
        let err = ElementGeometry::new(&m, &TriangleRef::new(0, 0, Orientation::K1));
        assert!(matches!(err, Err(SdfemError::Assembly(_))));
    }
}
