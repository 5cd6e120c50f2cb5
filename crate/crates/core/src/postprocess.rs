//! Piecewise-quadratic interpolation of a discrete solution on the
//! macromesh.
//!
//! All six interpolation points of a macrotriangle are fine-mesh nodes, so
//! `P v` is read off the nodal vector without any quadrature.

use crate::analysis::PiecewiseField;
use crate::assembly::{DiscreteField, ElementGeometry};
use crate::error::{Result, SdfemError};
use crate::mesh::{MacroMesh, MacroTriangle, ShishkinMesh, TriangleRef};

/// `P v`: six nodal coefficients per macrotriangle.
#[derive(Debug, Clone)]
pub struct QuadraticField<'a> {
    pub mesh: &'a ShishkinMesh,
    pub macro_mesh: &'a MacroMesh,
    pub coeffs: Vec<[f64; 6]>,
}

pub fn postprocess<'a>(
    mesh: &'a ShishkinMesh,
    macro_mesh: &'a MacroMesh,
    field: &DiscreteField,
) -> Result<QuadraticField<'a>> {
    if !macro_mesh.matches(mesh) {
        return Err(SdfemError::Config(format!(
            "macromesh (N = {}) was not built on this mesh (N = {})",
            macro_mesh.n,
            mesh.n()
        )));
    }
    if field.len() != mesh.num_nodes() {
        return Err(SdfemError::DimensionMismatch {
            expected: mesh.num_nodes(),
            found: field.len(),
        });
    }
    let coeffs = macro_mesh
        .triangles
        .iter()
        .map(|m| m.nodes.map(|id| field.values[id]))
        .collect();
    Ok(QuadraticField {
        mesh,
        macro_mesh,
        coeffs,
    })
}

/// Quadratic nodal basis on the reference triangle and its reference
/// gradients.
fn basis(r: f64, s: f64) -> ([f64; 6], [[f64; 2]; 6]) {
    let l0 = 1.0 - r - s;
    let values = [
        l0 * (2.0 * l0 - 1.0),
        r * (2.0 * r - 1.0),
        s * (2.0 * s - 1.0),
        4.0 * l0 * r,
        4.0 * r * s,
        4.0 * s * l0,
    ];
    let grads = [
        [1.0 - 4.0 * l0, 1.0 - 4.0 * l0],
        [4.0 * r - 1.0, 0.0],
        [0.0, 4.0 * s - 1.0],
        [4.0 * (l0 - r), -4.0 * r],
        [4.0 * s, 4.0 * r],
        [-4.0 * s, 4.0 * (l0 - s)],
    ];
    (values, grads)
}

/// Value and gradient of the quadratic with nodal `coeffs` on `m`.
pub fn eval_on_macro(m: &MacroTriangle, coeffs: &[f64; 6], x: f64, y: f64) -> (f64, [f64; 2]) {
    let [r, s] = m.map.to_reference(x, y);
    eval_reference_on(m, coeffs, r, s)
}

fn eval_reference_on(m: &MacroTriangle, coeffs: &[f64; 6], r: f64, s: f64) -> (f64, [f64; 2]) {
    let (phi, dphi) = basis(r, s);
    let mut value = 0.0;
    let mut dr = 0.0;
    let mut ds = 0.0;
    for k in 0..6 {
        value += coeffs[k] * phi[k];
        dr += coeffs[k] * dphi[k][0];
        ds += coeffs[k] * dphi[k][1];
    }
    let inv = &m.map.inverse;
    (
        value,
        [
            inv[0][0] * dr + inv[1][0] * ds,
            inv[0][1] * dr + inv[1][1] * ds,
        ],
    )
}

impl QuadraticField<'_> {
    /// Value and gradient of the quadratic on macrotriangle `index`, also
    /// valid as an extrapolation outside it.
    pub fn eval_in_macro(&self, index: usize, x: f64, y: f64) -> Result<(f64, [f64; 2])> {
        let m = self
            .macro_mesh
            .triangles
            .get(index)
            .ok_or(SdfemError::Index {
                what: "macrotriangle",
                index,
                limit: self.macro_mesh.len(),
            })?;
        Ok(eval_on_macro(m, &self.coeffs[index], x, y))
    }

    /// Like [`Self::eval_in_macro`] at reference coordinates `(r, s)`.
    pub fn eval_reference(&self, index: usize, r: f64, s: f64) -> Result<(f64, [f64; 2])> {
        let m = self
            .macro_mesh
            .triangles
            .get(index)
            .ok_or(SdfemError::Index {
                what: "macrotriangle",
                index,
                limit: self.macro_mesh.len(),
            })?;
        Ok(eval_reference_on(m, &self.coeffs[index], r, s))
    }
}

/// Reference coordinates of `p + t (q - p)` where `p` and `q` are vertex
/// node ids of `m`; `None` if either is not a vertex.
pub fn edge_reference_point(m: &MacroTriangle, p: usize, q: usize, t: f64) -> Option<[f64; 2]> {
    const VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let a = VERTICES[m.nodes[..3].iter().position(|&id| id == p)?];
    let b = VERTICES[m.nodes[..3].iter().position(|&id| id == q)?];
    Some([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])])
}

/// Value and gradient of `field` at `(x, y)`; points on shared edges use
/// the lowest-index macrotriangle.
pub fn eval_quadratic(field: &QuadraticField<'_>, x: f64, y: f64) -> Result<(f64, [f64; 2])> {
    let index = field.macro_mesh.locate(field.mesh, x, y)?;
    field.eval_in_macro(index, x, y)
}

impl PiecewiseField for QuadraticField<'_> {
    fn eval_in(
        &self,
        tri: &TriangleRef,
        _geo: &ElementGeometry,
        _bary: &[f64; 3],
        point: [f64; 2],
    ) -> (f64, [f64; 2]) {
        let index = self.macro_mesh.macro_of(tri);
        eval_on_macro(
            &self.macro_mesh.triangles[index],
            &self.coeffs[index],
            point[0],
            point[1],
        )
    }
}
