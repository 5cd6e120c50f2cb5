//! Patch integrals of the interpolation error derivative.
//!
//! On `Q_{i,j} = K2_{i,j-1} u K1_{i,j}` the x-derivative of any linear
//! function is constant, so `int_Q (w - w^I)_x v_x = v_x int_Q (w - w^I)_x`
//! and only the patch integral has to be small. The y-analogue uses
//! `S_{i,j} = K2_{i-1,j} u K1_{i,j}`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::assembly::ElementGeometry;
use crate::error::Result;
use crate::mesh::{ShishkinMesh, TriangleRef};
use crate::problem::ScalarFn;
use crate::quadrature::QuadRule;

/// A smooth function with the derivatives the patch bound needs.
#[derive(Clone)]
pub struct SmoothFunction {
    pub name: String,
    pub value: ScalarFn,
    pub dx: ScalarFn,
    pub dy: ScalarFn,
    /// `[w_xxx, w_xxy, w_xyy, w_yyy]`.
    pub third: [ScalarFn; 4],
}

fn constant(c: f64) -> ScalarFn {
    Arc::new(move |_, _| c)
}

impl SmoothFunction {
    pub fn linear(a: f64, b: f64, c: f64) -> Self {
        Self {
            name: "linear".into(),
            value: Arc::new(move |x, y| a * x + b * y + c),
            dx: constant(a),
            dy: constant(b),
            third: [constant(0.0), constant(0.0), constant(0.0), constant(0.0)],
        }
    }

    pub fn x_squared() -> Self {
        Self {
            name: "x^2".into(),
            value: Arc::new(|x, _| x * x),
            dx: Arc::new(|x, _| 2.0 * x),
            dy: constant(0.0),
            third: [constant(0.0), constant(0.0), constant(0.0), constant(0.0)],
        }
    }

    pub fn x_cubed() -> Self {
        Self {
            name: "x^3".into(),
            value: Arc::new(|x, _| x * x * x),
            dx: Arc::new(|x, _| 3.0 * x * x),
            dy: constant(0.0),
            third: [constant(6.0), constant(0.0), constant(0.0), constant(0.0)],
        }
    }

    pub fn x_squared_y() -> Self {
        Self {
            name: "x^2 y".into(),
            value: Arc::new(|x, y| x * x * y),
            dx: Arc::new(|x, y| 2.0 * x * y),
            dy: Arc::new(|x, _| x * x),
            third: [constant(0.0), constant(2.0), constant(0.0), constant(0.0)],
        }
    }

    pub fn sin_sin() -> Self {
        use std::f64::consts::PI;
        let pi3 = PI * PI * PI;
        Self {
            name: "sin(pi x) sin(pi y)".into(),
            value: Arc::new(|x, y| (PI * x).sin() * (PI * y).sin()),
            dx: Arc::new(|x, y| PI * (PI * x).cos() * (PI * y).sin()),
            dy: Arc::new(|x, y| PI * (PI * x).sin() * (PI * y).cos()),
            third: [
                Arc::new(move |x, y| -pi3 * (PI * x).cos() * (PI * y).sin()),
                Arc::new(move |x, y| -pi3 * (PI * x).sin() * (PI * y).cos()),
                Arc::new(move |x, y| -pi3 * (PI * x).cos() * (PI * y).sin()),
                Arc::new(move |x, y| -pi3 * (PI * x).sin() * (PI * y).cos()),
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchRecord {
    pub i: usize,
    pub j: usize,
    /// `|int_patch (w - w^I)_d|`.
    pub lhs: f64,
    /// `meas(patch) * sum_{l+m=2} h_x^l h_y^m sup|third derivative|`.
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchReport {
    pub direction: Direction,
    pub records: Vec<PatchRecord>,
    /// Patches whose two halves have different spacings.
    pub skipped: usize,
}

impl PatchReport {
    pub fn max_ratio(&self) -> f64 {
        self.records.iter().fold(0.0, |m, r| m.max(r.ratio))
    }

    pub fn max_lhs(&self) -> f64 {
        self.records.iter().fold(0.0, |m, r| m.max(r.lhs))
    }

    /// Record with the largest ratio.
    pub fn worst(&self) -> Option<&PatchRecord> {
        self.records
            .iter()
            .max_by(|a, b| a.ratio.total_cmp(&b.ratio))
    }
}

fn same_spacing(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.max(b)
}

/// 5 x 5 collapsed grid on the reference triangle, in barycentric form.
fn sup_sample_points() -> Vec<[f64; 3]> {
    let mut pts = Vec::with_capacity(25);
    for a in 0..5 {
        for b in 0..5 {
            let s = a as f64 / 4.0;
            let t = b as f64 / 4.0 * (1.0 - s);
            pts.push([1.0 - s - t, s, t]);
        }
    }
    pts
}

pub fn verify_patch_identity(
    mesh: &ShishkinMesh,
    w: &SmoothFunction,
    direction: Direction,
) -> Result<PatchReport> {
    let n = mesh.n();
    let quad = QuadRule::dunavant_6();
    let samples = sup_sample_points();
    let mut records = Vec::new();
    let mut skipped = 0;

    // Patch (i, j) pairs K1_{i,j} with the neighbouring K2 below (x) or to
    // the left (y).
    let patches: Vec<(usize, usize, TriangleRef, bool)> = match direction {
        Direction::X => (1..n)
            .flat_map(|j| (0..n).map(move |i| (i, j)))
            .map(|(i, j)| {
                (
                    i,
                    j,
                    TriangleRef::k2(i, j - 1),
                    same_spacing(mesh.hy(j - 1), mesh.hy(j)),
                )
            })
            .collect(),
        Direction::Y => (0..n)
            .flat_map(|j| (1..n).map(move |i| (i, j)))
            .map(|(i, j)| {
                (
                    i,
                    j,
                    TriangleRef::k2(i - 1, j),
                    same_spacing(mesh.hx(i - 1), mesh.hx(i)),
                )
            })
            .collect(),
    };

    for (i, j, partner, uniform) in patches {
        if !uniform {
            skipped += 1;
            continue;
        }
        let mut integral = 0.0;
        let mut area = 0.0;
        let mut sup = [0.0f64; 4];
        for tri in [partner, TriangleRef::k1(i, j)] {
            let geo = ElementGeometry::new(mesh, &tri)?;
            let nodal = geo.nodes.map(|id| {
                let [x, y] = mesh.node_coords(id);
                (w.value)(x, y)
            });
            let axis = match direction {
                Direction::X => 0,
                Direction::Y => 1,
            };
            let interp_derivative: f64 = (0..3).map(|a| nodal[a] * geo.grads[a][axis]).sum();
            let derivative = match direction {
                Direction::X => &w.dx,
                Direction::Y => &w.dy,
            };
            for (bary, wt) in quad.points.iter().zip(&quad.weights) {
                let [x, y] = geo.point(bary);
                integral += wt * geo.area * (derivative(x, y) - interp_derivative);
            }
            area += geo.area;
            for bary in &samples {
                let [x, y] = geo.point(bary);
                for (s, f) in sup.iter_mut().zip(&w.third) {
                    *s = s.max(f(x, y).abs());
                }
            }
        }
        let (hx, hy) = (mesh.hx(i), mesh.hy(j));
        let weights = match direction {
            Direction::X => [sup[0], sup[1], sup[2]],
            Direction::Y => [sup[1], sup[2], sup[3]],
        };
        let bound = area * (hx * hx * weights[0] + hx * hy * weights[1] + hy * hy * weights[2]);
        let lhs = integral.abs();
        let ratio = if bound > 0.0 {
            lhs / bound
        } else if lhs <= 1e-15 {
            // Round-off of an exactly vanishing integral.
            0.0
        } else {
            f64::INFINITY
        };
        records.push(PatchRecord {
            i,
            j,
            lhs,
            bound,
            ratio,
        });
    }

    Ok(PatchReport {
        direction,
        records,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, MeshParams};

    fn mesh(n: usize, eps: f64) -> ShishkinMesh {
        build_mesh(&MeshParams::new(n, eps, 2.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn quadratic_in_x_cancels() {
        let m = mesh(16, 1e-4);
        let r = verify_patch_identity(&m, &SmoothFunction::x_squared(), Direction::X).unwrap();
        assert!(r.max_lhs() < 1e-13, "{}", r.max_lhs());
        assert!(r.skipped > 0);
        assert_eq!(r.records.len() + r.skipped, 16 * 15);
    }

    #[test]
    fn linear_is_exact() {
        let m = mesh(8, 1e-3);
        let w = SmoothFunction::linear(1.5, -0.5, 2.0);
        for d in [Direction::X, Direction::Y] {
            let r = verify_patch_identity(&m, &w, d).unwrap();
            assert!(r.max_lhs() < 1e-14);
            assert_eq!(r.max_ratio(), 0.0);
        }
    }

    #[test]
    fn uniform_mesh_skips_nothing() {
        let m = mesh(8, 0.4);
        let r = verify_patch_identity(&m, &SmoothFunction::x_squared_y(), Direction::Y).unwrap();
        assert_eq!(r.skipped, 0);
    }

    #[test]
    fn ratios_bounded_over_h_sweep() {
        // Uniform meshes of halving size: x^2 y has a nonzero patch integral
        // scaling like h^2 meas(Q).
        let mut previous: Option<f64> = None;
        for n in [8, 16, 32] {
            let m = mesh(n, 0.4);
            let r =
                verify_patch_identity(&m, &SmoothFunction::x_squared_y(), Direction::X).unwrap();
            assert!(r.max_ratio() <= 1.0, "N={n}: {}", r.max_ratio());
            let lhs = r.max_lhs();
            assert!(lhs > 0.0);
            if let Some(prev) = previous {
                let order: f64 = (prev / lhs).log2();
                assert!((order - 4.0).abs() < 0.1, "{order}");
            }
            previous = Some(lhs);
        }
    }
}
