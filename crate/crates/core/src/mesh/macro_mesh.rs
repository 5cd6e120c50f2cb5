use super::{Orientation, ShishkinMesh, Subdomain, TriangleRef};
use crate::error::{Result, SdfemError};

/// Affine map from the reference triangle `(0,0), (1,0), (0,1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub origin: [f64; 2],
    /// Columns are the edge vectors `p1 - p0` and `p2 - p0`.
    pub jacobian: [[f64; 2]; 2],
    pub inverse: [[f64; 2]; 2],
}

impl AffineMap {
    pub fn from_vertices(v: [[f64; 2]; 3]) -> Self {
        let (a, b) = (v[1][0] - v[0][0], v[2][0] - v[0][0]);
        let (c, d) = (v[1][1] - v[0][1], v[2][1] - v[0][1]);
        let det = a * d - b * c;
        Self {
            origin: v[0],
            jacobian: [[a, b], [c, d]],
            inverse: [[d / det, -b / det], [-c / det, a / det]],
        }
    }

    pub fn to_reference(&self, x: f64, y: f64) -> [f64; 2] {
        let (dx, dy) = (x - self.origin[0], y - self.origin[1]);
        let m = &self.inverse;
        [m[0][0] * dx + m[0][1] * dy, m[1][0] * dx + m[1][1] * dy]
    }

    pub fn to_physical(&self, r: f64, s: f64) -> [f64; 2] {
        let m = &self.jacobian;
        [
            self.origin[0] + m[0][0] * r + m[0][1] * s,
            self.origin[1] + m[1][0] * r + m[1][1] * s,
        ]
    }
}

#[derive(Debug, Clone)]
pub struct MacroTriangle {
    pub subdomain: Subdomain,
    pub fine: [TriangleRef; 4],
    /// Vertices `v0, v1, v2` followed by the midpoints of edges
    /// `v0v1`, `v1v2`, `v2v0`.
    pub nodes: [usize; 6],
    pub map: AffineMap,
}

/// Coarse mesh of macrotriangles, each the union of four fine triangles.
#[derive(Debug, Clone)]
pub struct MacroMesh {
    pub n: usize,
    pub lambda_x: f64,
    pub lambda_y: f64,
    pub triangles: Vec<MacroTriangle>,
    /// Macrotriangle index for every fine element index.
    pub fine_to_macro: Vec<usize>,
}

pub fn build_macro_mesh(mesh: &ShishkinMesh) -> Result<MacroMesh> {
    let n = mesh.n();
    if n % 4 != 0 {
        return Err(SdfemError::Config(format!(
            "postprocessing requires N divisible by 4, got {n}"
        )));
    }
    let half = n / 2;
    let mut triangles = Vec::with_capacity(2 * half * half);
    let mut fine_to_macro = vec![usize::MAX; mesh.num_triangles()];
    let id = |i, j| mesh.node_id(i, j);

    for bj in 0..half {
        for bi in 0..half {
            let (i, j) = (2 * bi, 2 * bj);
            let subdomain = Subdomain::from_cell(i, j, n);
            let lower = (
                [
                    TriangleRef::k1(i, j),
                    TriangleRef::k2(i, j),
                    TriangleRef::k1(i + 1, j),
                    TriangleRef::k1(i, j + 1),
                ],
                [
                    id(i, j),
                    id(i + 2, j),
                    id(i, j + 2),
                    id(i + 1, j),
                    id(i + 1, j + 1),
                    id(i, j + 1),
                ],
            );
            let upper = (
                [
                    TriangleRef::k2(i + 1, j),
                    TriangleRef::k1(i + 1, j + 1),
                    TriangleRef::k2(i + 1, j + 1),
                    TriangleRef::k2(i, j + 1),
                ],
                [
                    id(i + 2, j),
                    id(i + 2, j + 2),
                    id(i, j + 2),
                    id(i + 2, j + 1),
                    id(i + 1, j + 2),
                    id(i + 1, j + 1),
                ],
            );
            for (fine, nodes) in [lower, upper] {
                let index = triangles.len();
                for t in &fine {
                    debug_assert_eq!(Subdomain::from_cell(t.i, t.j, n), subdomain);
                    fine_to_macro[t.index(n)] = index;
                }
                let map = AffineMap::from_vertices([
                    mesh.node_coords(nodes[0]),
                    mesh.node_coords(nodes[1]),
                    mesh.node_coords(nodes[2]),
                ]);
                triangles.push(MacroTriangle {
                    subdomain,
                    fine,
                    nodes,
                    map,
                });
            }
        }
    }

    Ok(MacroMesh {
        n,
        lambda_x: mesh.lambda_x,
        lambda_y: mesh.lambda_y,
        triangles,
        fine_to_macro,
    })
}

impl MacroMesh {
    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Whether this macromesh was generated from `mesh`.
    pub fn matches(&self, mesh: &ShishkinMesh) -> bool {
        self.n == mesh.n() && self.lambda_x == mesh.lambda_x && self.lambda_y == mesh.lambda_y
    }

    pub fn macro_of(&self, tri: &TriangleRef) -> usize {
        self.fine_to_macro[tri.index(self.n)]
    }

    /// Lowest-index macrotriangle containing `(x, y)`.
    pub fn locate(&self, mesh: &ShishkinMesh, x: f64, y: f64) -> Result<usize> {
        let (Some(ci), Some(cj)) = (
            ShishkinMesh::cell_containing(&mesh.xs, x),
            ShishkinMesh::cell_containing(&mesh.ys, y),
        ) else {
            return Err(SdfemError::OutsideDomain { x, y });
        };
        let half = self.n / 2;
        let (bi, bj) = (ci / 2, cj / 2);
        let mut best: Option<usize> = None;
        // Points on block boundaries may also belong to the block below or
        // to the left, which carries a lower index.
        for j in bj.saturating_sub(1)..=(bj + 1).min(half - 1) {
            for i in bi.saturating_sub(1)..=(bi + 1).min(half - 1) {
                for k in 0..2 {
                    let index = 2 * (i + j * half) + k;
                    if best.is_some_and(|b| b <= index) {
                        continue;
                    }
                    let [r, s] = self.triangles[index].map.to_reference(x, y);
                    let tol = 1e-12;
                    if r >= -tol && s >= -tol && r + s <= 1.0 + tol {
                        best = Some(index);
                    }
                }
            }
        }
        best.ok_or(SdfemError::OutsideDomain { x, y })
    }
}

impl MacroTriangle {
    pub fn contains_fine(&self, tri: &TriangleRef) -> bool {
        self.fine.contains(tri)
    }

    pub fn lower(&self) -> bool {
        self.fine[0].orient == Orientation::K1
    }
}
