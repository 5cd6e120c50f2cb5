//! Piecewise-uniform Shishkin triangulation of the unit square.
//!
//! The square is split at `1 - lambda_x` and `1 - lambda_y` into a coarse
//! region and three layer regions. Each direction carries `N/2` uniform
//! cells on either side of the transition point, and every rectangle is cut
//! by the diagonal running from `(x_{i+1}, y_j)` to `(x_i, y_{j+1})`.
//!
//! Nodes are numbered lexicographically, `id = i + j (N + 1)`, and triangles
//! as `2 (i + j N) + o` with `o = 0` for [`Orientation::K1`] and `o = 1` for
//! [`Orientation::K2`].

mod macro_mesh;

pub use macro_mesh::{build_macro_mesh, AffineMap, MacroMesh, MacroTriangle};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SdfemError};

/// Default transition-parameter multiplier.
pub const DEFAULT_RHO: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshParams {
    pub n: usize,
    pub epsilon: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub rho: f64,
}

impl MeshParams {
    pub fn new(n: usize, epsilon: f64, beta1: f64, beta2: f64) -> Result<Self> {
        Self::with_rho(n, epsilon, beta1, beta2, DEFAULT_RHO)
    }

    pub fn with_rho(n: usize, epsilon: f64, beta1: f64, beta2: f64, rho: f64) -> Result<Self> {
        let params = Self {
            n,
            epsilon,
            beta1,
            beta2,
            rho,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 || self.n % 2 != 0 {
            return Err(SdfemError::Config(format!(
                "N must be an even integer >= 4, got {}",
                self.n
            )));
        }
        for (name, value) in [
            ("epsilon", self.epsilon),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("rho", self.rho),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(SdfemError::Config(format!(
                    "{name} must be a positive finite number, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// Whether the macrotriangle mesh can be built (`N/2` even).
    pub fn supports_postprocessing(&self) -> bool {
        self.n % 4 == 0
    }
}

/// Returns `(lambda_x, lambda_y)`, each `min(1/2, rho * eps / beta * ln N)`.
///
/// Logs a warning when either parameter clamps to `1/2`; the mesh is then
/// uniform in that direction and the layer-adapted error bounds do not apply.
pub fn compute_transition_parameters(params: &MeshParams) -> (f64, f64) {
    let ln_n = (params.n as f64).ln();
    let raw_x = params.rho * params.epsilon / params.beta1 * ln_n;
    let raw_y = params.rho * params.epsilon / params.beta2 * ln_n;
    let lambda_x = raw_x.min(0.5);
    let lambda_y = raw_y.min(0.5);
    if raw_x >= 0.5 || raw_y >= 0.5 {
        log::warn!(
            "transition parameter clamped to 1/2 (N = {}, epsilon = {:e}); \
             the mesh is not layer-adapted in that direction",
            params.n,
            params.epsilon
        );
    }
    (lambda_x, lambda_y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Orientation {
    /// Lower-left triangle `(x_i,y_j), (x_{i+1},y_j), (x_i,y_{j+1})`.
    K1,
    /// Upper-right triangle `(x_i,y_{j+1}), (x_{i+1},y_j), (x_{i+1},y_{j+1})`.
    K2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TriangleRef {
    pub i: usize,
    pub j: usize,
    pub orient: Orientation,
}

impl TriangleRef {
    pub fn new(i: usize, j: usize, orient: Orientation) -> Self {
        Self { i, j, orient }
    }

    pub fn k1(i: usize, j: usize) -> Self {
        Self::new(i, j, Orientation::K1)
    }

    pub fn k2(i: usize, j: usize) -> Self {
        Self::new(i, j, Orientation::K2)
    }

    /// Global element index on a mesh with `n` cells per direction.
    pub fn index(&self, n: usize) -> usize {
        2 * (self.i + self.j * n)
            + match self.orient {
                Orientation::K1 => 0,
                Orientation::K2 => 1,
            }
    }

    pub fn from_index(index: usize, n: usize) -> Self {
        let cell = index / 2;
        let orient = if index % 2 == 0 {
            Orientation::K1
        } else {
            Orientation::K2
        };
        Self::new(cell % n, cell / n, orient)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Subdomain {
    /// Coarse region `[0, 1-lx] x [0, 1-ly]`.
    S,
    /// Layer along `x = 1`.
    X,
    /// Layer along `y = 1`.
    Y,
    /// Corner layer.
    XY,
}

impl Subdomain {
    pub const ALL: [Subdomain; 4] = [Subdomain::S, Subdomain::X, Subdomain::Y, Subdomain::XY];

    pub fn from_cell(i: usize, j: usize, n: usize) -> Self {
        let half = n / 2;
        match (i >= half, j >= half) {
            (false, false) => Subdomain::S,
            (true, false) => Subdomain::X,
            (false, true) => Subdomain::Y,
            (true, true) => Subdomain::XY,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Subdomain::S => "S",
            Subdomain::X => "X",
            Subdomain::Y => "Y",
            Subdomain::XY => "XY",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ShishkinMesh {
    pub params: MeshParams,
    pub lambda_x: f64,
    pub lambda_y: f64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

/// Coordinates of a piecewise-uniform 1D Shishkin grid, generated per region
/// by affine interpolation so that `coords[n/2] == 1 - lambda` exactly.
fn shishkin_coordinates(n: usize, lambda: f64) -> Vec<f64> {
    let half = n / 2;
    let transition = 1.0 - lambda;
    (0..=n)
        .map(|i| {
            if i <= half {
                transition * (i as f64 / half as f64)
            } else {
                1.0 - lambda * ((n - i) as f64 / half as f64)
            }
        })
        .collect()
}

pub fn build_mesh(params: &MeshParams) -> Result<ShishkinMesh> {
    params.validate()?;
    let (lambda_x, lambda_y) = compute_transition_parameters(params);
    Ok(ShishkinMesh {
        params: *params,
        lambda_x,
        lambda_y,
        xs: shishkin_coordinates(params.n, lambda_x),
        ys: shishkin_coordinates(params.n, lambda_y),
    })
}

impl ShishkinMesh {
    #[inline]
    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn num_nodes(&self) -> usize {
        (self.n() + 1) * (self.n() + 1)
    }

    pub fn num_triangles(&self) -> usize {
        2 * self.n() * self.n()
    }

    #[inline]
    pub fn node_id(&self, i: usize, j: usize) -> usize {
        i + j * (self.n() + 1)
    }

    #[inline]
    pub fn node_indices(&self, id: usize) -> (usize, usize) {
        (id % (self.n() + 1), id / (self.n() + 1))
    }

    #[inline]
    pub fn node_coords(&self, id: usize) -> [f64; 2] {
        let (i, j) = self.node_indices(id);
        [self.xs[i], self.ys[j]]
    }

    pub fn is_boundary_node(&self, id: usize) -> bool {
        let (i, j) = self.node_indices(id);
        let n = self.n();
        i == 0 || j == 0 || i == n || j == n
    }

    #[inline]
    pub fn hx(&self, i: usize) -> f64 {
        self.xs[i + 1] - self.xs[i]
    }

    #[inline]
    pub fn hy(&self, j: usize) -> f64 {
        self.ys[j + 1] - self.ys[j]
    }

    /// All triangles in global element order.
    pub fn triangles(&self) -> impl Iterator<Item = TriangleRef> + '_ {
        let n = self.n();
        (0..self.num_triangles()).map(move |k| TriangleRef::from_index(k, n))
    }

    pub fn check_triangle(&self, tri: &TriangleRef) -> Result<()> {
        let n = self.n();
        if tri.i >= n {
            return Err(SdfemError::Index {
                what: "triangle cell i",
                index: tri.i,
                limit: n,
            });
        }
        if tri.j >= n {
            return Err(SdfemError::Index {
                what: "triangle cell j",
                index: tri.j,
                limit: n,
            });
        }
        Ok(())
    }

    pub fn classify_triangle(&self, tri: &TriangleRef) -> Result<Subdomain> {
        self.check_triangle(tri)?;
        Ok(Subdomain::from_cell(tri.i, tri.j, self.n()))
    }

    /// Global node ids of the triangle's vertices, counterclockwise.
    pub fn triangle_nodes(&self, tri: &TriangleRef) -> [usize; 3] {
        let (i, j) = (tri.i, tri.j);
        match tri.orient {
            Orientation::K1 => [
                self.node_id(i, j),
                self.node_id(i + 1, j),
                self.node_id(i, j + 1),
            ],
            Orientation::K2 => [
                self.node_id(i, j + 1),
                self.node_id(i + 1, j),
                self.node_id(i + 1, j + 1),
            ],
        }
    }

    pub fn triangle_vertices(&self, tri: &TriangleRef) -> [[f64; 2]; 3] {
        self.triangle_nodes(tri).map(|id| self.node_coords(id))
    }

    pub fn triangle_area(&self, tri: &TriangleRef) -> f64 {
        0.5 * self.hx(tri.i) * self.hy(tri.j)
    }

    /// Cell index `c` with `coords[c] <= t <= coords[c + 1]`, found by index
    /// arithmetic on the two uniform pieces. Returns `None` outside `[0, 1]`.
    pub fn cell_containing(coords: &[f64], t: f64) -> Option<usize> {
        let n = coords.len() - 1;
        if !(coords[0]..=coords[n]).contains(&t) {
            return None;
        }
        let half = n / 2;
        let transition = coords[half];
        let guess = if t <= transition {
            ((t / transition) * half as f64).floor() as isize
        } else {
            half as isize + (((t - transition) / (1.0 - transition)) * half as f64).floor() as isize
        };
        let mut c = guess.clamp(0, n as isize - 1) as usize;
        while c > 0 && t < coords[c] {
            c -= 1;
        }
        while c + 1 < n && t > coords[c + 1] {
            c += 1;
        }
        Some(c)
    }

    /// Fine triangle containing `(x, y)`.
    pub fn locate(&self, x: f64, y: f64) -> Result<TriangleRef> {
        let (Some(i), Some(j)) = (
            Self::cell_containing(&self.xs, x),
            Self::cell_containing(&self.ys, y),
        ) else {
            return Err(SdfemError::OutsideDomain { x, y });
        };
        let s = (x - self.xs[i]) / self.hx(i);
        let t = (y - self.ys[j]) / self.hy(j);
        let orient = if s + t <= 1.0 {
            Orientation::K1
        } else {
            Orientation::K2
        };
        Ok(TriangleRef::new(i, j, orient))
    }

    pub fn subdomain_area(&self, sub: Subdomain) -> f64 {
        let (lx, ly) = (self.lambda_x, self.lambda_y);
        match sub {
            Subdomain::S => (1.0 - lx) * (1.0 - ly),
            Subdomain::X => lx * (1.0 - ly),
            Subdomain::Y => (1.0 - lx) * ly,
            Subdomain::XY => lx * ly,
        }
    }
}
