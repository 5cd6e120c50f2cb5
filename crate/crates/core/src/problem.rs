//! Continuous convection-diffusion problems `-eps Lap u + b.grad u + c u = f`
//! on the unit square with homogeneous Dirichlet data.

use std::fmt;
use std::sync::Arc;

use crate::error::{Result, SdfemError};

pub type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Name under which the built-in two-layer test problem is registered.
pub const LAYER_PROBLEM: &str = "exp-layers";
/// Verification-only problem with a linear exact solution.
pub const LINEAR_PROBLEM: &str = "linear";

#[derive(Clone)]
pub struct ExactSolution {
    pub u: ScalarFn,
    pub u_x: ScalarFn,
    pub u_y: ScalarFn,
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub epsilon: f64,
    pub b1: ScalarFn,
    pub b2: ScalarFn,
    pub c: ScalarFn,
    pub f: ScalarFn,
    /// Lower bound for `c - div(b)/2`.
    pub mu0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub exact: Option<ExactSolution>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("epsilon", &self.epsilon)
            .field("mu0", &self.mu0)
            .field("beta1", &self.beta1)
            .field("beta2", &self.beta2)
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

impl ProblemSpec {
    #[inline]
    pub fn convection(&self, x: f64, y: f64) -> [f64; 2] {
        [(self.b1)(x, y), (self.b2)(x, y)]
    }

    pub fn eval_exact(&self, x: f64, y: f64) -> Result<(f64, f64, f64)> {
        let exact = self.exact.as_ref().ok_or_else(|| {
            SdfemError::Unsupported(format!("problem '{}' has no exact solution", self.name))
        })?;
        Ok(((exact.u)(x, y), (exact.u_x)(x, y), (exact.u_y)(x, y)))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("epsilon", self.epsilon),
            ("mu0", self.mu0),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(SdfemError::Config(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        Ok(())
    }

    /// Checks that the exact solution (if any) vanishes on the boundary at
    /// `samples` points per side.
    pub fn check_boundary(&self, samples: usize) -> Result<()> {
        let Some(exact) = &self.exact else {
            return Ok(());
        };
        for k in 0..=samples {
            let t = k as f64 / samples as f64;
            for (x, y) in [(t, 0.0), (t, 1.0), (0.0, t), (1.0, t)] {
                let value = (exact.u)(x, y);
                if value.abs() > 1e-12 {
                    return Err(SdfemError::Config(format!(
                        "exact solution of '{}' is {value:e} at boundary point ({x}, {y})",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Smooth-plus-layers manufactured solution
/// `u = 2 sin x (1 - e^{-2(1-x)/eps}) y^2 (1 - e^{-(1-y)/eps})`.
#[derive(Debug, Clone, Copy)]
struct LayerSolution {
    eps: f64,
}

/// Values of a one-dimensional factor: `(v, v', eps v'')`.
type Factor = (f64, f64, f64);

impl LayerSolution {
    fn x_factor(&self, x: f64) -> Factor {
        let e = (-2.0 * (1.0 - x) / self.eps).exp();
        let (s, c) = x.sin_cos();
        let g = 2.0 * s * (1.0 - e);
        let dg = 2.0 * c * (1.0 - e) - 4.0 * s * (e / self.eps);
        let eps_d2g = -2.0 * self.eps * s * (1.0 - e) - 8.0 * c * e - 8.0 * s * (e / self.eps);
        (g, dg, eps_d2g)
    }

    fn y_factor(&self, y: f64) -> Factor {
        let e = (-(1.0 - y) / self.eps).exp();
        let h = y * y * (1.0 - e);
        let dh = 2.0 * y * (1.0 - e) - y * y * (e / self.eps);
        let eps_d2h = 2.0 * self.eps * (1.0 - e) - 4.0 * y * e - y * y * (e / self.eps);
        (h, dh, eps_d2h)
    }

    fn u(&self, x: f64, y: f64) -> f64 {
        self.x_factor(x).0 * self.y_factor(y).0
    }

    fn u_x(&self, x: f64, y: f64) -> f64 {
        self.x_factor(x).1 * self.y_factor(y).0
    }

    fn u_y(&self, x: f64, y: f64) -> f64 {
        self.x_factor(x).0 * self.y_factor(y).1
    }

    /// `-eps (g'' h + g h'') + 2 g' h + g h' + g h`.
    fn rhs(&self, x: f64, y: f64) -> f64 {
        let (g, dg, eps_d2g) = self.x_factor(x);
        let (h, dh, eps_d2h) = self.y_factor(y);
        -(eps_d2g * h + g * eps_d2h) + 2.0 * dg * h + g * dh + g * h
    }
}

/// The two-layer benchmark: `b = (2, 1)`, `c = 1`, with `f` manufactured
/// from the exact solution above.
pub fn make_test_problem(epsilon: f64) -> ProblemSpec {
    let sol = LayerSolution { eps: epsilon };
    ProblemSpec {
        name: LAYER_PROBLEM.to_string(),
        epsilon,
        b1: Arc::new(|_, _| 2.0),
        b2: Arc::new(|_, _| 1.0),
        c: Arc::new(|_, _| 1.0),
        f: Arc::new(move |x, y| sol.rhs(x, y)),
        mu0: 1.0,
        beta1: 2.0,
        beta2: 1.0,
        exact: Some(ExactSolution {
            u: Arc::new(move |x, y| sol.u(x, y)),
            u_x: Arc::new(move |x, y| sol.u_x(x, y)),
            u_y: Arc::new(move |x, y| sol.u_y(x, y)),
        }),
    }
}

/// Same coefficients as the benchmark with exact solution `x + 2y`.
///
/// The solution does not vanish on the boundary, so this problem is only
/// meaningful for interpolation checks, not for solves.
pub fn make_linear_problem(epsilon: f64) -> ProblemSpec {
    ProblemSpec {
        name: LINEAR_PROBLEM.to_string(),
        epsilon,
        b1: Arc::new(|_, _| 2.0),
        b2: Arc::new(|_, _| 1.0),
        c: Arc::new(|_, _| 1.0),
        f: Arc::new(|x, y| 4.0 + x + 2.0 * y),
        mu0: 1.0,
        beta1: 2.0,
        beta2: 1.0,
        exact: Some(ExactSolution {
            u: Arc::new(|x, y| x + 2.0 * y),
            u_x: Arc::new(|_, _| 1.0),
            u_y: Arc::new(|_, _| 2.0),
        }),
    }
}

pub fn problem_by_name(name: &str, epsilon: f64) -> Result<ProblemSpec> {
    match name {
        LAYER_PROBLEM => Ok(make_test_problem(epsilon)),
        LINEAR_PROBLEM => Ok(make_linear_problem(epsilon)),
        other => Err(SdfemError::Config(format!("unknown problem '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_residual(p: &ProblemSpec, x: f64, y: f64, h: f64) -> f64 {
        let u = &p.exact.as_ref().unwrap().u;
        let uxx = (u(x + h, y) - 2.0 * u(x, y) + u(x - h, y)) / (h * h);
        let uyy = (u(x, y + h) - 2.0 * u(x, y) + u(x, y - h)) / (h * h);
        let ux = (u(x + h, y) - u(x - h, y)) / (2.0 * h);
        let uy = (u(x, y + h) - u(x, y - h)) / (2.0 * h);
        -p.epsilon * (uxx + uyy) + 2.0 * ux + uy + u(x, y)
    }

    #[test]
    fn exact_values() {
        let p = make_test_problem(1e-8);
        let (u, ux, _) = p.eval_exact(0.5, 0.5).unwrap();
        assert!((u - 0.2397128).abs() < 1e-7, "{u}");
        assert!((ux - 0.4387913).abs() < 1e-7, "{ux}");
        for t in [0.0, 0.1, 0.5, 0.99, 1.0] {
            assert_eq!(p.eval_exact(0.0, t).unwrap().0, 0.0);
            assert_eq!(p.eval_exact(t, 0.0).unwrap().0, 0.0);
            assert_eq!(p.eval_exact(1.0, t).unwrap().0.abs(), 0.0);
            assert_eq!(p.eval_exact(t, 1.0).unwrap().0.abs(), 0.0);
        }
        p.check_boundary(50).unwrap();
    }

    #[test]
    fn rhs_matches_finite_differences() {
        let p = make_test_problem(1e-2);
        let f = (p.f)(0.3, 0.7);
        let fd = fd_residual(&p, 0.3, 0.7, 1e-5);
        assert!(((f - fd) / f).abs() < 1e-5, "f = {f}, fd = {fd}");
    }

    #[test]
    fn rhs_matches_finite_differences_at_many_points() {
        for eps in [1e-2, 1e-4] {
            let p = make_test_problem(eps);
            // Outside the layers with a step well below the layer width.
            for &(x, y) in &[(0.2, 0.3), (0.5, 0.5), (0.7, 0.1), (0.9, 0.85)] {
                let f = (p.f)(x, y);
                let fd = fd_residual(&p, x, y, 1e-4);
                assert!(
                    ((f - fd) / f).abs() < 1e-4,
                    "eps={eps} ({x},{y}) {f} vs {fd}"
                );
            }
            // Inside the layers the step must resolve eps.
            let h = eps * 1e-3;
            for &(x, y) in &[(1.0 - 2.0 * eps, 0.5), (0.5, 1.0 - 1.5 * eps)] {
                let f = (p.f)(x, y);
                let fd = fd_residual(&p, x, y, h);
                assert!(
                    ((f - fd) / f).abs() < 1e-4,
                    "eps={eps} ({x},{y}) {f} vs {fd}"
                );
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = make_test_problem(1e-2);
        let u = &p.exact.as_ref().unwrap().u;
        let (x, y, h) = (0.97, 0.985, 1e-6);
        let (_, ux, uy) = p.eval_exact(x, y).unwrap();
        let fx = (u(x + h, y) - u(x - h, y)) / (2.0 * h);
        let fy = (u(x, y + h) - u(x, y - h)) / (2.0 * h);
        assert!(((ux - fx) / ux).abs() < 1e-6);
        assert!(((uy - fy) / uy).abs() < 1e-6);
    }

    #[test]
    fn finite_for_tiny_epsilon() {
        let p = make_test_problem(1e-300);
        for &(x, y) in &[(1.0, 1.0), (1.0, 0.5), (0.5, 1.0), (0.3, 0.3), (1.0, 0.0)] {
            let (u, ux, uy) = p.eval_exact(x, y).unwrap();
            assert!(
                u.is_finite() && ux.is_finite() && uy.is_finite(),
                "({x},{y})"
            );
        }
    }

    #[test]
    fn reaction_bound_holds() {
        // Constant convection: c - div(b)/2 = c = 1 everywhere.
        let p = make_test_problem(1e-4);
        for k in 0..20 {
            let t = k as f64 / 19.0;
            assert!((p.c)(t, 1.0 - t) >= p.mu0);
        }
    }

    #[test]
    fn missing_exact_is_unsupported() {
        let mut p = make_test_problem(1e-4);
        p.exact = None;
        assert!(matches!(
            p.eval_exact(0.5, 0.5),
            Err(SdfemError::Unsupported(_))
        ));
    }

    #[test]
    fn linear_problem_fails_boundary_check() {
        assert!(make_linear_problem(1e-4).check_boundary(4).is_err());
        assert!(problem_by_name("nope", 1e-4).is_err());
    }
}
