//! Symmetric quadrature rules on triangles in barycentric form.
//!
//! Weights sum to one; multiply by the element area on use.

use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid() -> Self {
        Self {
            points: vec![[1.0 / 3.0; 3]],
            weights: vec![1.0],
            degree: 1,
        }
    }

    pub fn strang_fix_3() -> Self {
        let mut rule = Self::empty(2);
        rule.push_orbit3(2.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0);
        rule
    }

    /// Dunavant's 6-point rule, exact for degree 4.
    pub fn dunavant_4() -> Self {
        let mut rule = Self::empty(4);
        rule.push_orbit3(0.108103018168070, 0.445948490915965, 0.223381589678011);
        rule.push_orbit3(0.816847572980459, 0.091576213509771, 0.109951743655322);
        rule
    }

    /// Dunavant's 12-point rule, exact for degree 6.
    pub fn dunavant_6() -> Self {
        let mut rule = Self::empty(6);
        rule.push_orbit3(0.501426509658179, 0.249286745170910, 0.116786275726379);
        rule.push_orbit3(0.873821971016996, 0.063089014491502, 0.050844906370207);
        rule.push_orbit6(
            0.053145049844817,
            0.310352451033784,
            0.636502499121399,
            0.082851075618374,
        );
        rule
    }

    /// Conical product of Gauss-Legendre rules, exact for `degree`.
    pub fn collapsed_gauss(degree: usize) -> Self {
        // The collapse adds one degree in the first variable.
        let n = (degree + 3) / 2;
        let (nodes, weights) = gauss_legendre(n);
        let mut rule = Self::empty(degree);
        for (&a, &wa) in nodes.iter().zip(&weights) {
            let u = 0.5 * (a + 1.0);
            for (&b, &wb) in nodes.iter().zip(&weights) {
                let v = 0.5 * (b + 1.0);
                let (x, y) = (u, v * (1.0 - u));
                // Reference area is 1/2; the Jacobian of the collapse is (1-u)/4.
                rule.points.push([1.0 - x - y, x, y]);
                rule.weights.push(2.0 * wa * wb * 0.25 * (1.0 - u));
            }
        }
        rule
    }

    /// Cheapest rule available here that integrates degree `degree` exactly.
    pub fn for_degree(degree: usize) -> Self {
        match degree {
            0 | 1 => Self::centroid(),
            2 => Self::strang_fix_3(),
            3 | 4 => Self::dunavant_4(),
            5 | 6 => Self::dunavant_6(),
            d => Self::collapsed_gauss(d),
        }
    }

    fn empty(degree: usize) -> Self {
        Self {
            points: Vec::new(),
            weights: Vec::new(),
            degree,
        }
    }

    fn push_orbit3(&mut self, a: f64, b: f64, w: f64) {
        for p in [[a, b, b], [b, a, b], [b, b, a]] {
            self.points.push(p);
            self.weights.push(w);
        }
    }

    fn push_orbit6(&mut self, a: f64, b: f64, c: f64, w: f64) {
        for p in [
            [a, b, c],
            [a, c, b],
            [b, a, c],
            [b, c, a],
            [c, a, b],
            [c, b, a],
        ] {
            self.points.push(p);
            self.weights.push(w);
        }
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n {
        let mut x = (PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        nodes[k] = x;
        weights[k] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}
