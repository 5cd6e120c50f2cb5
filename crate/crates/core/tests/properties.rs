use proptest::prelude::*;

use sdfem::analysis::{discrete_norms, nodal_interpolant, NormWeights};
use sdfem::assembly::{assemble_norm_matrices, assemble_system, DiscreteField};
use sdfem::mesh::{
    build_macro_mesh, build_mesh, compute_transition_parameters, MeshParams, Subdomain,
};
use sdfem::postprocess::{eval_quadratic, postprocess};
use sdfem::problem::make_test_problem;
use sdfem::quadrature::QuadRule;

fn even_n() -> impl Strategy<Value = usize> {
    (2usize..=24).prop_map(|k| 2 * k)
}

fn epsilon() -> impl Strategy<Value = f64> {
    (-10.0f64..0.0).prop_map(|p| 10f64.powf(p))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mesh_is_piecewise_uniform(n in even_n(), eps in epsilon(), rho in 0.5f64..4.0) {
        let params = MeshParams::with_rho(n, eps, 2.0, 1.0, rho).unwrap();
        let (lx, ly) = compute_transition_parameters(&params);
        let mesh = build_mesh(&params).unwrap();
        prop_assert_eq!(mesh.num_nodes(), (n + 1) * (n + 1));
        prop_assert_eq!(mesh.num_triangles(), 2 * n * n);
        prop_assert!(lx <= 0.5 && ly <= 0.5 && lx > 0.0 && ly > 0.0);
        for (coords, lambda) in [(&mesh.xs, lx), (&mesh.ys, ly)] {
            prop_assert_eq!(coords[0], 0.0);
            prop_assert_eq!(coords[n], 1.0);
            prop_assert!((coords[n / 2] - (1.0 - lambda)).abs() <= 1e-15);
            prop_assert!(coords.windows(2).all(|w| w[1] > w[0]));
            let coarse = (1.0 - lambda) / (n / 2) as f64;
            let fine = lambda / (n / 2) as f64;
            for k in 0..n {
                let h = coords[k + 1] - coords[k];
                let expect = if k < n / 2 { coarse } else { fine };
                // Differences of coordinates near 1 carry absolute rounding.
                prop_assert!((h - expect).abs() <= 1e-12 * expect + 4.0 * f64::EPSILON);
            }
            // Coarse spacing between 1/N and 2/N.
            prop_assert!(coarse >= 1.0 / n as f64 - 1e-15 && coarse <= 2.0 / n as f64 + 1e-15);
        }
    }

    #[test]
    fn subdomain_areas_partition_the_square(n in even_n(), eps in epsilon()) {
        let mesh = build_mesh(&MeshParams::new(n, eps, 2.0, 1.0).unwrap()).unwrap();
        let total: f64 = Subdomain::ALL.iter().map(|&s| mesh.subdomain_area(s)).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        let fine: f64 = mesh.triangles().map(|t| mesh.triangle_area(&t)).sum();
        prop_assert!((fine - 1.0).abs() < 1e-12);
    }

    #[test]
    fn macro_mesh_partitions(k in 1usize..=8, eps in epsilon()) {
        let n = 4 * k;
        let mesh = build_mesh(&MeshParams::new(n, eps, 2.0, 1.0).unwrap()).unwrap();
        let macro_mesh = build_macro_mesh(&mesh).unwrap();
        prop_assert_eq!(macro_mesh.len(), 2 * (n / 2) * (n / 2));
        let mut seen = vec![0usize; mesh.num_triangles()];
        for m in &macro_mesh.triangles {
            for t in &m.fine {
                seen[t.index(n)] += 1;
                prop_assert_eq!(mesh.classify_triangle(t).unwrap(), m.subdomain);
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn quadrature_integrates_monomials(a in 0usize..=3, b in 0usize..=3, c in 0usize..=3) {
        // int over the unit simplex of l0^a l1^b l2^c = 2 a! b! c! / (a+b+c+2)!, area 1/2.
        let fact = |k: usize| (1..=k).product::<usize>() as f64;
        let exact = 2.0 * fact(a) * fact(b) * fact(c) / fact(a + b + c + 2);
        for rule in [QuadRule::dunavant_6(), QuadRule::for_degree(9)] {
            prop_assume!(a + b + c <= rule.degree);
            let approx: f64 = rule
                .points
                .iter()
                .zip(&rule.weights)
                .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32) * p[2].powi(c as i32))
                .sum();
            prop_assert!((approx - exact).abs() < 1e-13, "{} vs {}", approx, exact);
        }
    }

    #[test]
    fn postprocess_reproduces_quadratics(
        k in 1usize..=4,
        coef in proptest::array::uniform6(-2.0f64..2.0),
        px in 0.0f64..1.0,
        py in 0.0f64..1.0,
    ) {
        // eps = 1 gives a uniform mesh, so every macrotriangle is affine-exact.
        let n = 4 * k;
        let mesh = build_mesh(&MeshParams::new(n, 1.0, 2.0, 1.0).unwrap()).unwrap();
        let macro_mesh = build_macro_mesh(&mesh).unwrap();
        let q = |x: f64, y: f64| coef[0] + coef[1] * x + coef[2] * y + coef[3] * x * x + coef[4] * x * y + coef[5] * y * y;
        let field = nodal_interpolant(&mesh, q);
        let post = postprocess(&mesh, &macro_mesh, &field).unwrap();
        let (v, g) = eval_quadratic(&post, px, py).unwrap();
        prop_assert!((v - q(px, py)).abs() < 1e-12);
        let gx = coef[1] + 2.0 * coef[3] * px + coef[4] * py;
        let gy = coef[2] + coef[4] * px + 2.0 * coef[5] * py;
        prop_assert!((g[0] - gx).abs() < 1e-10 && (g[1] - gy).abs() < 1e-10);
    }

    #[test]
    fn sd_form_dominates_sd_norm(seed in any::<u64>(), eps in prop_oneof![Just(1e-4), Just(1e-8)]) {
        use rand::{Rng, SeedableRng};
        let n = 8;
        let problem = make_test_problem(eps);
        let mesh = build_mesh(&MeshParams::new(n, eps, 2.0, 1.0).unwrap()).unwrap();
        let system = assemble_system(&mesh, &problem, 1.0).unwrap();
        let norms = assemble_norm_matrices(&mesh, &problem, 1.0).unwrap();
        let weights = NormWeights::new(problem.mu0, eps).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..system.num_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let form = system.matrix.quadratic_form(&v).unwrap();
        let field: DiscreteField = system.expand(&v).unwrap();
        let sd = discrete_norms(&field, &norms, &weights).unwrap().sd;
        prop_assert!(form >= 0.5 * sd * sd);
    }
}
