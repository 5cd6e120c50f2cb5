//! One `(N, epsilon)` solve with all error quantities, and sweeps over many.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    continuous_error_energy_norm, discrete_norms, nodal_interpolant, CaseRecord, ErrorReport,
    LinearField, NormWeights, ReportHeader,
};
use crate::assembly::{
    assemble_norm_matrices, assemble_system_with, AssemblyOptions, DiscreteField, LinearSystem,
};
use crate::error::{Result, SdfemError};
use crate::linalg::{gmres, GmresOptions, SolveStats};
use crate::mesh::{build_macro_mesh, build_mesh, MeshParams, ShishkinMesh, DEFAULT_RHO};
use crate::postprocess::postprocess;
use crate::problem::{problem_by_name, ProblemSpec, LAYER_PROBLEM};
use crate::quadrature::QuadRule;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaseSettings {
    pub problem: String,
    pub rho: f64,
    pub assembly: AssemblyOptions,
    pub solver: GmresOptions,
    /// Exactness degree of the error-norm quadrature; at least 6.
    pub norm_degree: usize,
    pub postprocess: bool,
}

impl Default for CaseSettings {
    fn default() -> Self {
        Self {
            problem: LAYER_PROBLEM.to_string(),
            rho: DEFAULT_RHO,
            assembly: AssemblyOptions::default(),
            solver: GmresOptions::default(),
            norm_degree: 6,
            postprocess: true,
        }
    }
}

/// Mesh, system and discrete solution of one case.
pub struct Solved {
    pub problem: ProblemSpec,
    pub mesh: ShishkinMesh,
    pub system: LinearSystem,
    pub solution: DiscreteField,
    pub stats: SolveStats,
}

pub fn build_case_mesh(n: usize, problem: &ProblemSpec, rho: f64) -> Result<ShishkinMesh> {
    build_mesh(&MeshParams::with_rho(
        n,
        problem.epsilon,
        problem.beta1,
        problem.beta2,
        rho,
    )?)
}

/// Assemble and solve. A non-converged GMRES run is not an error here; the
/// caller inspects `stats.converged`.
pub fn solve_case(n: usize, epsilon: f64, settings: &CaseSettings) -> Result<Solved> {
    let problem = problem_by_name(&settings.problem, epsilon)?;
    problem.validate()?;
    let mesh = build_case_mesh(n, &problem, settings.rho)?;
    let system = assemble_system_with(&mesh, &problem, &settings.assembly)?;
    let (x, stats) = gmres(&system.matrix, &system.rhs, &settings.solver)?;
    let solution = system.expand(&x)?;
    Ok(Solved {
        problem,
        mesh,
        system,
        solution,
        stats,
    })
}

/// Solve one case and evaluate every tabulated error.
pub fn run_case(n: usize, epsilon: f64, settings: &CaseSettings) -> Result<CaseRecord> {
    if settings.postprocess && n % 4 != 0 {
        return Err(SdfemError::Config(format!(
            "postprocessing requires N divisible by 4, got {n}"
        )));
    }
    let solved = solve_case(n, epsilon, settings)?;
    let Solved {
        problem,
        mesh,
        solution,
        stats,
        ..
    } = &solved;
    let exact = problem.exact.as_ref().ok_or_else(|| {
        SdfemError::Unsupported(format!("problem '{}' has no exact solution", problem.name))
    })?;
    let weights = NormWeights::new(problem.mu0, epsilon)?;
    let matrices = assemble_norm_matrices(mesh, problem, settings.assembly.c_star)?;
    let interp = nodal_interpolant(mesh, |x, y| (exact.u)(x, y));
    let close = discrete_norms(&interp.sub(solution)?, &matrices, &weights)?;
    let quad = QuadRule::for_degree(settings.norm_degree);
    let err_energy =
        continuous_error_energy_norm(mesh, exact, &LinearField::new(solution), &weights, &quad)?;
    let err_post_energy = if settings.postprocess {
        let macro_mesh = build_macro_mesh(mesh)?;
        let post = postprocess(mesh, &macro_mesh, solution)?;
        Some(continuous_error_energy_norm(
            mesh, exact, &post, &weights, &quad,
        )?)
    } else {
        None
    };
    if !stats.converged {
        log::warn!(
            "GMRES did not converge for N = {n}, epsilon = {epsilon:e} (residual {:e})",
            stats.relative_residual
        );
    }
    Ok(CaseRecord {
        n,
        epsilon,
        err_interp_energy: Some(close.energy),
        err_interp_sd: Some(close.sd),
        err_energy: Some(err_energy),
        err_post_energy,
        gmres_iters: Some(stats.iterations),
        residual: Some(stats.relative_residual),
        converged: stats.converged,
        error: None,
    })
}

/// Run every `(N, epsilon)` pair. Failures are recorded per row and do not
/// stop the sweep. Rows are sorted, so `parallel` never changes the output.
pub fn sweep(
    ns: &[usize],
    epsilons: &[f64],
    settings: &CaseSettings,
    parallel: bool,
) -> Result<ErrorReport> {
    let mu0 = problem_by_name(&settings.problem, epsilons.first().copied().unwrap_or(1.0))?.mu0;
    let cases: Vec<(usize, f64)> = epsilons
        .iter()
        .flat_map(|&e| ns.iter().map(move |&n| (n, e)))
        .collect();
    let run = |&(n, e): &(usize, f64)| {
        run_case(n, e, settings).unwrap_or_else(|err| {
            log::error!("N = {n}, epsilon = {e:e}: {err}");
            CaseRecord::failed(n, e, err.to_string())
        })
    };
    let records: Vec<CaseRecord> = if parallel {
        cases.par_iter().map(run).collect()
    } else {
        cases.iter().map(run).collect()
    };
    Ok(ErrorReport::new(
        ReportHeader {
            problem: settings.problem.clone(),
            mu0,
            c_star: settings.assembly.c_star,
            rho: settings.rho,
        },
        records,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_case_runs() {
        let r = run_case(8, 1e-8, &CaseSettings::default()).unwrap();
        assert!(r.converged);
        assert!(r.residual.unwrap() <= 1e-12);
        let (ie, is) = (r.err_interp_energy.unwrap(), r.err_interp_sd.unwrap());
        assert!(ie > 0.0 && is >= ie);
        assert!(r.err_post_energy.is_some());
    }

    #[test]
    fn postprocess_needs_n_divisible_by_four() {
        assert!(matches!(
            run_case(6, 1e-4, &CaseSettings::default()),
            Err(SdfemError::Config(_))
        ));
        let settings = CaseSettings {
            postprocess: false,
            ..CaseSettings::default()
        };
        assert!(run_case(6, 1e-4, &settings)
            .unwrap()
            .err_post_energy
            .is_none());
    }

    #[test]
    fn sweep_records_failures() {
        let settings = CaseSettings {
            postprocess: false,
            ..CaseSettings::default()
        };
        let report = sweep(&[4, 7], &[1e-4], &settings, false).unwrap();
        assert_eq!(report.records.len(), 2);
        assert!(report.records[0].ok());
        assert!(report.records[1]
            .error
            .as_deref()
            .unwrap()
            .contains("N must be"));
    }

    #[test]
    fn parallel_sweep_matches_serial() {
        let s = CaseSettings::default();
        let a = sweep(&[8, 16], &[1e-4, 1e-8], &s, false).unwrap();
        let b = sweep(&[8, 16], &[1e-4, 1e-8], &s, true).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }
}
