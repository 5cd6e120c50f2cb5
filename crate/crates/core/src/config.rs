//! Run configuration: one JSON file plus command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::suites::VerifySettings;
use crate::assembly::{AssemblyOptions, DEFAULT_C_STAR};
use crate::error::{Result, SdfemError};
use crate::experiment::CaseSettings;
use crate::linalg::GmresOptions;
use crate::mesh::DEFAULT_RHO;
use crate::problem::{problem_by_name, LAYER_PROBLEM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Markdown,
    /// CSV and markdown side by side.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureDegrees {
    pub galerkin: usize,
    pub rhs: usize,
    pub norms: usize,
}

impl Default for QuadratureDegrees {
    fn default() -> Self {
        Self {
            galerkin: 4,
            rhs: 6,
            norms: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: String,
    pub epsilons: Vec<f64>,
    pub ns: Vec<usize>,
    pub c_star: f64,
    pub rho: f64,
    pub solver: GmresOptions,
    pub enable_postprocess: bool,
    /// Output directory; `None` prints to stdout.
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
    pub quadrature: QuadratureDegrees,
    /// Worker threads; 0 lets rayon decide, 1 runs everything serially.
    pub threads: usize,
    /// `(N, epsilon)` pairs for the property suites.
    pub verify_cases: Vec<(usize, f64)>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let verify = VerifySettings::default();
        Self {
            problem: LAYER_PROBLEM.to_string(),
            epsilons: vec![1e-8],
            ns: vec![8, 16, 32, 64, 128, 256],
            c_star: DEFAULT_C_STAR,
            rho: DEFAULT_RHO,
            solver: GmresOptions::default(),
            enable_postprocess: true,
            output: None,
            format: OutputFormat::Csv,
            quadrature: QuadratureDegrees::default(),
            threads: 0,
            verify_cases: verify.cases,
            seed: verify.seed,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SdfemError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| SdfemError::Config(format!("{}: {e}", path.display())))
    }

    /// Checks everything that does not require a solve.
    pub fn validate(&self) -> Result<()> {
        let eps0 = self.epsilons.first().copied().unwrap_or(1.0);
        problem_by_name(&self.problem, eps0)?;
        if self.ns.is_empty() || self.epsilons.is_empty() {
            return Err(SdfemError::Config(
                "N and epsilon lists must be non-empty".into(),
            ));
        }
        for &n in &self.ns {
            if n < 4 || n % 2 != 0 {
                return Err(SdfemError::Config(format!(
                    "N must be an even integer >= 4, got {n}"
                )));
            }
            if self.enable_postprocess && n % 4 != 0 {
                return Err(SdfemError::Config(format!(
                    "postprocessing requires N divisible by 4, got {n}"
                )));
            }
        }
        for &e in &self.epsilons {
            if !(e > 0.0 && e <= 1.0) {
                return Err(SdfemError::Config(format!(
                    "epsilon must lie in (0, 1], got {e}"
                )));
            }
        }
        if !self.c_star.is_finite() {
            return Err(SdfemError::Config("c_star must be finite".into()));
        }
        if self.c_star < 0.0 {
            log::warn!("negative c_star = {} destabilises the scheme", self.c_star);
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(SdfemError::Config(format!(
                "rho must be positive, got {}",
                self.rho
            )));
        }
        let s = &self.solver;
        if !(s.tol > 0.0 && s.tol < 1.0) || s.restart == 0 || s.max_iters == 0 {
            return Err(SdfemError::Config(format!(
                "invalid solver options: tol {}, restart {}, max_iters {}",
                s.tol, s.restart, s.max_iters
            )));
        }
        if self.quadrature.norms < 6 {
            return Err(SdfemError::Config(format!(
                "norm quadrature degree must be at least 6, got {}",
                self.quadrature.norms
            )));
        }
        if self.quadrature.galerkin < 2 || self.quadrature.rhs < 1 {
            return Err(SdfemError::Config("quadrature degrees too low".into()));
        }
        Ok(())
    }

    /// Rates need each N to double the previous one.
    pub fn validate_doubling(&self) -> Result<()> {
        if let Some(w) = self.ns.windows(2).find(|w| w[1] != 2 * w[0]) {
            return Err(SdfemError::Config(format!(
                "N list must double from entry to entry ({} -> {})",
                w[0], w[1]
            )));
        }
        Ok(())
    }

    pub fn case_settings(&self) -> CaseSettings {
        CaseSettings {
            problem: self.problem.clone(),
            rho: self.rho,
            assembly: AssemblyOptions {
                c_star: self.c_star,
                galerkin_degree: self.quadrature.galerkin,
                rhs_degree: self.quadrature.rhs,
            },
            solver: self.solver,
            norm_degree: self.quadrature.norms,
            postprocess: self.enable_postprocess,
        }
    }

    pub fn verify_settings(&self) -> VerifySettings {
        VerifySettings {
            case: self.case_settings(),
            cases: self.verify_cases.clone(),
            seed: self.seed,
            ..VerifySettings::default()
        }
    }
}
