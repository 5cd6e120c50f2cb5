//! Acceptance criteria: regression against reference error tables, epsilon
//! uniformity, observed orders, the property suites and the runtime budget.

use std::time::Duration;

use crate::analysis::suites::{run_all, VerificationReport};
use crate::analysis::{ErrorColumn, ErrorReport};
use crate::config::RunConfig;
use crate::error::Result;
use crate::experiment::sweep;

/// N values of the reference tables.
pub const REFERENCE_NS: [usize; 8] = [8, 16, 32, 64, 128, 256, 512, 1024];
/// `||u^I - u^N||_eps`, identical for epsilon in {1e-4, 1e-6, 1e-8, 1e-10}.
pub const REFERENCE_INTERP_ENERGY: [f64; 8] = [
    1.0496e-1, 6.2921e-2, 2.8978e-2, 1.1762e-2, 4.5131e-3, 1.6965e-3, 6.3617e-4, 2.3980e-4,
];
/// `||u^I - u^N||_SD`.
pub const REFERENCE_INTERP_SD: [f64; 8] = [
    1.2058e-1, 6.3435e-2, 2.9027e-2, 1.1769e-2, 4.5143e-3, 1.6967e-3, 6.3620e-4, 2.3981e-4,
];
/// `||u - u^N||_eps`.
pub const REFERENCE_ENERGY: [f64; 8] = [
    3.05e-1, 2.11e-1, 1.36e-1, 8.38e-2, 4.99e-2, 2.90e-2, 1.65e-2, 9.28e-3,
];
/// `||u - P u^N||_eps`.
pub const REFERENCE_POST_ENERGY: [f64; 8] = [
    1.55e-1, 8.95e-2, 4.19e-2, 1.67e-2, 6.12e-3, 2.15e-3, 7.46e-4, 2.60e-4,
];

pub const REFERENCE_EPSILON: f64 = 1e-8;
pub const UNIFORMITY_EPSILONS: [f64; 2] = [1e-4, 1e-10];
/// Rows checked by the regression criteria.
pub const ACCEPTANCE_NS: [usize; 6] = [8, 16, 32, 64, 128, 256];

pub const SUPERCLOSE_REL_TOL: f64 = 0.02;
pub const SUPERCLOSE_RATE_TOL: f64 = 0.05;
pub const UNIFORMITY_REL_TOL: f64 = 0.01;
pub const ENERGY_REL_TOL: f64 = 0.05;
pub const POST_RATE_MIN: f64 = 1.45;
pub const POST_RATE_ROWS: [usize; 3] = [64, 128, 256];
pub const PLAIN_RATE_WINDOW: (f64, f64) = (0.5, 0.9);
pub const SD_RATE_WINDOW: (f64, f64) = (1.30, 1.45);
/// Rows whose rate (to the next N) enters the supercloseness order check.
pub const SD_RATE_ROWS: [usize; 3] = [32, 64, 128];
pub const RUNTIME_LIMIT: Duration = Duration::from_secs(300);

fn reference(table: &[f64; 8], n: usize) -> Option<f64> {
    REFERENCE_NS.iter().position(|&m| m == n).map(|k| table[k])
}

fn reference_rate(table: &[f64; 8], n: usize) -> Option<f64> {
    Some((reference(table, n)? / reference(table, 2 * n)?).log2())
}

fn reference_table(column: ErrorColumn) -> &'static [f64; 8] {
    match column {
        ErrorColumn::InterpEnergy => &REFERENCE_INTERP_ENERGY,
        ErrorColumn::InterpSd => &REFERENCE_INTERP_SD,
        ErrorColumn::Energy => &REFERENCE_ENERGY,
        ErrorColumn::PostEnergy => &REFERENCE_POST_ENERGY,
    }
}

/// One elementary comparison. `value` is `None` when the run did not produce it.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub label: String,
    pub value: Option<f64>,
    pub target: String,
    pub passed: bool,
}

impl Check {
    fn relative(label: String, value: Option<f64>, reference: f64, tol: f64) -> Self {
        let rel = value.map(|v| (v - reference).abs() / reference.abs());
        Self {
            label,
            value,
            target: format!(
                "{reference:.4e} within {}%{}",
                tol * 100.0,
                rel.map_or(String::new(), |r| format!(", off by {:.2}%", r * 100.0))
            ),
            passed: rel.is_some_and(|r| r < tol),
        }
    }

    fn absolute(label: String, value: Option<f64>, reference: f64, tol: f64) -> Self {
        Self {
            label,
            value,
            target: format!("{reference:.3} +- {tol}"),
            passed: value.is_some_and(|v| (v - reference).abs() <= tol),
        }
    }

    fn window(label: String, value: Option<f64>, (lo, hi): (f64, f64)) -> Self {
        Self {
            label,
            value,
            target: format!("in [{lo}, {hi}]"),
            passed: value.is_some_and(|v| v >= lo && v <= hi),
        }
    }

    fn at_least(label: String, value: Option<f64>, min: f64) -> Self {
        Self {
            label,
            value,
            target: format!(">= {min}"),
            passed: value.is_some_and(|v| v >= min),
        }
    }

    pub fn describe(&self) -> String {
        let value = self
            .value
            .map_or_else(|| "unavailable".to_string(), |v| format!("{v:.4e}"));
        format!(
            "[{}] {}: {} (target {})",
            if self.passed { "ok" } else { "FAIL" },
            self.label,
            value,
            self.target
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl CriterionResult {
    fn from_checks(id: u8, name: &'static str, checks: Vec<Check>) -> Self {
        let passed = !checks.is_empty() && checks.iter().all(|c| c.passed);
        Self {
            id,
            name,
            passed,
            checks,
        }
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// One summary line: verdict, criterion and how many checks held.
    pub fn line(&self) -> String {
        let ok = self.checks.iter().filter(|c| c.passed).count();
        format!(
            "criterion {} {}: {} ({}/{} checks)",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            ok,
            self.checks.len()
        )
    }
}

fn value(report: &ErrorReport, n: usize, epsilon: f64, column: ErrorColumn) -> Option<f64> {
    report.find(n, epsilon).and_then(|r| column.get(r))
}

/// Observed rate at row `n`, from `n` to `2n`.
fn rate(report: &ErrorReport, n: usize, epsilon: f64, column: ErrorColumn) -> Option<f64> {
    let (a, b) = (
        value(report, n, epsilon, column)?,
        value(report, 2 * n, epsilon, column)?,
    );
    (a > 0.0 && b > 0.0).then(|| (a / b).log2())
}

fn rate_rows() -> impl Iterator<Item = usize> {
    ACCEPTANCE_NS
        .into_iter()
        .filter(|n| ACCEPTANCE_NS.contains(&(2 * n)))
}

pub fn superclose_regression(report: &ErrorReport) -> CriterionResult {
    let columns = [ErrorColumn::InterpEnergy, ErrorColumn::InterpSd];
    let mut checks = Vec::new();
    for column in columns {
        let table = reference_table(column);
        for n in ACCEPTANCE_NS {
            checks.push(Check::relative(
                format!("N={n} {}", column.name()),
                value(report, n, REFERENCE_EPSILON, column),
                reference(table, n).unwrap(),
                SUPERCLOSE_REL_TOL,
            ));
        }
        for n in rate_rows() {
            checks.push(Check::absolute(
                format!("N={n} {}", column.rate_name()),
                rate(report, n, REFERENCE_EPSILON, column),
                reference_rate(table, n).unwrap(),
                SUPERCLOSE_RATE_TOL,
            ));
        }
    }
    CriterionResult::from_checks(1, "supercloseness regression", checks)
}

/// Compares against the computed reference-epsilon column, not the table.
pub fn epsilon_uniformity(report: &ErrorReport) -> CriterionResult {
    let mut checks = Vec::new();
    for eps in UNIFORMITY_EPSILONS {
        for column in [ErrorColumn::InterpEnergy, ErrorColumn::InterpSd] {
            for n in ACCEPTANCE_NS {
                let label = format!("eps={eps:e} N={n} {}", column.name());
                let base = value(report, n, REFERENCE_EPSILON, column);
                let here = value(report, n, eps, column);
                checks.push(match base {
                    Some(b) if b > 0.0 => Check::relative(label, here, b, UNIFORMITY_REL_TOL),
                    _ => Check {
                        label,
                        value: here,
                        target: format!("reference cell at eps={REFERENCE_EPSILON:e} unavailable"),
                        passed: false,
                    },
                });
            }
        }
    }
    CriterionResult::from_checks(2, "epsilon uniformity", checks)
}

pub fn energy_regression(report: &ErrorReport) -> CriterionResult {
    let mut checks = Vec::new();
    for column in [ErrorColumn::Energy, ErrorColumn::PostEnergy] {
        for n in ACCEPTANCE_NS {
            checks.push(Check::relative(
                format!("N={n} {}", column.name()),
                value(report, n, REFERENCE_EPSILON, column),
                reference(reference_table(column), n).unwrap(),
                ENERGY_REL_TOL,
            ));
        }
    }
    for n in POST_RATE_ROWS {
        checks.push(Check::at_least(
            format!("N={n} rate_p"),
            rate(report, n, REFERENCE_EPSILON, ErrorColumn::PostEnergy),
            POST_RATE_MIN,
        ));
    }
    for n in rate_rows() {
        checks.push(Check::window(
            format!("N={n} rate_e"),
            rate(report, n, REFERENCE_EPSILON, ErrorColumn::Energy),
            PLAIN_RATE_WINDOW,
        ));
    }
    CriterionResult::from_checks(3, "energy and postprocessed regression", checks)
}

pub fn superclose_order(report: &ErrorReport) -> CriterionResult {
    let checks = SD_RATE_ROWS
        .iter()
        .map(|&n| {
            Check::window(
                format!("N={n} rate_is"),
                rate(report, n, REFERENCE_EPSILON, ErrorColumn::InterpSd),
                SD_RATE_WINDOW,
            )
        })
        .collect();
    CriterionResult::from_checks(4, "supercloseness order", checks)
}

pub fn property_suite(verification: &VerificationReport) -> CriterionResult {
    let checks = verification
        .suites
        .iter()
        .map(|s| Check {
            label: s.name.clone(),
            value: Some(s.value),
            target: s.condition.clone(),
            passed: s.passed,
        })
        .collect();
    CriterionResult::from_checks(5, "property suite", checks)
}

pub struct Outcome {
    pub report: ErrorReport,
    pub verification: VerificationReport,
    pub criteria: Vec<CriterionResult>,
}

impl Outcome {
    pub fn evaluate(report: ErrorReport, verification: VerificationReport) -> Self {
        let criteria = vec![
            superclose_regression(&report),
            epsilon_uniformity(&report),
            energy_regression(&report),
            superclose_order(&report),
            property_suite(&verification),
        ];
        Self {
            report,
            verification,
            criteria,
        }
    }

    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn criterion(&self, id: u8) -> Option<&CriterionResult> {
        self.criteria.iter().find(|c| c.id == id)
    }

    /// Error table, failing checks, then one line per criterion.
    pub fn render(&self) -> String {
        let mut out = self.report.to_markdown();
        out.push('\n');
        out.push_str(&self.verification.render(false));
        out.push('\n');
        for c in &self.criteria {
            for check in c.failed_checks() {
                out.push_str(&format!("criterion {}: {}\n", c.id, check.describe()));
            }
        }
        out.push('\n');
        for c in &self.criteria {
            out.push_str(&c.line());
            out.push('\n');
        }
        out
    }
}

/// Sweep the configured grid, run the property suites and evaluate
/// criteria 1 to 5. Cells the criteria need but the grid lacks fail.
pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    for n in ACCEPTANCE_NS {
        if !cfg.ns.contains(&n) {
            log::warn!("acceptance grid lacks N = {n}");
        }
    }
    for eps in std::iter::once(REFERENCE_EPSILON).chain(UNIFORMITY_EPSILONS) {
        if !cfg.epsilons.contains(&eps) {
            log::warn!("acceptance grid lacks epsilon = {eps:e}");
        }
    }
    let report = sweep(
        &cfg.ns,
        &cfg.epsilons,
        &cfg.case_settings(),
        cfg.threads != 1,
    )?;
    let verification = run_all(&cfg.verify_settings())?;
    Ok(Outcome::evaluate(report, verification))
}

/// Criterion 6: everything above finished inside the time budget.
pub fn runtime_criterion(elapsed: Duration, outcome: &Outcome) -> CriterionResult {
    let evaluated = (1..=5).all(|id| outcome.criterion(id).is_some());
    let check = Check {
        label: "wall time of criteria 1 to 5".into(),
        value: Some(elapsed.as_secs_f64()),
        target: format!(
            "< {} s with all criteria evaluated",
            RUNTIME_LIMIT.as_secs()
        ),
        passed: evaluated && elapsed < RUNTIME_LIMIT,
    };
    CriterionResult::from_checks(6, "runtime", vec![check])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{CaseRecord, ReportHeader};

    fn header() -> ReportHeader {
        ReportHeader {
            problem: "test".into(),
            mu0: 1.0,
            c_star: 1.0,
            rho: 2.5,
        }
    }

    fn reference_report(epsilons: &[f64]) -> ErrorReport {
        let mut records = Vec::new();
        for &eps in epsilons {
            for (k, &n) in REFERENCE_NS.iter().enumerate().take(6) {
                records.push(CaseRecord {
                    n,
                    epsilon: eps,
                    err_interp_energy: Some(REFERENCE_INTERP_ENERGY[k]),
                    err_interp_sd: Some(REFERENCE_INTERP_SD[k]),
                    err_energy: Some(REFERENCE_ENERGY[k]),
                    err_post_energy: Some(REFERENCE_POST_ENERGY[k]),
                    gmres_iters: Some(1),
                    residual: Some(0.0),
                    converged: true,
                    error: None,
                });
            }
        }
        ErrorReport::new(header(), records)
    }

    #[test]
    fn reference_tables_pass_their_own_regressions() {
        let report = reference_report(&[1e-4, 1e-8, 1e-10]);
        assert!(superclose_regression(&report).passed);
        assert!(epsilon_uniformity(&report).passed);
        // log2(1.67e-2 / 6.12e-3) = 1.448 falls just short of 1.45 with the
        // three-digit values, and the N = 256 post rate needs an N = 512 row.
        let c3 = energy_regression(&report);
        let failed: Vec<_> = c3.failed_checks().map(|c| c.label.clone()).collect();
        assert_eq!(
            failed,
            vec!["N=64 rate_p".to_string(), "N=256 rate_p".to_string()]
        );
    }

    #[test]
    fn reference_sd_rates_sit_in_window() {
        let report = reference_report(&[1e-8]);
        let c4 = superclose_order(&report);
        let rates: Vec<f64> = c4.checks.iter().map(|c| c.value.unwrap()).collect();
        assert!(rates.iter().all(|r| (1.2..1.5).contains(r)), "{rates:?}");
    }

    #[test]
    fn missing_cells_fail() {
        let report = reference_report(&[1e-8]);
        let c2 = epsilon_uniformity(&report);
        assert!(!c2.passed);
        assert!(c2.checks.iter().all(|c| c.value.is_none() && !c.passed));
    }

    #[test]
    fn perturbed_value_fails_relative_check() {
        let mut report = reference_report(&[1e-8]);
        report.records[3].err_interp_energy = Some(REFERENCE_INTERP_ENERGY[3] * 1.03);
        let c1 = superclose_regression(&report);
        let failed: Vec<_> = c1.failed_checks().map(|c| c.label.clone()).collect();
        assert!(failed.contains(&"N=64 err_interp_energy".to_string()));
        assert!(c1.line().contains("FAIL"));
    }

    #[test]
    fn runtime_limit() {
        let outcome = Outcome::evaluate(
            reference_report(&[1e-8]),
            VerificationReport { suites: vec![] },
        );
        assert!(runtime_criterion(Duration::from_secs(10), &outcome).passed);
        assert!(!runtime_criterion(Duration::from_secs(301), &outcome).passed);
        // An empty property suite is not a pass.
        assert!(!outcome.criterion(5).unwrap().passed);
    }
}
