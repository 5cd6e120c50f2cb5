use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::rates::compute_rates;
use crate::error::{Result, SdfemError};

/// Placeholder for cells without a value.
pub const MISSING: &str = "---";

pub const CSV_COLUMNS: [&str; 12] = [
    "N",
    "epsilon",
    "err_interp_energy",
    "rate_ie",
    "err_interp_sd",
    "rate_is",
    "err_energy",
    "rate_e",
    "err_post_energy",
    "rate_p",
    "gmres_iters",
    "residual",
];

/// Results of one `(N, epsilon)` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub n: usize,
    pub epsilon: f64,
    /// `||u^I - u^N||_eps`.
    pub err_interp_energy: Option<f64>,
    /// `||u^I - u^N||_SD`.
    pub err_interp_sd: Option<f64>,
    /// `||u - u^N||_eps`.
    pub err_energy: Option<f64>,
    /// `||u - P u^N||_eps`.
    pub err_post_energy: Option<f64>,
    pub gmres_iters: Option<usize>,
    pub residual: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

impl CaseRecord {
    pub fn failed(n: usize, epsilon: f64, error: String) -> Self {
        Self {
            n,
            epsilon,
            err_interp_energy: None,
            err_interp_sd: None,
            err_energy: None,
            err_post_energy: None,
            gmres_iters: None,
            residual: None,
            converged: false,
            error: Some(error),
        }
    }

    pub fn ok(&self) -> bool {
        self.converged && self.error.is_none()
    }
}

/// Error quantity with a rate column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorColumn {
    InterpEnergy,
    InterpSd,
    Energy,
    PostEnergy,
}

impl ErrorColumn {
    pub const ALL: [ErrorColumn; 4] = [
        ErrorColumn::InterpEnergy,
        ErrorColumn::InterpSd,
        ErrorColumn::Energy,
        ErrorColumn::PostEnergy,
    ];

    pub fn get(&self, r: &CaseRecord) -> Option<f64> {
        match self {
            ErrorColumn::InterpEnergy => r.err_interp_energy,
            ErrorColumn::InterpSd => r.err_interp_sd,
            ErrorColumn::Energy => r.err_energy,
            ErrorColumn::PostEnergy => r.err_post_energy,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ErrorColumn::InterpEnergy => "err_interp_energy",
            ErrorColumn::InterpSd => "err_interp_sd",
            ErrorColumn::Energy => "err_energy",
            ErrorColumn::PostEnergy => "err_post_energy",
        }
    }

    pub fn rate_name(&self) -> &'static str {
        match self {
            ErrorColumn::InterpEnergy => "rate_ie",
            ErrorColumn::InterpSd => "rate_is",
            ErrorColumn::Energy => "rate_e",
            ErrorColumn::PostEnergy => "rate_p",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub problem: String,
    pub mu0: f64,
    pub c_star: f64,
    pub rho: f64,
}

impl ReportHeader {
    fn comment(&self) -> String {
        format!(
            "# problem={} mu0={} c_star={} rho={}",
            self.problem, self.mu0, self.c_star, self.rho
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub header: ReportHeader,
    /// Sorted by decreasing epsilon, then increasing N.
    pub records: Vec<CaseRecord>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| MISSING.to_string(), |v| format!("{v:e}"))
}

impl ErrorReport {
    pub fn new(header: ReportHeader, mut records: Vec<CaseRecord>) -> Self {
        records.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon).then(a.n.cmp(&b.n)));
        Self { header, records }
    }

    /// Records for one epsilon, in increasing N.
    pub fn rows_for(&self, epsilon: f64) -> Vec<&CaseRecord> {
        self.records
            .iter()
            .filter(|r| r.epsilon == epsilon)
            .collect()
    }

    pub fn epsilons(&self) -> Vec<f64> {
        let mut eps: Vec<f64> = Vec::new();
        for r in &self.records {
            if !eps.contains(&r.epsilon) {
                eps.push(r.epsilon);
            }
        }
        eps
    }

    pub fn find(&self, n: usize, epsilon: f64) -> Option<&CaseRecord> {
        self.records
            .iter()
            .find(|r| r.n == n && r.epsilon == epsilon)
    }

    /// Rate of `column` for every record: `log2(e_k / e_{k+1})` when the next
    /// row has the same epsilon and twice the N, otherwise `None`.
    pub fn rates(&self, column: ErrorColumn) -> Vec<Option<f64>> {
        (0..self.records.len())
            .map(|k| {
                let (a, b) = (&self.records[k], self.records.get(k + 1)?);
                if b.epsilon != a.epsilon || b.n != 2 * a.n {
                    return None;
                }
                let pair = [column.get(a)?, column.get(b)?];
                compute_rates(&pair).ok().map(|r| r[0])
            })
            .collect()
    }

    pub fn failures(&self) -> Vec<&CaseRecord> {
        self.records.iter().filter(|r| !r.ok()).collect()
    }

    pub fn to_csv(&self) -> String {
        let rates = self.rate_table();
        let mut out = self.header.comment();
        out.push('\n');
        out.push_str(&CSV_COLUMNS.join(","));
        out.push('\n');
        for (k, r) in self.records.iter().enumerate() {
            let mut cells = vec![r.n.to_string(), format!("{:e}", r.epsilon)];
            for (c, column) in ErrorColumn::ALL.iter().enumerate() {
                cells.push(fmt_opt(column.get(r)));
                cells.push(rates[c][k].map_or_else(|| MISSING.to_string(), |v| format!("{v}")));
            }
            cells.push(
                r.gmres_iters
                    .map_or_else(|| MISSING.to_string(), |v| v.to_string()),
            );
            cells.push(fmt_opt(r.residual));
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        for r in self.failures() {
            let why = r.error.as_deref().unwrap_or("solver did not converge");
            let _ = writeln!(
                out,
                "# failed N={} epsilon={:e}: {}",
                r.n,
                r.epsilon,
                why.replace('\n', " ")
            );
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let rates = self.rate_table();
        let mut rows: Vec<Vec<String>> = vec![CSV_COLUMNS.iter().map(|s| s.to_string()).collect()];
        for (k, r) in self.records.iter().enumerate() {
            let mut cells = vec![r.n.to_string(), format!("{:.0e}", r.epsilon)];
            for (c, column) in ErrorColumn::ALL.iter().enumerate() {
                cells.push(
                    column
                        .get(r)
                        .map_or_else(|| MISSING.into(), |v| format!("{v:.4e}")),
                );
                cells.push(rates[c][k].map_or_else(|| MISSING.into(), |v| format!("{v:.2}")));
            }
            cells.push(
                r.gmres_iters
                    .map_or_else(|| MISSING.into(), |v| v.to_string()),
            );
            cells.push(
                r.residual
                    .map_or_else(|| MISSING.into(), |v| format!("{v:.2e}")),
            );
            rows.push(cells);
        }
        let widths: Vec<usize> = (0..CSV_COLUMNS.len())
            .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let line = |cells: &[String]| {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(s, w)| format!("{s:>w$}"))
                .collect();
            format!("| {} |\n", padded.join(" | "))
        };
        let mut out = format!(
            "problem `{}`, mu0 = {}, C* = {}, rho = {}\n\n",
            self.header.problem, self.header.mu0, self.header.c_star, self.header.rho
        );
        out.push_str(&line(&rows[0]));
        let rule: Vec<String> = widths
            .iter()
            .map(|w| format!("{}:", "-".repeat(w + 1)))
            .collect();
        out.push_str(&format!("|{}|\n", rule.join("|")));
        for r in &rows[1..] {
            out.push_str(&line(r));
        }
        out
    }

    fn rate_table(&self) -> Vec<Vec<Option<f64>>> {
        ErrorColumn::ALL.iter().map(|c| self.rates(*c)).collect()
    }
}

/// One parsed CSV data row; `values` follows [`CSV_COLUMNS`] from index 2.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub n: usize,
    pub epsilon: f64,
    pub values: Vec<Option<f64>>,
}

impl CsvRow {
    pub fn get(&self, column: &str) -> Option<f64> {
        let idx = CSV_COLUMNS.iter().position(|c| *c == column)?;
        self.values.get(idx.checked_sub(2)?).copied().flatten()
    }
}

/// Parse the data rows of a CSV written by [`ErrorReport::to_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| SdfemError::Parse("empty report".into()))?;
    if header.split(',').ne(CSV_COLUMNS.iter().copied()) {
        return Err(SdfemError::Parse(format!("unexpected header '{header}'")));
    }
    lines
        .map(|line| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != CSV_COLUMNS.len() {
                return Err(SdfemError::Parse(format!(
                    "row has {} cells: '{line}'",
                    cells.len()
                )));
            }
            let num = |s: &str| -> Result<Option<f64>> {
                if s == MISSING {
                    Ok(None)
                } else {
                    s.parse::<f64>()
                        .map(Some)
                        .map_err(|e| SdfemError::Parse(format!("bad number '{s}': {e}")))
                }
            };
            Ok(CsvRow {
                n: cells[0]
                    .parse()
                    .map_err(|e| SdfemError::Parse(format!("bad N '{}': {e}", cells[0])))?,
                epsilon: num(cells[1])?
                    .ok_or_else(|| SdfemError::Parse("missing epsilon".into()))?,
                values: cells[2..].iter().map(|c| num(c)).collect::<Result<_>>()?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(n: usize, eps: f64, e: f64) -> CaseRecord {
        CaseRecord {
            n,
            epsilon: eps,
            err_interp_energy: Some(e),
            err_interp_sd: Some(2.0 * e),
            err_energy: Some(10.0 * e),
            err_post_energy: None,
            gmres_iters: Some(n),
            residual: Some(1e-13),
            converged: true,
            error: None,
        }
    }

    fn header() -> ReportHeader {
        ReportHeader {
            problem: "exp-layers".into(),
            mu0: 1.0,
            c_star: 1.0,
            rho: 2.5,
        }
    }

    #[test]
    fn rows_sorted_and_rates_grouped() {
        let report = ErrorReport::new(
            header(),
            vec![
                record(16, 1e-8, 0.25),
                record(8, 1e-4, 1.0),
                record(8, 1e-8, 1.0),
                record(16, 1e-4, 0.5),
            ],
        );
        let order: Vec<(usize, f64)> = report.records.iter().map(|r| (r.n, r.epsilon)).collect();
        assert_eq!(order, vec![(8, 1e-4), (16, 1e-4), (8, 1e-8), (16, 1e-8)]);
        assert_eq!(
            report.rates(ErrorColumn::InterpEnergy),
            vec![Some(1.0), None, Some(2.0), None]
        );
        assert_eq!(report.rates(ErrorColumn::PostEnergy), vec![None; 4]);
    }

    #[test]
    fn csv_round_trip() {
        let report = ErrorReport::new(
            header(),
            vec![
                record(8, 1e-8, 0.10496),
                record(16, 1e-8, 0.062921),
                record(32, 1e-8, 0.028978),
            ],
        );
        let csv = report.to_csv();
        assert!(csv.starts_with("# problem=exp-layers mu0=1 c_star=1 rho=2.5\n"));
        let rows = parse_csv(&csv).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].get("err_interp_energy"), Some(0.10496));
        assert_eq!(rows[2].get("rate_ie"), None);
        assert_eq!(rows[0].get("err_post_energy"), None);
        let errs: Vec<f64> = rows
            .iter()
            .map(|r| r.get("err_interp_energy").unwrap())
            .collect();
        let rates = compute_rates(&errs).unwrap();
        assert_eq!(rows[0].get("rate_ie"), Some(rates[0]));
        assert_eq!(rows[1].get("rate_ie"), Some(rates[1]));
        assert!(csv.lines().nth(3).unwrap().contains(",---,"));
    }

    #[test]
    fn failed_rows_are_flagged() {
        let mut records = vec![record(8, 1e-8, 1.0)];
        records.push(CaseRecord::failed(16, 1e-8, "no convergence".into()));
        let report = ErrorReport::new(header(), records);
        let csv = report.to_csv();
        assert!(csv.contains("# failed N=16 epsilon=1e-8: no convergence"));
        assert_eq!(report.rates(ErrorColumn::Energy), vec![None, None]);
        let md = report.to_markdown();
        assert_eq!(md.lines().filter(|l| l.starts_with('|')).count(), 4);
    }

    #[test]
    fn malformed_csv_rejected() {
        assert!(parse_csv("").is_err());
        assert!(parse_csv("N,eps\n").is_err());
        let bad = format!(
            "{}\n8,1e-8,x,---,---,---,---,---,---,---,1,1e-13\n",
            CSV_COLUMNS.join(",")
        );
        assert!(parse_csv(&bad).is_err());
    }
}
