//! Interpolation, norms, convergence rates and numerical property checks.

mod norms;
mod patch;
mod rates;
mod report;
pub mod suites;

pub use norms::{
    continuous_error_energy_norm, discrete_norms, interpolation_bound_report, nodal_interpolant,
    verify_orthogonality, DiscreteNorms, InterpolationBoundReport, LinearField, NormWeights,
    PiecewiseField,
};
pub use patch::{verify_patch_identity, Direction, PatchRecord, PatchReport, SmoothFunction};
pub use rates::{compute_rates, observed_order};
pub use report::{
    parse_csv, CaseRecord, CsvRow, ErrorColumn, ErrorReport, ReportHeader, CSV_COLUMNS, MISSING,
};
