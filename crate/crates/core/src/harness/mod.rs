//! Config-driven sweeps over defenses, radii and seeds, and the reports
//! built from their records.

mod config;
pub mod report;
pub mod svg;
mod sweep;

pub use config::{pgd_depths, ExperimentConfig, BPDA_DEPTH, BPDA_EPSILONS, PGD_EPSILONS};
pub use report::{
    baseline_csv, baseline_rows, correlation, correlation_svg, depth_curves, depth_curves_svg, write_reports,
    BaselineRow, CorrelationSummary, DepthCurve, DepthSummary, GridPoint, ReportOutcome, Rho,
};
pub use sweep::{
    aggregate, files, run_and_write, run_sweep, run_sweep_with, worker_count, write_outputs, Aggregate, RowError,
    SweepTable, AGGREGATE_HEADER, ERRORS_HEADER, WORKERS_ENV,
};
