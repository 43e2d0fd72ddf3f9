//! Config-driven rate experiments: fit estimators over a grid of sample
//! sizes, estimate risks against the known truth and compare the empirical
//! log-log slope with the theoretical exponent.

mod config;
mod rates;

pub use config::{C0Choice, ExperimentConfig};
pub use rates::{
    cell_dataset, cell_lambda, experiment_truth, fit, fit_slope, median, run_cell,
    run_rate_experiment, select_c0, task_risks, theoretical_exponent, C0Score, FailedCell,
    MedianPoint, RateReport, RateRow, RowContext, CSV_HEADER, MIN_FIT_RISK,
};
