//! Experiment harness: configuration, sweeps over capacity price, wind,
//! cost rsd and ρ, and the CSV tables they produce.

pub mod config;
pub mod results;
pub mod run;

pub use config::{ExperimentConfig, LinSolver};
pub use results::{
    annualize, capacity_price_per_slot, compare, emit_results, format_sig, read_results, sort_rows, write_results,
    Comparison, ComparisonRow, MetricRow, RESULTS_HEADER, SECONDS_PER_YEAR,
};
pub use run::{
    evaluate_point, lse_cost, prepare_errors, run_experiment, run_experiment_with_workers, run_figures, run_on_errors,
    scenario_pair, ExperimentReport, Figure, FittedContract, SweepPoint,
};
