//! Monte Carlo experiment engine, configuration and result files.

pub mod config;
pub mod engine;
pub mod experiments;
pub mod output;

pub use config::{default_pa_grid, ExperimentConfig, Preset};
pub use engine::{ci_halfwidth, ExperimentResult, ResultRow, Tally};
pub use experiments::{
    aggregate_p_resolved, detection_error_rates, optimize_pa, resolve_by_contention_size,
    run_antennas_sweep, run_bias_sweep, run_custom, run_experiment, run_experiment_with_threads,
    run_two_user_comparison, run_two_user_sweep, scan_access_probability, CellSetup,
    DetectionErrors, EstimatorComparison, PaScan,
};
pub use output::{emit_results, read_json, to_csv_string, OutputFormat, ResultDocument, CSV_HEADER};
