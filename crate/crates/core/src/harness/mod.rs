//! Experiment drivers, configuration and result files.

mod config;
mod experiments;
mod output;
mod validate;

pub use config::{parse_override, EveModel, ExperimentConfig, MomentMode, RateModeSetting, Scheme, KEYS};
pub use experiments::{
    eve_positions, run_allocation_sweep, run_ppp_sweep, run_scheme_comparison, scheme_trial, trial_channels, trial_rng,
    AllocationCurve, AllocationReport, AllocationRow, ComparePoint, CompareReport, CompareRow, PppFit, PppPoint,
    PppReport, PppRow, Stream, TrialOutcome,
};
pub use output::{emit, summary_json, summary_path, write_csv, write_json, Format};
pub use validate::{
    autocorrelation_experiment, correlation_grid, mc_nearest_distance, run_validation, simpson, CheckResult,
    ValidationReport,
};
