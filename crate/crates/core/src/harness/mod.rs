//! Experiment harness: TOML configs, exact regret accounting, seed sweeps with
//! CSV output, scaling fits and the acceptance suite behind `verify`.

pub mod config;
pub mod experiment;
pub mod fit;
pub mod instances;
pub mod regret;
pub mod sweep;
pub mod verify;

pub use config::{AlgoKind, AlgoSpec, Constants, ExperimentConfig, Seeds};
pub use experiment::{
    mean_stderr, run_config_seed, run_experiment, run_experiment_in, run_seed_with, run_with_regret,
    thread_pool, RegretRun, SeedSummary, Summary,
    CSV_HEADER, FAILED_SENTINEL,
};
pub use fit::{fit_scaling, read_points, Fit, FitModel};
pub use regret::{RegretKind, RegretOracle};
pub use sweep::{delay_penalty_sweep, horizon_sweep, run_grid, DelayFamily, GridSpec, PenaltySweep};
pub use verify::{run_all, run_criterion, CriterionResult};
