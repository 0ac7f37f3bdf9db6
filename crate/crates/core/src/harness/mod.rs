//! Experiment orchestration: metrics, configs, seeded evaluation and sweeps.

mod config;
mod eval;
mod metrics;

pub use config::{ExperimentConfig, PolicySpec, SweepConfig};
pub use eval::{
    checkpoint_path, evaluate, evaluate_resolved, load_model_bank, run_seed, simulate_mdp_shift, sweep,
    write_eval_csv, write_sweep_csv, Evaluation, ResolvedPolicy, SweepRow,
};
pub use metrics::{Aggregate, ShiftMetrics};
