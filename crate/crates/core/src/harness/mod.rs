//! Experiment driver: populations, episode loop, scaling and metrics output.

mod allocators;
mod config;
mod metrics;
mod population;
mod run;

pub use allocators::{make_allocator, Allocator, GreedyAllocator, LinUcbAllocator, Mode, RlAllocator, Step};
pub use config::{AllocatorKind, ExperimentConfig, Regime};
pub use metrics::{write_metrics, write_summary, SummaryRow, METRICS_HEADER, SUMMARY_HEADER};
pub use population::{assign_strategies, build_population};
pub use run::{
    group_sizes, replica_seed, run_evaluation, run_experiment, run_seeds, ExperimentResult, MetricsRow, CEILING_SLACK,
};
