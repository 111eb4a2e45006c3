//! Experiment configuration, replicate runs, statistics and reference
//! values.

pub mod compare;
pub mod config;
pub mod events;
pub mod oracle;
pub mod run;
pub mod stats;

pub use compare::{compare_methods, Comparison};
pub use config::{parse_seed_list, ExperimentConfig, Method};
pub use events::{load_events, read_events, write_events, EventRecord};
pub use run::{read_summary, run_experiment, run_seed, ExperimentReport, SeedResult, SummaryRow};
pub use stats::{curve_stats, median_lifespan, LifespanCurve};
