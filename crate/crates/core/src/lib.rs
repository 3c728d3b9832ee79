//! Round-based simulator for clustered wireless sensor networks.
//!
//! Nodes are scattered over a rectangle and report to a base station
//! through cluster heads. Three head-selection policies are available:
//!
//! - **EFCM**: X-means clusters built once, heads rotated every time slice
//!   over a ring of members sorted by energy (highest first);
//! - **LEACH**: per-round probabilistic self-election with epoch memory;
//! - **HEED**: per-round election weighted by residual energy with
//!   iterative probability doubling.
//!
//! Energy follows the first-order radio model. Each run records throughput,
//! packet delivery ratio, mean residual energy and cumulative head failures
//! at fixed checkpoints; [`engine::compare`] sweeps seeds and aggregates.

pub mod baselines;
pub mod efcm;
pub mod energy;
pub mod engine;
pub mod error;
pub mod model;
pub mod par;
pub mod report;
pub mod scenario;
pub mod xmeans;

pub use engine::{
    compare, run, run_all, run_detailed, ComparisonTable, MetricsSeries, RunOutcome, Simulation,
};
pub use error::{ConfigError, Error, Result};
pub use par::Execution;
pub use scenario::{parse_scenario, Protocol, Scenario, SelectionMode};
