//! Planning and dispatch for renewable-powered base stations that share
//! energy over physical power lines and through the smart grid.
//!
//! * [`model`]: network geometry, generation/consumption profiles, sampling.
//! * [`affinity`]: resistive loss and Gaussian probability primitives.
//! * [`clustering`]: AEA/SEA link metrics, agglomerative and divisive topology planning.
//! * [`solver`]: the LP engine and the chord treatment of line losses.
//! * [`dispatch`]: zero-, perfect- and partial-knowledge energy management.
//! * [`harness`]: Monte Carlo runs, sweeps and canned experiments.

pub mod affinity;
pub mod clustering;
pub mod config;
pub mod dispatch;
pub mod harness;
pub mod model;
pub mod rng;
pub mod solver;

pub use config::Config;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot place {count} stations {exclusion_km} km apart in a {side_km} km square")]
    PlacementInfeasible { count: usize, side_km: f64, exclusion_km: f64 },
    #[error("{what} program failed")]
    Solver { what: String, source: solver::SolverError },
    #[error("{what} program is infeasible")]
    Infeasible { what: String },
    #[error("{what} program is unbounded")]
    Unbounded { what: String },
    #[error("exhaustive scenario set of {requested} members exceeds the cap of {cap}")]
    ScenarioExplosion { requested: f64, cap: usize },
    #[error("battery trajectory mismatch at station {bs}, slot {slot}: stored {stored}, recomputed {recomputed}")]
    TrajectoryMismatch { bs: usize, slot: usize, stored: f64, recomputed: f64 },
    #[error("schedule audit failed: {0}")]
    Audit(String),
    #[error("iteration {iteration}: {source}")]
    Iteration { iteration: usize, source: Box<Error> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
