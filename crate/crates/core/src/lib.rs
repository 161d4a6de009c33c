//! Simulator for privacy-preserving push-pull optimization over directed
//! graphs with state decomposition.
//!
//! The crate covers the topology model, the per-iteration weight schedule,
//! local objectives, the iteration engine, a mechanical privacy auditor and
//! the convergence-rate analysis. The `ppsd` binary wraps all of it behind a
//! JSON config.

pub mod analysis;
pub mod config;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod objective;
pub mod privacy;
pub mod schedule;
pub mod topology;

pub use engine::{run, Algorithm, RunConfig, RunRecord, StopReason};
pub use error::{Error, Result};
pub use objective::{ProblemInstance, ProblemSpec};
pub use schedule::{IterationWeights, WeightHistory};
pub use topology::Digraph;
