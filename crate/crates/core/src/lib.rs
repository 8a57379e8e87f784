//! Cognitive map learners with hyperdimensional node states, and four ways
//! of orchestrating independently trained ring agents into a Tower of Hanoi
//! solver.

pub mod cml;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod hdc;
pub mod linalg;
pub mod stats;
pub mod toh;

pub use cml::{CmlModel, PlanMode, PlanTrace, StepOutcome, TrainConfig};
pub use error::{Error, Result};
pub use graph::{toh_graph, Graph, TohState};
pub use hdc::{Dictionary, Hypervector};
