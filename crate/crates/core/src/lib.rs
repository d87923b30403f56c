//! Joint recovery of a clean graph structure and a two-layer GCN from a
//! poisoned graph, plus the attacks, baselines and diagnostics around it.

pub mod analysis;
pub mod attacks;
pub mod baselines;
pub mod error;
pub mod gcn;
pub mod graph;
pub mod learner;
pub mod linalg;
mod matrix_serde;
pub mod prox;

pub use error::{Error, Result};
pub use gcn::{gcn_forward, GcnParams};
pub use graph::{Graph, PerturbationRecord, Splits};
pub use learner::{train, HyperParams, Mode, TrainResult};
pub use prox::ProxConfig;
