//! Limiting the influence of a target set by deleting edges of a social
//! graph, scored with the Credit Distribution Model on an action log.

pub mod actions;
pub mod bil;
pub mod credit;
pub mod dag;
pub mod error;
pub mod graph;
pub mod harness;
pub mod ilm;
pub mod problem;
pub mod rounding;
mod textio;

pub use actions::{ActionId, ActionLog, EdgeProb, Timestamp, Tuple};
pub use credit::{CreditStore, DeltaEvaluator, UcRows};
pub use dag::{ActionDag, CreditScheme, CreditTable};
pub use error::{Error, Result};
pub use graph::{Edge, ExternalId, NodeId, SocialGraph};
pub use problem::{Constraint, Instance, ProblemSpec, TargetSet};
pub use bil::{greedy_bil, GreedyOptions, Solution};
pub use ilm::{continuous_greedy, CgConfig, FractionalSolution};
