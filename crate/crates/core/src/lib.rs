//! Linear regression over graphs (LRG) with a node-recursive solver that
//! updates the optimal coefficients as nodes are appended to the graph.

pub mod error;
pub mod eval;
pub mod features;
pub mod graph;
pub mod harness;
pub mod io;
pub mod lrg;
pub mod nrlrg;

pub use error::{Error, Result};
pub use features::{DesignMatrix, FeatureMap, FeatureSpec};
pub use graph::{Graph, NodeAttachment};
pub use lrg::{solve_batch, CoefficientMatrix, LrgProblem};
pub use nrlrg::RecursionState;
