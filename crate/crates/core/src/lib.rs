//! Reduction of finite-state Markov chains under a total-variation budget.
//!
//! The crate provides the water-filling maximizers over a total-variation ball,
//! the row-wise reduction of a transition matrix ([`method1`]), the `Q†`
//! operators and reduced vectors for occupancy and maximum-entropy reduction
//! ([`method2`]), KL-optimal aggregation and lifting ([`lift`]), and exact
//! oracles used to check optimality on small instances ([`oracle`]).

pub mod chain;
pub mod error;
pub mod io;
pub mod lift;
pub mod method1;
pub mod method2;
pub mod oracle;
pub mod pipeline;
pub mod random;
pub mod waterfill;

pub use chain::{
    entropy, kl_divergence, stationary_distribution, tv_distance, LogBase, MarkovChain,
    ProbabilityVector, SignedMatrix, StochasticMatrix,
};
pub use error::{Error, Result};
pub use lift::{aggregate, kl_rate_lifted, lift_chain, LiftedChain, PartitionFunction};
pub use method1::{approximate_rows, Method1Result};
pub use method2::{Method, QDagger, ReducedVector};
pub use pipeline::{Reducer, ReductionResult};
pub use waterfill::{max_entropy, support_sets, waterfill, SupportPartition, WaterfillSolution};
