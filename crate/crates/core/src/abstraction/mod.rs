//! On-the-go state and state-action pair abstractions maintained over a live
//! search graph.

pub mod engine;
pub mod groups;
pub mod policy;
pub mod pruning;

pub use engine::{q_pair_equivalent, states_similar};
pub use groups::{AbstractNode, GroupId, GroupKind, GroupStore};
pub use policy::{AbstractionError, AbstractionPolicy, Variant};
pub use pruning::{conf_prune, j_ucb, topn_prune, ChildStats, JSet};
