//! Exact, search-free reference computations used to audit the search and
//! abstraction code.

pub mod combinatorics;
pub mod fixed_point;
pub mod layered;
pub mod ratios;
pub mod values;

use thiserror::Error;

use crate::mdp::MdpError;

pub use combinatorics::{p_abs_closed_form, p_abs_enumerate, p_abs_exact, p_abs_monte_carlo, surjection_count};
pub use fixed_point::{exact_asap_fixed_point, exact_ipa_fixed_point, p_asap_fixed_point, Abstraction, Partition, PartitionKind};
pub use layered::{soundness_fixture, two_branch_example, LayeredAction, LayeredMdp, LayeredState};
pub use ratios::{value_equivalence_ratios, EquivalenceRatios};
pub use values::{evaluate_policy, value_iteration, ValueTables};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("argument out of range: {0}")]
    RangeExceeded(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid layered model: {0}")]
    InvalidModel(String),
    #[error("unrolled model exceeds {0} states")]
    TooLarge(usize),
    #[error("search graph cannot be exported: {0}")]
    Incomplete(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}
