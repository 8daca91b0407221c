//! Monte Carlo tree search with on-the-go state and state-action abstractions,
//! exact oracles for auditing them, and an experiment harness.

pub mod abstraction;
pub mod domains;
pub mod eval;
pub mod harness;
pub mod mdp;
pub mod oracle;
pub mod search;

pub use mdp::{ActionIndex, EnvState, Mdp, MdpDescriptor, MdpError, TransitionEntry};
