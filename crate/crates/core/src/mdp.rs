//! Finite-horizon MDP interface shared by the domains, the search engine and
//! the exact oracles.
//!
//! Rewards are attached to `(state, action)` pairs and are always reported
//! from player 0's perspective. Two-player domains mark the player to move in
//! the state; the search layer flips signs where needed.

use std::fmt;

use rand::{Rng, RngCore};
use smallvec::SmallVec;
use thiserror::Error;

/// Inline capacity of a state encoding. Every shipped domain fits.
pub type Payload = SmallVec<[u8; 48]>;

/// Tolerance for the normalization of explicit distributions.
pub const PROB_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdpError {
    #[error("action {action} is not legal in this state ({num_actions} legal actions)")]
    IllegalAction { action: usize, num_actions: usize },
    #[error("invalid domain spec: {0}")]
    InvalidSpec(String),
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
    #[error("malformed distribution: {0}")]
    BadDistribution(String),
}

/// Canonical ground state. Equality and hashing operate on the byte encoding,
/// which is what transposition detection relies on.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EnvState {
    payload: Payload,
    player_to_move: u8,
    terminal: bool,
}

impl EnvState {
    pub fn new(payload: &[u8], player_to_move: u8, terminal: bool) -> Self {
        Self {
            payload: Payload::from_slice(payload),
            player_to_move,
            terminal,
        }
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn player_to_move(&self) -> u8 {
        self.player_to_move
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal
    }
}

impl fmt::Debug for EnvState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EnvState({:?}", self.payload.as_slice())?;
        if self.player_to_move != 0 {
            write!(f, ", p{}", self.player_to_move)?;
        }
        if self.terminal {
            write!(f, ", terminal")?;
        }
        write!(f, ")")
    }
}

/// Position of an action inside the canonical legal-action list of a state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionIndex(pub usize);

impl fmt::Display for ActionIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransitionEntry {
    pub successor: EnvState,
    pub probability: f64,
}

impl TransitionEntry {
    pub fn new(successor: EnvState, probability: f64) -> Self {
        Self {
            successor,
            probability,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MdpDescriptor {
    pub domain_name: String,
    /// Episode length in steps.
    pub horizon: u32,
    pub discount: f64,
    pub num_players: u8,
}

impl MdpDescriptor {
    pub fn single_player(name: impl Into<String>, horizon: u32) -> Self {
        Self {
            domain_name: name.into(),
            horizon,
            discount: 1.0,
            num_players: 1,
        }
    }

    pub fn two_player(name: impl Into<String>, horizon: u32) -> Self {
        Self {
            domain_name: name.into(),
            horizon,
            discount: 1.0,
            num_players: 2,
        }
    }
}

/// A finite MDP bound to concrete parameters.
///
/// Implementations are immutable after construction and shared across
/// episode workers.
pub trait Mdp: Send + Sync {
    fn descriptor(&self) -> &MdpDescriptor;

    fn initial_state(&self) -> EnvState;

    /// Number of legal actions; zero exactly for terminal states.
    fn num_actions(&self, state: &EnvState) -> usize;

    /// `R(state, action)` from player 0's perspective.
    fn reward(&self, state: &EnvState, action: ActionIndex) -> Result<f64, MdpError>;

    /// Full explicit successor distribution, deduplicated and normalized.
    fn enumerate_transitions(
        &self,
        state: &EnvState,
        action: ActionIndex,
    ) -> Result<Vec<TransitionEntry>, MdpError>;

    fn legal_actions(&self, state: &EnvState) -> Vec<ActionIndex> {
        (0..self.num_actions(state)).map(ActionIndex).collect()
    }

    /// Draws a successor with the probabilities of `enumerate_transitions`.
    /// Domains with large factored distributions override this.
    fn sample_transition(
        &self,
        state: &EnvState,
        action: ActionIndex,
        rng: &mut dyn RngCore,
    ) -> Result<(EnvState, f64), MdpError> {
        let reward = self.reward(state, action)?;
        let entries = self.enumerate_transitions(state, action)?;
        let idx = sample_index(entries.iter().map(|e| e.probability), rng);
        let successor = entries.into_iter().nth(idx).expect("non-empty distribution").successor;
        Ok((successor, reward))
    }

    fn action_label(&self, _state: &EnvState, action: ActionIndex) -> String {
        action.to_string()
    }
}

/// Checks that `action` indexes the legal-action list of `state`.
pub fn check_action(mdp: &(impl Mdp + ?Sized), state: &EnvState, action: ActionIndex) -> Result<(), MdpError> {
    let n = mdp.num_actions(state);
    if action.0 < n {
        Ok(())
    } else {
        Err(MdpError::IllegalAction {
            action: action.0,
            num_actions: n,
        })
    }
}

/// Inverse-CDF draw over a list of probabilities. Falls back to the last
/// index when rounding leaves the uniform draw above the cumulative sum.
pub fn sample_index(probs: impl IntoIterator<Item = f64>, rng: &mut dyn RngCore) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.into_iter().enumerate() {
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Merges duplicate successors (keeping first-seen order) and drops
/// zero-probability entries.
pub fn normalize_entries(entries: Vec<TransitionEntry>) -> Vec<TransitionEntry> {
    let mut out: Vec<TransitionEntry> = Vec::with_capacity(entries.len());
    for e in entries {
        if e.probability <= 0.0 {
            continue;
        }
        match out.iter_mut().find(|o| o.successor == e.successor) {
            Some(o) => o.probability += e.probability,
            None => out.push(e),
        }
    }
    out
}

/// Verifies the distribution contract: probabilities in (0, 1], summing to
/// one within [`PROB_TOLERANCE`], no duplicate successors.
pub fn validate_distribution(entries: &[TransitionEntry]) -> Result<(), MdpError> {
    if entries.is_empty() {
        return Err(MdpError::BadDistribution("empty distribution".into()));
    }
    let mut total = 0.0;
    for (i, e) in entries.iter().enumerate() {
        if !(e.probability > 0.0 && e.probability <= 1.0 + PROB_TOLERANCE) {
            return Err(MdpError::BadDistribution(format!(
                "probability {} out of (0,1]",
                e.probability
            )));
        }
        if entries[..i].iter().any(|o| o.successor == e.successor) {
            return Err(MdpError::BadDistribution(format!(
                "duplicate successor {:?}",
                e.successor
            )));
        }
        total += e.probability;
    }
    if (total - 1.0).abs() > PROB_TOLERANCE {
        return Err(MdpError::BadDistribution(format!("probabilities sum to {total}")));
    }
    Ok(())
}
