use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AbstractionError {
    #[error("node is not fully expanded")]
    NotFullyExpanded,
    #[error("invalid abstraction policy: {0}")]
    InvalidPolicy(String),
}

/// Which abstraction family drives the search.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Plain UCT on the search graph: every node is its own group.
    None,
    /// State-action pair abstraction with the full-action state rule.
    Oga,
    /// Pair abstraction plus random state groups.
    Rstate,
    /// Pair abstraction plus the UCB-pruned state rule.
    Ipa,
    /// Pair abstraction plus confidence-interval pruning.
    Conf,
    /// Pair abstraction plus top-n pruning.
    Topn,
}

/// Variant configuration. Only the fields relevant to `variant` are read.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AbstractionPolicy {
    pub variant: Variant,
    /// Reward tolerance of the pair rule.
    pub eps_a: f64,
    /// Transition-distance tolerance of the pair rule.
    pub eps_t: f64,
    /// Successors below `alpha * max probability` are ignored by the pair
    /// rule. `None` skips the pruning step entirely.
    pub alpha: Option<f64>,
    /// Exploration constant of the pruning UCB; infinity disables pruning.
    pub lambda_p: f64,
    /// Multiply `lambda_p` by the global Q-value standard deviation.
    pub lambda_p_scaled: bool,
    /// Probability of a random state-group move.
    pub p_move: f64,
    /// Confidence level of the interval pruner.
    pub p_c: f64,
    pub n_matches: usize,
    pub n_min: u64,
    /// Updates propagated from a changed group to its neighbours skip the
    /// neighbours' recency gate.
    pub propagate_bypasses_recency: bool,
}

impl Default for AbstractionPolicy {
    fn default() -> Self {
        Self {
            variant: Variant::Oga,
            eps_a: 0.0,
            eps_t: 0.0,
            alpha: None,
            lambda_p: f64::INFINITY,
            lambda_p_scaled: true,
            p_move: 0.5,
            p_c: 0.9,
            n_matches: 1,
            n_min: 0,
            propagate_bypasses_recency: true,
        }
    }
}

impl AbstractionPolicy {
    pub fn none() -> Self {
        Self {
            variant: Variant::None,
            ..Self::default()
        }
    }

    pub fn oga() -> Self {
        Self::default()
    }

    pub fn ipa(lambda_p: f64) -> Self {
        Self {
            variant: Variant::Ipa,
            lambda_p,
            ..Self::default()
        }
    }

    pub fn rstate(p_move: f64) -> Self {
        Self {
            variant: Variant::Rstate,
            p_move,
            ..Self::default()
        }
    }

    pub fn conf(p_c: f64) -> Self {
        Self {
            variant: Variant::Conf,
            p_c,
            ..Self::default()
        }
    }

    pub fn topn(n_matches: usize, n_min: u64) -> Self {
        Self {
            variant: Variant::Topn,
            n_matches,
            n_min,
            ..Self::default()
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn with_eps(mut self, eps_a: f64, eps_t: f64) -> Self {
        self.eps_a = eps_a;
        self.eps_t = eps_t;
        self
    }

    pub fn is_enabled(&self) -> bool {
        self.variant != Variant::None
    }

    pub fn validate(&self) -> Result<(), AbstractionError> {
        let bad = |m: &str| Err(AbstractionError::InvalidPolicy(m.to_string()));
        if !(self.eps_a >= 0.0) || !(self.eps_t >= 0.0) {
            return bad("eps_a and eps_t must be non-negative");
        }
        if let Some(a) = self.alpha {
            if !(0.0..=1.0).contains(&a) {
                return bad("alpha must lie in [0,1]");
            }
        }
        if !(self.lambda_p >= 0.0) {
            return bad("lambda_p must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.p_move) {
            return bad("p_move must lie in [0,1]");
        }
        if !(self.p_c > 0.0 && self.p_c < 1.0) {
            return bad("p_c must lie in (0,1)");
        }
        if self.n_matches == 0 {
            return bad("n_matches must be at least 1");
        }
        Ok(())
    }
}
