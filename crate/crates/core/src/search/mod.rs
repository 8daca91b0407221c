//! MCTS on a layered search graph with transpositions, a UCB1 tree policy on
//! aggregate abstraction statistics, uniform random rollouts and greedy final
//! decisions.

pub mod episode;
pub mod graph;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

use crate::abstraction::{AbstractionError, AbstractionPolicy, Variant};
use crate::mdp::{sample_index, ActionIndex, EnvState, Mdp, MdpError};

pub use episode::{play_episode, EpisodeOutcome, EpisodeOptions};
pub use graph::{Outcome, QId, QModel, QNode, SearchGraph, StateId, StateNode, ROOT};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("no root action has been visited")]
    NoVisitedChild,
    #[error("search root is terminal")]
    TerminalRoot,
    #[error("invalid search config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Abstraction(#[from] AbstractionError),
}

fn default_c() -> f64 {
    2.0
}
fn default_fallback() -> f64 {
    1.0
}
fn default_k() -> u32 {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub iterations: u64,
    /// Multiplier of the global Q-value standard deviation.
    #[serde(default = "default_c")]
    pub exploration_c: f64,
    #[serde(default = "default_fallback")]
    pub sigma_fallback: f64,
    #[serde(default = "AbstractionPolicy::none")]
    pub abstraction: AbstractionPolicy,
    #[serde(default = "default_k")]
    pub recency_k: u32,
    /// Caps the lookahead below the remaining episode steps.
    #[serde(default)]
    pub planning_horizon: Option<u32>,
    #[serde(default)]
    pub rng_seed: u64,
}

impl SearchConfig {
    pub fn new(iterations: u64, abstraction: AbstractionPolicy) -> Self {
        Self {
            iterations,
            exploration_c: default_c(),
            sigma_fallback: default_fallback(),
            abstraction,
            recency_k: default_k(),
            planning_horizon: None,
            rng_seed: 0,
        }
    }

    pub fn uct(iterations: u64) -> Self {
        Self::new(iterations, AbstractionPolicy::none())
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.exploration_c = c;
        self
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: &str| Err(SearchError::InvalidConfig(m.to_string()));
        if self.iterations == 0 {
            return bad("iterations must be at least 1");
        }
        if !(self.exploration_c > 0.0 && self.exploration_c.is_finite()) {
            return bad("exploration_c must be positive");
        }
        if !(self.sigma_fallback > 0.0 && self.sigma_fallback.is_finite()) {
            return bad("sigma_fallback must be positive");
        }
        if self.recency_k == 0 {
            return bad("recency_k must be at least 1");
        }
        if self.planning_horizon == Some(0) {
            return bad("planning_horizon must be positive");
        }
        self.abstraction.validate()?;
        Ok(())
    }

    /// Lookahead for a decision with `remaining` episode steps left.
    pub fn lookahead(&self, remaining: u32) -> u32 {
        self.planning_horizon.map_or(remaining, |h| h.min(remaining))
    }
}

/// UCB1 value of an action with `visits` samples summing to `total`.
/// Unvisited actions score `+inf`.
pub fn ucb_value(total: f64, visits: u64, parent_visits: u64, lambda: f64) -> f64 {
    if visits == 0 {
        return f64::INFINITY;
    }
    let mean = total / visits as f64;
    let ln = (parent_visits.max(1) as f64).ln();
    if lambda == 0.0 || ln == 0.0 {
        return mean;
    }
    mean + lambda * (ln / visits as f64).sqrt()
}

/// Global-Std exploration constant: `c` times the population standard
/// deviation of the given Q values, or `c * fallback` when fewer than two
/// values exist or they all coincide.
pub fn global_std_exploration(q_values: &[f64], c: f64, fallback: f64) -> f64 {
    if q_values.len() < 2 || q_values.iter().all(|&q| q == q_values[0]) {
        return c * fallback;
    }
    let n = q_values.len() as f64;
    let mean = q_values.iter().sum::<f64>() / n;
    let var = q_values.iter().map(|q| (q - mean).powi(2)).sum::<f64>() / n;
    if var > 0.0 {
        c * var.sqrt()
    } else {
        c * fallback
    }
}

impl SearchGraph {
    /// UCB selection at `s` on aggregate statistics. Unvisited actions go
    /// first in index order; ties go to the lower index.
    fn select(&self, s: StateId, lambda: f64) -> QId {
        let node = self.state(s);
        let parent = node.child_visits;
        let mut best = (f64::NEG_INFINITY, None);
        for q in node.children() {
            let qn = self.q(q);
            if qn.visits == 0 {
                return q;
            }
            let g = self.q_groups.get(qn.group);
            let v = ucb_value(g.aggregate_return, g.aggregate_visits, parent, lambda);
            if best.1.is_none() || v > best.0 {
                best = (v, Some(q));
            }
        }
        best.1.expect("non-leaf state has children")
    }

    /// One selection, expansion, rollout and backup pass followed by the
    /// abstraction updates along the path.
    pub fn run_iteration(&mut self, mdp: &dyn Mdp, rng: &mut dyn RngCore) -> Result<(), SearchError> {
        let lambda = self.exploration();
        let mut path: SmallVec<[(StateId, QId, f64); 32]> = SmallVec::new();
        let mut s = ROOT;
        while !self.state(s).leaf {
            let q = self.select(s, lambda);
            self.ensure_model(mdp, q)?;
            let model = self.q(q).model().expect("model filled");
            let idx = sample_index(model.outcomes.iter().map(|o| o.probability), rng);
            path.push((s, q, model.reward));
            let (next, created) = self.resolve_outcome(mdp, q, idx);
            s = next;
            if created {
                break;
            }
        }
        let rollout = self.rollout(mdp, s, rng)?;
        self.backup(&path, s, rollout);
        self.iterations += 1;
        if self.policy.variant != Variant::None {
            for &(state, q, _) in path.iter().rev() {
                self.update_q_abstraction(q, false, rng);
                self.update_state_abstraction(state, false, rng);
            }
        }
        Ok(())
    }

    /// Uniform random playout from `s` up to the search horizon.
    fn rollout(&self, mdp: &dyn Mdp, s: StateId, rng: &mut dyn RngCore) -> Result<f64, MdpError> {
        let node = self.state(s);
        if node.leaf {
            return Ok(0.0);
        }
        let mut state = node.state.clone();
        let mut total = 0.0;
        for _ in node.depth..self.horizon {
            if state.is_terminal() {
                break;
            }
            let n = mdp.num_actions(&state);
            let a = ActionIndex(rng.gen_range(0..n));
            let (next, r) = mdp.sample_transition(&state, a, rng)?;
            total += r;
            state = next;
        }
        Ok(total)
    }

    /// Adds the return-to-go to every node on the path. Q statistics are
    /// kept from the perspective of the player moving at the parent.
    fn backup(&mut self, path: &[(StateId, QId, f64)], leaf: StateId, rollout: f64) {
        let mut ret = rollout;
        self.credit_state(leaf, ret);
        self.states[leaf.0 as usize].ends += 1;
        for &(s, q, reward) in path.iter().rev() {
            ret += reward;
            let sign = self.states[s.0 as usize].sign;
            let value = sign * ret;
            let node = &mut self.qnodes[q.0 as usize];
            if node.visits > 0 {
                self.moments.remove(node.total_return / node.visits as f64);
            }
            node.visits += 1;
            node.total_return += value;
            node.sum_squares += value * value;
            self.moments.add(node.total_return / node.visits as f64);
            let g = self.q_groups.get_mut(node.group);
            g.aggregate_visits += 1;
            g.aggregate_return += value;
            self.states[s.0 as usize].child_visits += 1;
            self.credit_state(s, ret);
        }
    }

    fn credit_state(&mut self, s: StateId, ret: f64) {
        let node = &mut self.states[s.0 as usize];
        node.visits += 1;
        node.total_return += ret;
        let g = self.state_groups.get_mut(node.group);
        g.aggregate_visits += 1;
        g.aggregate_return += ret;
    }

    /// Root action with the best ground mean; ties go to the lower index.
    pub fn decide(&self) -> Result<ActionIndex, SearchError> {
        let mut best: Option<(f64, ActionIndex)> = None;
        for q in self.state(ROOT).children() {
            let n = self.q(q);
            if n.visits == 0 {
                continue;
            }
            if best.map_or(true, |(v, _)| n.mean() > v) {
                best = Some((n.mean(), n.action));
            }
        }
        best.map(|b| b.1).ok_or(SearchError::NoVisitedChild)
    }

    /// Ground mean of every root action, `None` for unvisited ones.
    pub fn root_values(&self) -> Vec<Option<f64>> {
        self.state(ROOT)
            .children()
            .map(|q| {
                let n = self.q(q);
                (n.visits > 0).then(|| n.mean())
            })
            .collect()
    }
}

/// Builds a graph at `root` and runs `config.iterations` iterations with a
/// lookahead of `remaining` steps.
pub fn search(
    mdp: &dyn Mdp,
    root: &EnvState,
    remaining: u32,
    config: &SearchConfig,
    rng: &mut dyn RngCore,
) -> Result<SearchGraph, SearchError> {
    if root.is_terminal() || mdp.num_actions(root) == 0 {
        return Err(SearchError::TerminalRoot);
    }
    let horizon = config.lookahead(remaining).max(1);
    let mut graph = SearchGraph::new(mdp, root.clone(), horizon, config);
    for _ in 0..config.iterations {
        graph.run_iteration(mdp, rng)?;
    }
    Ok(graph)
}

/// Searches with an RNG seeded from `config.rng_seed` and returns the
/// chosen action.
pub fn plan(mdp: &dyn Mdp, root: &EnvState, remaining: u32, config: &SearchConfig) -> Result<ActionIndex, SearchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    search(mdp, root, remaining, config, &mut rng)?.decide()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ucb_examples() {
        assert_eq!(ucb_value(0.0, 0, 5, 1.0), f64::INFINITY);
        assert_eq!(ucb_value(10.0, 4, 8, 0.0), 2.5);
        let expected = 2.5 + (8f64.ln() / 4.0).sqrt();
        assert!((ucb_value(10.0, 4, 8, 1.0) - expected).abs() < 1e-12);
        assert!((ucb_value(10.0, 4, 8, 1.0) - 3.22101).abs() < 1e-5);
    }

    #[test]
    fn global_std_examples() {
        assert_eq!(global_std_exploration(&[1.0, 1.0, 1.0], 2.0, 1.0), 2.0);
        assert_eq!(global_std_exploration(&[0.0, 2.0], 2.0, 1.0), 2.0);
        assert_eq!(global_std_exploration(&[], 3.0, 1.0), 3.0);
    }

    #[test]
    fn config_validation() {
        assert!(SearchConfig::uct(0).validate().is_err());
        assert!(SearchConfig::uct(10).with_c(0.0).validate().is_err());
        assert!(SearchConfig::uct(10).validate().is_ok());
        let cfg: SearchConfig = toml::from_str(
            "iterations = 100\n[abstraction]\nvariant = \"ipa\"\nlambda_p = 1.0",
        )
        .unwrap();
        assert_eq!(cfg.abstraction.variant, Variant::Ipa);
        assert_eq!(cfg.recency_k, 3);
    }
}
