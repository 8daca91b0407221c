//! Action pruning functions that decide which actions of a state must find
//! a matching partner before two states may share a group.
//!
//! All pruners work on the ground statistics of the state's children in
//! canonical action order and always keep every action with the maximal
//! mean, so the kept set is never empty.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::abstraction::policy::AbstractionError;
use crate::mdp::ActionIndex;

/// Ground statistics of one child Q node.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ChildStats {
    pub visits: u64,
    pub total_return: f64,
    pub sum_squares: f64,
}

impl ChildStats {
    pub fn new(visits: u64, total_return: f64) -> Self {
        Self {
            visits,
            total_return,
            sum_squares: 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.total_return / self.visits as f64
    }

    /// Unbiased sample standard deviation; `None` below two samples.
    pub fn sample_std(&self) -> Option<f64> {
        if self.visits < 2 {
            return None;
        }
        let n = self.visits as f64;
        let var = (self.sum_squares - self.total_return * self.total_return / n) / (n - 1.0);
        Some(var.max(0.0).sqrt())
    }
}

/// Kept actions of a state together with the visit count it was built at.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JSet {
    pub kept: Vec<ActionIndex>,
    pub computed_at_visits: u64,
}

impl JSet {
    pub fn contains(&self, a: ActionIndex) -> bool {
        self.kept.binary_search(&a).is_ok()
    }
}

fn require_expanded(children: &[ChildStats]) -> Result<(), AbstractionError> {
    if children.is_empty() || children.iter().any(|c| c.visits == 0) {
        Err(AbstractionError::NotFullyExpanded)
    } else {
        Ok(())
    }
}

fn all_actions(n: usize) -> Vec<ActionIndex> {
    (0..n).map(ActionIndex).collect()
}

fn q_max(children: &[ChildStats]) -> f64 {
    children.iter().map(ChildStats::mean).fold(f64::NEG_INFINITY, f64::max)
}

/// Actions whose UCB value with exploration constant `lambda` reaches the
/// maximal mean. `lambda = inf` keeps everything, `lambda = 0` keeps exactly
/// the argmax set.
pub fn j_ucb(children: &[ChildStats], lambda: f64) -> Result<Vec<ActionIndex>, AbstractionError> {
    require_expanded(children)?;
    if lambda.is_infinite() {
        return Ok(all_actions(children.len()));
    }
    let qmax = q_max(children);
    let parent: u64 = children.iter().map(|c| c.visits).sum();
    let ln_parent = (parent as f64).ln();
    Ok(children
        .iter()
        .enumerate()
        .filter(|(_, c)| c.mean() + lambda * (ln_parent / c.visits as f64).sqrt() >= qmax)
        .map(|(i, _)| ActionIndex(i))
        .collect())
}

/// z-value of a two-sided normal interval with confidence `p_c`.
pub fn normal_quantile(p_c: f64) -> f64 {
    Normal::standard().inverse_cdf((1.0 + p_c) / 2.0)
}

/// Actions whose upper confidence bound reaches the largest lower bound.
/// Keeps everything while some child has fewer than two samples.
pub fn conf_prune(children: &[ChildStats], p_c: f64) -> Result<Vec<ActionIndex>, AbstractionError> {
    require_expanded(children)?;
    let Some(stds) = children.iter().map(ChildStats::sample_std).collect::<Option<Vec<_>>>() else {
        return Ok(all_actions(children.len()));
    };
    let z = normal_quantile(p_c);
    let half = |i: usize| z * stds[i] / (children[i].visits as f64).sqrt();
    let best_lower = (0..children.len())
        .map(|i| children[i].mean() - half(i))
        .fold(f64::NEG_INFINITY, f64::max);
    let qmax = q_max(children);
    Ok((0..children.len())
        .filter(|&i| children[i].mean() + half(i) >= best_lower || children[i].mean() == qmax)
        .map(ActionIndex)
        .collect())
}

/// The `n_matches` best actions by mean (ties to the lower index), plus any
/// further action tied with the maximum. States with fewer than `n_min`
/// visits keep everything.
pub fn topn_prune(
    children: &[ChildStats],
    state_visits: u64,
    n_matches: usize,
    n_min: u64,
) -> Result<Vec<ActionIndex>, AbstractionError> {
    require_expanded(children)?;
    if state_visits < n_min || n_matches >= children.len() {
        return Ok(all_actions(children.len()));
    }
    let mut order: Vec<usize> = (0..children.len()).collect();
    order.sort_by(|&a, &b| children[b].mean().total_cmp(&children[a].mean()).then(a.cmp(&b)));
    let qmax = q_max(children);
    let mut kept: Vec<ActionIndex> = order
        .iter()
        .enumerate()
        .filter(|&(rank, &i)| rank < n_matches || children[i].mean() == qmax)
        .map(|(_, &i)| ActionIndex(i))
        .collect();
    kept.sort();
    Ok(kept)
}
