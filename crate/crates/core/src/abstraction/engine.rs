//! Incremental maintenance of the state and Q-pair partitions of a live
//! search graph.
//!
//! Both partitions use the same repair mechanism: a node that is the
//! representative of its group, or that no longer matches its
//! representative, moves to the largest same-depth group whose
//! representative it matches (ties to the lower creation id) or becomes a
//! singleton. A departing representative is replaced by a uniformly random
//! remaining member. A group change of a Q node triggers an update of its
//! parent state; a group change of a state triggers updates of the Q nodes
//! leading into it.

use rand::{Rng, RngCore};
use smallvec::SmallVec;

use crate::abstraction::groups::{GroupId, GroupStore};
use crate::abstraction::policy::{AbstractionError, Variant};
use crate::abstraction::pruning::{conf_prune, j_ucb, topn_prune, JSet};
use crate::mdp::ActionIndex;
use crate::search::graph::{QId, SearchGraph, StateId};

/// Slack on the reward and transition tolerances for rounding noise.
const EPS_SLACK: f64 = 1e-9;

type ClassDistribution = SmallVec<[(GroupId, f64); 8]>;

trait Member {
    fn slot(&mut self) -> (&mut GroupId, &mut u32);
}

impl Member for crate::search::graph::StateNode {
    fn slot(&mut self) -> (&mut GroupId, &mut u32) {
        (&mut self.group, &mut self.group_pos)
    }
}

impl Member for crate::search::graph::QNode {
    fn slot(&mut self) -> (&mut GroupId, &mut u32) {
        (&mut self.group, &mut self.group_pos)
    }
}

/// Moves node `id` from its group into `target`, or into a fresh singleton
/// when `target` is `None`, and returns the new group.
fn relocate<N: Member>(
    nodes: &mut [N],
    store: &mut GroupStore,
    id: u32,
    depth: u32,
    target: Option<GroupId>,
    stats: impl Fn(&N) -> (u64, f64),
    rng: &mut dyn RngCore,
) -> GroupId {
    let (old, pos) = {
        let (g, p) = nodes[id as usize].slot();
        (*g, *p)
    };
    if let Some(moved) = store.remove_member(old, pos) {
        *nodes[moved as usize].slot().1 = pos;
    }
    if store.get(old).members.is_empty() {
        store.delete(old);
    } else {
        let g = store.get_mut(old);
        if g.representative == id {
            g.representative = g.members[rng.gen_range(0..g.members.len())];
        }
        recount(nodes, store, old, &stats);
    }
    let (new, new_pos) = match target {
        Some(t) => (t, store.push_member(t, id)),
        None => (store.create(depth, id, false), 0),
    };
    let (g, p) = nodes[id as usize].slot();
    *g = new;
    *p = new_pos;
    recount(nodes, store, new, &stats);
    new
}

fn recount<N>(nodes: &[N], store: &mut GroupStore, id: GroupId, stats: &impl Fn(&N) -> (u64, f64)) {
    let (v, t) = store
        .get(id)
        .members
        .iter()
        .map(|&m| stats(&nodes[m as usize]))
        .fold((0, 0.0), |acc, (v, t)| (acc.0 + v, acc.1 + t));
    let g = store.get_mut(id);
    g.aggregate_visits = v;
    g.aggregate_return = t;
}

impl SearchGraph {
    /// Class-level successor distribution of a fully expanded Q node, after
    /// dropping successors below `alpha * max` (no renormalization).
    fn class_distribution(&self, q: QId) -> ClassDistribution {
        let model = self.q(q).model().expect("fully expanded Q node");
        let cutoff = match self.policy.alpha {
            Some(alpha) => {
                alpha * model.outcomes.iter().map(|o| o.probability).fold(0.0, f64::max)
            }
            None => f64::NEG_INFINITY,
        };
        let mut dist: ClassDistribution = SmallVec::new();
        for o in &model.outcomes {
            if o.probability < cutoff {
                continue;
            }
            let node = o.node.expect("fully expanded Q node");
            let class = self.state(node).group;
            match dist.iter_mut().find(|(c, _)| *c == class) {
                Some(entry) => entry.1 += o.probability,
                None => dist.push((class, o.probability)),
            }
        }
        dist.sort_unstable_by_key(|(c, _)| *c);
        dist
    }

    /// Summed absolute difference of class probabilities.
    pub(crate) fn transition_distance(&self, a: QId, b: QId) -> f64 {
        let (da, db) = (self.class_distribution(a), self.class_distribution(b));
        let (mut i, mut j, mut f) = (0, 0, 0.0);
        while i < da.len() || j < db.len() {
            match (da.get(i), db.get(j)) {
                (Some(x), Some(y)) if x.0 == y.0 => {
                    f += (x.1 - y.1).abs();
                    i += 1;
                    j += 1;
                }
                (Some(x), Some(y)) if x.0 < y.0 => {
                    f += x.1;
                    i += 1;
                }
                (Some(x), None) => {
                    f += x.1;
                    i += 1;
                }
                (_, Some(y)) => {
                    f += y.1;
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        f
    }

    /// Pair rule on two fully expanded Q nodes.
    pub(crate) fn q_equivalent(&self, a: QId, b: QId) -> bool {
        if a == b {
            return true;
        }
        let ra = self.q_reward(a).expect("model present");
        let rb = self.q_reward(b).expect("model present");
        (ra - rb).abs() <= self.policy.eps_a + EPS_SLACK
            && self.transition_distance(a, b) <= self.policy.eps_t + EPS_SLACK
    }

    /// One direction of the pruned state rule: every kept action of `s1`
    /// has a partner action of `s2` in the same Q group.
    fn covers(&self, s1: StateId, kept1: Option<&[ActionIndex]>, s2: StateId) -> bool {
        let n1 = self.state(s1);
        let n2 = self.state(s2);
        let has_partner = |q: QId| {
            let g = self.q(q).group;
            n2.children().any(|q2| self.q(q2).group == g)
        };
        match kept1 {
            Some(kept) => kept.iter().all(|&a| has_partner(n1.child(a))),
            None => n1.children().all(has_partner),
        }
    }

    /// Symmetric state rule; `None` kept sets mean the full action set.
    pub(crate) fn similar(
        &self,
        s1: StateId,
        kept1: Option<&[ActionIndex]>,
        s2: StateId,
        kept2: Option<&[ActionIndex]>,
    ) -> bool {
        s1 == s2 || (self.covers(s1, kept1, s2) && self.covers(s2, kept2, s1))
    }

    /// Kept actions of `s` under the configured pruner.
    pub(crate) fn compute_jset(&self, s: StateId) -> Result<JSet, AbstractionError> {
        let stats = self.child_stats(s);
        let visits = self.state(s).visits;
        let kept = match self.policy.variant {
            Variant::Ipa => {
                let lambda = if self.policy.lambda_p_scaled && self.policy.lambda_p.is_finite() {
                    self.policy.lambda_p * self.sigma()
                } else {
                    self.policy.lambda_p
                };
                j_ucb(&stats, lambda)?
            }
            Variant::Conf => conf_prune(&stats, self.policy.p_c)?,
            Variant::Topn => {
                topn_prune(&stats, visits, self.policy.n_matches, self.policy.n_min)?
            }
            Variant::None | Variant::Oga | Variant::Rstate => {
                if stats.iter().any(|c| c.visits == 0) {
                    return Err(AbstractionError::NotFullyExpanded);
                }
                (0..stats.len()).map(ActionIndex).collect()
            }
        };
        Ok(JSet {
            kept,
            computed_at_visits: visits,
        })
    }

    fn move_state(&mut self, s: StateId, target: Option<GroupId>, rng: &mut dyn RngCore) {
        let depth = self.states[s.0 as usize].depth;
        relocate(
            &mut self.states,
            &mut self.state_groups,
            s.0,
            depth,
            target,
            |n| (n.visits, n.total_return),
            rng,
        );
    }

    fn move_q(&mut self, q: QId, target: Option<GroupId>, rng: &mut dyn RngCore) {
        let depth = self.states[self.qnodes[q.0 as usize].parent.0 as usize].depth;
        relocate(
            &mut self.qnodes,
            &mut self.q_groups,
            q.0,
            depth,
            target,
            |n| (n.visits, n.total_return),
            rng,
        );
    }

    /// Recency-gated recomputation of a Q node's group. Returns whether the
    /// group changed.
    pub(crate) fn update_q_abstraction(&mut self, q: QId, bypass: bool, rng: &mut dyn RngCore) -> bool {
        if !bypass {
            let k = self.recency_k;
            let node = &mut self.qnodes[q.0 as usize];
            node.recency += 1;
            if node.recency < k {
                return false;
            }
            node.recency = 0;
        }
        if !self.q(q).is_fully_expanded() {
            return false;
        }
        let current = self.q(q).group;
        let rep = QId(self.q_groups.get(current).representative);
        if rep != q && self.q_equivalent(q, rep) {
            return false;
        }
        let depth = self.state(self.q(q).parent).depth;
        let mut best: Option<(usize, u64, GroupId)> = None;
        for &gid in self.q_groups.at_depth(depth) {
            let g = self.q_groups.get(gid);
            let r = QId(g.representative);
            if r != q && !(self.q(r).is_fully_expanded() && self.q_equivalent(q, r)) {
                continue;
            }
            if better(best, g.size(), g.creation_id) {
                best = Some((g.size(), g.creation_id, gid));
            }
        }
        let target = best.map(|b| b.2);
        if target == Some(current) || (target.is_none() && self.q_groups.get(current).size() == 1) {
            return false;
        }
        self.move_q(q, target, rng);
        let parent = self.q(q).parent;
        let bypass = self.policy.propagate_bypasses_recency;
        self.update_state_abstraction(parent, bypass, rng);
        true
    }

    /// Recency-gated recomputation of a state's kept actions and group.
    /// Returns whether the group changed.
    pub(crate) fn update_state_abstraction(
        &mut self,
        s: StateId,
        bypass: bool,
        rng: &mut dyn RngCore,
    ) -> bool {
        if self.state(s).leaf {
            return false;
        }
        if self.policy.variant == Variant::Rstate {
            return !bypass && self.rstate_update(s, rng);
        }
        if !bypass {
            let k = self.recency_k;
            let node = &mut self.states[s.0 as usize];
            node.recency += 1;
            if node.recency < k {
                return false;
            }
            node.recency = 0;
        }
        let Ok(jset) = self.compute_jset(s) else {
            return false;
        };
        self.states[s.0 as usize].jset = Some(jset);
        self.states[s.0 as usize].updated = true;
        let node = self.state(s);
        let kept = node.jset.as_ref().expect("just stored").kept.clone();
        let current = node.group;
        let rep = StateId(self.state_groups.get(current).representative);
        if rep != s && self.similar(s, Some(&kept), rep, self.state(rep).jset().map(|j| j.kept.as_slice())) {
            return false;
        }
        // Any matching representative owns a partner of the first kept
        // action, so the candidates are the parents of that Q group.
        let probe = self.q(node.child(kept[0])).group;
        let mut best: Option<(usize, u64, GroupId)> = None;
        for &m in &self.q_groups.get(probe).members {
            let p = self.q(QId(m)).parent;
            let pg = self.state(p).group;
            let g = self.state_groups.get(pg);
            if g.representative != p.0 {
                continue;
            }
            // A node always matches itself, whichever kept set it is tested with.
            let matches = p == s || {
                let kept_p = self.state(p).jset().map(|j| j.kept.as_slice());
                self.similar(s, Some(&kept), p, kept_p)
            };
            if matches && better(best, g.size(), g.creation_id) {
                best = Some((g.size(), g.creation_id, pg));
            }
        }
        let target = best.map(|b| b.2);
        if target == Some(current)
            || (target.is_none() && self.state_groups.get(current).size() == 1)
        {
            return false;
        }
        self.move_state(s, target, rng);
        self.propagate_to_parents(s, rng);
        true
    }

    fn propagate_to_parents(&mut self, s: StateId, rng: &mut dyn RngCore) {
        let bypass = self.policy.propagate_bypasses_recency;
        let parents = self.state(s).parents.clone();
        for q in parents {
            self.update_q_abstraction(q, bypass, rng);
        }
    }

    /// Random state grouping: on every K-th update a singleton state joins a
    /// uniformly chosen same-depth group with probability `p_move`.
    fn rstate_update(&mut self, s: StateId, rng: &mut dyn RngCore) -> bool {
        let k = self.recency_k;
        let node = &mut self.states[s.0 as usize];
        node.recency += 1;
        if node.recency < k {
            return false;
        }
        node.recency = 0;
        node.updated = true;
        let current = node.group;
        let depth = node.depth;
        if self.state_groups.get(current).size() != 1 {
            return false;
        }
        if !(rng.gen::<f64>() < self.policy.p_move) {
            return false;
        }
        let choices: Vec<GroupId> = self
            .state_groups
            .at_depth(depth)
            .iter()
            .copied()
            .filter(|&g| !self.state_groups.get(g).is_leaf_group)
            .collect();
        let target = choices[rng.gen_range(0..choices.len())];
        if target == current {
            return false;
        }
        self.move_state(s, Some(target), rng);
        self.propagate_to_parents(s, rng);
        true
    }
}

/// Larger groups win; equal sizes go to the lower creation id.
fn better(best: Option<(usize, u64, GroupId)>, size: usize, creation_id: u64) -> bool {
    match best {
        None => true,
        Some((bs, bc, _)) => size > bs || (size == bs && creation_id < bc),
    }
}

/// Pair rule between two fully expanded Q nodes of the same depth, using the
/// graph's current state partition and policy tolerances.
pub fn q_pair_equivalent(graph: &SearchGraph, a: QId, b: QId) -> Result<bool, AbstractionError> {
    if !graph.q(a).is_fully_expanded() || !graph.q(b).is_fully_expanded() {
        return Err(AbstractionError::NotFullyExpanded);
    }
    Ok(graph.q_equivalent(a, b))
}

/// Pruned state rule between two states under the current Q partition.
pub fn states_similar(graph: &SearchGraph, s1: StateId, s2: StateId, j1: &JSet, j2: &JSet) -> bool {
    graph.similar(s1, Some(&j1.kept), s2, Some(&j2.kept))
}
