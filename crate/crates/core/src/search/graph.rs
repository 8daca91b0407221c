//! Layered search graph with transpositions: one state node per
//! `(depth, state)`, one Q node per legal action of an expanded state.

use std::fmt;

use rustc_hash::{FxHashMap, FxHashSet};

use crate::abstraction::groups::{GroupId, GroupKind, GroupStore};
use crate::abstraction::pruning::{ChildStats, JSet};
use crate::abstraction::AbstractionPolicy;
use crate::search::SearchConfig;
use crate::mdp::{ActionIndex, EnvState, Mdp, MdpError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QId(pub u32);

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

impl fmt::Display for QId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

pub const ROOT: StateId = StateId(0);

#[derive(Clone, Debug)]
pub struct StateNode {
    pub(crate) state: EnvState,
    pub(crate) depth: u32,
    pub(crate) first_child: u32,
    pub(crate) num_children: u32,
    /// Iterations that passed through or ended at this node.
    pub(crate) visits: u64,
    /// Sum of the children's visits; feeds the UCB logarithm.
    pub(crate) child_visits: u64,
    /// Iterations whose tree walk ended at this node.
    pub(crate) ends: u64,
    /// Sum of player-0 returns-to-go observed from this node.
    pub(crate) total_return: f64,
    pub(crate) group: GroupId,
    pub(crate) group_pos: u32,
    pub(crate) recency: u32,
    pub(crate) parents: Vec<QId>,
    /// Terminal or at the search horizon: no children.
    pub(crate) leaf: bool,
    /// +1 when player 0 moves here, -1 otherwise.
    pub(crate) sign: f64,
    pub(crate) jset: Option<JSet>,
    /// Set once the node went through a state-abstraction recomputation.
    pub(crate) updated: bool,
}

impl StateNode {
    pub fn state(&self) -> &EnvState {
        &self.state
    }
    pub fn depth(&self) -> u32 {
        self.depth
    }
    pub fn visits(&self) -> u64 {
        self.visits
    }
    pub fn child_visits(&self) -> u64 {
        self.child_visits
    }
    pub fn total_return(&self) -> f64 {
        self.total_return
    }
    pub fn group(&self) -> GroupId {
        self.group
    }
    pub fn recency_count(&self) -> u32 {
        self.recency
    }
    pub fn parents(&self) -> &[QId] {
        &self.parents
    }
    pub fn is_leaf(&self) -> bool {
        self.leaf
    }
    pub fn jset(&self) -> Option<&JSet> {
        self.jset.as_ref()
    }
    pub fn was_updated(&self) -> bool {
        self.updated
    }
    pub fn num_children(&self) -> usize {
        self.num_children as usize
    }
    pub fn children(&self) -> impl Iterator<Item = QId> + Clone {
        (self.first_child..self.first_child + self.num_children).map(QId)
    }
    pub fn child(&self, action: ActionIndex) -> QId {
        assert!(action.0 < self.num_children as usize, "action {action} out of range");
        QId(self.first_child + action.0 as u32)
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub state: EnvState,
    pub probability: f64,
    pub node: Option<StateId>,
}

/// Explicit model of a Q node, filled on its first selection.
#[derive(Clone, Debug)]
pub struct QModel {
    /// `R(s, a)` from player 0's perspective.
    pub reward: f64,
    pub outcomes: Vec<Outcome>,
    pub(crate) linked: usize,
}

#[derive(Clone, Debug)]
pub struct QNode {
    pub(crate) parent: StateId,
    pub(crate) action: ActionIndex,
    pub(crate) visits: u64,
    /// Sum of returns from the perspective of the player moving at the parent.
    pub(crate) total_return: f64,
    pub(crate) sum_squares: f64,
    pub(crate) group: GroupId,
    pub(crate) group_pos: u32,
    pub(crate) recency: u32,
    pub(crate) model: Option<Box<QModel>>,
}

impl QNode {
    pub fn parent(&self) -> StateId {
        self.parent
    }
    pub fn action(&self) -> ActionIndex {
        self.action
    }
    pub fn visits(&self) -> u64 {
        self.visits
    }
    pub fn total_return(&self) -> f64 {
        self.total_return
    }
    pub fn mean(&self) -> f64 {
        self.total_return / self.visits as f64
    }
    pub fn group(&self) -> GroupId {
        self.group
    }
    pub fn recency_count(&self) -> u32 {
        self.recency
    }
    pub fn model(&self) -> Option<&QModel> {
        self.model.as_deref()
    }
    /// Every successor of the explicit distribution has a node.
    pub fn is_fully_expanded(&self) -> bool {
        self.model.as_ref().is_some_and(|m| m.linked == m.outcomes.len())
    }
    pub fn stats(&self) -> ChildStats {
        ChildStats {
            visits: self.visits,
            total_return: self.total_return,
            sum_squares: self.sum_squares,
        }
    }
}

/// Running moments of the ground Q values of all visited Q nodes.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct QValueMoments {
    count: u64,
    sum: f64,
    sum_sq: f64,
}

impl QValueMoments {
    pub(crate) fn add(&mut self, q: f64) {
        self.count += 1;
        self.sum += q;
        self.sum_sq += q * q;
    }

    pub(crate) fn remove(&mut self, q: f64) {
        self.count -= 1;
        self.sum -= q;
        self.sum_sq -= q * q;
    }

    /// Population standard deviation, `None` below two values or when the
    /// spread vanishes up to rounding.
    pub(crate) fn std(&self) -> Option<f64> {
        if self.count < 2 {
            return None;
        }
        let n = self.count as f64;
        let mean = self.sum / n;
        let var = self.sum_sq / n - mean * mean;
        let scale = (self.sum_sq / n).max(1.0);
        (var > 1e-12 * scale).then(|| var.sqrt())
    }
}

/// Search graph plus its state and Q-pair partitions.
#[derive(Clone, Debug)]
pub struct SearchGraph {
    pub(crate) states: Vec<StateNode>,
    pub(crate) qnodes: Vec<QNode>,
    index: FxHashMap<(u32, EnvState), StateId>,
    pub(crate) state_groups: GroupStore,
    pub(crate) q_groups: GroupStore,
    leaf_groups: Vec<Option<GroupId>>,
    /// Depth at which nodes stop being expanded.
    pub(crate) horizon: u32,
    pub(crate) moments: QValueMoments,
    pub(crate) policy: AbstractionPolicy,
    pub(crate) recency_k: u32,
    pub(crate) exploration_c: f64,
    pub(crate) sigma_fallback: f64,
    pub(crate) iterations: u64,
}

impl SearchGraph {
    /// A graph holding only the root. `horizon` is the number of steps the
    /// search looks ahead.
    pub fn new(mdp: &dyn Mdp, root: EnvState, horizon: u32, config: &SearchConfig) -> Self {
        let mut g = Self {
            states: Vec::new(),
            qnodes: Vec::new(),
            index: FxHashMap::default(),
            state_groups: GroupStore::new(GroupKind::State),
            q_groups: GroupStore::new(GroupKind::QPair),
            leaf_groups: Vec::new(),
            horizon,
            moments: QValueMoments::default(),
            policy: config.abstraction.clone(),
            recency_k: config.recency_k.max(1),
            exploration_c: config.exploration_c,
            sigma_fallback: config.sigma_fallback,
            iterations: 0,
        };
        g.add_state(mdp, root, 0);
        g
    }

    pub(crate) fn add_state(&mut self, mdp: &dyn Mdp, state: EnvState, depth: u32) -> StateId {
        let id = StateId(self.states.len() as u32);
        let leaf = state.is_terminal() || depth >= self.horizon;
        let num_children = if leaf { 0 } else { mdp.num_actions(&state) as u32 };
        let first_child = self.qnodes.len() as u32;
        for a in 0..num_children {
            let qid = first_child + a;
            let group = self.q_groups.create(depth, qid, false);
            self.qnodes.push(QNode {
                parent: id,
                action: ActionIndex(a as usize),
                visits: 0,
                total_return: 0.0,
                sum_squares: 0.0,
                group,
                group_pos: 0,
                recency: 0,
                model: None,
            });
        }
        let (group, group_pos) = if leaf {
            if self.leaf_groups.len() <= depth as usize {
                self.leaf_groups.resize(depth as usize + 1, None);
            }
            match self.leaf_groups[depth as usize] {
                Some(g) => (g, self.state_groups.push_member(g, id.0)),
                None => {
                    let g = self.state_groups.create(depth, id.0, true);
                    self.leaf_groups[depth as usize] = Some(g);
                    (g, 0)
                }
            }
        } else {
            (self.state_groups.create(depth, id.0, false), 0)
        };
        let sign = if state.player_to_move() == 0 { 1.0 } else { -1.0 };
        self.index.insert((depth, state.clone()), id);
        self.states.push(StateNode {
            state,
            depth,
            first_child,
            num_children,
            visits: 0,
            child_visits: 0,
            ends: 0,
            total_return: 0.0,
            group,
            group_pos,
            recency: 0,
            parents: Vec::new(),
            leaf,
            sign,
            jset: None,
            updated: false,
        });
        id
    }

    /// Fills the explicit model of `q` on first use.
    pub(crate) fn ensure_model(&mut self, mdp: &dyn Mdp, q: QId) -> Result<(), MdpError> {
        if self.qnodes[q.0 as usize].model.is_some() {
            return Ok(());
        }
        let (parent, action) = {
            let n = &self.qnodes[q.0 as usize];
            (n.parent, n.action)
        };
        let state = &self.states[parent.0 as usize].state;
        let reward = mdp.reward(state, action)?;
        let outcomes = mdp
            .enumerate_transitions(state, action)?
            .into_iter()
            .map(|e| Outcome {
                state: e.successor,
                probability: e.probability,
                node: None,
            })
            .collect();
        self.qnodes[q.0 as usize].model = Some(Box::new(QModel {
            reward,
            outcomes,
            linked: 0,
        }));
        Ok(())
    }

    /// Resolves outcome `idx` of `q` to a node, creating it if the
    /// `(depth, state)` pair is new. Returns the node and whether it is new.
    pub(crate) fn resolve_outcome(&mut self, mdp: &dyn Mdp, q: QId, idx: usize) -> (StateId, bool) {
        let model = self.qnodes[q.0 as usize].model.as_ref().expect("model present");
        if let Some(node) = model.outcomes[idx].node {
            return (node, false);
        }
        let depth = self.states[self.qnodes[q.0 as usize].parent.0 as usize].depth + 1;
        let state = model.outcomes[idx].state.clone();
        let (node, created) = match self.index.get(&(depth, state.clone())) {
            Some(&id) => (id, false),
            None => (self.add_state(mdp, state, depth), true),
        };
        let model = self.qnodes[q.0 as usize].model.as_mut().expect("model present");
        model.outcomes[idx].node = Some(node);
        model.linked += 1;
        self.states[node.0 as usize].parents.push(q);
        (node, created)
    }

    pub fn root(&self) -> StateId {
        ROOT
    }

    pub fn state(&self, id: StateId) -> &StateNode {
        &self.states[id.0 as usize]
    }

    pub fn q(&self, id: QId) -> &QNode {
        &self.qnodes[id.0 as usize]
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_qnodes(&self) -> usize {
        self.qnodes.len()
    }

    pub fn state_ids(&self) -> impl Iterator<Item = StateId> {
        (0..self.states.len() as u32).map(StateId)
    }

    pub fn q_ids(&self) -> impl Iterator<Item = QId> {
        (0..self.qnodes.len() as u32).map(QId)
    }

    pub fn find(&self, depth: u32, state: &EnvState) -> Option<StateId> {
        self.index.get(&(depth, state.clone())).copied()
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    pub fn policy(&self) -> &AbstractionPolicy {
        &self.policy
    }

    pub fn state_groups(&self) -> &GroupStore {
        &self.state_groups
    }

    pub fn q_groups(&self) -> &GroupStore {
        &self.q_groups
    }

    /// Player-perspective reward of a Q node whose model is known.
    pub fn q_reward(&self, q: QId) -> Option<f64> {
        let n = self.q(q);
        let sign = self.state(n.parent).sign;
        n.model.as_ref().map(|m| sign * m.reward)
    }

    /// All children of `s` have been tried at least once.
    pub fn is_state_fully_expanded(&self, s: StateId) -> bool {
        let node = self.state(s);
        !node.leaf && node.children().all(|q| self.q(q).visits > 0)
    }

    pub fn child_stats(&self, s: StateId) -> Vec<ChildStats> {
        self.state(s).children().map(|q| self.q(q).stats()).collect()
    }

    /// Population standard deviation of the ground Q values, if defined.
    pub fn q_value_std(&self) -> Option<f64> {
        self.moments.std()
    }

    /// Standard deviation used for exploration: the ground Q-value spread,
    /// or the fallback when fewer than two values exist or they coincide.
    pub fn sigma(&self) -> f64 {
        self.moments.std().unwrap_or(self.sigma_fallback)
    }

    /// Exploration constant of the tree policy.
    pub fn exploration(&self) -> f64 {
        self.exploration_c * self.sigma()
    }

    /// Exact recount of a group's aggregate statistics from its members.
    pub fn aggregate_stats(&self, kind: GroupKind, id: GroupId) -> (u64, f64) {
        match kind {
            GroupKind::State => self.state_groups.get(id).members.iter().fold((0, 0.0), |acc, &m| {
                let n = &self.states[m as usize];
                (acc.0 + n.visits, acc.1 + n.total_return)
            }),
            GroupKind::QPair => self.q_groups.get(id).members.iter().fold((0, 0.0), |acc, &m| {
                let n = &self.qnodes[m as usize];
                (acc.0 + n.visits, acc.1 + n.total_return)
            }),
        }
    }

    /// State partition as sorted member lists, ordered by first member.
    pub fn state_partition(&self) -> Vec<Vec<u32>> {
        sorted_partition(self.state_groups.iter().map(|(_, g)| g.members.clone()))
    }

    pub fn q_partition(&self) -> Vec<Vec<u32>> {
        sorted_partition(self.q_groups.iter().map(|(_, g)| g.members.clone()))
    }

    /// Checks the structural invariants of the graph and its partitions.
    /// State visits are the children's visits plus the iterations that
    /// ended at the node.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen = FxHashMap::default();
        for (i, s) in self.states.iter().enumerate() {
            if let Some(prev) = seen.insert((s.depth, &s.state), i) {
                return Err(format!("states {prev} and {i} share depth and state"));
            }
            if self.index.get(&(s.depth, s.state.clone())) != Some(&StateId(i as u32)) {
                return Err(format!("index entry of state {i} is stale"));
            }
            let sum: u64 = s.children().map(|q| self.q(q).visits).sum();
            if sum != s.child_visits || s.visits != sum + s.ends {
                return Err(format!("visit bookkeeping broken at state {i}"));
            }
            for q in &s.parents {
                let m = self.q(*q).model.as_ref().ok_or("parent without model")?;
                if !m.outcomes.iter().any(|o| o.node == Some(StateId(i as u32))) {
                    return Err(format!("parent {q} does not link state {i}"));
                }
                if self.state(self.q(*q).parent).depth + 1 != s.depth {
                    return Err(format!("edge into state {i} skips a layer"));
                }
            }
        }
        if let Some(root) = self.states.first() {
            if root.visits != self.iterations {
                return Err(format!("root visits {} != iterations {}", root.visits, self.iterations));
            }
        }
        for q in &self.qnodes {
            if let Some(m) = &q.model {
                let linked = m.outcomes.iter().filter(|o| o.node.is_some()).count();
                if linked != m.linked {
                    return Err("linked counter out of sync".into());
                }
            }
            if !q.total_return.is_finite() {
                return Err("non-finite Q return".into());
            }
        }
        self.check_partition(GroupKind::State)?;
        self.check_partition(GroupKind::QPair)
    }

    fn check_partition(&self, kind: GroupKind) -> Result<(), String> {
        let (store, n) = match kind {
            GroupKind::State => (&self.state_groups, self.states.len()),
            GroupKind::QPair => (&self.q_groups, self.qnodes.len()),
        };
        let mut covered = vec![false; n];
        let indexed: FxHashSet<(u32, GroupId)> = store
            .iter()
            .map(|(_, g)| g.depth)
            .collect::<FxHashSet<_>>()
            .into_iter()
            .flat_map(|d| store.at_depth(d).iter().map(move |&id| (d, id)))
            .collect();
        for (id, g) in store.iter() {
            if g.members.is_empty() {
                return Err(format!("{kind:?} group {id} is empty"));
            }
            if !g.members.contains(&g.representative) {
                return Err(format!("{kind:?} group {id} lost its representative"));
            }
            for (pos, &m) in g.members.iter().enumerate() {
                if std::mem::replace(&mut covered[m as usize], true) {
                    return Err(format!("{kind:?} node {m} in two groups"));
                }
                let (group, group_pos, depth) = match kind {
                    GroupKind::State => {
                        let s = &self.states[m as usize];
                        (s.group, s.group_pos, s.depth)
                    }
                    GroupKind::QPair => {
                        let q = &self.qnodes[m as usize];
                        (q.group, q.group_pos, self.state(q.parent).depth)
                    }
                };
                if group != id || group_pos as usize != pos {
                    return Err(format!("{kind:?} node {m} has a stale group pointer"));
                }
                if depth != g.depth {
                    return Err(format!("{kind:?} group {id} mixes depths"));
                }
            }
            if !indexed.contains(&(g.depth, id)) {
                return Err(format!("{kind:?} group {id} missing from depth index"));
            }
            let (visits, total) = self.aggregate_stats(kind, id);
            let tol = 1e-6 * total.abs().max(1.0);
            if visits != g.aggregate_visits || (total - g.aggregate_return).abs() > tol {
                return Err(format!(
                    "{kind:?} group {id} aggregates ({}, {}) != recount ({visits}, {total})",
                    g.aggregate_visits, g.aggregate_return
                ));
            }
        }
        if let Some(m) = covered.iter().position(|c| !c) {
            return Err(format!("{kind:?} node {m} has no group"));
        }
        Ok(())
    }
}

fn sorted_partition(blocks: impl Iterator<Item = Vec<u32>>) -> Vec<Vec<u32>> {
    let mut out: Vec<Vec<u32>> = blocks
        .map(|mut b| {
            b.sort_unstable();
            b
        })
        .collect();
    out.sort();
    out
}
