//! Explicit layered MDPs: every transition goes from depth `d` to depth
//! `d + 1`, and the last layer is terminal.
//!
//! Text format, one directive per line (`#` starts a comment):
//!
//! ```text
//! layer 0
//! state root
//! edge root 0 a:0.5 b:0.5 r=1
//! layer 1
//! state a terminal
//! state b terminal
//! ```
//!
//! `edge <state> <action> <succ>:<prob>... r=<reward>` lists the actions of a
//! state in order; successors name states of the next layer.

use std::fmt::Write as _;

use rustc_hash::FxHashMap;

use crate::mdp::{check_action, ActionIndex, EnvState, Mdp, MdpDescriptor, MdpError, TransitionEntry, PROB_TOLERANCE};
use crate::oracle::OracleError;
use crate::search::graph::{SearchGraph, StateId};

#[derive(Clone, Debug, PartialEq)]
pub struct LayeredAction {
    pub reward: f64,
    /// `(index in the next layer, probability)`, deduplicated.
    pub successors: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayeredState {
    pub label: String,
    pub terminal: bool,
    pub actions: Vec<LayeredAction>,
}

#[derive(Clone, Debug)]
pub struct LayeredMdp {
    layers: Vec<Vec<LayeredState>>,
    /// Ground state of every node; self-encodings for native models.
    ground: Vec<Vec<EnvState>>,
    index: FxHashMap<(u32, EnvState), usize>,
    descriptor: MdpDescriptor,
}

/// Encoding of node `(depth, idx)` of a native layered model.
fn encode(depth: usize, idx: usize, terminal: bool) -> EnvState {
    let mut bytes = [0u8; 8];
    bytes[..4].copy_from_slice(&(depth as u32).to_le_bytes());
    bytes[4..].copy_from_slice(&(idx as u32).to_le_bytes());
    EnvState::new(&bytes, 0, terminal)
}

impl LayeredMdp {
    /// Validates the layers and builds a model whose ground states are the
    /// node encodings themselves.
    pub fn new(name: &str, layers: Vec<Vec<LayeredState>>) -> Result<Self, OracleError> {
        let ground = layers
            .iter()
            .enumerate()
            .map(|(d, layer)| {
                layer.iter().enumerate().map(|(i, s)| encode(d, i, s.terminal)).collect()
            })
            .collect();
        Self::with_ground(name, layers, ground)
    }

    fn with_ground(
        name: &str,
        layers: Vec<Vec<LayeredState>>,
        ground: Vec<Vec<EnvState>>,
    ) -> Result<Self, OracleError> {
        let invalid = |m: String| Err(OracleError::InvalidModel(m));
        if layers.is_empty() || layers[0].is_empty() {
            return invalid("the first layer must hold the initial state".into());
        }
        let last = layers.len() - 1;
        for (d, layer) in layers.iter().enumerate() {
            for (i, s) in layer.iter().enumerate() {
                if s.terminal != s.actions.is_empty() {
                    return invalid(format!("state {} at layer {d}: terminal iff no actions", s.label));
                }
                if d == last && !s.terminal {
                    return invalid(format!("state {} in the last layer is not terminal", s.label));
                }
                for (a, act) in s.actions.iter().enumerate() {
                    if !act.reward.is_finite() {
                        return invalid(format!("non-finite reward at ({d}, {i}, {a})"));
                    }
                    let mut sum = 0.0;
                    for (k, &(succ, p)) in act.successors.iter().enumerate() {
                        if succ >= layers[d + 1].len() || !(p > 0.0 && p <= 1.0 + PROB_TOLERANCE) {
                            return invalid(format!("bad successor at ({d}, {}, {a})", s.label));
                        }
                        if act.successors[..k].iter().any(|&(o, _)| o == succ) {
                            return invalid(format!("duplicate successor at ({d}, {}, {a})", s.label));
                        }
                        sum += p;
                    }
                    if (sum - 1.0).abs() > PROB_TOLERANCE {
                        return invalid(format!("probabilities at ({d}, {}, {a}) sum to {sum}", s.label));
                    }
                }
            }
        }
        let mut index = FxHashMap::default();
        for (d, layer) in ground.iter().enumerate() {
            for (i, g) in layer.iter().enumerate() {
                index.insert((d as u32, g.clone()), i);
            }
        }
        Ok(Self {
            descriptor: MdpDescriptor::single_player(name, last.max(1) as u32),
            layers,
            ground,
            index,
        })
    }

    /// Number of transition steps, i.e. the index of the last layer.
    pub fn horizon(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn layers(&self) -> &[Vec<LayeredState>] {
        &self.layers
    }

    pub fn layer(&self, depth: usize) -> &[LayeredState] {
        &self.layers[depth]
    }

    pub fn node(&self, depth: usize, idx: usize) -> &LayeredState {
        &self.layers[depth][idx]
    }

    pub fn num_states(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub fn ground(&self, depth: usize, idx: usize) -> &EnvState {
        &self.ground[depth][idx]
    }

    /// Index of the node holding `state` at `depth`.
    pub fn locate(&self, depth: usize, state: &EnvState) -> Option<usize> {
        self.index.get(&(depth as u32, state.clone())).copied()
    }

    /// Finds a node by label.
    pub fn find_label(&self, depth: usize, label: &str) -> Option<usize> {
        self.layers.get(depth)?.iter().position(|s| s.label == label)
    }

    fn decode(&self, state: &EnvState) -> (usize, usize) {
        let b = state.payload();
        assert_eq!(b.len(), 8, "not a layered-model state");
        let d = u32::from_le_bytes(b[..4].try_into().unwrap()) as usize;
        let i = u32::from_le_bytes(b[4..].try_into().unwrap()) as usize;
        (d, i)
    }

    /// Parses the line-oriented text format.
    pub fn parse(name: &str, text: &str) -> Result<Self, OracleError> {
        struct RawEdge {
            line: usize,
            action: usize,
            succ: Vec<(String, f64)>,
            reward: f64,
        }
        let err = |line: usize, msg: &str| OracleError::Parse { line, msg: msg.to_string() };
        let mut layers: Vec<Vec<(String, bool, Vec<RawEdge>)>> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let mut words = content.split_whitespace();
            match words.next() {
                Some("layer") => {
                    let d: usize = words
                        .next()
                        .and_then(|w| w.parse().ok())
                        .ok_or_else(|| err(line, "expected a layer number"))?;
                    if d != layers.len() {
                        return Err(err(line, "layers must be numbered 0, 1, 2, ... in order"));
                    }
                    layers.push(Vec::new());
                }
                Some("state") => {
                    let layer = layers.last_mut().ok_or_else(|| err(line, "state before any layer"))?;
                    let label = words.next().ok_or_else(|| err(line, "expected a state id"))?;
                    let terminal = match words.next() {
                        None => false,
                        Some("terminal") => true,
                        Some(_) => return Err(err(line, "expected `terminal` or end of line")),
                    };
                    if layer.iter().any(|(l, _, _)| l == label) {
                        return Err(err(line, "duplicate state id in layer"));
                    }
                    layer.push((label.to_string(), terminal, Vec::new()));
                }
                Some("edge") => {
                    let layer = layers.last_mut().ok_or_else(|| err(line, "edge before any layer"))?;
                    let label = words.next().ok_or_else(|| err(line, "expected a state id"))?;
                    let action: usize = words
                        .next()
                        .and_then(|w| w.parse().ok())
                        .ok_or_else(|| err(line, "expected an action index"))?;
                    let mut succ = Vec::new();
                    let mut reward = None;
                    for w in words {
                        if let Some(r) = w.strip_prefix("r=") {
                            reward = Some(r.parse::<f64>().map_err(|_| err(line, "bad reward"))?);
                        } else {
                            let (s, p) = w.split_once(':').ok_or_else(|| err(line, "expected <succ>:<prob>"))?;
                            let p: f64 = p.parse().map_err(|_| err(line, "bad probability"))?;
                            succ.push((s.to_string(), p));
                        }
                    }
                    let reward = reward.ok_or_else(|| err(line, "missing r=<reward>"))?;
                    if succ.is_empty() {
                        return Err(err(line, "edge without successors"));
                    }
                    let state = layer
                        .iter_mut()
                        .find(|(l, _, _)| l == label)
                        .ok_or_else(|| err(line, "edge names an undeclared state"))?;
                    if action != state.2.len() {
                        return Err(err(line, "actions must be listed in order 0, 1, 2, ..."));
                    }
                    state.2.push(RawEdge { line, action, succ, reward });
                }
                Some(_) => return Err(err(line, "unknown directive")),
                None => unreachable!(),
            }
        }
        let mut out = Vec::with_capacity(layers.len());
        for d in 0..layers.len() {
            let mut layer = Vec::new();
            for (label, terminal, edges) in &layers[d] {
                let mut actions = Vec::new();
                for e in edges {
                    let next = layers.get(d + 1).ok_or_else(|| err(e.line, "edge out of the last layer"))?;
                    let mut successors = Vec::new();
                    for (s, p) in &e.succ {
                        let idx = next
                            .iter()
                            .position(|(l, _, _)| l == s)
                            .ok_or_else(|| err(e.line, &format!("unknown successor `{s}`")))?;
                        successors.push((idx, *p));
                    }
                    debug_assert_eq!(e.action, actions.len());
                    actions.push(LayeredAction { reward: e.reward, successors });
                }
                layer.push(LayeredState {
                    label: label.clone(),
                    terminal: *terminal,
                    actions,
                });
            }
            out.push(layer);
        }
        Self::new(name, out)
    }

    /// Writes the text format; `parse(to_text())` reproduces the model.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (d, layer) in self.layers.iter().enumerate() {
            writeln!(out, "layer {d}").unwrap();
            for s in layer {
                if s.terminal {
                    writeln!(out, "state {} terminal", s.label).unwrap();
                } else {
                    writeln!(out, "state {}", s.label).unwrap();
                }
            }
            for s in layer {
                for (a, act) in s.actions.iter().enumerate() {
                    write!(out, "edge {} {a}", s.label).unwrap();
                    for &(succ, p) in &act.successors {
                        write!(out, " {}:{p}", self.layers[d + 1][succ].label).unwrap();
                    }
                    writeln!(out, " r={}", act.reward).unwrap();
                }
            }
        }
        out
    }

    /// Unrolls `mdp` from `root` for `horizon` steps. Nodes of the last
    /// layer become terminal. Fails once more than `max_states` nodes exist.
    pub fn unroll(mdp: &dyn Mdp, root: &EnvState, horizon: usize, max_states: usize) -> Result<Self, OracleError> {
        let mut layers: Vec<Vec<LayeredState>> = Vec::new();
        let mut ground: Vec<Vec<EnvState>> = vec![vec![root.clone()]];
        let mut total = 1;
        for d in 0..=horizon {
            let mut next_ground: Vec<EnvState> = Vec::new();
            let mut next_index: FxHashMap<EnvState, usize> = FxHashMap::default();
            let mut layer = Vec::with_capacity(ground[d].len());
            for (i, state) in ground[d].iter().enumerate() {
                let terminal = d == horizon || state.is_terminal();
                let mut actions = Vec::new();
                if !terminal {
                    for a in 0..mdp.num_actions(state) {
                        let action = ActionIndex(a);
                        let reward = mdp.reward(state, action)?;
                        let mut successors = Vec::new();
                        for e in mdp.enumerate_transitions(state, action)? {
                            let idx = *next_index.entry(e.successor.clone()).or_insert_with(|| {
                                next_ground.push(e.successor.clone());
                                next_ground.len() - 1
                            });
                            successors.push((idx, e.probability));
                        }
                        actions.push(LayeredAction { reward, successors });
                    }
                }
                layer.push(LayeredState {
                    label: format!("{d}:{i}"),
                    terminal,
                    actions,
                });
            }
            layers.push(layer);
            if d < horizon {
                total += next_ground.len();
                if total > max_states {
                    return Err(OracleError::TooLarge(max_states));
                }
                ground.push(next_ground);
            }
        }
        Self::with_ground(&mdp.descriptor().domain_name, layers, ground)
    }

    /// Exports the explored part of a search graph. Every non-leaf state
    /// node must have fully expanded Q nodes.
    pub fn from_search_graph(graph: &SearchGraph, name: &str) -> Result<Self, OracleError> {
        let depth = graph.state_ids().map(|s| graph.state(s).depth() as usize).max().unwrap_or(0);
        let mut pos: Vec<(usize, usize)> = vec![(0, 0); graph.num_states()];
        let mut by_layer: Vec<Vec<StateId>> = vec![Vec::new(); depth + 1];
        for s in graph.state_ids() {
            let d = graph.state(s).depth() as usize;
            pos[s.0 as usize] = (d, by_layer[d].len());
            by_layer[d].push(s);
        }
        let mut layers = Vec::with_capacity(depth + 1);
        let mut ground = Vec::with_capacity(depth + 1);
        for (d, ids) in by_layer.iter().enumerate() {
            let mut layer = Vec::with_capacity(ids.len());
            for &s in ids {
                let node = graph.state(s);
                let mut actions = Vec::new();
                for q in node.children() {
                    let qn = graph.q(q);
                    if !qn.is_fully_expanded() {
                        return Err(OracleError::Incomplete(format!("{q} is not fully expanded")));
                    }
                    let model = qn.model().expect("fully expanded");
                    actions.push(LayeredAction {
                        reward: model.reward,
                        successors: model
                            .outcomes
                            .iter()
                            .map(|o| (pos[o.node.expect("linked").0 as usize].1, o.probability))
                            .collect(),
                    });
                }
                let terminal = actions.is_empty();
                if d == depth && !terminal {
                    return Err(OracleError::Incomplete(format!("{s} has children below the last layer")));
                }
                layer.push(LayeredState {
                    label: s.to_string(),
                    terminal,
                    actions,
                });
            }
            layers.push(layer);
            ground.push(ids.iter().map(|&s| graph.state(s).state().clone()).collect());
        }
        Self::with_ground(name, layers, ground)
    }
}

impl Mdp for LayeredMdp {
    fn descriptor(&self) -> &MdpDescriptor {
        &self.descriptor
    }

    fn initial_state(&self) -> EnvState {
        self.ground[0][0].clone()
    }

    fn num_actions(&self, state: &EnvState) -> usize {
        let (d, i) = self.decode(state);
        self.layers[d][i].actions.len()
    }

    fn reward(&self, state: &EnvState, action: ActionIndex) -> Result<f64, MdpError> {
        check_action(self, state, action)?;
        let (d, i) = self.decode(state);
        Ok(self.layers[d][i].actions[action.0].reward)
    }

    fn enumerate_transitions(&self, state: &EnvState, action: ActionIndex) -> Result<Vec<TransitionEntry>, MdpError> {
        check_action(self, state, action)?;
        let (d, i) = self.decode(state);
        Ok(self.layers[d][i].actions[action.0]
            .successors
            .iter()
            .map(|&(s, p)| TransitionEntry::new(self.ground[d + 1][s].clone(), p))
            .collect())
    }
}

/// Helper for building models in code: `(successors, reward)` per action.
pub fn state(label: &str, actions: Vec<(Vec<(usize, f64)>, f64)>) -> LayeredState {
    LayeredState {
        label: label.to_string(),
        terminal: actions.is_empty(),
        actions: actions
            .into_iter()
            .map(|(successors, reward)| LayeredAction { reward, successors })
            .collect(),
    }
}

/// Five-state model in which pair abstraction alone cannot match the two
/// middle states, while grouping on optimal actions can: `a` has a second,
/// worse action that `b` lacks.
///
/// Layer 0: `r` with two zero-reward moves to `a` and `b`. Layer 1: `a`
/// with actions to `c` (reward 1) and `d` (reward 0); `b` with one action
/// to `c` (reward 1). Layer 2: `c`, `d` terminal.
pub fn two_branch_example() -> LayeredMdp {
    LayeredMdp::new(
        "two_branch",
        vec![
            vec![state("r", vec![(vec![(0, 1.0)], 0.0), (vec![(1, 1.0)], 0.0)])],
            vec![
                state("a", vec![(vec![(0, 1.0)], 1.0), (vec![(1, 1.0)], 0.0)]),
                state("b", vec![(vec![(0, 1.0)], 1.0)]),
            ],
            vec![state("c", vec![]), state("d", vec![])],
        ],
    )
    .expect("valid model")
}

/// Fixed 20-state layered model used to audit the soundness of online
/// abstractions. Several same-layer pairs share their optimal continuation
/// while differing in suboptimal actions, optimal actions lead by at least
/// one reward unit, and some transitions are stochastic.
pub const SOUNDNESS_FIXTURE: &str = "\
layer 0
state r
edge r 0 b0:1 r=0
edge r 1 b1:1 r=0
edge r 2 b1:0.5 b2:0.5 r=0
layer 1
state b0
state b1
state b2
edge b0 0 c0:1 r=0
edge b0 1 c2:1 r=-1
edge b1 0 c1:1 r=0
edge b1 1 c5:1 r=-1
edge b2 0 c3:0.5 c4:0.5 r=0
edge b2 1 c2:1 r=-2
layer 2
state c0
state c1
state c2
state c3
state c4
state c5
edge c0 0 d0:0.5 d1:0.5 r=0
edge c0 1 d2:1 r=0
edge c1 0 d1:1 r=0
edge c1 1 d3:1 r=0
edge c2 0 d4:0.7 d5:0.3 r=1
edge c2 1 d2:1 r=0
edge c3 0 d2:0.5 d3:0.5 r=0
edge c3 1 d4:1 r=0
edge c3 2 d0:1 r=-2
edge c4 0 d5:1 r=0
edge c4 1 d3:1 r=0
edge c5 0 d0:0.4 d4:0.6 r=0
edge c5 1 d1:1 r=-2
layer 3
state d0
state d1
state d2
state d3
state d4
state d5
edge d0 0 t0:1 r=4
edge d0 1 t1:1 r=0
edge d1 0 t1:1 r=4
edge d1 1 t2:1 r=1
edge d2 0 t0:1 r=2
edge d2 1 t3:1 r=0
edge d3 0 t2:1 r=2
edge d3 1 t1:1 r=0
edge d4 0 t3:1 r=1
edge d4 1 t0:1 r=3
edge d5 0 t2:1 r=3
edge d5 1 t1:1 r=-1
layer 4
state t0 terminal
state t1 terminal
state t2 terminal
state t3 terminal
";

pub fn soundness_fixture() -> LayeredMdp {
    LayeredMdp::parse("soundness_fixture", SOUNDNESS_FIXTURE).expect("fixture parses")
}
