#![allow(dead_code)]

use mcts_lab::mdp::{check_action, MdpDescriptor};
use mcts_lab::oracle::layered::state;
use mcts_lab::oracle::{LayeredMdp, LayeredState};
use mcts_lab::{ActionIndex, EnvState, Mdp, MdpError, TransitionEntry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random layered model with small integer rewards, so that coincident
/// values and groupings are common. Only the last layer is terminal.
pub fn random_layered(seed: u64) -> LayeredMdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = rng.gen_range(2..=4);
    let mut sizes = vec![1];
    sizes.extend((0..depth).map(|_| rng.gen_range(1..=4)));
    let mut layers: Vec<Vec<LayeredState>> = Vec::new();
    for d in 0..=depth {
        let mut layer = Vec::new();
        for i in 0..sizes[d] {
            let label = format!("{d}:{i}");
            if d == depth {
                layer.push(state(&label, vec![]));
                continue;
            }
            let next = sizes[d + 1];
            let actions = (0..rng.gen_range(1..=3))
                .map(|_| {
                    let a = rng.gen_range(0..next);
                    let successors = if next > 1 && rng.gen_bool(0.3) {
                        let b = (a + rng.gen_range(1..next)) % next;
                        let p = [0.5, 0.25, 0.75][rng.gen_range(0..3)];
                        vec![(a, p), (b, 1.0 - p)]
                    } else {
                        vec![(a, 1.0)]
                    };
                    (successors, rng.gen_range(-2..=2) as f64)
                })
                .collect();
            layer.push(state(&label, actions));
        }
        layers.push(layer);
    }
    LayeredMdp::new(&format!("random_{seed}"), layers).expect("generated model is valid")
}

/// Same model with every reward multiplied by `factor`.
pub fn scaled(model: &LayeredMdp, factor: f64) -> LayeredMdp {
    let mut layers = model.layers().to_vec();
    for layer in &mut layers {
        for s in layer {
            for a in &mut s.actions {
                a.reward *= factor;
            }
        }
    }
    LayeredMdp::new("scaled", layers).expect("scaling keeps the model valid")
}

/// 2x2 grid with deterministic `right` and `down` moves that stop at the
/// border; every move costs one unit. Different move orders reach the same
/// cell.
pub struct Grid2 {
    desc: MdpDescriptor,
}

impl Grid2 {
    pub fn new(horizon: u32) -> Self {
        Self {
            desc: MdpDescriptor::single_player("grid2", horizon),
        }
    }
}

impl Mdp for Grid2 {
    fn descriptor(&self) -> &MdpDescriptor {
        &self.desc
    }

    fn initial_state(&self) -> EnvState {
        EnvState::new(&[0, 0], 0, false)
    }

    fn num_actions(&self, _state: &EnvState) -> usize {
        2
    }

    fn reward(&self, state: &EnvState, action: ActionIndex) -> Result<f64, MdpError> {
        check_action(self, state, action)?;
        Ok(-1.0)
    }

    fn enumerate_transitions(&self, state: &EnvState, action: ActionIndex) -> Result<Vec<TransitionEntry>, MdpError> {
        check_action(self, state, action)?;
        let mut cell = [state.payload()[0], state.payload()[1]];
        cell[action.0] = 1;
        Ok(vec![TransitionEntry::new(EnvState::new(&cell, 0, false), 1.0)])
    }
}

/// Abstraction policy of every variant, picked by `choice`.
pub fn policy_for(choice: u8, knob: u8) -> mcts_lab::abstraction::AbstractionPolicy {
    use mcts_lab::abstraction::AbstractionPolicy;
    let k = knob as usize;
    match choice % 6 {
        0 => AbstractionPolicy::none(),
        1 => {
            let p = AbstractionPolicy::oga().with_eps([0.0, 0.5][k % 2], [0.0, 0.2][k / 2 % 2]);
            if k % 3 == 0 {
                p.with_alpha(0.2)
            } else {
                p
            }
        }
        2 => AbstractionPolicy::ipa([0.0, 0.5, 1.0, f64::INFINITY][k % 4]),
        3 => AbstractionPolicy::rstate([0.0, 0.5, 1.0][k % 3]),
        4 => AbstractionPolicy::conf([0.5, 0.9, 0.99][k % 3]),
        _ => AbstractionPolicy::topn(1 + k % 3, [0, 10, 100][k / 3 % 3]),
    }
}

/// Runs a seeded search on `mdp` and checks the graph invariants every 100
/// iterations up to 2000 and every 500 after that (a full check walks every
/// stored successor, millions on the noisy domains), plus the normalization
/// of every explicit successor model and the non-emptiness of every stored
/// kept-action set.
pub fn checked_trace(
    mdp: &dyn Mdp,
    policy: mcts_lab::abstraction::AbstractionPolicy,
    seed: u64,
    iterations: u64,
) -> Result<mcts_lab::search::graph::SearchGraph, String> {
    use mcts_lab::mdp::PROB_TOLERANCE;
    use mcts_lab::search::graph::SearchGraph;
    use mcts_lab::search::SearchConfig;

    let config = SearchConfig::new(iterations, policy);
    let root = mdp.initial_state();
    let mut g = SearchGraph::new(mdp, root, config.lookahead(mdp.descriptor().horizon), &config);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 1..=iterations {
        g.run_iteration(mdp, &mut rng).map_err(|e| e.to_string())?;
        if i % if i <= 2000 { 100 } else { 500 } == 0 || i == iterations {
            g.check_invariants()?;
        }
    }
    for q in g.q_ids() {
        let Some(model) = g.q(q).model() else { continue };
        let total: f64 = model.outcomes.iter().map(|o| o.probability).sum();
        if (total - 1.0).abs() > PROB_TOLERANCE || model.outcomes.iter().any(|o| o.probability <= 0.0) {
            return Err(format!("successor model of {q} sums to {total}"));
        }
        let mut seen = std::collections::HashSet::new();
        if !model.outcomes.iter().all(|o| seen.insert(&o.state)) {
            return Err(format!("duplicate successor in model of {q}"));
        }
    }
    for s in g.state_ids() {
        let node = g.state(s);
        if !node.is_leaf() && node.num_children() != mdp.legal_actions(node.state()).len() {
            return Err(format!("state {s} has the wrong number of children"));
        }
        if let Some(j) = node.jset() {
            if j.kept.is_empty() || j.kept.iter().any(|a| a.0 >= node.num_children()) {
                return Err(format!("bad kept-action set at {s}"));
            }
        }
    }
    Ok(g)
}

/// Runs two searches with the same seed side by side and compares both
/// partitions after every iteration.
pub fn lockstep(
    mdp: &dyn Mdp,
    a: mcts_lab::abstraction::AbstractionPolicy,
    b: mcts_lab::abstraction::AbstractionPolicy,
    seed: u64,
    iterations: u64,
) -> Result<(), String> {
    use mcts_lab::search::graph::SearchGraph;
    use mcts_lab::search::SearchConfig;

    let (ca, cb) = (SearchConfig::new(iterations, a), SearchConfig::new(iterations, b));
    let horizon = ca.lookahead(mdp.descriptor().horizon);
    let mut ga = SearchGraph::new(mdp, mdp.initial_state(), horizon, &ca);
    let mut gb = SearchGraph::new(mdp, mdp.initial_state(), horizon, &cb);
    let (mut ra, mut rb) = (ChaCha8Rng::seed_from_u64(seed), ChaCha8Rng::seed_from_u64(seed));
    for i in 0..iterations {
        ga.run_iteration(mdp, &mut ra).map_err(|e| e.to_string())?;
        gb.run_iteration(mdp, &mut rb).map_err(|e| e.to_string())?;
        if ga.state_partition() != gb.state_partition() || ga.q_partition() != gb.q_partition() {
            return Err(format!("partitions differ after iteration {}", i + 1));
        }
    }
    if ga.decide().ok() != gb.decide().ok() {
        return Err("decisions differ".into());
    }
    Ok(())
}

/// Shipped domain with default parameters; the generic grid uses the
/// reference layout.
pub fn preset(name: &str) -> std::sync::Arc<dyn Mdp> {
    use mcts_lab::domains::{build_domain, Navigation, NavigationSpec};
    if name == "navigation" {
        return std::sync::Arc::new(Navigation::new(NavigationSpec::fig2()).expect("valid layout"));
    }
    build_domain(name, &toml::Table::new()).expect("defaults are valid")
}

/// The reference Navigation layout unrolled to its full horizon of 50.
pub fn nav_unrolled() -> (mcts_lab::domains::Navigation, LayeredMdp) {
    let nav = mcts_lab::domains::Navigation::fig2();
    let m = LayeredMdp::unroll(&nav, &nav.initial_state(), 50, 10_000).expect("navigation unrolls");
    (nav, m)
}

/// Layers holding both cells, with their node indices.
pub fn co_occurrences(nav: &mcts_lab::domains::Navigation, m: &LayeredMdp, a: u32, b: u32) -> Vec<(usize, usize, usize)> {
    (0..=m.horizon())
        .filter_map(|d| {
            let ia = m.locate(d, &nav.state_at(a))?;
            let ib = m.locate(d, &nav.state_at(b))?;
            Some((d, ia, ib))
        })
        .collect()
}

/// Value of the detour around the left (or right) side of the wall, which
/// goes sideways from the start, climbs the outer column and cuts back in
/// at the top.
pub fn detour_value(nav: &mcts_lab::domains::Navigation, m: &LayeredMdp, left: bool) -> f64 {
    use mcts_lab::domains::navigation::{DOWN, LEFT, RIGHT, UP};
    let policy = |d: usize, i: usize| {
        let side = if left { LEFT } else { RIGHT };
        match (nav.cell_of(m.ground(d, i)), left) {
            (3, _) => side.0,
            (2, true) | (4, false) => UP.0,
            (7, true) | (9, false) => UP.0,
            (12, true) => RIGHT.0,
            (14, false) => LEFT.0,
            (13, _) => UP.0,
            _ => DOWN.0,
        }
    };
    mcts_lab::oracle::evaluate_policy(m, policy).value(0, 0)
}
