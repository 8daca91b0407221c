//! Exact state and state-action pair abstractions of layered models.
//!
//! Layer `d` only depends on the classes of layer `d + 1`, so a single
//! bottom-up pass reaches the fixed point of the alternating construction.
//! Within a layer, nodes are visited in index order and join the largest
//! existing block whose first member matches (ties to the older block),
//! else open a new block. For exact tolerances and full action sets the
//! matching rules are equivalence relations and the result is canonical.

use crate::oracle::layered::LayeredMdp;
use crate::oracle::values::ValueTables;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PartitionKind {
    State,
    QPair,
}

/// Disjoint, covering blocks. State members are `(depth, idx, 0)`; pair
/// members are `(depth, idx, action)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    pub kind: PartitionKind,
    pub blocks: Vec<Vec<(usize, usize, usize)>>,
}

/// Block ids of every node and pair. Terminal nodes of a layer share one
/// block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Abstraction {
    pub state_class: Vec<Vec<usize>>,
    pub q_class: Vec<Vec<Vec<usize>>>,
    pub num_state_blocks: usize,
    pub num_q_blocks: usize,
}

impl Abstraction {
    pub fn same_state_block(&self, depth: usize, a: usize, b: usize) -> bool {
        self.state_class[depth][a] == self.state_class[depth][b]
    }

    pub fn state_partition(&self) -> Partition {
        let mut blocks = vec![Vec::new(); self.num_state_blocks];
        for (d, layer) in self.state_class.iter().enumerate() {
            for (i, &c) in layer.iter().enumerate() {
                blocks[c].push((d, i, 0));
            }
        }
        Partition {
            kind: PartitionKind::State,
            blocks,
        }
    }

    pub fn q_partition(&self) -> Partition {
        let mut blocks = vec![Vec::new(); self.num_q_blocks];
        for (d, layer) in self.q_class.iter().enumerate() {
            for (i, actions) in layer.iter().enumerate() {
                for (a, &c) in actions.iter().enumerate() {
                    blocks[c].push((d, i, a));
                }
            }
        }
        Partition {
            kind: PartitionKind::QPair,
            blocks,
        }
    }
}

/// Pair-rule tolerances and successor pruning.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairRule {
    pub eps_a: f64,
    pub eps_t: f64,
    pub alpha: Option<f64>,
}

impl PairRule {
    pub const EXACT: PairRule = PairRule {
        eps_a: 0.0,
        eps_t: 0.0,
        alpha: None,
    };
}

const SLACK: f64 = 1e-9;

struct Blocks {
    reps: Vec<(usize, usize)>,
    sizes: Vec<usize>,
}

impl Blocks {
    /// Joins the largest block whose representative matches, else opens a
    /// new one. Returns the local block index.
    fn assign(&mut self, item: (usize, usize), matches: impl Fn((usize, usize)) -> bool) -> usize {
        let mut best: Option<usize> = None;
        for (b, &rep) in self.reps.iter().enumerate() {
            if matches(rep) && best.is_none_or(|c| self.sizes[b] > self.sizes[c]) {
                best = Some(b);
            }
        }
        match best {
            Some(b) => {
                self.sizes[b] += 1;
                b
            }
            None => {
                self.reps.push(item);
                self.sizes.push(1);
                self.reps.len() - 1
            }
        }
    }
}

/// Generic construction with a per-node kept-action function `keep`.
pub fn p_asap_fixed_point(
    mdp: &LayeredMdp,
    rule: PairRule,
    keep: impl Fn(usize, usize) -> Vec<usize>,
) -> Abstraction {
    let h = mdp.horizon();
    let mut state_local: Vec<Vec<usize>> = mdp.layers().iter().map(|l| vec![0; l.len()]).collect();
    let mut q_local: Vec<Vec<Vec<usize>>> = mdp
        .layers()
        .iter()
        .map(|l| l.iter().map(|s| vec![0; s.actions.len()]).collect())
        .collect();
    let mut state_blocks_per_layer = vec![0; h + 1];
    let mut q_blocks_per_layer = vec![0; h + 1];

    for d in (0..=h).rev() {
        let layer = mdp.layer(d);
        // Pair classes first: they only read the next layer's state classes.
        if d < h {
            let next = &state_local[d + 1];
            let dist = |i: usize, a: usize| -> Vec<(usize, f64)> {
                let act = &layer[i].actions[a];
                let cutoff = rule
                    .alpha
                    .map_or(f64::NEG_INFINITY, |al| al * act.successors.iter().map(|s| s.1).fold(0.0, f64::max));
                let mut out: Vec<(usize, f64)> = Vec::new();
                for &(j, p) in &act.successors {
                    if p < cutoff {
                        continue;
                    }
                    match out.iter_mut().find(|e| e.0 == next[j]) {
                        Some(e) => e.1 += p,
                        None => out.push((next[j], p)),
                    }
                }
                out.sort_by_key(|e| e.0);
                out
            };
            let equivalent = |(i1, a1): (usize, usize), (i2, a2): (usize, usize)| {
                let r = (layer[i1].actions[a1].reward - layer[i2].actions[a2].reward).abs();
                if r > rule.eps_a + SLACK {
                    return false;
                }
                let (x, y) = (dist(i1, a1), dist(i2, a2));
                let mut f = 0.0;
                for &(c, p) in &x {
                    f += (p - y.iter().find(|e| e.0 == c).map_or(0.0, |e| e.1)).abs();
                }
                for &(c, p) in &y {
                    if !x.iter().any(|e| e.0 == c) {
                        f += p;
                    }
                }
                f <= rule.eps_t + SLACK
            };
            let mut blocks = Blocks {
                reps: Vec::new(),
                sizes: Vec::new(),
            };
            for (i, s) in layer.iter().enumerate() {
                for a in 0..s.actions.len() {
                    q_local[d][i][a] = blocks.assign((i, a), |rep| equivalent((i, a), rep));
                }
            }
            q_blocks_per_layer[d] = blocks.reps.len();
        }

        let qc = &q_local[d];
        let covers = |i1: usize, kept1: &[usize], i2: usize| {
            kept1.iter().all(|&a| qc[i2].contains(&qc[i1][a]))
        };
        let mut blocks = Blocks {
            reps: Vec::new(),
            sizes: Vec::new(),
        };
        let terminal_block = layer.iter().any(|s| s.terminal).then(|| {
            blocks.reps.push((usize::MAX, 0));
            blocks.sizes.push(0);
            0
        });
        let kept: Vec<Vec<usize>> = (0..layer.len())
            .map(|i| if layer[i].terminal { Vec::new() } else { keep(d, i) })
            .collect();
        for (i, s) in layer.iter().enumerate() {
            state_local[d][i] = if s.terminal {
                let b = terminal_block.expect("layer has terminal nodes");
                blocks.sizes[b] += 1;
                b
            } else {
                blocks.assign((i, 0), |(r, _)| {
                    r != usize::MAX && covers(i, &kept[i], r) && covers(r, &kept[r], i)
                })
            };
        }
        state_blocks_per_layer[d] = blocks.reps.len();
    }

    // Global block ids: layers in order, local ids within.
    let offsets = |per: &[usize]| {
        per.iter()
            .scan(0, |acc, &n| {
                let o = *acc;
                *acc += n;
                Some(o)
            })
            .collect::<Vec<_>>()
    };
    let so = offsets(&state_blocks_per_layer);
    let qo = offsets(&q_blocks_per_layer);
    Abstraction {
        state_class: state_local
            .iter()
            .enumerate()
            .map(|(d, l)| l.iter().map(|&c| so[d] + c).collect())
            .collect(),
        q_class: q_local
            .iter()
            .enumerate()
            .map(|(d, l)| l.iter().map(|acts| acts.iter().map(|&c| qo[d] + c).collect()).collect())
            .collect(),
        num_state_blocks: state_blocks_per_layer.iter().sum(),
        num_q_blocks: q_blocks_per_layer.iter().sum(),
    }
}

/// Pair abstraction with the full-action state rule.
pub fn exact_asap_fixed_point(mdp: &LayeredMdp, eps_a: f64, eps_t: f64, alpha: Option<f64>) -> Abstraction {
    let rule = PairRule { eps_a, eps_t, alpha };
    p_asap_fixed_point(mdp, rule, |d, i| (0..mdp.node(d, i).actions.len()).collect())
}

/// The state rule only quantifies over each node's optimal actions.
pub fn exact_ipa_fixed_point(mdp: &LayeredMdp, values: &ValueTables) -> Abstraction {
    p_asap_fixed_point(mdp, PairRule::EXACT, |d, i| values.optimal_actions(d, i))
}

/// Largest difference of optimal values inside one state block, and of
/// optimal Q values inside one pair block.
pub fn value_spread(abs: &Abstraction, values: &ValueTables) -> (f64, f64) {
    let spread = |items: Vec<(usize, f64)>, n: usize| {
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for (c, v) in items {
            lo[c] = lo[c].min(v);
            hi[c] = hi[c].max(v);
        }
        (0..n).map(|c| hi[c] - lo[c]).fold(0.0, f64::max)
    };
    let mut states = Vec::new();
    let mut pairs = Vec::new();
    for (d, layer) in abs.state_class.iter().enumerate() {
        for (i, &c) in layer.iter().enumerate() {
            states.push((c, values.v[d][i]));
            for (a, &qc) in abs.q_class[d][i].iter().enumerate() {
                pairs.push((qc, values.q[d][i][a]));
            }
        }
    }
    (spread(states, abs.num_state_blocks), spread(pairs, abs.num_q_blocks))
}
