//! Frequency of value-equivalent state pairs within a layer.
//!
//! A sample draws a non-final layer uniformly, then two nodes of that layer
//! independently and uniformly. Both take `i` uniformly random actions with
//! sampled successors (terminal nodes stay put). `V_abs(i)` counts pairs
//! whose endpoints share the optimal value; `Q_abs(i)` draws one more random
//! action at each endpoint and compares the optimal Q values of those
//! actions, a terminal endpoint contributing value 0.

use rand::{Rng, RngCore};

use crate::mdp::sample_index;
use crate::oracle::layered::LayeredMdp;
use crate::oracle::values::{ValueTables, VALUE_TOLERANCE};

#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceRatios {
    pub steps: usize,
    pub v_abs: f64,
    pub q_abs: f64,
}

fn walk(mdp: &LayeredMdp, mut d: usize, mut i: usize, steps: usize, rng: &mut dyn RngCore) -> (usize, usize) {
    for _ in 0..steps {
        let node = mdp.node(d, i);
        if node.terminal {
            break;
        }
        let act = &node.actions[rng.gen_range(0..node.actions.len())];
        i = act.successors[sample_index(act.successors.iter().map(|s| s.1), rng)].0;
        d += 1;
    }
    (d, i)
}

fn random_q(mdp: &LayeredMdp, values: &ValueTables, d: usize, i: usize, rng: &mut dyn RngCore) -> f64 {
    let node = mdp.node(d, i);
    if node.terminal {
        return 0.0;
    }
    values.q[d][i][rng.gen_range(0..node.actions.len())]
}

/// Ratios for every step count in `steps`, each from `samples` pairs.
pub fn value_equivalence_ratios(
    mdp: &LayeredMdp,
    values: &ValueTables,
    samples: usize,
    steps: &[usize],
    rng: &mut dyn RngCore,
) -> Vec<EquivalenceRatios> {
    let h = mdp.horizon().max(1);
    steps
        .iter()
        .map(|&k| {
            let (mut v_eq, mut q_eq) = (0usize, 0usize);
            for _ in 0..samples {
                let d = rng.gen_range(0..h).min(mdp.horizon());
                let n = mdp.layer(d).len();
                let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
                let (da, ia) = walk(mdp, d, a, k, rng);
                let (db, ib) = walk(mdp, d, b, k, rng);
                if (values.v[da][ia] - values.v[db][ib]).abs() <= VALUE_TOLERANCE {
                    v_eq += 1;
                }
                let (qa, qb) = (random_q(mdp, values, da, ia, rng), random_q(mdp, values, db, ib, rng));
                if (qa - qb).abs() <= VALUE_TOLERANCE {
                    q_eq += 1;
                }
            }
            EquivalenceRatios {
                steps: k,
                v_abs: v_eq as f64 / samples as f64,
                q_abs: q_eq as f64 / samples as f64,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::layered::state;
    use crate::oracle::values::value_iteration;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_state_layers_always_match() {
        let m = LayeredMdp::new(
            "one",
            vec![
                vec![state("a", vec![(vec![(0, 1.0)], -1.0)])],
                vec![state("b", vec![(vec![(0, 1.0)], -1.0)])],
                vec![state("t", vec![])],
            ],
        )
        .unwrap();
        let vt = value_iteration(&m);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for r in value_equivalence_ratios(&m, &vt, 1000, &[0, 1, 2], &mut rng) {
            assert_eq!((r.v_abs, r.q_abs), (1.0, 1.0));
        }
    }

    #[test]
    fn distinct_values_match_only_on_identical_draws() {
        // One wide layer of four states with pairwise distinct values.
        let m = LayeredMdp::new(
            "fan",
            vec![vec![
                state("a", vec![(vec![(0, 1.0)], 1.0)]),
                state("b", vec![(vec![(0, 1.0)], 2.0)]),
                state("c", vec![(vec![(0, 1.0)], 3.0)]),
                state("d", vec![(vec![(0, 1.0)], 4.0)]),
            ], vec![state("t", vec![])]],
        )
        .unwrap();
        let vt = value_iteration(&m);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let r = &value_equivalence_ratios(&m, &vt, 200_000, &[0], &mut rng)[0];
        let se = (0.25f64 * 0.75 / 200_000.0).sqrt();
        assert!((r.v_abs - 0.25).abs() < 4.0 * se, "{}", r.v_abs);
    }
}
