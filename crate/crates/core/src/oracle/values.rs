//! Backward induction on layered models.

use crate::oracle::layered::LayeredMdp;

/// Absolute tolerance for comparing exact values.
pub const VALUE_TOLERANCE: f64 = 1e-9;

/// Optimal values indexed by `[depth][state]` and `[depth][state][action]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTables {
    pub v: Vec<Vec<f64>>,
    pub q: Vec<Vec<Vec<f64>>>,
}

impl ValueTables {
    pub fn value(&self, depth: usize, idx: usize) -> f64 {
        self.v[depth][idx]
    }

    pub fn q_value(&self, depth: usize, idx: usize, action: usize) -> f64 {
        self.q[depth][idx][action]
    }

    /// Actions whose Q value is within tolerance of the maximum.
    pub fn optimal_actions(&self, depth: usize, idx: usize) -> Vec<usize> {
        let qs = &self.q[depth][idx];
        let best = qs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (0..qs.len()).filter(|&a| qs[a] >= best - VALUE_TOLERANCE).collect()
    }
}

fn backward(mdp: &LayeredMdp, mut choose: impl FnMut(usize, usize, &[f64]) -> f64) -> ValueTables {
    let h = mdp.horizon();
    let mut v: Vec<Vec<f64>> = mdp.layers().iter().map(|l| vec![0.0; l.len()]).collect();
    let mut q: Vec<Vec<Vec<f64>>> = mdp.layers().iter().map(|l| vec![Vec::new(); l.len()]).collect();
    for d in (0..h).rev() {
        for (i, s) in mdp.layer(d).iter().enumerate() {
            if s.terminal {
                continue;
            }
            let qs: Vec<f64> = s
                .actions
                .iter()
                .map(|act| act.reward + act.successors.iter().map(|&(j, p)| p * v[d + 1][j]).sum::<f64>())
                .collect();
            v[d][i] = choose(d, i, &qs);
            q[d][i] = qs;
        }
    }
    ValueTables { v, q }
}

/// Exact finite-horizon optimal values with no discounting. Terminal nodes
/// have value 0.
pub fn value_iteration(mdp: &LayeredMdp) -> ValueTables {
    backward(mdp, |_, _, qs| qs.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Values of a deterministic policy. `q` still holds the optimal-style
/// one-step lookahead on the policy's values.
pub fn evaluate_policy(mdp: &LayeredMdp, policy: impl Fn(usize, usize) -> usize) -> ValueTables {
    backward(mdp, |d, i, qs| qs[policy(d, i)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::layered::state;

    #[test]
    fn chain_of_three_costs() {
        let m = LayeredMdp::new(
            "chain",
            vec![
                vec![state("a", vec![(vec![(0, 1.0)], -1.0)])],
                vec![state("b", vec![(vec![(0, 1.0)], -1.0)])],
                vec![state("c", vec![(vec![(0, 1.0)], -1.0)])],
                vec![state("t", vec![])],
            ],
        )
        .unwrap();
        let vt = value_iteration(&m);
        assert_eq!(vt.value(0, 0), -3.0);
        assert_eq!(vt.value(3, 0), 0.0);
    }

    #[test]
    fn all_terminal_layer_is_zero() {
        let m = LayeredMdp::new("t", vec![vec![state("t", vec![])]]).unwrap();
        assert_eq!(value_iteration(&m).v, vec![vec![0.0]]);
    }

    #[test]
    fn expectation_and_max() {
        let m = LayeredMdp::new(
            "mix",
            vec![
                vec![state("r", vec![(vec![(0, 0.25), (1, 0.75)], 1.0), (vec![(1, 1.0)], 0.5)])],
                vec![state("x", vec![(vec![(0, 1.0)], 4.0)]), state("y", vec![(vec![(0, 1.0)], 0.0)])],
                vec![state("t", vec![])],
            ],
        )
        .unwrap();
        let vt = value_iteration(&m);
        assert_eq!(vt.q[0][0], vec![2.0, 0.5]);
        assert_eq!(vt.optimal_actions(0, 0), vec![0]);
        assert_eq!(evaluate_policy(&m, |d, _| usize::from(d == 0)).value(0, 0), 0.5);
    }
}
