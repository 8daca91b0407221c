mod common;

use common::{checked_trace, lockstep, policy_for, preset, random_layered};
use mcts_lab::abstraction::{j_ucb, AbstractionPolicy, ChildStats};
use mcts_lab::domains::DOMAIN_NAMES;
use mcts_lab::eval::{pairings_scores, relative_improvement_scores, PerfMatrix};
use mcts_lab::oracle::combinatorics::p_abs_bound_exact;
use mcts_lab::oracle::fixed_point::value_spread;
use mcts_lab::oracle::{exact_asap_fixed_point, exact_ipa_fixed_point, p_abs_closed_form, p_abs_exact, value_iteration};
use mcts_lab::search::{global_std_exploration, ucb_value};
use mcts_lab::ActionIndex;
use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

fn children() -> impl Strategy<Value = Vec<ChildStats>> {
    prop::collection::vec((1u64..50, -20i32..20), 1..6).prop_map(|v| {
        v.into_iter()
            .map(|(n, mean)| ChildStats::new(n, mean as f64 * n as f64 / 4.0))
            .collect()
    })
}

fn matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..6, 2usize..6).prop_flat_map(|(n, m)| prop::collection::vec(prop::collection::vec(-10i32..10, m), n))
        .prop_map(|rows| rows.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect())
}

proptest! {
    #[test]
    fn ucb_grows_with_lambda(total in -100.0f64..100.0, n in 1u64..100, extra in 0u64..1000, l1 in 0.0f64..10.0, dl in 0.0f64..10.0) {
        let parent = n + extra;
        let l2 = l1 + dl;
        let (a, b) = (ucb_value(total, n, parent, l1), ucb_value(total, n, parent, l2));
        prop_assert!(a <= b);
        if parent > 1 && dl > 0.0 {
            prop_assert!(a < b);
        }
        if parent == 1 {
            prop_assert_eq!(a, b);
        }
        prop_assert_eq!(ucb_value(total, 0, parent.max(1), l1), f64::INFINITY);
    }

    #[test]
    fn global_std_is_scale_aware(values in prop::collection::vec(-50.0f64..50.0, 0..20), c in 0.1f64..5.0) {
        let e = global_std_exploration(&values, c, 1.0);
        prop_assert!(e > 0.0);
        let same = vec![values.first().copied().unwrap_or(0.0); values.len()];
        prop_assert_eq!(global_std_exploration(&same, c, 1.0), c);
    }

    #[test]
    fn kept_actions_grow_with_lambda_and_hold_the_best(stats in children(), l1 in 0.0f64..5.0, dl in 0.0f64..5.0) {
        let small = j_ucb(&stats, l1).unwrap();
        let large = j_ucb(&stats, l1 + dl).unwrap();
        prop_assert!(small.iter().all(|a| large.contains(a)));
        let best = stats.iter().map(ChildStats::mean).fold(f64::NEG_INFINITY, f64::max);
        let argmax: Vec<ActionIndex> = (0..stats.len()).filter(|&i| stats[i].mean() == best).map(ActionIndex).collect();
        prop_assert!(!small.is_empty());
        prop_assert!(argmax.iter().all(|a| small.contains(a)));
        prop_assert_eq!(j_ucb(&stats, 0.0).unwrap(), argmax);
        prop_assert_eq!(j_ucb(&stats, f64::INFINITY).unwrap().len(), stats.len());
    }

    #[test]
    fn scores_are_antisymmetric_and_zero_sum(rows in matrix()) {
        let perf = PerfMatrix::from_rows(rows).unwrap();
        for r in [pairings_scores(&perf).unwrap(), relative_improvement_scores(&perf).unwrap()] {
            let n = r.matrix.len();
            for i in 0..n {
                prop_assert_eq!(r.matrix[i][i], 0.0);
                for j in 0..n {
                    prop_assert_eq!(r.matrix[i][j], -r.matrix[j][i]);
                }
            }
            prop_assert!(r.scores.iter().sum::<f64>().abs() < 1e-9);
        }
    }

    #[test]
    fn pairings_ignore_monotone_task_transforms(rows in matrix(), scale in prop::collection::vec(0.1f64..10.0, 6), shift in prop::collection::vec(-5.0f64..5.0, 6)) {
        let perf = PerfMatrix::from_rows(rows.clone()).unwrap();
        let warped: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().enumerate().map(|(k, &p)| (scale[k] * p + shift[k]).powi(3)).collect())
            .collect();
        let a = pairings_scores(&perf).unwrap();
        let b = pairings_scores(&PerfMatrix::from_rows(warped).unwrap()).unwrap();
        prop_assert_eq!(a.matrix, b.matrix);
    }

    #[test]
    fn scores_follow_agent_permutations(rows in matrix(), rot in 1usize..5) {
        let n = rows.len();
        let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| rows[i].clone()).collect();
        for score in [pairings_scores, relative_improvement_scores] {
            let a = score(&PerfMatrix::from_rows(rows.clone()).unwrap()).unwrap();
            let b = score(&PerfMatrix::from_rows(permuted.clone()).unwrap()).unwrap();
            for (new, &old) in perm.iter().enumerate() {
                prop_assert!((b.scores[new] - a.scores[old]).abs() < 1e-12);
            }
        }
    }

    /// `(2c/m)^(n+l)` fails exactly on these cells of the small grid (exact
    /// rational comparison, recomputed independently). The intermediate
    /// bound `c^(n+l) * sum_{k<=c} C(m,k) / m^(n+l)` holds everywhere.
    #[test]
    fn p_abs_bounds(n in 1u32..=5, l in 1u32..=5, m in 1u32..=10) {
        const VIOLATIONS: [(u32, u32, u32); 10] = [
            (1, 1, 5), (1, 1, 6), (1, 1, 7), (1, 1, 8), (1, 1, 9), (1, 1, 10),
            (1, 2, 9), (1, 2, 10), (2, 1, 9), (2, 1, 10),
        ];
        let p = p_abs_exact(n, l, m).unwrap();
        let bound = p_abs_bound_exact(n, l, m).unwrap();
        prop_assert_eq!(p > bound, VIOLATIONS.contains(&(n, l, m)));
        let c = n.min(l).min(m);
        let binomials: u64 = (1..=c as u64).map(|k| (0..k).fold(1u64, |acc, i| acc * (m as u64 - i) / (i + 1))).sum();
        let weaker = BigRational::new(
            BigInt::from(c).pow(n + l) * BigInt::from(binomials),
            BigInt::from(m).pow(n + l),
        );
        prop_assert!(p <= weaker);
        let (f, _) = p_abs_closed_form(n, l, m).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_abstractions_are_sound_and_nested(seed in any::<u64>()) {
        let m = random_layered(seed);
        let values = value_iteration(&m);
        let asap = exact_asap_fixed_point(&m, 0.0, 0.0, None);
        let ipa = exact_ipa_fixed_point(&m, &values);
        prop_assert_eq!(value_spread(&asap, &values), (0.0, 0.0));
        prop_assert_eq!(value_spread(&ipa, &values), (0.0, 0.0));
        for d in 0..=m.horizon() {
            let n = m.layer(d).len();
            for a in 0..n {
                for b in 0..n {
                    if asap.same_state_block(d, a, b) {
                        prop_assert!(ipa.same_state_block(d, a, b), "layer {} nodes {} {}", d, a, b);
                    }
                }
            }
        }
        prop_assert!(ipa.num_state_blocks <= asap.num_state_blocks);
    }

    #[test]
    fn reductions_match_plain_pair_abstraction(seed in any::<u64>(), search_seed in any::<u64>()) {
        let m = random_layered(seed);
        let oga = AbstractionPolicy::oga();
        prop_assert_eq!(lockstep(&m, AbstractionPolicy::ipa(f64::INFINITY), oga.clone(), search_seed, 300), Ok(()));
        prop_assert_eq!(lockstep(&m, oga.clone().with_alpha(0.0), oga, search_seed, 300), Ok(()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(3))]

    /// Every shipped domain under a randomly configured search.
    #[test]
    fn search_invariants_hold_on_every_domain(choices in prop::collection::vec((any::<u8>(), any::<u8>(), any::<u64>()), DOMAIN_NAMES.len())) {
        for (name, (variant, knob, seed)) in DOMAIN_NAMES.iter().zip(choices) {
            let mdp = preset(name);
            let policy = policy_for(variant, knob);
            let result = checked_trace(mdp.as_ref(), policy.clone(), seed, 10_000);
            prop_assert!(result.is_ok(), "{} with {:?}: {:?}", name, policy, result.err());
        }
    }
}
