//! Solver correctness against independent oracles.

mod common;

use common::{all_policies, brute_force_v_star, policy_value_linear, sup_dist};
use somdp_core::mdp::{greedy_policy, policy_value, value_iteration, value_iteration_from, Policy, ValueFunction};
use somdp_core::synth::random_mdp;

#[test]
fn value_iteration_matches_brute_force_fixed_point() {
    // The seed-42 instance plus a spread of sizes.
    for (seed, n_states, n_actions) in [
        (42, 10, 3),
        (1, 5, 2),
        (2, 14, 4),
        (3, 20, 3),
        (4, 7, 5),
    ] {
        let mdp = random_mdp(seed, n_states, n_actions, 0.9);
        let oracle = brute_force_v_star(&mdp, 10_000);
        let (v, _) = value_iteration(&mdp, 1e-8, 100_000).unwrap();
        let d = sup_dist(v.as_slice(), &oracle);
        assert!(d <= 1e-6, "seed {seed}: sup distance {d}");
    }
}

#[test]
fn greedy_policy_is_optimal_on_enumerable_instances() {
    // Every deterministic policy of a 4-state, 3-action MDP is evaluated by
    // an exact linear solve; the greedy policy of V* must dominate them all.
    for seed in [42, 7, 19, 23] {
        let mdp = random_mdp(seed, 4, 3, 0.9);
        let (v_star, _) = value_iteration(&mdp, 1e-10, 100_000).unwrap();
        let greedy = greedy_policy(&mdp, &v_star);
        let greedy_value = policy_value_linear(&mdp, &greedy.0);
        for pi in all_policies(4, 3) {
            let value = policy_value_linear(&mdp, &pi);
            for s in 0..4 {
                assert!(
                    greedy_value[s] >= value[s] - 1e-6,
                    "seed {seed}: policy {pi:?} beats greedy at state {s}"
                );
            }
        }
    }
}

#[test]
fn policy_value_matches_linear_solve() {
    let mdp = random_mdp(7, 6, 3, 0.9);
    // A fixed arbitrary policy.
    let pi = Policy(vec![0, 2, 1, 0, 1, 2]);
    let oracle = policy_value_linear(&mdp, &pi.0);
    let (v, _) = policy_value(&mdp, &pi, 1e-9, 100_000).unwrap();
    let d = sup_dist(v.as_slice(), &oracle);
    assert!(d <= 1e-7, "sup distance {d}");
}

#[test]
fn value_iteration_is_invariant_to_the_initial_vector() {
    let mdp = random_mdp(5, 12, 3, 0.9);
    let tol = 1e-7;
    let (from_zero, _) = value_iteration(&mdp, tol, 100_000).unwrap();
    for (i, init) in [
        vec![25.0; 12],
        vec![-25.0; 12],
        (0..12).map(|s| (s as f64) - 6.0).collect::<Vec<_>>(),
    ]
    .into_iter()
    .enumerate()
    {
        let (v, _) = value_iteration_from(&mdp, ValueFunction(init), tol, 100_000).unwrap();
        let d = v.sup_distance(&from_zero);
        assert!(d <= 2.0 * tol, "init {i}: distance {d}");
    }
}
