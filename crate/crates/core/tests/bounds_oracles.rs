//! Error-bound machinery against independent oracles: direct summation,
//! brute-force fixed points, exact linear solves, and finite differences.

mod common;

use common::{brute_force_v_star, gauss_solve, sup_dist};
use somdp_core::aggregation::{aggregate_parameters, macro_greedy_policy, MedianSplit, Partition};
use somdp_core::bounds::{
    approximation_bound, bound_constant, error_policy, error_report, influence,
    interpolation_bound, module_task_error, parameter_spreads, BoundVariant, ErrorConfig,
};
use somdp_core::mdp::FiniteMdp;
use somdp_core::synth::{random_mdp, random_partition};

fn seed3_partition() -> Partition {
    Partition::from_assignment(vec![0, 0, 1, 1]).unwrap()
}

#[test]
fn aggregate_parameters_match_direct_double_sums() {
    let mdp = random_mdp(3, 4, 2, 0.9);
    let partition = seed3_partition();
    let model = aggregate_parameters(&mdp, &partition).unwrap();
    let members: [&[usize]; 2] = [&[0, 1], &[2, 3]];
    for (m1, group) in members.iter().enumerate() {
        for a in 0..2 {
            let r_expect: f64 =
                group.iter().map(|&s| mdp.reward(s, a)).sum::<f64>() / group.len() as f64;
            assert!((model.r_hat(m1, a) - r_expect).abs() <= 1e-12);
            for (m2, dest) in members.iter().enumerate() {
                let mut mass = 0.0;
                for &s in group.iter() {
                    for &(succ, p) in mdp.row(s, a) {
                        if dest.contains(&succ) {
                            mass += p;
                        }
                    }
                }
                mass /= group.len() as f64;
                let got = model
                    .t_row(m1, a)
                    .iter()
                    .find(|&&(d, _)| d == m2)
                    .map_or(0.0, |&(_, p)| p);
                assert!((got - mass).abs() <= 1e-12, "T̂({m1},{a},{m2})");
            }
        }
    }
}

#[test]
fn approximate_solve_equals_explicit_macro_mdp() {
    let mdp = random_mdp(3, 4, 2, 0.9);
    let partition = seed3_partition();
    let mut model = aggregate_parameters(&mdp, &partition).unwrap();
    model.solve(1e-9, 100_000).unwrap();

    // Oracle: build the two-state macro MDP by direct summation and iterate
    // the naive backup on it.
    let mut macro_mdp = FiniteMdp::new(2, 2, 0.9);
    let members: [&[usize]; 2] = [&[0, 1], &[2, 3]];
    for (m1, group) in members.iter().enumerate() {
        for a in 0..2 {
            let r: f64 = group.iter().map(|&s| mdp.reward(s, a)).sum::<f64>() / group.len() as f64;
            macro_mdp.set_reward(m1, a, r);
            let mut row = Vec::new();
            for (m2, dest) in members.iter().enumerate() {
                let mut mass = 0.0;
                for &s in group.iter() {
                    for &(succ, p) in mdp.row(s, a) {
                        if dest.contains(&succ) {
                            mass += p;
                        }
                    }
                }
                row.push((m2, mass / group.len() as f64));
            }
            macro_mdp.set_row(m1, a, row);
        }
    }
    let oracle = brute_force_v_star(&macro_mdp, 10_000);
    let d = sup_dist(model.v_hat().unwrap().as_slice(), &oracle);
    assert!(d <= 1e-7, "sup distance {d}");
}

#[test]
fn macro_greedy_policy_matches_direct_argmax() {
    let mdp = random_mdp(3, 4, 2, 0.9);
    let partition = seed3_partition();
    let mut model = aggregate_parameters(&mdp, &partition).unwrap();
    model.solve(1e-10, 100_000).unwrap();
    let pi = macro_greedy_policy(&mdp, &model).unwrap();

    let v_hat = model.v_hat().unwrap();
    for s in 0..4 {
        let mut best_a = 0;
        let mut best_q = f64::NEG_INFINITY;
        for a in 0..2 {
            let mut q = mdp.reward(s, a);
            for &(succ, p) in mdp.row(s, a) {
                q += mdp.discount() * p * v_hat[partition.macro_of(succ)];
            }
            if q > best_q + somdp_core::TIE_TOL {
                best_q = q;
                best_a = a;
            }
        }
        assert_eq!(pi[s], best_a, "state {s}");
    }
}

/// Brute-force iteration of the Ē_app map driven directly off T̂ rows.
fn brute_force_e_app(model: &somdp_core::aggregation::AggregateModel, e_int: &[f64], iters: usize) -> Vec<f64> {
    let n = model.n_macros();
    let mut f = vec![0.0; n];
    for _ in 0..iters {
        let mut next = vec![0.0; n];
        for m in 0..n {
            let mut best = f64::NEG_INFINITY;
            for a in 0..model.n_actions() {
                let flow: f64 = model.t_row(m, a).iter().map(|&(m2, p)| p * f[m2]).sum();
                if flow > best {
                    best = flow;
                }
            }
            next[m] = e_int[m] + model.discount() * best;
        }
        f = next;
    }
    f
}

#[test]
fn approximation_bound_matches_brute_force_on_chain() {
    // Three macros in a chain, γ = 0.9, Ē_int = (1, 0, 0).
    let mut chain = FiniteMdp::new(3, 1, 0.9);
    chain.set_row(0, 0, vec![(1, 1.0)]);
    chain.set_row(1, 0, vec![(2, 1.0)]);
    chain.set_row(2, 0, vec![(2, 1.0)]);
    let model = aggregate_parameters(&chain, &Partition::singletons(3)).unwrap();
    let e_int = vec![1.0, 0.0, 0.0];
    let got = approximation_bound(&model, &e_int, 1e-10, 100_000).unwrap();
    let oracle = brute_force_e_app(&model, &e_int, 10_000);
    assert!(sup_dist(&got, &oracle) <= 1e-8);
}

#[test]
fn approximation_bound_matches_brute_force_on_random_models() {
    for seed in [31, 32, 33] {
        let mdp = random_mdp(seed, 12, 3, 0.9);
        let partition = random_partition(seed ^ 0x5a, 12, 4);
        let model = aggregate_parameters(&mdp, &partition).unwrap();
        let e_int = interpolation_bound(&mdp, &model, BoundVariant::Conservative);
        let got = approximation_bound(&model, &e_int, 1e-10, 100_000).unwrap();
        let oracle = brute_force_e_app(&model, &e_int, 10_000);
        assert!(sup_dist(&got, &oracle) <= 1e-8, "seed {seed}");
    }
}

#[test]
fn increasing_e_int_never_decreases_e_app() {
    for seed in 0..20u64 {
        let mdp = random_mdp(seed, 10, 3, 0.9);
        let partition = random_partition(seed ^ 0x1111, 10, 4);
        let model = aggregate_parameters(&mdp, &partition).unwrap();
        let e_int = interpolation_bound(&mdp, &model, BoundVariant::Conservative);
        let base = approximation_bound(&model, &e_int, 1e-10, 100_000).unwrap();
        for i in 0..e_int.len() {
            let mut bumped = e_int.clone();
            bumped[i] += 0.5;
            let hi = approximation_bound(&model, &bumped, 1e-10, 100_000).unwrap();
            for m in 0..base.len() {
                assert!(
                    hi[m] >= base[m] - 1e-9,
                    "seed {seed}: bump {i} decreased macro {m}"
                );
            }
        }
    }
}

#[test]
fn error_policy_matches_direct_argmax() {
    let mdp = random_mdp(11, 8, 3, 0.9);
    let partition = random_partition(11, 8, 4);
    let model = aggregate_parameters(&mdp, &partition).unwrap();
    let e_int = interpolation_bound(&mdp, &model, BoundVariant::AsWritten);
    let e_app = approximation_bound(&model, &e_int, 1e-9, 100_000).unwrap();
    let pi = error_policy(&model, &e_app);
    for m in 0..model.n_macros() {
        let mut best_a = 0;
        let mut best = f64::NEG_INFINITY;
        for a in 0..model.n_actions() {
            let q: f64 = model.t_row(m, a).iter().map(|&(m2, p)| p * e_app[m2]).sum();
            if q > best + somdp_core::TIE_TOL {
                best = q;
                best_a = a;
            }
        }
        assert_eq!(pi[m], best_a, "macro {m}");
    }
}

/// Σ over macros of the frozen-policy fixed point, computed exactly by a
/// dense linear solve of (I − γ·T̂_π) f = e_int.
fn frozen_sum(model: &somdp_core::aggregation::AggregateModel, pi: &[usize], e_int: &[f64]) -> f64 {
    let n = model.n_macros();
    let mut a = vec![vec![0.0; n]; n];
    for m in 0..n {
        a[m][m] += 1.0;
        for &(m2, p) in model.t_row(m, pi[m]) {
            a[m][m2] -= model.discount() * p;
        }
    }
    gauss_solve(a, e_int.to_vec()).iter().sum()
}

#[test]
fn influence_equals_frozen_policy_finite_difference() {
    // With π_err and the max_a choice frozen, the Ē_app map is affine, so
    // the finite difference is exact for any step.
    for seed in [11, 12, 13, 14] {
        let mdp = random_mdp(seed, 12, 3, 0.9);
        let partition = random_partition(seed ^ 0x9e, 12, 4);
        let model = aggregate_parameters(&mdp, &partition).unwrap();
        let e_int = interpolation_bound(&mdp, &model, BoundVariant::Conservative);
        let e_app = approximation_bound(&model, &e_int, 1e-12, 1_000_000).unwrap();
        let pi = error_policy(&model, &e_app);
        let infl = influence(&model, &vec![true; 4], &pi, 1e-12, 1_000_000);

        let delta = 1e-4;
        let base = frozen_sum(&model, &pi, &e_int);
        for i in 0..4 {
            let mut bumped = e_int.clone();
            bumped[i] += delta;
            let fd = (frozen_sum(&model, &pi, &bumped) - base) / delta;
            let rel = (fd - infl[i]).abs() / infl[i].abs().max(1.0);
            assert!(rel <= 1e-6, "seed {seed}, macro {i}: fd {fd} vs {}", infl[i]);
        }
    }
}

#[test]
fn conservative_bound_dominates_the_true_error() {
    for seed in 0..10u64 {
        let n_states = 8 + (seed as usize % 13); // 8..=20
        let n_macros = 2 + (seed as usize % 4);
        let mdp = random_mdp(seed.wrapping_mul(97).wrapping_add(5), n_states, 3, 0.9);
        let partition = random_partition(seed ^ 0xfeed, n_states, n_macros.min(n_states));
        let mut model = aggregate_parameters(&mdp, &partition).unwrap();
        model.solve(1e-9, 1_000_000).unwrap();
        let v_hat = model.v_hat().unwrap();
        let v_star = brute_force_v_star(&mdp, 10_000);

        let e_int = interpolation_bound(&mdp, &model, BoundVariant::Conservative);
        let e_app = approximation_bound(&model, &e_int, 1e-9, 1_000_000).unwrap();
        for m in 0..partition.n_macros() {
            let worst = partition
                .members(m)
                .iter()
                .map(|&s| (v_star[s] - v_hat[m]).abs())
                .fold(0.0f64, f64::max);
            assert!(
                worst <= e_app[m] + 1e-6,
                "seed {seed}, macro {m}: |V*-lift| {worst} > bound {}",
                e_app[m]
            );
        }
    }
}

#[test]
fn module_task_error_matches_composed_oracle() {
    let mdp = random_mdp(3, 4, 2, 0.9);
    let partition = seed3_partition();
    let cfg = ErrorConfig {
        variant: BoundVariant::AsWritten,
        solver_tol: 1e-10,
        max_iter: 1_000_000,
    };
    let got = module_task_error(&mdp, &partition, &cfg).unwrap();

    // Oracle: independent Ē_int by direct pair enumeration, then the brute
    // fixed point, then the state-weighted mean.
    let members: [&[usize]; 2] = [&[0, 1], &[2, 3]];
    let k = bound_constant(&mdp);
    let mass = |s: usize, a: usize, dest: &[usize]| -> f64 {
        mdp.row(s, a)
            .iter()
            .filter(|&&(succ, _)| dest.contains(&succ))
            .map(|&(_, p)| p)
            .sum()
    };
    let mut e_int = Vec::new();
    for group in members.iter() {
        let mut dr = 0.0f64;
        let mut dt_sum = 0.0;
        for a in 0..2 {
            for &s in group.iter() {
                for &s2 in group.iter() {
                    dr = dr.max((mdp.reward(s, a) - mdp.reward(s2, a)).abs());
                }
            }
        }
        for dest in members.iter() {
            let mut dt = 0.0f64;
            for a in 0..2 {
                for &s in group.iter() {
                    for &s2 in group.iter() {
                        dt = dt.max((mass(s, a, dest) - mass(s2, a, dest)).abs());
                    }
                }
            }
            dt_sum += dt;
        }
        e_int.push((dr + k * dt_sum) / group.len() as f64);
    }
    let model = aggregate_parameters(&mdp, &partition).unwrap();
    let e_app = brute_force_e_app(&model, &e_int, 10_000);
    let oracle = (2.0 * e_app[0] + 2.0 * e_app[1]) / 4.0;
    assert!(
        (got - oracle).abs() <= 1e-8,
        "composed oracle {oracle} vs {got}"
    );
}

#[test]
fn singleton_partition_error_is_within_solver_tolerance() {
    let mdp = random_mdp(40, 15, 3, 0.9);
    let cfg = ErrorConfig::default();
    let err = module_task_error(&mdp, &Partition::singletons(15), &cfg).unwrap();
    assert!(err <= 2.0 * cfg.solver_tol);
}

#[test]
fn child_spreads_never_exceed_the_parents() {
    // A child's members are a subset of the parent's, so its max-pair reward
    // and mass spreads are bounded by the parent's on every destination that
    // exists in both partitions.
    for seed in 0..15u64 {
        let n_states = 6 + (seed as usize % 10);
        let mdp = random_mdp(seed.wrapping_add(300), n_states, 2, 0.9);
        let parts = random_partition(seed ^ 0x321, n_states, 3.min(n_states));
        let Some(target) = (0..parts.n_macros()).find(|&m| parts.members(m).len() >= 2) else {
            continue;
        };
        let split = parts.split_macro(target, &MedianSplit).unwrap();
        let (parent_dr, parent_dt) = parameter_spreads(&mdp, &parts, target);
        let parent_map: std::collections::HashMap<usize, f64> = parent_dt.into_iter().collect();
        for child in [target, split.n_macros() - 1] {
            let (child_dr, child_dt) = parameter_spreads(&mdp, &split, child);
            assert!(child_dr <= parent_dr + 1e-15, "seed {seed}: reward spread");
            for (dest, spread) in child_dt {
                if dest == target || dest == split.n_macros() - 1 {
                    continue; // destinations the split created or replaced
                }
                let parent_spread = parent_map.get(&dest).copied().unwrap_or(0.0);
                assert!(
                    spread <= parent_spread + 1e-15,
                    "seed {seed}: child {child} spread into {dest}: {spread} > {parent_spread}"
                );
            }
        }
    }
}

#[test]
fn report_scalar_matches_module_task_error() {
    let mdp = random_mdp(50, 12, 3, 0.9);
    let partition = random_partition(51, 12, 4);
    let cfg = ErrorConfig::default();
    let report = error_report(&mdp, &partition, &cfg).unwrap();
    let scalar = module_task_error(&mdp, &partition, &cfg).unwrap();
    assert_eq!(report.scalar_error.to_bits(), scalar.to_bits());
}
