//! The self-organization loop against the generic on-line cluster loop, the
//! single-module degenerate case, and refinement behavior at small scale.

use somdp_core::aggregation::{MedianSplit, Partition};
use somdp_core::bounds::{module_task_error, BoundVariant, ErrorConfig};
use somdp_core::cluster::{online_dynamic_cluster, sweep_order, OnlineOptions};
use somdp_core::mdp::FiniteMdp;
use somdp_core::refine::{learn_step, RefineConfig};
use somdp_core::selforg::{
    self_organize, warmup_partition, ModuleState, ModuleTaskClustering, SelfOrgConfig,
};
use somdp_core::synth::{random_local_mdp, random_mdp, random_partition};

fn tasks_of(seeds: &[u64], n_states: usize) -> Vec<FiniteMdp> {
    seeds
        .iter()
        .map(|&s| random_mdp(s, n_states, 2, 0.9))
        .collect()
}

fn config(modules: usize, seed: u64, sweeps: usize) -> SelfOrgConfig {
    SelfOrgConfig {
        modules,
        budget: 8,
        seed,
        max_sweeps: sweeps,
        tol: f64::NEG_INFINITY, // never stop early
        warmup_splits: 1,
        splits_per_call: 1,
        error: ErrorConfig::default(),
        record_partitions: true,
    }
}

#[test]
fn loop_is_the_online_dynamic_cluster_instantiation() {
    let tasks = tasks_of(&[201, 202, 203, 204], 12);
    let base = Partition::single(12);
    let cfg = config(2, 5, 4);

    let so = self_organize(&tasks, &base, &MedianSplit, &cfg, None).unwrap();

    let problem = ModuleTaskClustering {
        rule: &MedianSplit,
        refine: cfg.refine_config(),
    };
    let kernels: Vec<ModuleState> = (0..cfg.modules)
        .map(|j| {
            ModuleState::new(
                j,
                warmup_partition(&base, &MedianSplit, cfg.warmup_splits, cfg.seed, j),
                cfg.budget,
            )
        })
        .collect();
    let online = online_dynamic_cluster(
        &problem,
        &tasks,
        kernels,
        &OnlineOptions {
            seed: cfg.seed,
            tol: cfg.tol,
            max_sweeps: cfg.max_sweeps,
        },
    );

    assert_eq!(so.trace.iterations.len(), online.records.len());
    for (it, rec) in so.trace.iterations.iter().zip(&online.records) {
        assert_eq!(it.sweep, rec.sweep);
        assert_eq!(it.task, rec.point_index);
        assert_eq!(it.chosen, rec.chosen);
        assert_eq!(it.errors, rec.distances);
        assert_eq!(it.global_error.to_bits(), rec.distortion.to_bits());
    }
    for (snap, &dist) in so.trace.sweeps.iter().zip(&online.sweep_distortions) {
        assert_eq!(snap.global_error.to_bits(), dist.to_bits());
    }
    assert_eq!(so.assignment, online.state.assignment);
    for (module, kernel) in so.modules.iter().zip(&online.state.kernels) {
        assert_eq!(module.partition().assignment(), kernel.partition().assignment());
    }
}

#[test]
fn single_module_reduces_to_direct_learn_iteration() {
    let tasks = tasks_of(&[301, 302, 303], 10);
    let base = Partition::single(10);
    let cfg = config(1, 9, 4);
    let so = self_organize(&tasks, &base, &MedianSplit, &cfg, None).unwrap();
    for r in &so.trace.iterations {
        assert_eq!(r.chosen, 0);
    }

    // Direct iteration: apply learn_step to the lone module for every task
    // in the same sweep order.
    let refine = cfg.refine_config();
    let mut part = warmup_partition(&base, &MedianSplit, cfg.warmup_splits, cfg.seed, 0);
    for sweep in 0..cfg.max_sweeps {
        for t in sweep_order(cfg.seed, sweep, tasks.len()) {
            part = learn_step(&tasks[t], &part, &MedianSplit, &refine)
                .unwrap()
                .partition;
        }
        let snap = &so.trace.sweeps[sweep];
        let recorded = &snap.partitions.as_ref().unwrap()[0];
        assert_eq!(recorded, part.assignment(), "sweep {sweep}");
    }
    assert_eq!(so.modules[0].partition().assignment(), part.assignment());
}

/// A ring walk with an absorbing goal block: entering the block pays +1 and
/// jumps to the terminal state. Tasks with different blocks differ in both
/// rewards and transitions, the same shape as navigation tasks.
fn goal_task(seed: u64, n: usize, goal: std::ops::Range<usize>) -> FiniteMdp {
    use rand::Rng;
    let mut rng = somdp_core::seeding::stream_rng(seed, 5);
    let terminal = n;
    let mut mdp = FiniteMdp::new(n + 1, 2, 0.9);
    for s in 0..n {
        for a in 0..2 {
            let mut row: Vec<(usize, f64)> = Vec::new();
            let mut reward = 0.0;
            for d in [-1isize, 0, 1] {
                let succ = (s as isize + d).rem_euclid(n as isize) as usize;
                let w: f64 = rng.gen_range(0.1..1.0);
                let succ = if goal.contains(&succ) {
                    reward += w;
                    terminal
                } else {
                    succ
                };
                match row.iter_mut().find(|(x, _)| *x == succ) {
                    Some(e) => e.1 += w,
                    None => row.push((succ, w)),
                }
            }
            let total: f64 = row.iter().map(|&(_, w)| w).sum();
            for e in &mut row {
                e.1 /= total;
            }
            mdp.set_row(s, a, row);
            mdp.set_reward(s, a, reward / total);
        }
    }
    for a in 0..2 {
        mdp.set_row(terminal, a, vec![(terminal, 1.0)]);
    }
    mdp
}

#[test]
fn with_one_module_per_task_everyone_specializes() {
    // m = n on tasks that want resolution in different places. Modules are
    // warmed up to their budget so that relocation, not raw macro count,
    // decides which module fits which task; a module with more macros beats
    // any coarser module on *every* task, so cold-started modules would all
    // lose to whichever one learns first.
    let n = 18;
    let tasks: Vec<FiniteMdp> = (0..3)
        .map(|i| goal_task(500 + i as u64, n, (6 * i)..(6 * i + 6)))
        .collect();
    let cfg = SelfOrgConfig {
        modules: 3,
        budget: 10,
        seed: 0,
        max_sweeps: 12,
        tol: f64::NEG_INFINITY,
        warmup_splits: 9,
        splits_per_call: 1,
        error: ErrorConfig {
            variant: BoundVariant::Conservative,
            ..ErrorConfig::default()
        },
        record_partitions: false,
    };
    let so = self_organize(&tasks, &Partition::single(n + 1), &MedianSplit, &cfg, None).unwrap();
    let mut owners = so.assignment.clone();
    owners.sort_unstable();
    owners.dedup();
    assert_eq!(owners.len(), 3, "assignment {:?}", so.assignment);
}

#[test]
fn learn_steps_reduce_error_without_budget_pressure() {
    // One module, ample budget, warm non-trivial start: over repeated learn
    // steps the error must not rise end to end, in at least 95% of trials.
    // Per-step rises do happen (the influence score is a gradient heuristic,
    // and splitting a destination macro can raise other macros' bounds), so
    // they are logged rather than asserted.
    let cfg = RefineConfig {
        budget: 64,
        splits_per_call: 1,
        error: ErrorConfig {
            variant: BoundVariant::Conservative,
            ..ErrorConfig::default()
        },
    };
    let trials: u64 = 40;
    let steps = 6;
    let mut ok = 0;
    for seed in 0..trials {
        let n_states = 10 + (seed as usize % 11);
        let mdp = random_mdp(seed.wrapping_add(7000), n_states, 3, 0.9);
        let mut part = random_partition(seed ^ 0xf00, n_states, (n_states / 3).max(2));
        let initial = module_task_error(&mdp, &part, &cfg.error).unwrap();
        let mut prev = initial;
        let mut last = initial;
        for step in 0..steps {
            let out = learn_step(&mdp, &part, &MedianSplit, &cfg).unwrap();
            part = out.partition;
            last = out.report.scalar_error;
            if last > prev + 1e-6 {
                println!(
                    "learn_step raised the bound on seed {seed} step {step}: \
                     {prev} -> {last} ({} macros)",
                    part.n_macros()
                );
            }
            prev = last;
        }
        ok += (last <= initial + 1e-6) as u64;
    }
    assert!(
        ok * 100 >= trials * 95,
        "error grew end-to-end in {}/{} trials",
        trials - ok,
        trials
    );
}

#[test]
fn refined_module_beats_blank_modules() {
    // All modules share a warm start; only one then learns the task.
    let task = random_local_mdp(17, 12, 2, 0.9, 1);
    let base = Partition::single(12);
    let warm = warmup_partition(&base, &MedianSplit, 2, 17, 0);
    let cfg = ErrorConfig {
        variant: BoundVariant::Conservative,
        ..ErrorConfig::default()
    };
    let refine = RefineConfig {
        budget: 12,
        splits_per_call: 1,
        error: cfg,
    };
    let mut refined = warm.clone();
    for _ in 0..5 {
        refined = learn_step(&task, &refined, &MedianSplit, &refine)
            .unwrap()
            .partition;
    }
    let modules = vec![
        ModuleState::new(0, warm.clone(), 12),
        ModuleState::new(1, refined, 12),
        ModuleState::new(2, warm, 12),
    ];
    let blank = modules[0].task_error(0, &task, &cfg).unwrap();
    let tuned = modules[1].task_error(0, &task, &cfg).unwrap();
    assert!(tuned < blank, "refined {tuned} vs blank {blank}");
    assert_eq!(
        somdp_core::selforg::best_module(0, &task, &modules, &cfg).unwrap(),
        1
    );
}

#[test]
fn global_error_is_the_direct_sum() {
    let tasks = tasks_of(&[601, 602, 603], 9);
    let cfg = ErrorConfig::default();
    let modules = vec![
        ModuleState::new(0, warmup_partition(&Partition::single(9), &MedianSplit, 2, 13, 0), 9),
        ModuleState::new(1, warmup_partition(&Partition::single(9), &MedianSplit, 2, 13, 1), 9),
    ];
    let assignment = vec![0, 1, 0];
    let got = somdp_core::selforg::global_error(&tasks, &modules, &assignment, &cfg).unwrap();
    let direct = module_task_error(&tasks[0], modules[0].partition(), &cfg).unwrap()
        + module_task_error(&tasks[1], modules[1].partition(), &cfg).unwrap()
        + module_task_error(&tasks[2], modules[0].partition(), &cfg).unwrap();
    assert_eq!(got.to_bits(), direct.to_bits());

    // One task, one module: equals module_task_error.
    let one = somdp_core::selforg::global_error(&tasks[..1], &modules[..1], &[0], &cfg).unwrap();
    assert_eq!(
        one.to_bits(),
        module_task_error(&tasks[0], modules[0].partition(), &cfg)
            .unwrap()
            .to_bits()
    );

    // All-singleton partitions: nothing but solver noise.
    let singles = vec![ModuleState::new(0, Partition::singletons(9), 9)];
    let err = somdp_core::selforg::global_error(&tasks, &singles, &[0, 0, 0], &cfg).unwrap();
    assert!(err <= 3.0 * 2.0 * cfg.solver_tol);
}

#[test]
fn trace_csv_is_bit_for_bit_deterministic() {
    let tasks = tasks_of(&[501, 502], 10);
    let base = Partition::single(10);
    let cfg = config(2, 21, 3);
    let mut renders = Vec::new();
    for _ in 0..2 {
        let so = self_organize(&tasks, &base, &MedianSplit, &cfg, None).unwrap();
        let mut buf = Vec::new();
        so.trace.write_csv(2, &mut buf).unwrap();
        let mut assignment = Vec::new();
        so.write_assignment_csv(&mut assignment).unwrap();
        renders.push((buf, assignment));
    }
    assert_eq!(renders[0], renders[1]);
}
