//! The six-task self-organization experiment with full dumps.

use std::cell::RefCell;
use std::fmt::Write as _;

use anyhow::{anyhow, Result};
use somdp_core::aggregation::{aggregate_parameters, macro_greedy_policy};
use somdp_core::bounds::ErrorConfig;
use somdp_core::mdp::FiniteMdp;
use somdp_core::nav::{evaluate, NavWorld, TaskSpec};
use somdp_core::seeding;
use somdp_core::selforg::{self_organize, ModuleState, SelfOrgConfig, SelfOrgResult};

use crate::config::RunConfig;
use crate::meta::write_with_meta;

use super::{build_world, ensure_output_dir};

/// One `perf.csv` row: a task evaluated with its best module's policy at a
/// sweep boundary (sweep 0 = before any learning).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerfRow {
    pub sweep: usize,
    pub task: usize,
    pub runs: usize,
    pub mean_reward: f64,
    pub success_rate: f64,
}

/// Everything the experiment produced, for tests and reporting.
pub struct SelforgArtifacts {
    pub result: SelfOrgResult,
    pub perf: Vec<PerfRow>,
    pub tasks: Vec<TaskSpec>,
}

pub fn selforg_config(cfg: &RunConfig) -> SelfOrgConfig {
    SelfOrgConfig {
        modules: cfg.so.modules,
        budget: cfg.so.budget,
        seed: cfg.seed,
        max_sweeps: cfg.so.max_sweeps,
        tol: cfg.so.tol,
        warmup_splits: cfg.so.warmup_splits,
        splits_per_call: cfg.so.splits_per_call,
        error: ErrorConfig {
            variant: cfg.so.bound_variant,
            solver_tol: cfg.so.solver_tol,
            max_iter: 1_000_000,
        },
        record_partitions: false,
    }
}

/// Evaluates each task with its assigned module's greedy policy.
fn evaluate_sweep(
    world: &NavWorld,
    tasks: &[(TaskSpec, FiniteMdp)],
    modules: &[ModuleState],
    assignment: &[usize],
    cfg: &RunConfig,
    sweep: usize,
) -> Result<Vec<PerfRow>> {
    let mut rows = Vec::with_capacity(tasks.len());
    for (t, (spec, mdp)) in tasks.iter().enumerate() {
        let module = &modules[assignment[t]];
        let mut model = aggregate_parameters(mdp, module.partition())?;
        model.solve(cfg.so.solver_tol, 1_000_000)?;
        let policy = macro_greedy_policy(mdp, &model)?;
        let starts = world.start_states(*spec)?;
        let summary = evaluate(
            mdp,
            &policy,
            &starts,
            world.terminal_state(),
            cfg.eval.runs,
            cfg.eval.cap,
            seeding::mix2(cfg.seed, sweep as u64, t as u64),
        );
        rows.push(PerfRow {
            sweep,
            task: t,
            runs: summary.runs,
            mean_reward: summary.mean_reward,
            success_rate: summary.success_rate,
        });
    }
    Ok(rows)
}

/// Runs the experiment and writes `trace.csv`, `assignment.csv`,
/// `perf.csv`, and per-module `partition_m{j}.csv` / `rectangles_m{j}.csv`.
pub fn cmd_selforg(cfg: &RunConfig) -> Result<SelforgArtifacts> {
    let world = build_world(cfg)?;
    let tasks = world.build_six_tasks()?;
    let mdps: Vec<FiniteMdp> = tasks.iter().map(|(_, m)| m.clone()).collect();
    let base = world.base_partition();
    let rule = world.split_rule();
    let so_cfg = selforg_config(cfg);

    let perf: RefCell<Vec<PerfRow>> = RefCell::new(Vec::new());
    let observer_error: RefCell<Option<anyhow::Error>> = RefCell::new(None);
    let mut observer = |sweep: usize, modules: &[ModuleState], assignment: &[usize], _g: f64| {
        if observer_error.borrow().is_some() {
            return;
        }
        match evaluate_sweep(&world, &tasks, modules, assignment, cfg, sweep) {
            Ok(mut rows) => perf.borrow_mut().append(&mut rows),
            Err(e) => *observer_error.borrow_mut() = Some(e),
        }
    };

    let result = self_organize(&mdps, &base, &rule, &so_cfg, Some(&mut observer))
        .map_err(|e| anyhow!(e))?;
    if let Some(e) = observer_error.into_inner() {
        return Err(e.context("evaluating a sweep"));
    }
    let perf = perf.into_inner();

    ensure_output_dir(cfg)?;
    let mut trace_csv = Vec::new();
    result.trace.write_csv(cfg.so.modules, &mut trace_csv)?;
    write_with_meta(&cfg.output_dir.join("trace.csv"), &trace_csv, cfg)?;

    let mut assignment_csv = Vec::new();
    result.write_assignment_csv(&mut assignment_csv)?;
    write_with_meta(&cfg.output_dir.join("assignment.csv"), &assignment_csv, cfg)?;

    let mut perf_csv = String::from("sweep,task,runs,mean_reward,success_rate\n");
    for r in &perf {
        let _ = writeln!(
            perf_csv,
            "{},{},{},{},{}",
            r.sweep, r.task, r.runs, r.mean_reward, r.success_rate
        );
    }
    write_with_meta(&cfg.output_dir.join("perf.csv"), perf_csv.as_bytes(), cfg)?;

    for module in &result.modules {
        let mut partition_csv = Vec::new();
        module.partition().write_csv(&mut partition_csv)?;
        write_with_meta(
            &cfg.output_dir.join(format!("partition_m{}.csv", module.id)),
            &partition_csv,
            cfg,
        )?;
        let mut rect_csv = Vec::new();
        world.write_rectangles_csv(module.partition(), &mut rect_csv)?;
        write_with_meta(
            &cfg.output_dir.join(format!("rectangles_m{}.csv", module.id)),
            &rect_csv,
            cfg,
        )?;
    }

    println!(
        "self-organization: {} sweeps, final assignment {:?}, macro counts {:?}",
        result.sweeps_run,
        result.assignment,
        result
            .modules
            .iter()
            .map(|m| m.macro_count())
            .collect::<Vec<_>>()
    );
    Ok(SelforgArtifacts {
        result,
        perf,
        tasks: tasks.into_iter().map(|(t, _)| t).collect(),
    })
}
