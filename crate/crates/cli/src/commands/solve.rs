//! Exact baseline: value iteration on one task's fine grid, then an
//! evaluation of the greedy policy.

use std::fmt::Write as _;

use anyhow::{bail, Context, Result};
use somdp_core::mdp::{greedy_policy, value_iteration};
use somdp_core::nav::{evaluate, EvalRow, NavWorld};
use somdp_core::seeding;

use crate::config::RunConfig;
use crate::meta::write_with_meta;

use super::{build_world, ensure_output_dir};

/// Solves task `task_index` (1-based) exactly and writes
/// `v_task{i}.csv` and `eval_task{i}.csv`.
pub fn cmd_solve(cfg: &RunConfig, task_index: usize) -> Result<()> {
    if !(1..=6).contains(&task_index) {
        bail!("task index {task_index} out of range 1..=6");
    }
    let world = build_world(cfg)?;
    let task = NavWorld::six_tasks()[task_index - 1];
    let mdp = world.build_task_mdp(task)?;
    let (v_star, iterations) = value_iteration(&mdp, cfg.so.solver_tol, 1_000_000)
        .with_context(|| format!("solving task {task_index}"))?;
    let policy = greedy_policy(&mdp, &v_star);
    let starts = world.start_states(task)?;
    let summary = evaluate(
        &mdp,
        &policy,
        &starts,
        world.terminal_state(),
        cfg.eval.runs,
        cfg.eval.cap,
        seeding::mix(cfg.seed, task_index as u64),
    );

    ensure_output_dir(cfg)?;
    let mut values = String::from("state,value\n");
    for (s, v) in v_star.as_slice().iter().enumerate() {
        let _ = writeln!(values, "{s},{v}");
    }
    write_with_meta(
        &cfg.output_dir.join(format!("v_task{task_index}.csv")),
        values.as_bytes(),
        cfg,
    )?;

    let mut eval_csv = Vec::new();
    somdp_core::nav::write_eval_csv(
        &[EvalRow {
            task: task_index,
            policy_tag: "exact".into(),
            summary,
        }],
        &mut eval_csv,
    )?;
    write_with_meta(
        &cfg.output_dir.join(format!("eval_task{task_index}.csv")),
        &eval_csv,
        cfg,
    )?;

    println!(
        "task {task_index}: {} states, {iterations} iterations, \
         mean reward {:.4}, success rate {:.3}",
        mdp.n_states(),
        summary.mean_reward,
        summary.success_rate
    );
    Ok(())
}
