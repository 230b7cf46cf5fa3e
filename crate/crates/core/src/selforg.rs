//! Modular self-organization: spread `n` tasks over `m` adaptive modules.
//!
//! This is the on-line dynamic-cluster loop of [`crate::cluster`] with tasks
//! as data points, modules as kernels, the scalar error bound
//! [`crate::bounds::module_task_error`] as distance, and one
//! [`crate::refine::learn_step`] as the kernel update: per sweep, visit the
//! tasks in a seeded shuffled order, route each task to the module with the
//! least error bound, and refine that module on that task.
//!
//! Modules start from a shared base partition plus a few seeded random
//! warm-up splits (distinct streams per module); without them every module
//! would be identical and lowest-index tie-breaking would route all tasks
//! to module 0 forever.

use std::collections::HashMap;
use std::io::{self, Write};
use std::sync::Mutex;

use thiserror::Error;

use crate::aggregation::{AggregationError, Partition, SplitRule};
use crate::bounds::{module_task_error, ErrorConfig};
use crate::cluster::{sweep_order, KernelDistance, KernelUpdate};
use crate::mdp::FiniteMdp;
use crate::pick;
use crate::refine::{learn_step, LearnStep, RefineConfig};
use crate::seeding::{stream_rng, streams};

/// One adaptive module: a partition plus a per-task error cache.
///
/// The cache holds only fresh values: it is cleared whenever the partition
/// changes, so a present entry always equals a fresh
/// [`module_task_error`] evaluation. A mutex guards it so one module may be
/// evaluated against many tasks concurrently.
#[derive(Debug)]
pub struct ModuleState {
    pub id: usize,
    partition: Partition,
    pub budget: usize,
    cache: Mutex<HashMap<usize, f64>>,
}

impl Clone for ModuleState {
    fn clone(&self) -> Self {
        Self {
            id: self.id,
            partition: self.partition.clone(),
            budget: self.budget,
            cache: Mutex::new(self.cache.lock().unwrap_or_else(|e| e.into_inner()).clone()),
        }
    }
}

impl ModuleState {
    pub fn new(id: usize, partition: Partition, budget: usize) -> Self {
        Self {
            id,
            partition,
            budget,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn macro_count(&self) -> usize {
        self.partition.n_macros()
    }

    /// Cached-or-fresh scalar error of this module against one task.
    pub fn task_error(
        &self,
        task_id: usize,
        task: &FiniteMdp,
        cfg: &ErrorConfig,
    ) -> Result<f64, AggregationError> {
        if let Some(&e) = self.lock_cache().get(&task_id) {
            return Ok(e);
        }
        let e = module_task_error(task, &self.partition, cfg)?;
        self.lock_cache().insert(task_id, e);
        Ok(e)
    }

    /// Installs the outcome of a learn step on `task_id`. Every cache entry
    /// goes stale with the partition; the learned task's entry is refreshed
    /// from the step's own report.
    pub fn apply_learn(&mut self, outcome: LearnStep, task_id: usize) {
        self.partition = outcome.partition;
        let mut cache = self.lock_cache();
        cache.clear();
        cache.insert(task_id, outcome.report.scalar_error);
    }

    fn lock_cache(&self) -> std::sync::MutexGuard<'_, HashMap<usize, f64>> {
        self.cache.lock().unwrap_or_else(|e| e.into_inner())
    }
}

/// The base partition plus `splits` seeded random splits; the stream is
/// derived from `(seed, module_id)` so sibling modules diverge.
pub fn warmup_partition(
    base: &Partition,
    rule: &dyn SplitRule,
    splits: usize,
    seed: u64,
    module_id: usize,
) -> Partition {
    let mut rng = stream_rng(seed, streams::WARMUP_BASE + module_id as u64);
    let mut part = base.clone();
    for _ in 0..splits {
        let mut candidates: Vec<usize> = (0..part.n_macros())
            .filter(|&m| part.members(m).len() >= 2)
            .collect();
        if candidates.is_empty() {
            break;
        }
        rand::seq::SliceRandom::shuffle(&mut candidates[..], &mut rng);
        let mut done = false;
        for &m in &candidates {
            if let Ok(next) = part.split_macro_random(m, rule, &mut rng) {
                part = next;
                done = true;
                break;
            }
        }
        if !done {
            break;
        }
    }
    part
}

#[derive(Debug, Clone)]
pub struct SelfOrgConfig {
    /// Number of modules (kernels).
    pub modules: usize,
    /// Macro budget per module.
    pub budget: usize,
    pub seed: u64,
    pub max_sweeps: usize,
    /// Stop once the global error improves by less than this over a sweep.
    pub tol: f64,
    /// Seeded random splits applied to each fresh module.
    pub warmup_splits: usize,
    /// Splits per learn step.
    pub splits_per_call: usize,
    pub error: ErrorConfig,
    /// Snapshot every module's assignment vector at each sweep end.
    pub record_partitions: bool,
}

impl Default for SelfOrgConfig {
    fn default() -> Self {
        Self {
            modules: 3,
            budget: 400,
            seed: 1,
            max_sweeps: 40,
            tol: 1e-4,
            warmup_splits: 2,
            splits_per_call: 1,
            error: ErrorConfig::default(),
            record_partitions: false,
        }
    }
}

impl SelfOrgConfig {
    pub fn refine_config(&self) -> RefineConfig {
        RefineConfig {
            budget: self.budget,
            splits_per_call: self.splits_per_call,
            error: self.error,
        }
    }
}

/// One task visit: the per-module errors seen, the module chosen, and the
/// global error after that module learned.
#[derive(Debug, Clone)]
pub struct IterRecord {
    /// Learning sweep, 0-based.
    pub sweep: usize,
    /// Running iteration index across sweeps.
    pub iteration: usize,
    pub task: usize,
    pub errors: Vec<f64>,
    pub chosen: usize,
    pub global_error: f64,
    pub macro_counts: Vec<usize>,
}

/// State at a sweep boundary.
#[derive(Debug, Clone)]
pub struct SweepSnapshot {
    pub global_error: f64,
    /// Best module per task, lowest index on ties.
    pub assignment: Vec<usize>,
    pub macro_counts: Vec<usize>,
    /// Per-module partition assignment vectors, when recording is enabled.
    pub partitions: Option<Vec<Vec<usize>>>,
}

/// Append-only record of a self-organization run.
#[derive(Debug, Clone)]
pub struct SoTrace {
    /// Snapshot before any learning.
    pub initial: SweepSnapshot,
    pub iterations: Vec<IterRecord>,
    /// Snapshot after each completed sweep.
    pub sweeps: Vec<SweepSnapshot>,
}

impl SoTrace {
    /// Writes the iteration-level CSV:
    /// `sweep,iter,task,chosen_module,err_m0,...,err_m{m-1},global_error`.
    pub fn write_csv<W: Write>(&self, n_modules: usize, mut w: W) -> io::Result<()> {
        write!(w, "sweep,iter,task,chosen_module")?;
        for j in 0..n_modules {
            write!(w, ",err_m{j}")?;
        }
        writeln!(w, ",global_error")?;
        for r in &self.iterations {
            write!(w, "{},{},{},{}", r.sweep, r.iteration, r.task, r.chosen)?;
            for e in &r.errors {
                write!(w, ",{e}")?;
            }
            writeln!(w, ",{}", r.global_error)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SelfOrgResult {
    pub modules: Vec<ModuleState>,
    /// Final task → module assignment.
    pub assignment: Vec<usize>,
    pub trace: SoTrace,
    pub sweeps_run: usize,
    /// True when the improvement test fired before the sweep cap.
    pub stopped_early: bool,
}

impl SelfOrgResult {
    /// Writes the final `task,module` CSV.
    pub fn write_assignment_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "task,module")?;
        for (t, &m) in self.assignment.iter().enumerate() {
            writeln!(w, "{t},{m}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
#[error("self-organization failed at {context}: {source}")]
pub struct SelfOrgError {
    pub context: String,
    #[source]
    pub source: AggregationError,
}

fn ctx(context: String) -> impl FnOnce(AggregationError) -> SelfOrgError {
    move |source| SelfOrgError { context, source }
}

/// Index of the module with the least error on a task.
pub fn best_module(
    task_id: usize,
    task: &FiniteMdp,
    modules: &[ModuleState],
    cfg: &ErrorConfig,
) -> Result<usize, AggregationError> {
    let mut errors = Vec::with_capacity(modules.len());
    for m in modules {
        errors.push(m.task_error(task_id, task, cfg)?);
    }
    Ok(pick::argmin(errors).expect("at least one module"))
}

/// Summed error of each task against its assigned module (the clustering
/// distortion of the assignment).
pub fn global_error(
    tasks: &[FiniteMdp],
    modules: &[ModuleState],
    assignment: &[usize],
    cfg: &ErrorConfig,
) -> Result<f64, AggregationError> {
    let mut total = 0.0;
    for (t, task) in tasks.iter().enumerate() {
        total += modules[assignment[t]].task_error(t, task, cfg)?;
    }
    Ok(total)
}

/// Σ over tasks of the minimum module error; float-op order matches the
/// generic on-line loop's distortion so the two traces compare bitwise.
fn min_global_error(
    tasks: &[FiniteMdp],
    modules: &[ModuleState],
    cfg: &ErrorConfig,
    context: &str,
) -> Result<f64, SelfOrgError> {
    let mut total = 0.0;
    for (t, task) in tasks.iter().enumerate() {
        let mut best = f64::INFINITY;
        for m in modules {
            let e = m
                .task_error(t, task, cfg)
                .map_err(|e| SelfOrgError {
                    context: format!("{context}, task {t}, module {}", m.id),
                    source: e,
                })?;
            best = best.min(e);
        }
        total += best;
    }
    Ok(total)
}

fn snapshot(
    tasks: &[FiniteMdp],
    modules: &[ModuleState],
    cfg: &SelfOrgConfig,
    context: &str,
) -> Result<SweepSnapshot, SelfOrgError> {
    let global_error = min_global_error(tasks, modules, &cfg.error, context)?;
    let mut assignment = Vec::with_capacity(tasks.len());
    for (t, task) in tasks.iter().enumerate() {
        let m = best_module(t, task, modules, &cfg.error)
            .map_err(|e| SelfOrgError {
                context: format!("{context}, task {t}"),
                source: e,
            })?;
        assignment.push(m);
    }
    Ok(SweepSnapshot {
        global_error,
        assignment,
        macro_counts: modules.iter().map(|m| m.macro_count()).collect(),
        partitions: cfg.record_partitions.then(|| {
            modules
                .iter()
                .map(|m| m.partition().assignment().to_vec())
                .collect()
        }),
    })
}

/// Observer invoked at sweep boundaries: `(completed_sweeps, modules,
/// assignment, global_error)`, first with 0 before any learning.
pub type SweepObserver<'a> = &'a mut dyn FnMut(usize, &[ModuleState], &[usize], f64);

/// Runs the self-organization loop over `tasks` with `cfg.modules` modules
/// grown from `base` by seeded warm-up splits.
pub fn self_organize(
    tasks: &[FiniteMdp],
    base: &Partition,
    rule: &dyn SplitRule,
    cfg: &SelfOrgConfig,
    mut observer: Option<SweepObserver<'_>>,
) -> Result<SelfOrgResult, SelfOrgError> {
    assert!(cfg.modules >= 1, "need at least one module");
    assert!(!tasks.is_empty(), "need at least one task");
    let refine_cfg = cfg.refine_config();
    let mut modules: Vec<ModuleState> = (0..cfg.modules)
        .map(|j| {
            let part = warmup_partition(base, rule, cfg.warmup_splits, cfg.seed, j);
            ModuleState::new(j, part, cfg.budget)
        })
        .collect();

    let initial = snapshot(tasks, &modules, cfg, "initial evaluation")?;
    if let Some(cb) = observer.as_mut() {
        cb(0, &modules, &initial.assignment, initial.global_error);
    }
    let mut prev_global = initial.global_error;
    let mut trace = SoTrace {
        initial,
        iterations: Vec::new(),
        sweeps: Vec::new(),
    };

    let mut iteration = 0;
    let mut stopped_early = false;
    let mut sweeps_run = 0;
    for sweep in 0..cfg.max_sweeps {
        sweeps_run = sweep + 1;
        for task in sweep_order(cfg.seed, sweep, tasks.len()) {
            let mut errors = Vec::with_capacity(modules.len());
            for m in &modules {
                let e = m
                    .task_error(task, &tasks[task], &cfg.error)
                    .map_err(|e| SelfOrgError {
                        context: format!("sweep {sweep}, task {task}, module {}", m.id),
                        source: e,
                    })?;
                errors.push(e);
            }
            let chosen = pick::argmin(errors.iter().copied()).expect("modules non-empty");
            let outcome = learn_step(&tasks[task], modules[chosen].partition(), rule, &refine_cfg)
                .map_err(ctx(format!("sweep {sweep}, task {task}, module {chosen}")))?;
            modules[chosen].apply_learn(outcome, task);
            let global_error =
                min_global_error(tasks, &modules, &cfg.error, &format!("sweep {sweep}"))?;
            trace.iterations.push(IterRecord {
                sweep,
                iteration,
                task,
                errors,
                chosen,
                global_error,
                macro_counts: modules.iter().map(|m| m.macro_count()).collect(),
            });
            iteration += 1;
        }
        let snap = snapshot(tasks, &modules, cfg, &format!("sweep {sweep} close"))?;
        let global = snap.global_error;
        trace.sweeps.push(snap);
        if let Some(cb) = observer.as_mut() {
            let snap = trace.sweeps.last().unwrap();
            cb(sweep + 1, &modules, &snap.assignment, global);
        }
        let improvement = prev_global - global;
        prev_global = global;
        if improvement < cfg.tol {
            stopped_early = true;
            break;
        }
    }

    let assignment = trace
        .sweeps
        .last()
        .unwrap_or(&trace.initial)
        .assignment
        .clone();
    Ok(SelfOrgResult {
        modules,
        assignment,
        trace,
        sweeps_run,
        stopped_early,
    })
}

/// The task/module pairing expressed as a kernel-clustering problem, so the
/// generic on-line loop can drive the exact same computation.
///
/// `distance` and `update` panic on internal solver failures; the dedicated
/// [`self_organize`] loop is the error-reporting surface.
pub struct ModuleTaskClustering<'a> {
    pub rule: &'a dyn SplitRule,
    pub refine: RefineConfig,
}

impl KernelDistance for ModuleTaskClustering<'_> {
    type Point = FiniteMdp;
    type Kernel = ModuleState;

    fn distance(&self, point_index: usize, point: &FiniteMdp, kernel: &ModuleState) -> f64 {
        kernel
            .task_error(point_index, point, &self.refine.error)
            .expect("error bound pipeline failed")
    }
}

impl KernelUpdate for ModuleTaskClustering<'_> {
    fn update(&self, kernel: &mut ModuleState, point_index: usize, point: &FiniteMdp) {
        let outcome = learn_step(point, kernel.partition(), self.rule, &self.refine)
            .expect("learn step failed");
        kernel.apply_learn(outcome, point_index);
    }
}
