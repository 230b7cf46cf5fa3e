//! Computable upper bounds on the state-aggregation error.
//!
//! For a macro ŝ₁ the per-macro interpolation bound is
//!
//! ```text
//! Ē_int(ŝ₁) = ΔR̄(ŝ₁) + K · Σ_ŝ₂ ΔT̄(ŝ₁,ŝ₂),      K = γ·Rmax/(1−γ)
//! ```
//!
//! where ΔR̄ is the largest within-macro reward spread over actions and
//! ΔT̄(ŝ₁,ŝ₂) the largest spread, over member states, of the transition
//! mass sent into ŝ₂. Two variants are exposed: `AsWritten` scales both
//! spreads by 1/|ŝ₁|, `Conservative` keeps them unscaled so the bound
//! dominates the true deviation from the averaged parameters.
//!
//! The approximation bound Ē_app is the fixed point of
//!
//! ```text
//! [Ê·f](ŝ₁) = Ē_int(ŝ₁) + γ · max_a Σ_ŝ₂ T̂(ŝ₁,a,ŝ₂) · f(ŝ₂)
//! ```
//!
//! which is a Bellman backup with reward Ē_int, solved by the same value
//! iteration as every other model here. The influence of a macro on the
//! summed bound over a region S₀ is the fixed point of the transposed map
//!
//! ```text
//! [D·f](ŝ) = 1{ŝ∈S₀} + γ · Σ_ŝ' T̂(ŝ',π_err(ŝ'),ŝ) · f(ŝ')
//! ```
//!
//! with π_err(ŝ) = argmax_a Σ_ŝ' T̂(ŝ,a,ŝ')·Ē_app(ŝ'). The transposed map
//! contracts in the L1 norm (its rows are columns of a stochastic matrix),
//! so the iteration stops on an L1 change test.

use std::io::{self, Write};

use crate::aggregation::{aggregate_parameters, AggregateModel, AggregationError, Partition};
use crate::mdp::{self, FiniteMdp, SolveError};
use crate::pick;

/// Which scaling of the parameter spreads to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundVariant {
    /// Spreads scaled by 1/|ŝ|; the default distance for self-organization.
    #[default]
    AsWritten,
    /// Unscaled spreads; guarantees Ē_app dominates the true error.
    Conservative,
}

impl BoundVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundVariant::AsWritten => "as-written",
            BoundVariant::Conservative => "conservative",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "as-written" => Some(BoundVariant::AsWritten),
            "conservative" => Some(BoundVariant::Conservative),
            _ => None,
        }
    }
}

/// Settings shared by every bound computation.
#[derive(Debug, Clone, Copy)]
pub struct ErrorConfig {
    pub variant: BoundVariant,
    pub solver_tol: f64,
    pub max_iter: usize,
}

impl Default for ErrorConfig {
    fn default() -> Self {
        Self {
            variant: BoundVariant::AsWritten,
            solver_tol: 1e-6,
            max_iter: 100_000,
        }
    }
}

/// Everything the error machinery knows about one (task, partition) pair.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub e_int_bar: Vec<f64>,
    pub e_app_bar: Vec<f64>,
    pub pi_err: Vec<usize>,
    pub influence: Vec<f64>,
    pub scores: Vec<f64>,
    /// State-weighted mean of Ē_app; the module/task distance.
    pub scalar_error: f64,
    pub k_const: f64,
    pub variant: BoundVariant,
}

impl ErrorReport {
    /// Writes the `macro,e_int_bar,e_app_bar,influence,score` CSV dump.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "macro,e_int_bar,e_app_bar,influence,score")?;
        for m in 0..self.e_int_bar.len() {
            writeln!(
                w,
                "{m},{},{},{},{}",
                self.e_int_bar[m], self.e_app_bar[m], self.influence[m], self.scores[m]
            )?;
        }
        Ok(())
    }
}

/// The transition-term constant `K = γ·Rmax/(1−γ)`, an upper bound on
/// `γ·‖V*‖∞`.
pub fn bound_constant(mdp: &FiniteMdp) -> f64 {
    mdp.discount() * mdp.max_abs_reward() / (1.0 - mdp.discount())
}

/// Unscaled parameter spreads of one macro: the largest within-macro reward
/// difference over actions, and per destination macro the largest difference
/// of transition mass sent there by two member states (again over actions).
/// These are the raw ingredients of [`interpolation_bound`].
pub fn parameter_spreads(
    mdp: &FiniteMdp,
    partition: &Partition,
    macro_index: usize,
) -> (f64, Vec<(usize, f64)>) {
    let mut scratch = SpreadScratch::new(partition.n_macros());
    macro_spreads(mdp, partition, macro_index, &mut scratch)
}

struct SpreadScratch {
    member_mass: Vec<f64>,
    member_touched: Vec<usize>,
    mass_max: Vec<f64>,
    mass_min: Vec<f64>,
    mass_members: Vec<usize>,
    touched: Vec<usize>,
    spread: Vec<f64>,
    spread_touched: Vec<usize>,
}

impl SpreadScratch {
    fn new(n_macros: usize) -> Self {
        Self {
            member_mass: vec![0.0; n_macros],
            member_touched: Vec::new(),
            mass_max: vec![0.0; n_macros],
            mass_min: vec![f64::INFINITY; n_macros],
            mass_members: vec![0; n_macros],
            touched: Vec::new(),
            spread: vec![0.0; n_macros],
            spread_touched: Vec::new(),
        }
    }
}

/// Reward spread and sorted per-destination mass spreads of one macro.
fn macro_spreads(
    mdp: &FiniteMdp,
    partition: &Partition,
    m1: usize,
    sc: &mut SpreadScratch,
) -> (f64, Vec<(usize, f64)>) {
    let members = partition.members(m1);
    let n = members.len();
    let mut reward_spread = 0.0f64;
    for a in 0..mdp.n_actions() {
        let mut r_min = f64::INFINITY;
        let mut r_max = f64::NEG_INFINITY;
        for &s in members {
            let r = mdp.reward(s, a);
            r_min = r_min.min(r);
            r_max = r_max.max(r);
            for &(succ, p) in mdp.row(s, a) {
                if p == 0.0 {
                    continue;
                }
                let m2 = partition.macro_of(succ);
                if sc.member_mass[m2] == 0.0 {
                    sc.member_touched.push(m2);
                }
                sc.member_mass[m2] += p;
            }
            for &m2 in &sc.member_touched {
                let v = sc.member_mass[m2];
                sc.member_mass[m2] = 0.0;
                if sc.mass_members[m2] == 0 {
                    sc.touched.push(m2);
                }
                sc.mass_members[m2] += 1;
                sc.mass_max[m2] = sc.mass_max[m2].max(v);
                sc.mass_min[m2] = sc.mass_min[m2].min(v);
            }
            sc.member_touched.clear();
        }
        reward_spread = reward_spread.max(r_max - r_min);
        for &m2 in &sc.touched {
            // Members sending no mass into m2 contribute an implicit 0.
            let lo = if sc.mass_members[m2] == n {
                sc.mass_min[m2]
            } else {
                0.0
            };
            let range = sc.mass_max[m2] - lo;
            if sc.spread[m2] == 0.0 && range > 0.0 {
                sc.spread_touched.push(m2);
            }
            sc.spread[m2] = sc.spread[m2].max(range);
            sc.mass_max[m2] = 0.0;
            sc.mass_min[m2] = f64::INFINITY;
            sc.mass_members[m2] = 0;
        }
        sc.touched.clear();
    }
    sc.spread_touched.sort_unstable();
    let spreads: Vec<(usize, f64)> = sc
        .spread_touched
        .iter()
        .map(|&m2| (m2, sc.spread[m2]))
        .collect();
    for &m2 in &sc.spread_touched {
        sc.spread[m2] = 0.0;
    }
    sc.spread_touched.clear();
    (reward_spread, spreads)
}

/// Per-macro interpolation-error upper bound Ē_int.
pub fn interpolation_bound(
    mdp: &FiniteMdp,
    model: &AggregateModel,
    variant: BoundVariant,
) -> Vec<f64> {
    let partition = model.partition();
    let n_macros = partition.n_macros();
    let k_const = bound_constant(mdp);
    let mut scratch = SpreadScratch::new(n_macros);
    let mut e_int = vec![0.0; n_macros];
    for (m1, slot) in e_int.iter_mut().enumerate() {
        let (reward_spread, mass_spreads) = macro_spreads(mdp, partition, m1, &mut scratch);
        let spread_sum: f64 = mass_spreads.iter().map(|&(_, v)| v).sum();
        let factor = match variant {
            BoundVariant::AsWritten => 1.0 / partition.members(m1).len() as f64,
            BoundVariant::Conservative => 1.0,
        };
        *slot = factor * reward_spread + k_const * factor * spread_sum;
    }
    e_int
}

/// Fixed point of the Ē_app map, computed by value iteration on the macro
/// model with its rewards replaced by Ē_int.
pub fn approximation_bound(
    model: &AggregateModel,
    e_int: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>, SolveError> {
    debug_assert_eq!(e_int.len(), model.n_macros());
    let mut err_mdp = model.to_macro_mdp();
    for m in 0..model.n_macros() {
        for a in 0..model.n_actions() {
            err_mdp.set_reward(m, a, e_int[m]);
        }
    }
    let (v, _) = mdp::value_iteration(&err_mdp, tol, max_iter)?;
    Ok(v.0)
}

/// Per-macro action maximizing the expected downstream error bound,
/// `argmax_a Σ_ŝ' T̂(ŝ,a,ŝ')·Ē_app(ŝ')`; lowest index on ties.
pub fn error_policy(model: &AggregateModel, e_app: &[f64]) -> Vec<usize> {
    (0..model.n_macros())
        .map(|m| {
            pick::argmax((0..model.n_actions()).map(|a| {
                model
                    .t_row(m, a)
                    .iter()
                    .map(|&(m2, p)| p * e_app[m2])
                    .sum::<f64>()
            }))
            .expect("model has at least one action")
        })
        .collect()
}

/// One application of the transposed-transition influence map,
/// `f ↦ 1_{S₀} + γ·T̂(·,π_err(·),·)ᵀ f`. A γ-contraction in the L1 norm.
pub struct InfluenceMap {
    /// For each macro m, the (source, probability) pairs flowing into m
    /// under π_err.
    inflow: Vec<Vec<(usize, f64)>>,
    indicator: Vec<f64>,
    gamma: f64,
}

impl InfluenceMap {
    pub fn new(model: &AggregateModel, s0: &[bool], pi_err: &[usize]) -> Self {
        let n = model.n_macros();
        debug_assert_eq!(s0.len(), n);
        debug_assert_eq!(pi_err.len(), n);
        let mut inflow: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for m1 in 0..n {
            for &(m2, p) in model.t_row(m1, pi_err[m1]) {
                inflow[m2].push((m1, p));
            }
        }
        Self {
            inflow,
            indicator: s0.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
            gamma: model.discount(),
        }
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        (0..self.indicator.len())
            .map(|m| {
                let flow: f64 = self.inflow[m].iter().map(|&(m1, p)| p * f[m1]).sum();
                self.indicator[m] + self.gamma * flow
            })
            .collect()
    }
}

/// Fixed point of the transposed-transition influence map for the region
/// `s0` under the fixed policy `pi_err`. Stops on an L1 change test, the
/// norm in which the map contracts.
pub fn influence(
    model: &AggregateModel,
    s0: &[bool],
    pi_err: &[usize],
    tol: f64,
    max_iter: usize,
) -> Vec<f64> {
    let map = InfluenceMap::new(model, s0, pi_err);
    let threshold = mdp::stop_threshold(tol, model.discount());
    let mut f = vec![0.0; model.n_macros()];
    for _ in 0..max_iter {
        let next = map.apply(&f);
        let change_l1: f64 = next.iter().zip(&f).map(|(a, b)| (a - b).abs()).sum();
        f = next;
        if change_l1 <= threshold {
            return f;
        }
    }
    // Unreachable for γ < 1: the map contracts in L1 with modulus γ.
    panic!("influence iteration failed to converge within {max_iter} iterations");
}

/// Predicted reduction of the summed error bound per unit of Ē_int change:
/// the elementwise product of influence and Ē_int.
pub fn refinement_scores(e_int: &[f64], influence: &[f64]) -> Vec<f64> {
    debug_assert_eq!(e_int.len(), influence.len());
    e_int
        .iter()
        .zip(influence)
        .map(|(e, i)| e * i)
        .collect()
}

/// Scalar distance between a task MDP and a module partition: the
/// state-weighted mean of Ē_app.
pub fn module_task_error(
    mdp: &FiniteMdp,
    partition: &Partition,
    cfg: &ErrorConfig,
) -> Result<f64, AggregationError> {
    let model = aggregate_parameters(mdp, partition)?;
    let e_int = interpolation_bound(mdp, &model, cfg.variant);
    let e_app = approximation_bound(&model, &e_int, cfg.solver_tol, cfg.max_iter)?;
    Ok(weighted_mean(partition, &e_app))
}

fn weighted_mean(partition: &Partition, e_app: &[f64]) -> f64 {
    let total: f64 = (0..partition.n_macros())
        .map(|m| partition.members(m).len() as f64 * e_app[m])
        .sum();
    total / partition.n_states() as f64
}

/// Runs the full error pipeline for one (task, partition) pair. The
/// influence region S₀ is the entire macro set.
pub fn error_report(
    mdp: &FiniteMdp,
    partition: &Partition,
    cfg: &ErrorConfig,
) -> Result<ErrorReport, AggregationError> {
    let model = aggregate_parameters(mdp, partition)?;
    let e_int = interpolation_bound(mdp, &model, cfg.variant);
    let e_app = approximation_bound(&model, &e_int, cfg.solver_tol, cfg.max_iter)?;
    let pi = error_policy(&model, &e_app);
    let s0 = vec![true; model.n_macros()];
    let infl = influence(&model, &s0, &pi, cfg.solver_tol, cfg.max_iter);
    let scores = refinement_scores(&e_int, &infl);
    let scalar = weighted_mean(partition, &e_app);
    Ok(ErrorReport {
        e_int_bar: e_int,
        e_app_bar: e_app,
        pi_err: pi,
        influence: infl,
        scores,
        scalar_error: scalar,
        k_const: bound_constant(mdp),
        variant: cfg.variant,
    })
}
