//! State aggregation: partitions of the state set and the averaged macro
//! model built on top of them.
//!
//! A partition groups states into macro-states. The macro model averages the
//! source MDP's parameters over each macro,
//!
//! ```text
//! R̂(ŝ,a)      = (1/|ŝ|)  Σ_{s∈ŝ} R(s,a)
//! T̂(ŝ₁,a,ŝ₂) = (1/|ŝ₁|) Σ_{s∈ŝ₁} Σ_{s'∈ŝ₂} T(s,a,s')
//! ```
//!
//! and is solved like any other finite MDP. Splits are recorded in a binary
//! history tree so that coarsening is exactly the inverse of refinement:
//! only sibling macros can merge, and merging restores their parent.

use std::io::{self, Write};

use thiserror::Error;

use crate::mdp::{self, FiniteMdp, Policy, SolveError, ValueFunction};

/// A disjoint cover of `0..n_states` by non-empty macro-states.
#[derive(Debug, Clone)]
pub struct Partition {
    /// Macro index of each state.
    assignment: Vec<usize>,
    /// Sorted member states of each macro.
    members: Vec<Vec<usize>>,
    /// Split-history arena; leaves are live macros.
    nodes: Vec<HistoryNode>,
    /// Node id backing each live macro index.
    macro_nodes: Vec<usize>,
}

#[derive(Debug, Clone)]
struct HistoryNode {
    parent: Option<usize>,
    children: Option<(usize, usize)>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PartitionError {
    #[error("empty state set")]
    EmptyStateSet,
    #[error("macro {0} is empty")]
    EmptyMacro(usize),
    #[error("macro index {0} out of range")]
    MacroOutOfRange(usize),
    #[error("macro {0} is a singleton and cannot be split")]
    SingletonMacro(usize),
    #[error("split rule produced no valid bipartition of macro {0}")]
    DegenerateSplit(usize),
    #[error("macros {0} and {1} are not siblings in the split history")]
    NotSiblings(usize, usize),
    #[error("partition covers {partition} states but the MDP has {mdp}")]
    StateCountMismatch { partition: usize, mdp: usize },
}

impl Partition {
    /// One macro covering every state.
    pub fn single(n_states: usize) -> Self {
        Self::from_assignment(vec![0; n_states]).expect("n_states >= 1")
    }

    /// One macro per state.
    pub fn singletons(n_states: usize) -> Self {
        Self::from_assignment((0..n_states).collect()).expect("n_states >= 1")
    }

    /// Builds a partition from a per-state macro index vector. Macro indices
    /// must form a gap-free range `0..n_macros` (every macro non-empty).
    pub fn from_assignment(assignment: Vec<usize>) -> Result<Self, PartitionError> {
        if assignment.is_empty() {
            return Err(PartitionError::EmptyStateSet);
        }
        let n_macros = assignment.iter().max().unwrap() + 1;
        let mut members = vec![Vec::new(); n_macros];
        for (s, &m) in assignment.iter().enumerate() {
            members[m].push(s);
        }
        if let Some(empty) = members.iter().position(|m| m.is_empty()) {
            return Err(PartitionError::EmptyMacro(empty));
        }
        let nodes = (0..n_macros)
            .map(|_| HistoryNode {
                parent: None,
                children: None,
            })
            .collect();
        Ok(Self {
            assignment,
            members,
            nodes,
            macro_nodes: (0..n_macros).collect(),
        })
    }

    pub fn n_states(&self) -> usize {
        self.assignment.len()
    }

    pub fn n_macros(&self) -> usize {
        self.members.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn macro_of(&self, state: usize) -> usize {
        self.assignment[state]
    }

    /// Sorted member states of a macro.
    pub fn members(&self, macro_index: usize) -> &[usize] {
        &self.members[macro_index]
    }

    /// Splits `macro_index` with the given rule. The first part keeps the
    /// macro index, the second is appended at index `n_macros`; the history
    /// tree records the two as siblings.
    pub fn split_macro(
        &self,
        macro_index: usize,
        rule: &dyn SplitRule,
    ) -> Result<Partition, PartitionError> {
        self.split_with(macro_index, |members| rule.split(members))
    }

    /// Like [`Self::split_macro`] but through the rule's seeded variant.
    pub fn split_macro_random(
        &self,
        macro_index: usize,
        rule: &dyn SplitRule,
        rng: &mut dyn rand::RngCore,
    ) -> Result<Partition, PartitionError> {
        self.split_with(macro_index, |members| rule.random_split(members, rng))
    }

    fn split_with(
        &self,
        macro_index: usize,
        split: impl FnOnce(&[usize]) -> Option<(Vec<usize>, Vec<usize>)>,
    ) -> Result<Partition, PartitionError> {
        if macro_index >= self.n_macros() {
            return Err(PartitionError::MacroOutOfRange(macro_index));
        }
        let members = &self.members[macro_index];
        if members.len() < 2 {
            return Err(PartitionError::SingletonMacro(macro_index));
        }
        let (mut left, mut right) = split(members).ok_or(PartitionError::DegenerateSplit(macro_index))?;
        left.sort_unstable();
        right.sort_unstable();
        if left.is_empty() || right.is_empty() || !is_bipartition(members, &left, &right) {
            return Err(PartitionError::DegenerateSplit(macro_index));
        }

        let mut out = self.clone();
        let new_macro = out.n_macros();
        for &s in &right {
            out.assignment[s] = new_macro;
        }
        let parent_node = out.macro_nodes[macro_index];
        let left_node = out.nodes.len();
        let right_node = left_node + 1;
        out.nodes.push(HistoryNode {
            parent: Some(parent_node),
            children: None,
        });
        out.nodes.push(HistoryNode {
            parent: Some(parent_node),
            children: None,
        });
        out.nodes[parent_node].children = Some((left_node, right_node));
        out.macro_nodes[macro_index] = left_node;
        out.macro_nodes.push(right_node);
        out.members[macro_index] = left;
        out.members.push(right);
        Ok(out)
    }

    /// Merges two sibling macros back into their parent. The merged macro
    /// takes the smaller of the two indices; macros above the larger index
    /// shift down by one.
    pub fn merge_macros(&self, a: usize, b: usize) -> Result<Partition, PartitionError> {
        if a >= self.n_macros() {
            return Err(PartitionError::MacroOutOfRange(a));
        }
        if b >= self.n_macros() {
            return Err(PartitionError::MacroOutOfRange(b));
        }
        let (node_a, node_b) = (self.macro_nodes[a], self.macro_nodes[b]);
        let parent = match (self.nodes[node_a].parent, self.nodes[node_b].parent) {
            (Some(pa), Some(pb)) if pa == pb => pa,
            _ => return Err(PartitionError::NotSiblings(a, b)),
        };
        match self.nodes[parent].children {
            Some((l, r)) if (l, r) == (node_a, node_b) || (l, r) == (node_b, node_a) => {}
            _ => return Err(PartitionError::NotSiblings(a, b)),
        }

        let keep = a.min(b);
        let drop = a.max(b);
        let mut out = self.clone();
        let mut merged = Vec::with_capacity(out.members[a].len() + out.members[b].len());
        merged.extend_from_slice(&out.members[a]);
        merged.extend_from_slice(&out.members[b]);
        merged.sort_unstable();
        for &s in &merged {
            out.assignment[s] = keep;
        }
        for m in &mut out.assignment {
            if *m > drop {
                *m -= 1;
            }
        }
        out.members[keep] = merged;
        out.members.remove(drop);
        out.macro_nodes[keep] = parent;
        out.macro_nodes.remove(drop);
        out.nodes[parent].children = None;
        Ok(out)
    }

    /// Live macro pairs that are siblings in the split history, i.e. the
    /// pairs [`Self::merge_macros`] would accept. Each pair is `(low, high)`,
    /// sorted ascending.
    pub fn sibling_pairs(&self) -> Vec<(usize, usize)> {
        let mut node_to_macro = vec![usize::MAX; self.nodes.len()];
        for (m, &n) in self.macro_nodes.iter().enumerate() {
            node_to_macro[n] = m;
        }
        let mut pairs = Vec::new();
        for (m, &n) in self.macro_nodes.iter().enumerate() {
            if let Some(parent) = self.nodes[n].parent {
                let (l, r) = self.nodes[parent].children.expect("parent keeps its children");
                let sibling = if l == n { r } else { l };
                let sm = node_to_macro[sibling];
                if sm != usize::MAX && m < sm {
                    pairs.push((m, sm));
                }
            }
        }
        pairs.sort_unstable();
        pairs
    }

    /// Writes the `state_index,macro_index` CSV dump.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "state_index,macro_index")?;
        for (s, &m) in self.assignment.iter().enumerate() {
            writeln!(w, "{s},{m}")?;
        }
        Ok(())
    }
}

fn is_bipartition(members: &[usize], left: &[usize], right: &[usize]) -> bool {
    if left.len() + right.len() != members.len() {
        return false;
    }
    let mut merged: Vec<usize> = left.iter().chain(right).copied().collect();
    merged.sort_unstable();
    merged == members
}

/// A deterministic bipartition rule for macro member lists.
pub trait SplitRule {
    /// Two non-empty parts, or `None` if the rule cannot split this macro.
    fn split(&self, members: &[usize]) -> Option<(Vec<usize>, Vec<usize>)>;

    /// Seeded variant, used to desynchronize initially identical modules.
    /// Defaults to the deterministic split.
    fn random_split(
        &self,
        members: &[usize],
        rng: &mut dyn rand::RngCore,
    ) -> Option<(Vec<usize>, Vec<usize>)> {
        let _ = rng;
        self.split(members)
    }
}

/// Splits the sorted member list at its midpoint. The seeded variant cuts at
/// a uniformly random interior position.
#[derive(Debug, Clone, Copy, Default)]
pub struct MedianSplit;

impl SplitRule for MedianSplit {
    fn split(&self, members: &[usize]) -> Option<(Vec<usize>, Vec<usize>)> {
        if members.len() < 2 {
            return None;
        }
        let cut = members.len() / 2;
        Some((members[..cut].to_vec(), members[cut..].to_vec()))
    }

    fn random_split(
        &self,
        members: &[usize],
        rng: &mut dyn rand::RngCore,
    ) -> Option<(Vec<usize>, Vec<usize>)> {
        if members.len() < 2 {
            return None;
        }
        let cut = rand::Rng::gen_range(rng, 1..members.len());
        Some((members[..cut].to_vec(), members[cut..].to_vec()))
    }
}

/// A partition plus the averaged macro-level parameters of one source MDP.
#[derive(Debug, Clone)]
pub struct AggregateModel {
    partition: Partition,
    n_actions: usize,
    discount: f64,
    /// R̂ for `(macro, action)` at `macro * n_actions + action`.
    r_hat: Vec<f64>,
    /// T̂ row for `(macro, action)`, sparse over successor macros.
    t_hat: Vec<Vec<(usize, f64)>>,
    v_hat: Option<ValueFunction>,
}

#[derive(Debug, Error)]
pub enum AggregationError {
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("macro model has not been solved yet")]
    NotSolved,
}

/// Averages the MDP parameters over each macro of the partition.
pub fn aggregate_parameters(
    mdp: &FiniteMdp,
    partition: &Partition,
) -> Result<AggregateModel, AggregationError> {
    if partition.n_states() != mdp.n_states() {
        return Err(PartitionError::StateCountMismatch {
            partition: partition.n_states(),
            mdp: mdp.n_states(),
        }
        .into());
    }
    let n_macros = partition.n_macros();
    let n_actions = mdp.n_actions();
    let mut r_hat = vec![0.0; n_macros * n_actions];
    let mut t_hat = vec![Vec::new(); n_macros * n_actions];
    let mut acc = vec![0.0f64; n_macros];
    let mut touched: Vec<usize> = Vec::new();
    for m in 0..n_macros {
        let members = partition.members(m);
        debug_assert!(!members.is_empty());
        let inv = 1.0 / members.len() as f64;
        for a in 0..n_actions {
            let mut reward_sum = 0.0;
            for &s in members {
                reward_sum += mdp.reward(s, a);
                for &(succ, p) in mdp.row(s, a) {
                    let m2 = partition.macro_of(succ);
                    if acc[m2] == 0.0 {
                        touched.push(m2);
                    }
                    acc[m2] += p;
                }
            }
            r_hat[m * n_actions + a] = reward_sum * inv;
            touched.sort_unstable();
            touched.dedup();
            let row = touched.iter().map(|&m2| (m2, acc[m2] * inv)).collect();
            for &m2 in &touched {
                acc[m2] = 0.0;
            }
            touched.clear();
            t_hat[m * n_actions + a] = row;
        }
    }
    Ok(AggregateModel {
        partition: partition.clone(),
        n_actions,
        discount: mdp.discount(),
        r_hat,
        t_hat,
        v_hat: None,
    })
}

impl AggregateModel {
    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn n_macros(&self) -> usize {
        self.partition.n_macros()
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn r_hat(&self, macro_index: usize, action: usize) -> f64 {
        self.r_hat[macro_index * self.n_actions + action]
    }

    /// Sparse T̂ row over successor macros; entries sum to 1.
    pub fn t_row(&self, macro_index: usize, action: usize) -> &[(usize, f64)] {
        &self.t_hat[macro_index * self.n_actions + action]
    }

    /// The macro-level MDP as a plain [`FiniteMdp`].
    pub fn to_macro_mdp(&self) -> FiniteMdp {
        let mut out = FiniteMdp::new(self.n_macros(), self.n_actions, self.discount);
        for m in 0..self.n_macros() {
            for a in 0..self.n_actions {
                out.set_row(m, a, self.t_row(m, a).to_vec());
                out.set_reward(m, a, self.r_hat(m, a));
            }
        }
        out
    }

    /// Solves the macro MDP by value iteration and stores V̂*.
    pub fn solve(&mut self, tol: f64, max_iter: usize) -> Result<&ValueFunction, SolveError> {
        let macro_mdp = self.to_macro_mdp();
        let (v, _) = mdp::value_iteration(&macro_mdp, tol, max_iter)?;
        self.v_hat = Some(v);
        Ok(self.v_hat.as_ref().unwrap())
    }

    /// The solved macro value function, if [`Self::solve`] has run.
    pub fn v_hat(&self) -> Option<&ValueFunction> {
        self.v_hat.as_ref()
    }
}

/// Piecewise-constant extension of a macro-level function to the state set.
pub fn lift(v_macro: &ValueFunction, partition: &Partition) -> ValueFunction {
    debug_assert_eq!(v_macro.len(), partition.n_macros());
    ValueFunction(
        partition
            .assignment()
            .iter()
            .map(|&m| v_macro[m])
            .collect(),
    )
}

/// One-step greedy policy on the source MDP against the lifted macro value.
/// Ties go to the lowest action index.
pub fn macro_greedy_policy(
    mdp: &FiniteMdp,
    model: &AggregateModel,
) -> Result<Policy, AggregationError> {
    let v_hat = model.v_hat().ok_or(AggregationError::NotSolved)?;
    let lifted = lift(v_hat, model.partition());
    Ok(mdp::greedy_policy(mdp, &lifted))
}
