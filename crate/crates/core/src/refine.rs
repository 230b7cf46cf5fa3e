//! Influence-guided partition refinement under a macro-count budget.
//!
//! One learn step splits the splittable macro with the highest refinement
//! score (re-scoring between consecutive splits, since influence shifts
//! once the partition changes), then merges lowest-score sibling pairs
//! while the macro count exceeds the budget.

use crate::aggregation::{AggregationError, Partition, SplitRule};
use crate::bounds::{error_report, ErrorConfig, ErrorReport};
use crate::mdp::FiniteMdp;

/// Settings for one learn step.
#[derive(Debug, Clone, Copy)]
pub struct RefineConfig {
    /// Hard cap on the macro count after the step.
    pub budget: usize,
    /// Number of split attempts per call.
    pub splits_per_call: usize,
    pub error: ErrorConfig,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            budget: 400,
            splits_per_call: 1,
            error: ErrorConfig::default(),
        }
    }
}

/// Result of one learn step.
#[derive(Debug, Clone)]
pub struct LearnStep {
    pub partition: Partition,
    /// Error report for the returned partition.
    pub report: ErrorReport,
    /// True when no macro could be split, so the partition is unchanged.
    pub saturated: bool,
}

/// Macro indices ordered by descending score, ascending index on ties.
fn by_score_desc(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| {
        scores[j]
            .partial_cmp(&scores[i])
            .expect("scores are finite")
            .then(i.cmp(&j))
    });
    order
}

/// One refinement step of `partition` toward `mdp`.
///
/// Budget enforcement never re-merges a pair this call just created: a
/// fresh split's children carry reduced spreads and would otherwise be the
/// cheapest merge, turning every saturated learn step into a no-op instead
/// of relocating resolution. Created pairs are only merged as a last
/// resort, when no other sibling pair exists.
pub fn learn_step(
    mdp: &FiniteMdp,
    partition: &Partition,
    rule: &dyn SplitRule,
    cfg: &RefineConfig,
) -> Result<LearnStep, AggregationError> {
    assert!(cfg.budget >= 1 && cfg.splits_per_call >= 1);
    let mut part = partition.clone();
    let mut report = error_report(mdp, &part, &cfg.error)?;
    let mut split_parents: Vec<Vec<usize>> = Vec::new();

    for _ in 0..cfg.splits_per_call {
        let mut split_done = false;
        for &m in &by_score_desc(&report.scores) {
            if part.members(m).len() < 2 {
                continue;
            }
            let parent_members = part.members(m).to_vec();
            match part.split_macro(m, rule) {
                Ok(next) => {
                    part = next;
                    split_parents.push(parent_members);
                    split_done = true;
                    break;
                }
                Err(_) => continue, // rule refused this macro; try the next
            }
        }
        if !split_done {
            break;
        }
        report = error_report(mdp, &part, &cfg.error)?;
    }

    if split_parents.is_empty() {
        return Ok(LearnStep {
            partition: part,
            report,
            saturated: true,
        });
    }

    while part.n_macros() > cfg.budget {
        let reunites_fresh_split = |a: usize, b: usize| {
            let mut union: Vec<usize> = part
                .members(a)
                .iter()
                .chain(part.members(b))
                .copied()
                .collect();
            union.sort_unstable();
            split_parents.contains(&union)
        };
        let pairs = part.sibling_pairs();
        let cheapest = |candidates: &[(usize, usize)]| {
            candidates
                .iter()
                .min_by(|&&(a1, b1), &&(a2, b2)| {
                    let s1 = report.scores[a1] + report.scores[b1];
                    let s2 = report.scores[a2] + report.scores[b2];
                    s1.partial_cmp(&s2)
                        .expect("scores are finite")
                        .then((a1, b1).cmp(&(a2, b2)))
                })
                .copied()
        };
        let preferred: Vec<(usize, usize)> = pairs
            .iter()
            .filter(|&&(a, b)| !reunites_fresh_split(a, b))
            .copied()
            .collect();
        let Some((a, b)) = cheapest(&preferred).or_else(|| cheapest(&pairs)) else {
            break; // no mergeable pair left; budget cannot be enforced further
        };
        part = part.merge_macros(a, b)?;
        report = error_report(mdp, &part, &cfg.error)?;
    }

    Ok(LearnStep {
        partition: part,
        report,
        saturated: false,
    })
}
