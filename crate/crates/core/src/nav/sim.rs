//! Seeded episode simulation and policy evaluation on a task MDP.

use std::io::{self, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::mdp::{FiniteMdp, Policy};
use crate::seeding::{self, stream_rng, streams};

/// Outcome of one simulated episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Episode {
    /// Undiscounted sum of the expected per-step rewards R(s, π(s)).
    pub reward: f64,
    pub steps: usize,
    /// True when the terminal state was entered before the step cap.
    pub reached: bool,
}

/// Runs one episode: sample successors from T(s, π(s), ·) with a generator
/// seeded by `seed`, until the terminal state or `cap` steps.
pub fn simulate_episode(
    mdp: &FiniteMdp,
    policy: &Policy,
    start: usize,
    terminal: usize,
    seed: u64,
    cap: usize,
) -> Episode {
    let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
    let mut state = start;
    let mut reward = 0.0;
    for step in 1..=cap {
        let action = policy[state];
        reward += mdp.reward(state, action);
        state = sample_successor(mdp, state, action, &mut rng);
        if state == terminal {
            return Episode {
                reward,
                steps: step,
                reached: true,
            };
        }
    }
    Episode {
        reward,
        steps: cap,
        reached: false,
    }
}

fn sample_successor(mdp: &FiniteMdp, state: usize, action: usize, rng: &mut ChaCha8Rng) -> usize {
    let row = mdp.row(state, action);
    debug_assert!(!row.is_empty());
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(succ, p) in row {
        acc += p;
        if u < acc {
            return succ;
        }
    }
    row.last().unwrap().0
}

/// Mean episode statistics over a batch of runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSummary {
    pub mean_reward: f64,
    pub success_rate: f64,
    pub runs: usize,
}

/// Runs `runs` episodes from starts drawn uniformly (seeded) out of
/// `starts`; episode `e` uses the derived seed `mix(seed, e)`.
pub fn evaluate(
    mdp: &FiniteMdp,
    policy: &Policy,
    starts: &[usize],
    terminal: usize,
    runs: usize,
    cap: usize,
    seed: u64,
) -> EvalSummary {
    assert!(runs >= 1, "need at least one run");
    assert!(!starts.is_empty(), "no start states");
    let mut start_rng = stream_rng(seed, streams::EVAL_STARTS);
    let mut reward_sum = 0.0;
    let mut successes = 0usize;
    for e in 0..runs {
        let start = starts[start_rng.gen_range(0..starts.len())];
        let ep = simulate_episode(mdp, policy, start, terminal, seeding::mix(seed, e as u64), cap);
        reward_sum += ep.reward;
        successes += ep.reached as usize;
    }
    EvalSummary {
        mean_reward: reward_sum / runs as f64,
        success_rate: successes as f64 / runs as f64,
        runs,
    }
}

/// One row of the evaluation CSV.
#[derive(Debug, Clone)]
pub struct EvalRow {
    pub task: usize,
    pub policy_tag: String,
    pub summary: EvalSummary,
}

/// Writes the `task,policy_tag,runs,mean_reward,success_rate` CSV.
pub fn write_eval_csv<W: Write>(rows: &[EvalRow], mut w: W) -> io::Result<()> {
    writeln!(w, "task,policy_tag,runs,mean_reward,success_rate")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.task, r.policy_tag, r.summary.runs, r.summary.mean_reward, r.summary.success_rate
        )?;
    }
    Ok(())
}
