//! Seeded generators for random MDPs, partitions, and 2-D point clouds.
//!
//! These feed the clustering demo and the verification harnesses. Every
//! generator is a pure function of its seed.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::aggregation::Partition;
use crate::mdp::FiniteMdp;
use crate::seeding::stream_rng;

/// A random sparse MDP: each `(s, a)` row has 2–4 distinct successors with
/// normalized positive probabilities; rewards are uniform in [−1, 1].
pub fn random_mdp(seed: u64, n_states: usize, n_actions: usize, discount: f64) -> FiniteMdp {
    assert!(n_states >= 1 && n_actions >= 1);
    let mut rng = stream_rng(seed, 0);
    let mut mdp = FiniteMdp::new(n_states, n_actions, discount);
    let mut states: Vec<usize> = (0..n_states).collect();
    for s in 0..n_states {
        for a in 0..n_actions {
            let k = rng.gen_range(2..=4).min(n_states);
            states.shuffle(&mut rng);
            let mut row: Vec<(usize, f64)> = states[..k]
                .iter()
                .map(|&succ| (succ, rng.gen_range(0.1..1.0)))
                .collect();
            let total: f64 = row.iter().map(|&(_, w)| w).sum();
            for entry in &mut row {
                entry.1 /= total;
            }
            mdp.set_row(s, a, row);
            mdp.set_reward(s, a, rng.gen_range(-1.0..1.0));
        }
    }
    mdp
}

/// A random MDP with ring-local transitions: each `(s, a)` spreads its mass
/// over the states within `window` of `s` (mod `n_states`), with random
/// positive weights; rewards are uniform in [−1, 1]. Locality in the index
/// makes contiguous-block partitions meaningful, which is the regime the
/// aggregation bounds are designed for.
pub fn random_local_mdp(
    seed: u64,
    n_states: usize,
    n_actions: usize,
    discount: f64,
    window: usize,
) -> FiniteMdp {
    assert!(n_states >= 1 && n_actions >= 1);
    let mut rng = stream_rng(seed, 3);
    let mut mdp = FiniteMdp::new(n_states, n_actions, discount);
    let window = window as isize;
    for s in 0..n_states {
        for a in 0..n_actions {
            let mut row: Vec<(usize, f64)> = Vec::new();
            for d in -window..=window {
                let succ = (s as isize + d).rem_euclid(n_states as isize) as usize;
                let w: f64 = rng.gen_range(0.05..1.0);
                match row.iter_mut().find(|(x, _)| *x == succ) {
                    Some(entry) => entry.1 += w,
                    None => row.push((succ, w)),
                }
            }
            let total: f64 = row.iter().map(|&(_, w)| w).sum();
            for entry in &mut row {
                entry.1 /= total;
            }
            mdp.set_row(s, a, row);
            mdp.set_reward(s, a, rng.gen_range(-1.0..1.0));
        }
    }
    mdp
}

/// A random partition into `n_macros` non-empty macro-states.
pub fn random_partition(seed: u64, n_states: usize, n_macros: usize) -> Partition {
    assert!(n_macros >= 1 && n_macros <= n_states);
    let mut rng = stream_rng(seed, 1);
    let mut order: Vec<usize> = (0..n_states).collect();
    order.shuffle(&mut rng);
    let mut assignment = vec![0usize; n_states];
    // First one state per macro, so none is empty; the rest land anywhere.
    for (m, &s) in order.iter().take(n_macros).enumerate() {
        assignment[s] = m;
    }
    for &s in order.iter().skip(n_macros) {
        assignment[s] = rng.gen_range(0..n_macros);
    }
    Partition::from_assignment(assignment).expect("generated assignment is well-formed")
}

/// Gaussian blobs in the plane: `per_blob` points around each center.
pub fn gaussian_blobs(seed: u64, centers: &[[f64; 2]], per_blob: usize, spread: f64) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(seed, 2);
    let mut points = Vec::with_capacity(centers.len() * per_blob);
    for c in centers {
        for _ in 0..per_blob {
            points.push(vec![
                c[0] + spread * standard_normal(&mut rng),
                c[1] + spread * standard_normal(&mut rng),
            ]);
        }
    }
    points
}

/// Box–Muller transform on two uniform draws.
fn standard_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
