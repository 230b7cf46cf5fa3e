//! Independent oracle implementations shared by the integration tests.
//!
//! Everything here is written against the crate's public *data* accessors
//! only (rows, rewards, discount), never its solver paths, so the oracles
//! stay independent of what they check.

#![allow(dead_code)]

use somdp_core::mdp::FiniteMdp;

/// Dense one-step optimal backup, written out longhand.
pub fn naive_backup(mdp: &FiniteMdp, v: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(mdp.n_states());
    for s in 0..mdp.n_states() {
        let mut best = f64::NEG_INFINITY;
        for a in 0..mdp.n_actions() {
            let mut q = mdp.reward(s, a);
            for &(succ, p) in mdp.row(s, a) {
                q += mdp.discount() * p * v[succ];
            }
            if q > best {
                best = q;
            }
        }
        out.push(best);
    }
    out
}

/// Brute-force fixed point: iterate the naive backup a fixed large number
/// of times from zero.
pub fn brute_force_v_star(mdp: &FiniteMdp, iterations: usize) -> Vec<f64> {
    let mut v = vec![0.0; mdp.n_states()];
    for _ in 0..iterations {
        v = naive_backup(mdp, &v);
    }
    v
}

/// Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        assert!(a[col][col].abs() > 1e-12, "singular system");
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x
}

/// Exact policy value by solving the dense linear system (I − γ·T_π)V = R_π.
pub fn policy_value_linear(mdp: &FiniteMdp, policy: &[usize]) -> Vec<f64> {
    let n = mdp.n_states();
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for s in 0..n {
        a[s][s] = 1.0;
        for &(succ, p) in mdp.row(s, policy[s]) {
            a[s][succ] -= mdp.discount() * p;
        }
        b[s] = mdp.reward(s, policy[s]);
    }
    gauss_solve(a, b)
}

/// Every deterministic policy of a small MDP, in counting order.
pub fn all_policies(n_states: usize, n_actions: usize) -> Vec<Vec<usize>> {
    let total = n_actions.pow(n_states as u32);
    let mut out = Vec::with_capacity(total);
    for mut code in 0..total {
        let mut pi = Vec::with_capacity(n_states);
        for _ in 0..n_states {
            pi.push(code % n_actions);
            code /= n_actions;
        }
        out.push(pi);
    }
    out
}

pub fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}
