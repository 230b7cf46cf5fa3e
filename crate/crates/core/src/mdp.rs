//! Finite Markov decision processes and exact solvers.
//!
//! An MDP is stored sparsely: each `(state, action)` pair owns a short list
//! of `(successor, probability)` entries. The Bellman backup
//!
//! ```text
//! (B*v)(s) = max_a [ R(s,a) + γ · Σ_s' T(s,a,s') · v(s') ]
//! ```
//!
//! is a γ-contraction in the sup norm, so value iteration converges to the
//! unique fixed point V*; the stopping rule below guarantees
//! `‖B*V − V‖∞ ≤ tol` for the returned V.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::path::Path;

use thiserror::Error;

use crate::pick;

/// Sup-norm tolerance on transition row sums.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// A finite MDP with sparse transition rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    n_states: usize,
    n_actions: usize,
    /// Row for `(s, a)` at index `s * n_actions + a`, sorted by successor.
    transitions: Vec<Vec<(usize, f64)>>,
    /// Reward for `(s, a)` at index `s * n_actions + a`.
    rewards: Vec<f64>,
    discount: f64,
}

impl FiniteMdp {
    /// An MDP with no transitions and zero rewards; fill rows before solving.
    pub fn new(n_states: usize, n_actions: usize, discount: f64) -> Self {
        Self {
            n_states,
            n_actions,
            transitions: vec![Vec::new(); n_states * n_actions],
            rewards: vec![0.0; n_states * n_actions],
            discount,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    fn idx(&self, state: usize, action: usize) -> usize {
        debug_assert!(state < self.n_states && action < self.n_actions);
        state * self.n_actions + action
    }

    /// Replaces the transition row for `(state, action)`; entries are sorted
    /// by successor index.
    pub fn set_row(&mut self, state: usize, action: usize, mut row: Vec<(usize, f64)>) {
        row.sort_by_key(|&(s, _)| s);
        let i = self.idx(state, action);
        self.transitions[i] = row;
    }

    pub fn set_reward(&mut self, state: usize, action: usize, reward: f64) {
        let i = self.idx(state, action);
        self.rewards[i] = reward;
    }

    pub fn row(&self, state: usize, action: usize) -> &[(usize, f64)] {
        &self.transitions[self.idx(state, action)]
    }

    pub fn reward(&self, state: usize, action: usize) -> f64 {
        self.rewards[self.idx(state, action)]
    }

    /// Largest absolute reward over all `(s, a)`.
    pub fn max_abs_reward(&self) -> f64 {
        self.rewards.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn q_value(&self, state: usize, action: usize, values: &[f64]) -> f64 {
        let mut acc = 0.0;
        for &(succ, p) in self.row(state, action) {
            acc += p * values[succ];
        }
        self.reward(state, action) + self.discount * acc
    }

    /// Checks every structural invariant and reports all violations found.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(self.discount >= 0.0 && self.discount < 1.0) {
            out.push(Violation::Discount {
                discount: self.discount,
            });
        }
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let row = self.row(s, a);
                let mut sum = 0.0;
                for (k, &(succ, p)) in row.iter().enumerate() {
                    if succ >= self.n_states {
                        out.push(Violation::BadSuccessor {
                            state: s,
                            action: a,
                            successor: succ,
                        });
                    }
                    if !(p >= 0.0) || !p.is_finite() {
                        out.push(Violation::BadProbability {
                            state: s,
                            action: a,
                            successor: succ,
                            p,
                        });
                    }
                    if k > 0 && row[k - 1].0 == succ {
                        out.push(Violation::DuplicateSuccessor {
                            state: s,
                            action: a,
                            successor: succ,
                        });
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    out.push(Violation::RowSum {
                        state: s,
                        action: a,
                        sum,
                    });
                }
                if !self.reward(s, a).is_finite() {
                    out.push(Violation::BadReward {
                        state: s,
                        action: a,
                        reward: self.reward(s, a),
                    });
                }
            }
        }
        out
    }

    /// Writes `transitions.csv` (`s,a,s',p`) and `rewards.csv` (`s,a,r`).
    /// The discount is not serialized; it travels with the run config.
    pub fn write_csv(&self, transitions: &Path, rewards: &Path) -> io::Result<()> {
        let mut t = io::BufWriter::new(std::fs::File::create(transitions)?);
        writeln!(t, "s,a,s',p")?;
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                for &(succ, p) in self.row(s, a) {
                    writeln!(t, "{s},{a},{succ},{p}")?;
                }
            }
        }
        t.flush()?;
        let mut r = io::BufWriter::new(std::fs::File::create(rewards)?);
        writeln!(r, "s,a,r")?;
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                writeln!(r, "{s},{a},{}", self.reward(s, a))?;
            }
        }
        r.flush()
    }

    /// Loads an MDP from the two CSV files written by [`Self::write_csv`].
    /// State and action counts are inferred from the largest indices seen.
    pub fn read_csv(transitions: &Path, rewards: &Path, discount: f64) -> Result<Self, MdpIoError> {
        let mut triples: Vec<(usize, usize, usize, f64)> = Vec::new();
        for (lineno, line) in read_lines(transitions)?.enumerate() {
            let line = line?;
            if lineno == 0 {
                expect_header(&line, "s,a,s',p", transitions)?;
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let f = split4(&line, transitions, lineno + 1)?;
            triples.push((
                parse_num(f[0], transitions, lineno + 1)?,
                parse_num(f[1], transitions, lineno + 1)?,
                parse_num(f[2], transitions, lineno + 1)?,
                parse_float(f[3], transitions, lineno + 1)?,
            ));
        }
        let mut rews: Vec<(usize, usize, f64)> = Vec::new();
        for (lineno, line) in read_lines(rewards)?.enumerate() {
            let line = line?;
            if lineno == 0 {
                expect_header(&line, "s,a,r", rewards)?;
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 {
                return Err(MdpIoError::Malformed {
                    path: rewards.display().to_string(),
                    line: lineno + 1,
                    what: format!("expected 3 fields, got {}", f.len()),
                });
            }
            rews.push((
                parse_num(f[0], rewards, lineno + 1)?,
                parse_num(f[1], rewards, lineno + 1)?,
                parse_float(f[2], rewards, lineno + 1)?,
            ));
        }
        let n_states = triples
            .iter()
            .flat_map(|&(s, _, s2, _)| [s, s2])
            .chain(rews.iter().map(|&(s, _, _)| s))
            .max()
            .map_or(0, |m| m + 1);
        let n_actions = triples
            .iter()
            .map(|&(_, a, _, _)| a)
            .chain(rews.iter().map(|&(_, a, _)| a))
            .max()
            .map_or(0, |m| m + 1);
        let mut mdp = FiniteMdp::new(n_states, n_actions, discount);
        for (s, a, succ, p) in triples {
            let i = mdp.idx(s, a);
            mdp.transitions[i].push((succ, p));
        }
        for row in &mut mdp.transitions {
            row.sort_by_key(|&(s, _)| s);
        }
        for (s, a, r) in rews {
            mdp.set_reward(s, a, r);
        }
        Ok(mdp)
    }
}

fn read_lines(path: &Path) -> Result<impl Iterator<Item = Result<String, MdpIoError>>, MdpIoError> {
    let file = std::fs::File::open(path).map_err(|e| MdpIoError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let display = path.display().to_string();
    Ok(io::BufReader::new(file).lines().map(move |l| {
        l.map_err(|e| MdpIoError::Io {
            path: display.clone(),
            source: e,
        })
    }))
}

fn expect_header(line: &str, want: &str, path: &Path) -> Result<(), MdpIoError> {
    if line.trim() == want {
        Ok(())
    } else {
        Err(MdpIoError::Malformed {
            path: path.display().to_string(),
            line: 1,
            what: format!("expected header `{want}`, got `{line}`"),
        })
    }
}

fn split4<'a>(line: &'a str, path: &Path, lineno: usize) -> Result<Vec<&'a str>, MdpIoError> {
    let f: Vec<&str> = line.split(',').collect();
    if f.len() == 4 {
        Ok(f)
    } else {
        Err(MdpIoError::Malformed {
            path: path.display().to_string(),
            line: lineno,
            what: format!("expected 4 fields, got {}", f.len()),
        })
    }
}

fn parse_num(s: &str, path: &Path, lineno: usize) -> Result<usize, MdpIoError> {
    s.trim().parse().map_err(|_| MdpIoError::Malformed {
        path: path.display().to_string(),
        line: lineno,
        what: format!("bad index `{s}`"),
    })
}

fn parse_float(s: &str, path: &Path, lineno: usize) -> Result<f64, MdpIoError> {
    s.trim().parse().map_err(|_| MdpIoError::Malformed {
        path: path.display().to_string(),
        line: lineno,
        what: format!("bad number `{s}`"),
    })
}

/// A real-valued function on the state set.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction(pub Vec<f64>);

impl ValueFunction {
    pub fn zeros(n: usize) -> Self {
        ValueFunction(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Sup-norm distance to another value function of the same length.
    pub fn sup_distance(&self, other: &ValueFunction) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl std::ops::Index<usize> for ValueFunction {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A deterministic stationary policy: one action index per state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy(pub Vec<usize>);

impl Policy {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Index<usize> for Policy {
    type Output = usize;
    fn index(&self, i: usize) -> &usize {
        &self.0[i]
    }
}

/// One structural invariant violation, with its location.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    RowSum { state: usize, action: usize, sum: f64 },
    BadSuccessor { state: usize, action: usize, successor: usize },
    DuplicateSuccessor { state: usize, action: usize, successor: usize },
    BadProbability { state: usize, action: usize, successor: usize, p: f64 },
    BadReward { state: usize, action: usize, reward: f64 },
    Discount { discount: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RowSum { state, action, sum } => {
                write!(f, "row sum {sum} != 1 at ({state},{action})")
            }
            Violation::BadSuccessor { state, action, successor } => {
                write!(f, "successor {successor} out of range at ({state},{action})")
            }
            Violation::DuplicateSuccessor { state, action, successor } => {
                write!(f, "duplicate successor {successor} at ({state},{action})")
            }
            Violation::BadProbability { state, action, successor, p } => {
                write!(f, "bad probability {p} for successor {successor} at ({state},{action})")
            }
            Violation::BadReward { state, action, reward } => {
                write!(f, "non-finite reward {reward} at ({state},{action})")
            }
            Violation::Discount { discount } => {
                write!(f, "discount {discount} not < 1")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("tolerance {0} must be positive and finite")]
    BadTolerance(f64),
    #[error(
        "no convergence within {max_iter} iterations (last sup-norm change {residual:.3e}, tol {tol:.3e})"
    )]
    NotConverged {
        max_iter: usize,
        residual: f64,
        tol: f64,
    },
}

#[derive(Debug, Error)]
pub enum MdpIoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {what}")]
    Malformed { path: String, line: usize, what: String },
}

/// One application of the optimal Bellman backup `B*`.
pub fn bellman_backup(mdp: &FiniteMdp, v: &ValueFunction) -> ValueFunction {
    debug_assert_eq!(v.len(), mdp.n_states());
    let mut out = vec![0.0; mdp.n_states()];
    for (s, slot) in out.iter_mut().enumerate() {
        let mut best = f64::NEG_INFINITY;
        for a in 0..mdp.n_actions() {
            best = best.max(mdp.q_value(s, a, v.as_slice()));
        }
        *slot = best;
    }
    ValueFunction(out)
}

/// Sup-norm change threshold under which the final Bellman residual is
/// at most `tol`: stopping at `‖V_{k+1} − V_k‖∞ ≤ tol(1−γ)/γ` gives
/// `‖B*V_{k+1} − V_{k+1}‖∞ ≤ γ‖V_{k+1} − V_k‖∞ ≤ tol(1−γ) ≤ tol`,
/// and also `‖V_{k+1} − V*‖∞ ≤ tol`.
pub(crate) fn stop_threshold(tol: f64, discount: f64) -> f64 {
    if discount > 0.0 {
        tol * (1.0 - discount) / discount
    } else {
        f64::INFINITY
    }
}

/// Iterates `B*` from zero until the sup-norm change passes the γ-scaled
/// stopping test. Returns the value function and the iteration count.
pub fn value_iteration(
    mdp: &FiniteMdp,
    tol: f64,
    max_iter: usize,
) -> Result<(ValueFunction, usize), SolveError> {
    value_iteration_from(mdp, ValueFunction::zeros(mdp.n_states()), tol, max_iter)
}

/// Value iteration from an arbitrary starting vector.
pub fn value_iteration_from(
    mdp: &FiniteMdp,
    init: ValueFunction,
    tol: f64,
    max_iter: usize,
) -> Result<(ValueFunction, usize), SolveError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(SolveError::BadTolerance(tol));
    }
    let threshold = stop_threshold(tol, mdp.discount());
    let mut v = init;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let next = bellman_backup(mdp, &v);
        residual = next.sup_distance(&v);
        v = next;
        if residual <= threshold {
            return Ok((v, it));
        }
    }
    Err(SolveError::NotConverged {
        max_iter,
        residual,
        tol,
    })
}

/// Greedy policy of a value function; ties go to the lowest action index.
pub fn greedy_policy(mdp: &FiniteMdp, v: &ValueFunction) -> Policy {
    let mut actions = Vec::with_capacity(mdp.n_states());
    for s in 0..mdp.n_states() {
        let a = pick::argmax((0..mdp.n_actions()).map(|a| mdp.q_value(s, a, v.as_slice())))
            .expect("MDP has at least one action");
        actions.push(a);
    }
    Policy(actions)
}

/// Value of a fixed policy, by iterating the policy-restricted backup with
/// the same γ-scaled stopping rule as [`value_iteration`].
pub fn policy_value(
    mdp: &FiniteMdp,
    policy: &Policy,
    tol: f64,
    max_iter: usize,
) -> Result<(ValueFunction, usize), SolveError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(SolveError::BadTolerance(tol));
    }
    debug_assert_eq!(policy.len(), mdp.n_states());
    let threshold = stop_threshold(tol, mdp.discount());
    let mut v = vec![0.0; mdp.n_states()];
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let mut next = vec![0.0; mdp.n_states()];
        for (s, slot) in next.iter_mut().enumerate() {
            *slot = mdp.q_value(s, policy[s], &v);
        }
        residual = next
            .iter()
            .zip(&v)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        v = next;
        if residual <= threshold {
            return Ok((ValueFunction(v), it));
        }
    }
    Err(SolveError::NotConverged {
        max_iter,
        residual,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_state(reward: f64, discount: f64) -> FiniteMdp {
        let mut m = FiniteMdp::new(1, 1, discount);
        m.set_row(0, 0, vec![(0, 1.0)]);
        m.set_reward(0, 0, reward);
        m
    }

    /// s0 --a0, p=1--> s1 (absorbing). R(s0,a0)=0, R(s1,a0)=1.
    fn two_chain() -> FiniteMdp {
        let mut m = FiniteMdp::new(2, 1, 0.9);
        m.set_row(0, 0, vec![(1, 1.0)]);
        m.set_row(1, 0, vec![(1, 1.0)]);
        m.set_reward(1, 0, 1.0);
        m
    }

    #[test]
    fn validate_accepts_identity_case() {
        assert!(one_state(0.0, 0.9).validate().is_empty());
    }

    #[test]
    fn validate_reports_row_sum() {
        let mut m = one_state(0.0, 0.9);
        m.set_row(0, 0, vec![(0, 0.5)]);
        let v = m.validate();
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::RowSum { state: 0, action: 0, .. }));
        assert!(v[0].to_string().contains("row sum 0.5"));
    }

    #[test]
    fn validate_reports_discount() {
        let m = one_state(0.0, 1.0);
        assert!(m
            .validate()
            .iter()
            .any(|v| matches!(v, Violation::Discount { .. })));
    }

    #[test]
    fn validate_reports_duplicates_and_range() {
        let mut m = FiniteMdp::new(2, 1, 0.5);
        m.set_row(0, 0, vec![(0, 0.5), (0, 0.5)]);
        m.set_row(1, 0, vec![(7, 1.0)]);
        let v = m.validate();
        assert!(v
            .iter()
            .any(|x| matches!(x, Violation::DuplicateSuccessor { state: 0, .. })));
        assert!(v
            .iter()
            .any(|x| matches!(x, Violation::BadSuccessor { state: 1, successor: 7, .. })));
    }

    #[test]
    fn backup_examples() {
        let m = one_state(1.0, 0.9);
        assert_eq!(bellman_backup(&m, &ValueFunction(vec![0.0])).0, vec![1.0]);
        assert_eq!(bellman_backup(&m, &ValueFunction(vec![10.0])).0, vec![10.0]);
        let c = two_chain();
        assert_eq!(
            bellman_backup(&c, &ValueFunction(vec![0.0, 0.0])).0,
            vec![0.0, 1.0]
        );
    }

    #[test]
    fn value_iteration_analytic_fixed_points() {
        let (v, _) = value_iteration(&one_state(1.0, 0.9), 1e-8, 100_000).unwrap();
        assert!((v[0] - 10.0).abs() < 1e-6);
        let (v, _) = value_iteration(&two_chain(), 1e-8, 100_000).unwrap();
        assert!((v[0] - 9.0).abs() < 1e-6);
        assert!((v[1] - 10.0).abs() < 1e-6);
    }

    #[test]
    fn value_iteration_residual_contract() {
        let m = two_chain();
        let (v, _) = value_iteration(&m, 1e-6, 100_000).unwrap();
        assert!(bellman_backup(&m, &v).sup_distance(&v) <= 1e-6);
    }

    #[test]
    fn value_iteration_reports_non_convergence() {
        let err = value_iteration(&one_state(1.0, 0.9), 1e-10, 3).unwrap_err();
        assert!(matches!(err, SolveError::NotConverged { max_iter: 3, .. }));
    }

    #[test]
    fn greedy_breaks_ties_low() {
        let mut m = FiniteMdp::new(1, 2, 0.9);
        for a in 0..2 {
            m.set_row(0, a, vec![(0, 1.0)]);
            m.set_reward(0, a, 1.0);
        }
        let pi = greedy_policy(&m, &ValueFunction(vec![0.0]));
        assert_eq!(pi.0, vec![0]);
    }

    #[test]
    fn greedy_prefers_strictly_better_q() {
        // Chain plus a zero-reward self-loop action at s0.
        let mut m = FiniteMdp::new(2, 2, 0.9);
        m.set_row(0, 0, vec![(0, 1.0)]); // self-loop
        m.set_row(0, 1, vec![(1, 1.0)]); // chain action
        m.set_row(1, 0, vec![(1, 1.0)]);
        m.set_row(1, 1, vec![(1, 1.0)]);
        m.set_reward(1, 0, 1.0);
        m.set_reward(1, 1, 1.0);
        let v = ValueFunction(vec![0.0, 10.0]);
        let pi = greedy_policy(&m, &v);
        assert_eq!(pi[0], 1);
    }

    #[test]
    fn policy_value_trivials() {
        let (v, _) = policy_value(&one_state(1.0, 0.9), &Policy(vec![0]), 1e-8, 100_000).unwrap();
        assert!((v[0] - 10.0).abs() < 1e-6);
        let (v, _) = policy_value(&two_chain(), &Policy(vec![0, 0]), 1e-8, 100_000).unwrap();
        assert!((v[0] - 9.0).abs() < 1e-6);
        assert!((v[1] - 10.0).abs() < 1e-6);
    }

    #[test]
    fn csv_round_trip() {
        let dir = std::env::temp_dir().join(format!("somdp-mdp-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let t = dir.join("transitions.csv");
        let r = dir.join("rewards.csv");
        let m = two_chain();
        m.write_csv(&t, &r).unwrap();
        let back = FiniteMdp::read_csv(&t, &r, m.discount()).unwrap();
        assert_eq!(m, back);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn csv_requires_header() {
        let dir = std::env::temp_dir().join(format!("somdp-mdp-hdr-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let t = dir.join("transitions.csv");
        let r = dir.join("rewards.csv");
        std::fs::write(&t, "0,0,0,1.0\n").unwrap();
        std::fs::write(&r, "s,a,r\n0,0,0.0\n").unwrap();
        assert!(matches!(
            FiniteMdp::read_csv(&t, &r, 0.9),
            Err(MdpIoError::Malformed { line: 1, .. })
        ));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
