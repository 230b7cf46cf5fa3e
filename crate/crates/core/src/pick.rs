//! Deterministic argmax/argmin with tolerance-based tie handling.
//!
//! Every selection in this crate (greedy actions, kernel assignment, module
//! choice, split candidates) breaks ties by lowest index. Scores that differ
//! by less than [`TIE_TOL`] count as tied, so that last-ulp rounding noise in
//! otherwise identical floating-point sums cannot overturn the rule.

/// Scores within this distance are treated as equal; the lowest index wins.
pub const TIE_TOL: f64 = 1e-9;

/// Index of the largest score, lowest index on ties. `None` for empty input.
pub fn argmax(scores: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.into_iter().enumerate() {
        match best {
            None => best = Some((i, s)),
            Some((_, b)) if s > b + TIE_TOL => best = Some((i, s)),
            _ => {}
        }
    }
    best.map(|(i, _)| i)
}

/// Index of the smallest score, lowest index on ties. `None` for empty input.
pub fn argmin(scores: impl IntoIterator<Item = f64>) -> Option<usize> {
    argmax(scores.into_iter().map(|s| -s))
}
