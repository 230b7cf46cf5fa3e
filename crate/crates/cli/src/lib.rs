//! Command-line experiment harness.
//!
//! Three commands, all deterministic functions of `(config, seed)`:
//!
//! - `solve --task N` — exact value iteration on one task's fine grid, plus
//!   an evaluation of the greedy policy.
//! - `selforg` — the six-task / m-module self-organization experiment with
//!   full trace, assignment, partition, and per-sweep performance dumps.
//! - `cluster-demo` — batch and on-line dynamic clustering on a seeded blob
//!   dataset.
//!
//! Every CSV gets a `<name>.meta` sidecar recording the resolved config
//! hash, the seed, and the tool version.

pub mod commands;
pub mod config;
pub mod meta;

pub use config::RunConfig;
