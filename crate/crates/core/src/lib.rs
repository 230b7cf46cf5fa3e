//! Planning toolkit in which a small set of adaptive state-aggregation
//! modules organizes itself over a larger set of finite-MDP tasks.
//!
//! The crate is layered bottom-up:
//!
//! - [`mdp`] — exact finite MDPs, Bellman backup, value iteration, policy
//!   evaluation.
//! - [`aggregation`] — partitions of the state set, averaged macro-level
//!   parameters, and the solvable macro model.
//! - [`bounds`] — computable upper bounds on the aggregation error, the
//!   error policy, per-macro influence, and the scalar module/task distance.
//! - [`refine`] — influence-guided partition refinement under a macro budget.
//! - [`cluster`] — generic kernel clustering (batch and on-line dynamic
//!   cluster) plus a vector-quantization instance.
//! - [`selforg`] — the on-line clustering loop over tasks with modules as
//!   kernels, the error bound as distance, and refinement as kernel update.
//! - [`nav`] — a stochastic two-room navigation world discretized into task
//!   MDPs, with episode simulation and seeded policy evaluation.
//! - [`synth`] — seeded generators for random MDPs, partitions, and point
//!   clouds used by demos and test harnesses.

pub mod aggregation;
pub mod bounds;
pub mod cluster;
pub mod mdp;
pub mod nav;
pub mod pick;
pub mod refine;
pub mod seeding;
pub mod selforg;
pub mod synth;

pub use pick::TIE_TOL;
