//! A continuous two-room navigation world, discretized into task MDPs.
//!
//! The environment is the square (0,10)². An agent moves with eight unit
//! directions of amplitude 0.1, corrupted by noise of amplitude 0.03 in a
//! quantized random direction. Hitting a wall or the boundary keeps it in
//! place and costs −1; landing inside the goal circle pays +1 and ends the
//! episode; everything else is free. Discretization maps each free grid
//! cell to a state (plus one absorbing terminal) and averages the noise
//! directions by quadrature, so building a task MDP involves no sampling.

mod geometry;
mod sim;
mod world;

pub use geometry::{Circle, GeometryError, NavGeometry, Rect};
pub use sim::{evaluate, simulate_episode, write_eval_csv, Episode, EvalRow, EvalSummary};
pub use world::{GridSplit, NavConfig, NavGrid, NavWorld, TaskSpec, MOVE_DIRS};
