//! The three commands, as library functions so tests can call them and
//! inspect the artifacts they return.

mod cluster_demo;
mod selforg;
mod solve;

pub use cluster_demo::{cmd_cluster_demo, demo_points};
pub use selforg::{cmd_selforg, PerfRow, SelforgArtifacts};
pub use solve::cmd_solve;

use anyhow::{Context, Result};
use somdp_core::nav::{NavGeometry, NavWorld};

use crate::config::RunConfig;

/// Builds the world from the config: geometry from file when given,
/// canonical otherwise.
pub fn build_world(cfg: &RunConfig) -> Result<NavWorld> {
    let geometry = match &cfg.geometry_path {
        Some(path) => NavGeometry::from_file(path)
            .with_context(|| format!("loading geometry {}", path.display()))?,
        None => NavGeometry::canonical(),
    };
    NavWorld::new(geometry, cfg.env).context("building the navigation grid")
}

pub(crate) fn ensure_output_dir(cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("creating output dir {}", cfg.output_dir.display()))
}
