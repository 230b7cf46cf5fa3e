//! Sanity path for the clustering machinery: batch and on-line dynamic
//! clustering of a seeded two-blob point set.

use std::fmt::Write as _;

use anyhow::{anyhow, Result};
use somdp_core::cluster::{
    batch_dynamic_cluster, online_dynamic_cluster, write_trace_csv, OnlineOptions,
    VectorQuantization, VqMetric,
};
use somdp_core::synth::gaussian_blobs;

use crate::config::RunConfig;
use crate::meta::write_with_meta;

use super::ensure_output_dir;

pub const BLOB_CENTERS: [[f64; 2]; 2] = [[2.0, 2.0], [8.0, 8.0]];
pub const POINTS_PER_BLOB: usize = 5;

/// The demo's dataset for a seed.
pub fn demo_points(seed: u64) -> Vec<Vec<f64>> {
    gaussian_blobs(seed, &BLOB_CENTERS, POINTS_PER_BLOB, 0.6)
}

/// Runs both clustering variants and writes `cluster_batch.csv` and
/// `cluster_online.csv`. Returns (batch assignment, online assignment).
pub fn cmd_cluster_demo(cfg: &RunConfig) -> Result<(Vec<usize>, Vec<usize>)> {
    let data = demo_points(cfg.seed);
    let vq = VectorQuantization::new(VqMetric::SquaredEuclidean, 0.2);

    // Batch, from an interleaved (deliberately bad) initial partition.
    let mut init = vec![Vec::new(), Vec::new()];
    for i in 0..data.len() {
        init[i % 2].push(i);
    }
    let batch = batch_dynamic_cluster(&vq, &data, &init, 1000).map_err(|e| anyhow!(e))?;

    // On-line, from the first point of each blob.
    let kernels = vec![data[0].clone(), data[POINTS_PER_BLOB].clone()];
    let online = online_dynamic_cluster(
        &vq,
        &data,
        kernels,
        &OnlineOptions {
            seed: cfg.seed,
            tol: 1e-9,
            max_sweeps: 50,
        },
    );

    ensure_output_dir(cfg)?;
    let mut batch_csv = String::from("iteration,distortion\n");
    for (i, d) in batch.distortion_history.iter().enumerate() {
        let _ = writeln!(batch_csv, "{i},{d}");
    }
    write_with_meta(
        &cfg.output_dir.join("cluster_batch.csv"),
        batch_csv.as_bytes(),
        cfg,
    )?;

    let mut online_csv = Vec::new();
    write_trace_csv(&online.records, &mut online_csv)?;
    write_with_meta(&cfg.output_dir.join("cluster_online.csv"), &online_csv, cfg)?;

    println!(
        "batch: {} iterations, distortion {:.4}; online: {} sweeps, distortion {:.4}",
        batch.iterations, batch.state.distortion, online.sweeps, online.state.distortion
    );
    Ok((batch.state.assignment, online.state.assignment))
}
