//! Generic kernel clustering: data points and kernels may live in different
//! spaces, linked only by a distance function.
//!
//! Two optimizers are provided. The batch dynamic-cluster loop alternates a
//! kernel fit per cluster with a full reassignment until the partition stops
//! changing; with vectors, squared Euclidean distance, and mean fitting it
//! is exactly batch k-means. The on-line loop visits points in a seeded
//! shuffled order and nudges each point's best kernel toward it, which is
//! the form the module/task self-organization instantiates.

use std::io::{self, Write};

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::pick;
use crate::seeding::{stream_rng, streams};

/// Distance between any data point and any kernel. The point index is
/// passed alongside the point so problems may cache per-point work.
pub trait KernelDistance {
    type Point;
    type Kernel;
    fn distance(&self, point_index: usize, point: &Self::Point, kernel: &Self::Kernel) -> f64;
}

/// Batch fitting: the best kernel for a whole cluster of points.
pub trait KernelFit: KernelDistance {
    /// `None` when this problem has no tractable batch fit.
    fn fit(&self, members: &[usize], data: &[Self::Point]) -> Option<Self::Kernel>;
}

/// On-line update: move a kernel so its distance to one point shrinks.
pub trait KernelUpdate: KernelDistance {
    fn update(&self, kernel: &mut Self::Kernel, point_index: usize, point: &Self::Point);
}

/// Kernels plus a consistent point assignment and its distortion.
#[derive(Debug, Clone)]
pub struct ClusteringState<K> {
    pub kernels: Vec<K>,
    pub assignment: Vec<usize>,
    pub distortion: f64,
}

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("this problem provides no batch kernel fit")]
    FitUnsupported,
    #[error("bad initial partition: {0}")]
    BadInit(String),
}

/// Index of the kernel closest to the point; lowest index on ties.
pub fn assign<P: KernelDistance>(
    problem: &P,
    point_index: usize,
    point: &P::Point,
    kernels: &[P::Kernel],
) -> usize {
    pick::argmin(
        kernels
            .iter()
            .map(|k| problem.distance(point_index, point, k)),
    )
    .expect("at least one kernel")
}

/// Total distance of every point to its assigned kernel.
pub fn distortion<P: KernelDistance>(
    problem: &P,
    data: &[P::Point],
    kernels: &[P::Kernel],
    assignment: &[usize],
) -> f64 {
    data.iter()
        .zip(assignment)
        .enumerate()
        .map(|(i, (x, &j))| problem.distance(i, x, &kernels[j]))
        .sum()
}

fn min_distortion<P: KernelDistance>(problem: &P, data: &[P::Point], kernels: &[P::Kernel]) -> f64 {
    data.iter()
        .enumerate()
        .map(|(i, x)| {
            kernels
                .iter()
                .map(|k| problem.distance(i, x, k))
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

/// Result of the batch dynamic-cluster loop.
#[derive(Debug, Clone)]
pub struct BatchResult<K> {
    pub state: ClusteringState<K>,
    /// Reassignment rounds performed.
    pub iterations: usize,
    /// False when `max_iter` elapsed with the partition still moving.
    pub converged: bool,
    /// Distortion after the initial fit, then after every reassignment.
    pub distortion_history: Vec<f64>,
    /// Kernels after every fit, starting with the fit of the initial
    /// partition.
    pub kernel_history: Vec<Vec<K>>,
}

/// Alternates kernel fitting and reassignment from an initial partition of
/// the point indices, until the partition repeats or `max_iter` is reached.
pub fn batch_dynamic_cluster<P: KernelFit>(
    problem: &P,
    data: &[P::Point],
    init: &[Vec<usize>],
    max_iter: usize,
) -> Result<BatchResult<P::Kernel>, ClusterError>
where
    P::Kernel: Clone,
{
    if init.is_empty() {
        return Err(ClusterError::BadInit("no clusters".into()));
    }
    let mut assignment = vec![usize::MAX; data.len()];
    for (j, members) in init.iter().enumerate() {
        if members.is_empty() {
            return Err(ClusterError::BadInit(format!("cluster {j} is empty")));
        }
        for &i in members {
            if i >= data.len() || assignment[i] != usize::MAX {
                return Err(ClusterError::BadInit(format!(
                    "point {i} missing, repeated, or out of range"
                )));
            }
            assignment[i] = j;
        }
    }
    if assignment.contains(&usize::MAX) {
        return Err(ClusterError::BadInit("partition does not cover the data".into()));
    }

    let mut kernels: Vec<P::Kernel> = Vec::with_capacity(init.len());
    for members in init {
        kernels.push(problem.fit(members, data).ok_or(ClusterError::FitUnsupported)?);
    }
    let mut kernel_history = vec![kernels.clone()];
    let mut history = vec![distortion(problem, data, &kernels, &assignment)];
    let mut members_of = vec![Vec::new(); init.len()];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        let next: Vec<usize> = data
            .iter()
            .enumerate()
            .map(|(i, x)| assign(problem, i, x, &kernels))
            .collect();
        history.push(distortion(problem, data, &kernels, &next));
        if next == assignment {
            converged = true;
            break;
        }
        assignment = next;
        for m in &mut members_of {
            m.clear();
        }
        for (i, &j) in assignment.iter().enumerate() {
            members_of[j].push(i);
        }
        for (j, members) in members_of.iter().enumerate() {
            if !members.is_empty() {
                // An emptied cluster keeps its previous kernel.
                kernels[j] = problem.fit(members, data).ok_or(ClusterError::FitUnsupported)?;
            }
        }
        kernel_history.push(kernels.clone());
    }

    let final_distortion = *history.last().unwrap();
    Ok(BatchResult {
        state: ClusteringState {
            kernels,
            assignment,
            distortion: final_distortion,
        },
        iterations,
        converged,
        distortion_history: history,
        kernel_history,
    })
}

/// Stop rule and seed for the on-line loop.
#[derive(Debug, Clone, Copy)]
pub struct OnlineOptions {
    pub seed: u64,
    /// Stop once the distortion improvement over a full sweep drops below
    /// this value.
    pub tol: f64,
    pub max_sweeps: usize,
}

/// One on-line step: which point was visited, its distance to every kernel,
/// the chosen kernel, and the global distortion after the update.
#[derive(Debug, Clone)]
pub struct OnlineRecord {
    pub sweep: usize,
    pub point_index: usize,
    pub distances: Vec<f64>,
    pub chosen: usize,
    pub distortion: f64,
}

#[derive(Debug, Clone)]
pub struct OnlineResult<K> {
    pub state: ClusteringState<K>,
    pub sweeps: usize,
    pub stopped_early: bool,
    pub records: Vec<OnlineRecord>,
    /// End-of-sweep distortions, one per sweep run.
    pub sweep_distortions: Vec<f64>,
}

/// The visiting order of sweep `sweep`: a seeded shuffle of `0..n`.
pub fn sweep_order(seed: u64, sweep: usize, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(seed, streams::SWEEP_BASE + sweep as u64));
    order
}

/// On-line dynamic cluster: per sweep, visit every point in a seeded
/// shuffled order, find its best kernel, and update that kernel toward it.
pub fn online_dynamic_cluster<P: KernelUpdate>(
    problem: &P,
    data: &[P::Point],
    init_kernels: Vec<P::Kernel>,
    opts: &OnlineOptions,
) -> OnlineResult<P::Kernel> {
    assert!(!data.is_empty(), "no data points");
    assert!(!init_kernels.is_empty(), "no kernels");
    let mut kernels = init_kernels;
    let mut records = Vec::new();
    let mut sweep_distortions = Vec::new();
    let mut prev = min_distortion(problem, data, &kernels);
    let mut stopped_early = false;
    let mut sweeps = 0;

    while sweeps < opts.max_sweeps {
        let sweep = sweeps;
        sweeps += 1;
        let mut end_of_sweep = prev;
        for i in sweep_order(opts.seed, sweep, data.len()) {
            let distances: Vec<f64> = kernels
                .iter()
                .map(|k| problem.distance(i, &data[i], k))
                .collect();
            let chosen = pick::argmin(distances.iter().copied()).expect("kernels non-empty");
            problem.update(&mut kernels[chosen], i, &data[i]);
            end_of_sweep = min_distortion(problem, data, &kernels);
            records.push(OnlineRecord {
                sweep,
                point_index: i,
                distances,
                chosen,
                distortion: end_of_sweep,
            });
        }
        sweep_distortions.push(end_of_sweep);
        let improvement = prev - end_of_sweep;
        prev = end_of_sweep;
        if improvement < opts.tol {
            stopped_early = true;
            break;
        }
    }

    let assignment: Vec<usize> = data
        .iter()
        .enumerate()
        .map(|(i, x)| assign(problem, i, x, &kernels))
        .collect();
    let distortion = distortion(problem, data, &kernels, &assignment);
    OnlineResult {
        state: ClusteringState {
            kernels,
            assignment,
            distortion,
        },
        sweeps,
        stopped_early,
        records,
        sweep_distortions,
    }
}

/// Writes the `sweep,point_index,assigned_kernel,distortion` trace CSV.
pub fn write_trace_csv<W: Write>(records: &[OnlineRecord], mut w: W) -> io::Result<()> {
    writeln!(w, "sweep,point_index,assigned_kernel,distortion")?;
    for r in records {
        writeln!(w, "{},{},{},{}", r.sweep, r.point_index, r.chosen, r.distortion)?;
    }
    Ok(())
}

/// Plain vector quantization: points and kernels are real vectors.
#[derive(Debug, Clone, Copy)]
pub struct VectorQuantization {
    pub metric: VqMetric,
    /// Fraction of the gap the on-line update moves the kernel.
    pub learning_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VqMetric {
    /// The mean is the exact batch fit, so the batch loop is k-means.
    #[default]
    SquaredEuclidean,
    /// No batch fit (the minimizer is the geometric median); on-line only.
    Euclidean,
}

impl VectorQuantization {
    pub fn new(metric: VqMetric, learning_rate: f64) -> Self {
        Self {
            metric,
            learning_rate,
        }
    }
}

impl KernelDistance for VectorQuantization {
    type Point = Vec<f64>;
    type Kernel = Vec<f64>;

    fn distance(&self, _i: usize, x: &Vec<f64>, k: &Vec<f64>) -> f64 {
        let sq: f64 = x.iter().zip(k).map(|(a, b)| (a - b) * (a - b)).sum();
        match self.metric {
            VqMetric::SquaredEuclidean => sq,
            VqMetric::Euclidean => sq.sqrt(),
        }
    }
}

impl KernelFit for VectorQuantization {
    fn fit(&self, members: &[usize], data: &[Vec<f64>]) -> Option<Vec<f64>> {
        if self.metric != VqMetric::SquaredEuclidean || members.is_empty() {
            return None;
        }
        let dim = data[members[0]].len();
        let mut mean = vec![0.0; dim];
        for &i in members {
            for (slot, v) in mean.iter_mut().zip(&data[i]) {
                *slot += v;
            }
        }
        let inv = 1.0 / members.len() as f64;
        for slot in &mut mean {
            *slot *= inv;
        }
        Some(mean)
    }
}

impl KernelUpdate for VectorQuantization {
    fn update(&self, kernel: &mut Vec<f64>, _i: usize, x: &Vec<f64>) {
        for (k, v) in kernel.iter_mut().zip(x) {
            *k += self.learning_rate * (*v - *k);
        }
    }
}
