//! Discretization of the environment into a grid of free cells and the
//! per-task MDP construction.

use std::io::{self, Write};

use crate::aggregation::{Partition, SplitRule};
use crate::mdp::FiniteMdp;
use crate::nav::geometry::{GeometryError, NavGeometry, Rect};

/// Dynamics and discretization settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavConfig {
    /// Grid resolution in environment units (0.1 → 100×100 cells).
    pub cell: f64,
    /// Step length of the eight moves.
    pub move_amp: f64,
    /// Noise length added to each move.
    pub noise_amp: f64,
    /// Number of quadrature directions the noise is averaged over.
    pub noise_dirs: usize,
    pub discount: f64,
    /// Step cap for simulated episodes.
    pub episode_cap: usize,
}

impl Default for NavConfig {
    fn default() -> Self {
        Self {
            cell: 0.1,
            move_amp: 0.1,
            noise_amp: 0.03,
            noise_dirs: 16,
            discount: 0.95,
            episode_cap: 1000,
        }
    }
}

/// One navigation task: travel from one zone to another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskSpec {
    /// 1-based start zone.
    pub start_zone: usize,
    /// 1-based goal zone.
    pub goal_zone: usize,
}

impl TaskSpec {
    pub fn new(start_zone: usize, goal_zone: usize) -> Self {
        Self {
            start_zone,
            goal_zone,
        }
    }
}

/// The eight move directions as unit vectors.
///
/// Diagonals come first: where the lifted macro value is flat every interior
/// action ties and the lowest index wins, and a diagonal's noise spread
/// keeps that motion stochastic instead of locking two cells into a
/// noise-free back-and-forth cycle.
pub const MOVE_DIRS: [(f64, f64); 8] = {
    const D: f64 = std::f64::consts::FRAC_1_SQRT_2;
    [
        (D, D),    // NE
        (-D, D),   // NW
        (-D, -D),  // SW
        (D, -D),   // SE
        (1.0, 0.0),  // E
        (0.0, 1.0),  // N
        (-1.0, 0.0), // W
        (0.0, -1.0), // S
    ]
};

/// The free-cell grid: maps between cell coordinates and state indices.
#[derive(Debug, Clone)]
pub struct NavGrid {
    pub nx: usize,
    pub ny: usize,
    pub cell: f64,
    /// `ix + iy * nx` → state index of the free cell there.
    state_of: Vec<Option<usize>>,
    /// State index → cell coordinates.
    cells: Vec<(usize, usize)>,
}

impl NavGrid {
    fn build(geometry: &NavGeometry, cell: f64) -> Result<Self, GeometryError> {
        let nx = (NavGeometry::SIZE / cell).round() as usize;
        let ny = nx;
        let mut state_of = vec![None; nx * ny];
        let mut cells = Vec::new();
        for iy in 0..ny {
            for ix in 0..nx {
                let (cx, cy) = center_of(ix, iy, cell);
                if !geometry.in_wall(cx, cy) {
                    state_of[ix + iy * nx] = Some(cells.len());
                    cells.push((ix, iy));
                }
            }
        }
        if cells.is_empty() {
            return Err(GeometryError::NoFreeCells);
        }
        Ok(Self {
            nx,
            ny,
            cell,
            state_of,
            cells,
        })
    }

    pub fn n_free(&self) -> usize {
        self.cells.len()
    }

    /// Cell coordinates of a free-cell state.
    pub fn cell_of(&self, state: usize) -> (usize, usize) {
        self.cells[state]
    }

    pub fn center(&self, state: usize) -> (f64, f64) {
        let (ix, iy) = self.cells[state];
        center_of(ix, iy, self.cell)
    }

    /// Free-cell state containing an in-bounds point, if that cell is free.
    pub fn state_at(&self, x: f64, y: f64) -> Option<usize> {
        let ix = (x / self.cell) as usize;
        let iy = (y / self.cell) as usize;
        if ix >= self.nx || iy >= self.ny {
            return None;
        }
        self.state_of[ix + iy * self.nx]
    }
}

fn center_of(ix: usize, iy: usize, cell: f64) -> (f64, f64) {
    ((ix as f64 + 0.5) * cell, (iy as f64 + 0.5) * cell)
}

/// A validated geometry, its grid, and the dynamics settings.
#[derive(Debug, Clone)]
pub struct NavWorld {
    pub geometry: NavGeometry,
    pub config: NavConfig,
    pub grid: NavGrid,
}

impl NavWorld {
    pub fn new(geometry: NavGeometry, config: NavConfig) -> Result<Self, GeometryError> {
        assert!(config.cell > 0.0, "cell size must be positive");
        assert!(config.noise_dirs >= 1, "need at least one noise direction");
        assert!(
            (0.0..1.0).contains(&config.discount),
            "discount must be in [0,1)"
        );
        geometry.validate()?;
        let grid = NavGrid::build(&geometry, config.cell)?;
        Ok(Self {
            geometry,
            config,
            grid,
        })
    }

    pub fn canonical(config: NavConfig) -> Self {
        Self::new(NavGeometry::canonical(), config).expect("canonical geometry is valid")
    }

    /// Free cells plus the absorbing terminal state.
    pub fn n_states(&self) -> usize {
        self.grid.n_free() + 1
    }

    pub fn terminal_state(&self) -> usize {
        self.grid.n_free()
    }

    /// The six canonical tasks (start zone, goal zone).
    pub fn six_tasks() -> [TaskSpec; 6] {
        [
            TaskSpec::new(2, 1),
            TaskSpec::new(3, 2),
            TaskSpec::new(4, 3),
            TaskSpec::new(5, 4),
            TaskSpec::new(6, 5),
            TaskSpec::new(1, 6),
        ]
    }

    /// Builds the discretized MDP of one task. Deterministic: the noise is
    /// averaged over `noise_dirs` quadrature angles, never sampled.
    pub fn build_task_mdp(&self, task: TaskSpec) -> Result<FiniteMdp, GeometryError> {
        let goal = *self.geometry.zone(task.goal_zone)?;
        self.geometry.zone(task.start_zone)?;
        let cfg = &self.config;
        let n_free = self.grid.n_free();
        let terminal = self.terminal_state();
        let mut mdp = FiniteMdp::new(n_free + 1, MOVE_DIRS.len(), cfg.discount);
        let weight = 1.0 / cfg.noise_dirs as f64;

        let mut outcomes: Vec<(usize, u32)> = Vec::with_capacity(cfg.noise_dirs);
        for s in 0..n_free {
            let c = self.grid.center(s);
            for (a, dir) in MOVE_DIRS.iter().enumerate() {
                outcomes.clear();
                let mut reward_units = 0i64;
                for k in 0..cfg.noise_dirs {
                    let theta = std::f64::consts::TAU * k as f64 / cfg.noise_dirs as f64;
                    let tx = c.0 + cfg.move_amp * dir.0 + cfg.noise_amp * theta.cos();
                    let ty = c.1 + cfg.move_amp * dir.1 + cfg.noise_amp * theta.sin();
                    let successor;
                    if !self.geometry.in_bounds(tx, ty) || self.geometry.segment_blocked(c, (tx, ty))
                    {
                        successor = s;
                        reward_units -= 1;
                    } else if goal.contains(tx, ty) {
                        successor = terminal;
                        reward_units += 1;
                    } else {
                        match self.grid.state_at(tx, ty) {
                            Some(s2) => successor = s2,
                            None => {
                                // Free point inside a blocked cell: the grid
                                // cannot represent it, treat as a collision.
                                successor = s;
                                reward_units -= 1;
                            }
                        }
                    }
                    match outcomes.iter_mut().find(|(succ, _)| *succ == successor) {
                        Some(entry) => entry.1 += 1,
                        None => outcomes.push((successor, 1)),
                    }
                }
                let row: Vec<(usize, f64)> = outcomes
                    .iter()
                    .map(|&(succ, n)| (succ, n as f64 * weight))
                    .collect();
                mdp.set_row(s, a, row);
                mdp.set_reward(s, a, reward_units as f64 * weight);
            }
        }
        for a in 0..MOVE_DIRS.len() {
            mdp.set_row(terminal, a, vec![(terminal, 1.0)]);
        }
        Ok(mdp)
    }

    /// The six task MDPs in task order.
    pub fn build_six_tasks(&self) -> Result<Vec<(TaskSpec, FiniteMdp)>, GeometryError> {
        Self::six_tasks()
            .into_iter()
            .map(|t| self.build_task_mdp(t).map(|m| (t, m)))
            .collect()
    }

    /// Free cells whose centers lie inside a task's start zone.
    pub fn start_states(&self, task: TaskSpec) -> Result<Vec<usize>, GeometryError> {
        let zone = self.geometry.zone(task.start_zone)?;
        Ok((0..self.grid.n_free())
            .filter(|&s| {
                let (x, y) = self.grid.center(s);
                zone.contains(x, y)
            })
            .collect())
    }

    /// The starting partition for modules: one macro covering every free
    /// cell and a separate singleton for the terminal state (which has no
    /// grid coordinates, so spatial split rules never see it).
    pub fn base_partition(&self) -> Partition {
        let mut assignment = vec![0usize; self.n_states()];
        assignment[self.terminal_state()] = 1;
        Partition::from_assignment(assignment).expect("two non-empty macros")
    }

    /// The axis-aligned split rule over this grid.
    pub fn split_rule(&self) -> GridSplit {
        let mut coords = vec![None; self.n_states()];
        for s in 0..self.grid.n_free() {
            coords[s] = Some(self.grid.cell_of(s));
        }
        GridSplit { coords }
    }

    /// Bounding rectangle of each macro's cells, in environment units.
    /// Macros containing the terminal state are skipped.
    pub fn macro_rects(&self, partition: &Partition) -> Vec<(usize, Rect)> {
        let terminal = self.terminal_state();
        let cell = self.grid.cell;
        (0..partition.n_macros())
            .filter_map(|m| {
                let members = partition.members(m);
                if members.contains(&terminal) {
                    return None;
                }
                let mut min = (usize::MAX, usize::MAX);
                let mut max = (0usize, 0usize);
                for &s in members {
                    let (ix, iy) = self.grid.cell_of(s);
                    min = (min.0.min(ix), min.1.min(iy));
                    max = (max.0.max(ix), max.1.max(iy));
                }
                Some((
                    m,
                    Rect::new(
                        min.0 as f64 * cell,
                        min.1 as f64 * cell,
                        (max.0 + 1) as f64 * cell,
                        (max.1 + 1) as f64 * cell,
                    ),
                ))
            })
            .collect()
    }

    /// Writes the `macro_index,x0,y0,x1,y1` rectangle dump.
    pub fn write_rectangles_csv<W: Write>(&self, partition: &Partition, mut w: W) -> io::Result<()> {
        writeln!(w, "macro_index,x0,y0,x1,y1")?;
        for (m, r) in self.macro_rects(partition) {
            writeln!(w, "{m},{},{},{},{}", r.x0, r.y0, r.x1, r.y1)?;
        }
        Ok(())
    }
}

/// Axis-aligned rectangle split: cut along the longer axis of the member
/// bounding box at the cell-count median.
#[derive(Debug, Clone)]
pub struct GridSplit {
    /// Grid coordinates per state; `None` for the terminal state.
    pub coords: Vec<Option<(usize, usize)>>,
}

impl GridSplit {
    fn coords_of(&self, members: &[usize]) -> Option<Vec<(usize, usize)>> {
        members.iter().map(|&s| self.coords[s]).collect()
    }

    /// Cut positions along one axis: the distinct coordinate values except
    /// the last (a cut after value v keeps `coord <= v` on the left).
    fn cuts(values: &mut Vec<usize>) -> Vec<usize> {
        values.sort_unstable();
        values.dedup();
        values[..values.len().saturating_sub(1)].to_vec()
    }

    fn split_at(
        members: &[usize],
        coords: &[(usize, usize)],
        axis: usize,
        cut: usize,
    ) -> (Vec<usize>, Vec<usize>) {
        let mut left = Vec::new();
        let mut right = Vec::new();
        for (&s, &(ix, iy)) in members.iter().zip(coords) {
            let v = if axis == 0 { ix } else { iy };
            if v <= cut {
                left.push(s);
            } else {
                right.push(s);
            }
        }
        (left, right)
    }

    /// The balanced cut: minimizes |left count − n/2|, lower cut on ties.
    fn median_cut(coords: &[(usize, usize)], axis: usize, cuts: &[usize]) -> Option<usize> {
        if cuts.is_empty() {
            return None;
        }
        let n = coords.len();
        let mut best: Option<(f64, usize)> = None;
        for &cut in cuts {
            let left = coords
                .iter()
                .filter(|&&(ix, iy)| (if axis == 0 { ix } else { iy }) <= cut)
                .count();
            let balance = (left as f64 - n as f64 / 2.0).abs();
            if best.map_or(true, |(b, _)| balance < b) {
                best = Some((balance, cut));
            }
        }
        best.map(|(_, c)| c)
    }
}

impl SplitRule for GridSplit {
    fn split(&self, members: &[usize]) -> Option<(Vec<usize>, Vec<usize>)> {
        let coords = self.coords_of(members)?;
        let (mut xs, mut ys): (Vec<usize>, Vec<usize>) = coords.iter().copied().unzip();
        let extent_x = xs.iter().max()? - xs.iter().min()?;
        let extent_y = ys.iter().max()? - ys.iter().min()?;
        let x_cuts = Self::cuts(&mut xs);
        let y_cuts = Self::cuts(&mut ys);
        // Longer axis first; x wins ties.
        let order = if extent_x >= extent_y { [0, 1] } else { [1, 0] };
        for axis in order {
            let cuts = if axis == 0 { &x_cuts } else { &y_cuts };
            if let Some(cut) = Self::median_cut(&coords, axis, cuts) {
                return Some(Self::split_at(members, &coords, axis, cut));
            }
        }
        None
    }

    fn random_split(
        &self,
        members: &[usize],
        rng: &mut dyn rand::RngCore,
    ) -> Option<(Vec<usize>, Vec<usize>)> {
        let coords = self.coords_of(members)?;
        let (mut xs, mut ys): (Vec<usize>, Vec<usize>) = coords.iter().copied().unzip();
        let x_cuts = Self::cuts(&mut xs);
        let y_cuts = Self::cuts(&mut ys);
        let axes: Vec<usize> = [(0, &x_cuts), (1, &y_cuts)]
            .iter()
            .filter(|(_, c)| !c.is_empty())
            .map(|&(a, _)| a)
            .collect();
        if axes.is_empty() {
            return None;
        }
        let axis = axes[rand::Rng::gen_range(rng, 0..axes.len())];
        let cuts = if axis == 0 { &x_cuts } else { &y_cuts };
        let cut = cuts[rand::Rng::gen_range(rng, 0..cuts.len())];
        Some(Self::split_at(members, &coords, axis, cut))
    }
}
