//! Extended dynamic programming on 2D grids.
//!
//! Four direction sums `S_k`, `k ∈ {+x, −x, +y, −y}`, each approximate the
//! optimal cost of the half-plane behind a pixel. With the incoming messages
//!
//! ```text
//! m_k(x) = M(½ · S_k(x_k))      x_k = the neighbour of x behind direction k
//! ```
//!
//! (zero when `x_k` is off the grid) a pass updates, for each of its two
//! directions `k'`,
//!
//! ```text
//! S_k'(x) = C(x) + Σ_{k ≠ −k'} m_k(x) − m_{−k'}(x)
//! ```
//!
//! in place while scanning the grid, so every read sees the freshest value.
//! One iteration is the four raster passes P1..P4; afterwards the marginals
//! `S_Ω(x) = C(x) + Σ_k m_k(x)` are assembled and their per-pixel argmin is
//! the labeling.
//!
//! Costs and `λ` are multiplied by a fixed-point scale (default 2) on entry.
//! The `½` is an arithmetic shift, i.e. a floor; energies are always
//! reported in the caller's unscaled units.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::grid_model::{evaluate_energy, Axis, CostVolume, DisparityField, EnergyBreakdown, SmoothnessModel};
use crate::minplus::{slice_min, MinPlus, Operator, OperatorStats};

/// Default fixed-point multiplier applied to costs and `λ`.
pub const DEFAULT_SCALE: i64 = 2;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    PosX,
    NegX,
    PosY,
    NegY,
}

/// Neighbour pixel, weight axis, edge-owning pixel.
type Neighbour = ((usize, usize), Axis, (usize, usize));

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::PosX, Direction::NegX, Direction::PosY, Direction::NegY];

    pub fn opposite(self) -> Self {
        match self {
            Direction::PosX => Direction::NegX,
            Direction::NegX => Direction::PosX,
            Direction::PosY => Direction::NegY,
            Direction::NegY => Direction::PosY,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// The neighbour of `(x, y)` behind this direction, with the weight axis
    /// and the pixel owning the traversed edge.
    fn behind(self, x: usize, y: usize, width: usize, height: usize) -> Option<Neighbour> {
        match self {
            Direction::PosX => (x > 0).then(|| ((x - 1, y), Axis::X, (x - 1, y))),
            Direction::NegX => (x + 1 < width).then(|| ((x + 1, y), Axis::X, (x, y))),
            Direction::PosY => (y > 0).then(|| ((x, y - 1), Axis::Y, (x, y - 1))),
            Direction::NegY => (y + 1 < height).then(|| ((x, y + 1), Axis::Y, (x, y))),
        }
    }
}

/// The four raster traversals.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum ScanOrder {
    /// increasing x, increasing y
    P1,
    /// decreasing x, increasing y
    P2,
    /// increasing x, decreasing y
    P3,
    /// decreasing x, decreasing y
    P4,
}

impl ScanOrder {
    pub const ALL: [ScanOrder; 4] = [ScanOrder::P1, ScanOrder::P2, ScanOrder::P3, ScanOrder::P4];

    pub fn x_increasing(self) -> bool {
        matches!(self, ScanOrder::P1 | ScanOrder::P3)
    }

    pub fn y_increasing(self) -> bool {
        matches!(self, ScanOrder::P1 | ScanOrder::P2)
    }

    /// Directions recomputed by this pass, x-direction first.
    pub fn updated(self) -> [Direction; 2] {
        let dx = if self.x_increasing() {
            Direction::PosX
        } else {
            Direction::NegX
        };
        let dy = if self.y_increasing() {
            Direction::PosY
        } else {
            Direction::NegY
        };
        [dx, dy]
    }

    /// Pixels in visiting order; y is the outer loop.
    pub fn pixels(self, width: usize, height: usize) -> impl Iterator<Item = (usize, usize)> {
        let xs = move |i: usize| if self.x_increasing() { i } else { width - 1 - i };
        let ys = move |j: usize| if self.y_increasing() { j } else { height - 1 - j };
        (0..height).flat_map(move |j| (0..width).map(move |i| (xs(i), ys(j))))
    }
}

/// The four `N × Q` direction sum fields, in scaled fixed-point units.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirectionSums {
    width: usize,
    height: usize,
    labels: usize,
    fields: [Vec<i64>; 4],
    iterations: usize,
}

impl DirectionSums {
    pub fn zeros(width: usize, height: usize, labels: usize) -> Self {
        let n = width * height * labels;
        Self {
            width,
            height,
            labels,
            fields: std::array::from_fn(|_| vec![0; n]),
            iterations: 0,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    /// Completed full iterations (groups of four passes through [`EdpSolver::iterate`]).
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn field(&self, dir: Direction) -> &[i64] {
        &self.fields[dir.index()]
    }

    pub fn slice(&self, dir: Direction, x: usize, y: usize) -> &[i64] {
        let start = (y * self.width + x) * self.labels;
        &self.fields[dir.index()][start..start + self.labels]
    }

    pub fn slice_mut(&mut self, dir: Direction, x: usize, y: usize) -> &mut [i64] {
        let start = (y * self.width + x) * self.labels;
        &mut self.fields[dir.index()][start..start + self.labels]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdpConfig {
    pub iterations: usize,
    pub operator: Operator,
    pub window_scale: f64,
    /// Fixed-point multiplier for costs and `λ`.
    pub scale: i64,
    /// Subtract each freshly written slice's minimum.
    pub renormalize: bool,
}

impl EdpConfig {
    pub fn new(iterations: usize, operator: Operator) -> Self {
        Self {
            iterations,
            operator,
            window_scale: 1.0,
            scale: DEFAULT_SCALE,
            renormalize: false,
        }
    }
}

/// Energy after one iteration's extraction.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub energy: EnergyBreakdown,
    /// Wall time of the iteration's four passes.
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnergyTrace {
    pub entries: Vec<TraceEntry>,
}

impl EnergyTrace {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last(&self) -> Option<&TraceEntry> {
        self.entries.last()
    }
}

#[derive(Clone, Debug)]
pub struct EdpOutcome {
    pub field: DisparityField,
    pub trace: EnergyTrace,
    pub sums: DirectionSums,
    pub stats: OperatorStats,
}

/// Solver state bound to one cost volume and model.
pub struct EdpSolver<'a> {
    volume: &'a CostVolume,
    /// Unscaled model, used for energy evaluation.
    model: &'a SmoothnessModel,
    config: EdpConfig,
    engine: MinPlus,
    halved: Vec<i64>,
    messages: [Vec<i64>; 4],
    stats: OperatorStats,
}

impl<'a> EdpSolver<'a> {
    pub fn new(volume: &'a CostVolume, model: &'a SmoothnessModel, config: EdpConfig) -> Result<Self> {
        if config.scale < 1 {
            return Err(Error::InvalidConfig(format!("fixed-point scale must be >= 1, got {}", config.scale)));
        }
        if let Some(w) = &model.weights {
            if w.width() != volume.width() || w.height() != volume.height() {
                return Err(Error::DimensionMismatch(format!(
                    "edge weights are {}x{}, volume is {}x{}",
                    w.width(),
                    w.height(),
                    volume.width(),
                    volume.height()
                )));
            }
        }
        let scaled = model.scaled(config.scale);
        let engine = MinPlus::with_window_scale(volume.space(), &scaled, config.window_scale)?;
        engine.check(config.operator)?;
        let q = volume.labels();
        Ok(Self {
            volume,
            model,
            config,
            engine,
            halved: vec![0; q],
            messages: std::array::from_fn(|_| vec![0; q]),
            stats: OperatorStats::default(),
        })
    }

    pub fn config(&self) -> &EdpConfig {
        &self.config
    }

    pub fn stats(&self) -> OperatorStats {
        self.stats
    }

    pub fn new_sums(&self) -> DirectionSums {
        DirectionSums::zeros(self.volume.width(), self.volume.height(), self.volume.labels())
    }

    fn check_sums(&self, sums: &DirectionSums) -> Result<()> {
        if sums.width != self.volume.width() || sums.height != self.volume.height() || sums.labels != self.volume.labels() {
            return Err(Error::DimensionMismatch(format!(
                "direction sums are {}x{}x{}, volume is {}x{}x{}",
                sums.width,
                sums.height,
                sums.labels,
                self.volume.width(),
                self.volume.height(),
                self.volume.labels()
            )));
        }
        Ok(())
    }

    /// Fills `self.messages` with the four incoming messages at `(x, y)`.
    fn gather_messages(&mut self, sums: &DirectionSums, x: usize, y: usize) -> Result<()> {
        let (width, height) = (sums.width, sums.height);
        for dir in Direction::ALL {
            let msg = &mut self.messages[dir.index()];
            match dir.behind(x, y, width, height) {
                None => msg.fill(0),
                Some(((nx, ny), axis, (ex, ey))) => {
                    for (h, &s) in self.halved.iter_mut().zip(sums.slice(dir, nx, ny)) {
                        *h = s >> 1;
                    }
                    let w = self.model.edge_weight(ex, ey, axis);
                    self.engine.apply(self.config.operator, &self.halved, w, msg, &mut self.stats)?;
                }
            }
        }
        Ok(())
    }

    /// One in-place raster pass updating the two directions of `order`.
    pub fn pass(&mut self, sums: &mut DirectionSums, order: ScanOrder) -> Result<()> {
        self.check_sums(sums)?;
        let scale = self.config.scale;
        for (x, y) in order.pixels(sums.width, sums.height) {
            self.gather_messages(sums, x, y)?;
            let cost = self.volume.slice(x, y);
            for dir in order.updated() {
                let back = &self.messages[dir.opposite().index()];
                let out = sums.slice_mut(dir, x, y);
                for (v, o) in out.iter_mut().enumerate() {
                    let total: i64 = self.messages.iter().map(|m| m[v]).sum();
                    *o = i64::from(cost[v]) * scale + total - 2 * back[v];
                }
                if self.config.renormalize {
                    let (min, _) = slice_min(out);
                    out.iter_mut().for_each(|o| *o -= min);
                }
            }
        }
        Ok(())
    }

    /// Passes P1..P4 in order.
    pub fn iterate(&mut self, sums: &mut DirectionSums) -> Result<()> {
        for order in ScanOrder::ALL {
            self.pass(sums, order)?;
        }
        sums.iterations += 1;
        Ok(())
    }

    /// `S_Ω(x, v) = C(x, v) + Σ_k m_k(x, v)`, `N × Q` scaled values.
    pub fn marginals(&mut self, sums: &DirectionSums) -> Result<Vec<i64>> {
        self.check_sums(sums)?;
        let q = sums.labels;
        let scale = self.config.scale;
        let mut out = vec![0i64; sums.width * sums.height * q];
        for y in 0..sums.height {
            for x in 0..sums.width {
                self.gather_messages(sums, x, y)?;
                let cost = self.volume.slice(x, y);
                let start = (y * sums.width + x) * q;
                for (v, o) in out[start..start + q].iter_mut().enumerate() {
                    *o = i64::from(cost[v]) * scale + self.messages.iter().map(|m| m[v]).sum::<i64>();
                }
            }
        }
        Ok(out)
    }

    /// Runs the configured number of iterations from zero sums, recording
    /// the energy of the extracted labeling after each one.
    pub fn solve(mut self) -> Result<EdpOutcome> {
        if self.config.iterations == 0 {
            return Err(Error::InvalidConfig("EDP needs at least one iteration".into()));
        }
        let mut sums = self.new_sums();
        let mut trace = EnergyTrace::default();
        let mut field = DisparityField::data_argmin(self.volume);
        for iteration in 1..=self.config.iterations {
            let started = Instant::now();
            self.iterate(&mut sums)?;
            let seconds = started.elapsed().as_secs_f64();
            let marginals = self.marginals(&sums)?;
            field = extract_solution(&marginals, self.volume.width(), self.volume.height(), self.volume.labels())?;
            let energy = evaluate_energy(self.volume, self.model, &field)?;
            trace.entries.push(TraceEntry {
                iteration,
                energy,
                seconds,
            });
        }
        Ok(EdpOutcome {
            field,
            trace,
            sums,
            stats: self.stats,
        })
    }
}

/// One raster pass with a freshly built solver; see [`EdpSolver::pass`].
pub fn edp_pass(
    sums: &mut DirectionSums,
    volume: &CostVolume,
    model: &SmoothnessModel,
    order: ScanOrder,
    config: &EdpConfig,
) -> Result<()> {
    EdpSolver::new(volume, model, config.clone())?.pass(sums, order)
}

/// Marginals with a freshly built solver; see [`EdpSolver::marginals`].
pub fn assemble_marginals(
    sums: &DirectionSums,
    volume: &CostVolume,
    model: &SmoothnessModel,
    config: &EdpConfig,
) -> Result<Vec<i64>> {
    EdpSolver::new(volume, model, config.clone())?.marginals(sums)
}

/// Per-pixel argmin of the marginals, lowest label on ties.
pub fn extract_solution(marginals: &[i64], width: usize, height: usize, labels: usize) -> Result<DisparityField> {
    if marginals.len() != width * height * labels {
        return Err(Error::DimensionMismatch(format!(
            "marginals hold {} values, expected {}",
            marginals.len(),
            width * height * labels
        )));
    }
    let labels = marginals.chunks_exact(labels).map(|s| slice_min(s).1 as u32).collect();
    DisparityField::new(width, height, labels)
}

/// Runs EDP with `config` and returns the final field and energy trace.
pub fn solve(volume: &CostVolume, model: &SmoothnessModel, config: &EdpConfig) -> Result<EdpOutcome> {
    EdpSolver::new(volume, model, config.clone())?.solve()
}
