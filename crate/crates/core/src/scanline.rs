//! Exact dynamic programming on single scanlines.
//!
//! Sums outside the line are zero, so the forward recursion starts with
//! `S(0, ·) = C(0, ·)` and the backward recursion mirrors it. Two ways of
//! reading off a labeling are provided: classic backtracking over recorded
//! predecessors, and the per-pixel argmin of the bidirectional marginals
//! `S_Ω(x, ·) = M(S₊(x−1, ·)) + C(x, ·) + M(S₋(x+1, ·))`, which coincides
//! with the backtracked path whenever the optimum is unique.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid_model::{Axis, CostVolume, DisparityField, LabelSpace, SmoothnessModel};
use crate::minplus::{slice_min, MinPlus, Operator, OperatorStats};

/// A chain of cost slices sharing one label space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScanlineProblem {
    space: LabelSpace,
    model: SmoothnessModel,
    costs: Vec<i64>,
    /// `weights[x]` multiplies the edge between `x` and `x + 1`.
    weights: Vec<i64>,
}

impl ScanlineProblem {
    /// `costs` holds `len × Q` values, pixel-major. The model's weight field
    /// is ignored in favour of `weights` (one per edge, `len − 1` entries).
    pub fn new(space: LabelSpace, model: SmoothnessModel, costs: Vec<i64>, weights: Vec<i64>) -> Result<Self> {
        let q = space.count();
        if costs.is_empty() || !costs.len().is_multiple_of(q) {
            return Err(Error::DimensionMismatch(format!(
                "scanline costs must be a non-empty multiple of Q = {q}, got {}",
                costs.len()
            )));
        }
        let len = costs.len() / q;
        if weights.len() != len - 1 {
            return Err(Error::DimensionMismatch(format!(
                "{len} slices need {} edge weights, got {}",
                len - 1,
                weights.len()
            )));
        }
        Ok(Self {
            space,
            model: SmoothnessModel {
                weights: None,
                ..model
            },
            costs,
            weights,
        })
    }

    /// Unit edge weights.
    pub fn uniform(space: LabelSpace, model: SmoothnessModel, costs: Vec<i64>) -> Result<Self> {
        let len = costs.len() / space.count().max(1);
        Self::new(space, model, costs, vec![1; len.saturating_sub(1)])
    }

    /// Row `y` of a cost volume, with the model's horizontal edge weights.
    pub fn from_row(volume: &CostVolume, model: &SmoothnessModel, y: usize) -> Result<Self> {
        let width = volume.width();
        let costs = (0..width)
            .flat_map(|x| volume.slice(x, y).iter().map(|&c| i64::from(c)))
            .collect();
        let weights = (0..width - 1).map(|x| model.edge_weight(x, y, Axis::X)).collect();
        Self::new(volume.space().clone(), model.clone(), costs, weights)
    }

    pub fn len(&self) -> usize {
        self.costs.len() / self.labels()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn labels(&self) -> usize {
        self.space.count()
    }

    pub fn space(&self) -> &LabelSpace {
        &self.space
    }

    pub fn model(&self) -> &SmoothnessModel {
        &self.model
    }

    pub fn slice(&self, x: usize) -> &[i64] {
        let q = self.labels();
        &self.costs[x * q..(x + 1) * q]
    }

    pub fn weight(&self, edge: usize) -> i64 {
        self.weights[edge]
    }

    /// Energy of a path, summed directly.
    pub fn path_energy(&self, path: &[u32]) -> i64 {
        let offsets: Vec<Vec<i32>> = path
            .iter()
            .map(|&v| self.space.offsets(v as usize).expect("label in range"))
            .collect();
        let data: i64 = path.iter().enumerate().map(|(x, &v)| self.slice(x)[v as usize]).sum();
        let smooth: i64 = (0..path.len().saturating_sub(1))
            .map(|x| self.model.edge_penalty(&offsets[x], &offsets[x + 1], self.weights[x]))
            .sum();
        data + smooth
    }

    fn operator(&self, window_scale: f64) -> Result<MinPlus> {
        MinPlus::with_window_scale(&self.space, &self.model, window_scale)
    }
}

/// Per-vertex predecessor labels recorded by the forward pass.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BacktrackTable {
    labels: usize,
    predecessors: Vec<u32>,
}

impl BacktrackTable {
    pub fn predecessor(&self, x: usize, label: usize) -> u32 {
        self.predecessors[x * self.labels + label]
    }
}

/// Forward optimal sums `S(x, v)`, `len × Q` values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForwardSums {
    labels: usize,
    sums: Vec<i64>,
}

impl ForwardSums {
    pub fn slice(&self, x: usize) -> &[i64] {
        &self.sums[x * self.labels..(x + 1) * self.labels]
    }

    pub fn len(&self) -> usize {
        self.sums.len() / self.labels
    }

    pub fn is_empty(&self) -> bool {
        self.sums.is_empty()
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.sums
    }
}

/// Result of [`forward_pass`].
#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub sums: ForwardSums,
    pub table: BacktrackTable,
    /// Counts for the message operator.
    pub stats: OperatorStats,
    /// Counts for the extra windowed rescan that recovers predecessors.
    pub backtrack_stats: OperatorStats,
}

/// `S(x+1, v) = C(x+1, v) + M(S(x, ·))(v)`, recording the lowest-label
/// predecessor of every vertex.
pub fn forward_pass(problem: &ScanlineProblem, op: Operator) -> Result<ForwardPass> {
    forward_pass_with(problem, op, 1.0)
}

pub fn forward_pass_with(problem: &ScanlineProblem, op: Operator, window_scale: f64) -> Result<ForwardPass> {
    let mut engine = problem.operator(window_scale)?;
    engine.check(op)?;
    let q = problem.labels();
    let len = problem.len();
    let mut sums = vec![0i64; len * q];
    let mut predecessors = vec![0u32; len * q];
    let mut stats = OperatorStats::default();
    let mut backtrack_stats = OperatorStats::default();
    let mut message = vec![0i64; q];
    let mut mins = Vec::with_capacity(q);

    sums[..q].copy_from_slice(problem.slice(0));
    for x in 1..len {
        let (done, rest) = sums.split_at_mut(x * q);
        let prev = &done[(x - 1) * q..];
        let w = problem.weight(x - 1);
        engine.apply(op, prev, w, &mut message, &mut stats)?;

        let (smin, _) = slice_min(prev);
        mins.clear();
        mins.extend((0..q).filter(|&v| prev[v] == smin));
        let cost = problem.slice(x);
        for v in 0..q {
            rest[v] = cost[v] + message[v];
            predecessors[x * q + v] = engine.predecessor(prev, &mins, w, v, message[v], &mut backtrack_stats) as u32;
        }
    }
    Ok(ForwardPass {
        sums: ForwardSums { labels: q, sums },
        table: BacktrackTable {
            labels: q,
            predecessors,
        },
        stats,
        backtrack_stats,
    })
}

/// Recovers the optimal path from the last vertex backwards. Returns the
/// path and its energy `min_v S(len−1, v)`.
pub fn backtrack(sums: &ForwardSums, table: &BacktrackTable) -> (Vec<u32>, i64) {
    let len = sums.len();
    let (energy, last) = slice_min(sums.slice(len - 1));
    let mut path = vec![0u32; len];
    path[len - 1] = last as u32;
    for x in (1..len).rev() {
        path[x - 1] = table.predecessor(x, path[x] as usize);
    }
    (path, energy)
}

/// Per-vertex marginals `S_Ω(x, ·)`, `len × Q` values.
pub fn bidirectional_marginals(problem: &ScanlineProblem, op: Operator) -> Result<Vec<i64>> {
    let mut engine = problem.operator(1.0)?;
    engine.check(op)?;
    let q = problem.labels();
    let len = problem.len();
    let mut stats = OperatorStats::default();

    // forward[x] = C(x) + M(forward[x-1]); backward mirrors it from the right
    let mut forward = vec![0i64; len * q];
    let mut backward = vec![0i64; len * q];
    let mut message = vec![0i64; q];
    forward[..q].copy_from_slice(problem.slice(0));
    for x in 1..len {
        engine.apply(op, &forward[(x - 1) * q..x * q], problem.weight(x - 1), &mut message, &mut stats)?;
        for v in 0..q {
            forward[x * q + v] = problem.slice(x)[v] + message[v];
        }
    }
    backward[(len - 1) * q..].copy_from_slice(problem.slice(len - 1));
    for x in (0..len - 1).rev() {
        engine.apply(op, &backward[(x + 1) * q..(x + 2) * q], problem.weight(x), &mut message, &mut stats)?;
        for v in 0..q {
            backward[x * q + v] = problem.slice(x)[v] + message[v];
        }
    }

    let mut marginals = vec![0i64; len * q];
    for x in 0..len {
        let out = &mut marginals[x * q..(x + 1) * q];
        out.copy_from_slice(problem.slice(x));
        if x > 0 {
            engine.apply(op, &forward[(x - 1) * q..x * q], problem.weight(x - 1), &mut message, &mut stats)?;
            out.iter_mut().zip(&message).for_each(|(o, m)| *o += m);
        }
        if x + 1 < len {
            engine.apply(op, &backward[(x + 1) * q..(x + 2) * q], problem.weight(x), &mut message, &mut stats)?;
            out.iter_mut().zip(&message).for_each(|(o, m)| *o += m);
        }
    }
    Ok(marginals)
}

/// `ṽ(x) = argmin_v S_Ω(x, v)`, lowest label on ties.
pub fn marginal_argmin_solution(marginals: &[i64], labels: usize) -> Vec<u32> {
    marginals
        .chunks_exact(labels)
        .map(|slice| slice_min(slice).1 as u32)
        .collect()
}

/// Solves every row of `volume` independently by forward pass and backtracking.
pub fn solve_rows(volume: &CostVolume, model: &SmoothnessModel, op: Operator, window_scale: f64) -> Result<DisparityField> {
    let rows: Vec<Vec<u32>> = (0..volume.height())
        .into_par_iter()
        .map(|y| {
            let problem = ScanlineProblem::from_row(volume, model, y)?;
            let pass = forward_pass_with(&problem, op, window_scale)?;
            Ok(backtrack(&pass.sums, &pass.table).0)
        })
        .collect::<Result<_>>()?;
    DisparityField::new(volume.width(), volume.height(), rows.concat())
}
