//! Brute-force references for the engines in this crate.
//!
//! Everything here is written from the energy definition directly and
//! shares no arithmetic with the operators or solvers it checks: the
//! penalty, the halving, the scan orders and the message sums are all
//! re-derived locally. None of it is meant to be fast.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::edp::{Direction, DirectionSums, ScanOrder};
use crate::error::{Error, Result};
use crate::grid_model::{Axis, CostVolume, DisparityField, EdgeWeights, LabelSpace, Prior, SmoothnessModel};
use crate::scanline::ScanlineProblem;

/// Largest chain state space [`oracle_chain`] will enumerate.
pub const CHAIN_STATE_LIMIT: u128 = 1_000_000;
/// Largest grid state space [`oracle_grid`] will enumerate.
pub const GRID_STATE_LIMIT: u128 = 50_000_000;

fn pair_penalty(a: &[i32], b: &[i32], l1: u32, g: u32, lambda: i64, w: i64) -> i64 {
    let mut dist = 0i64;
    for (p, q) in a.iter().zip(b) {
        dist += (i64::from(*p) - i64::from(*q)).abs().pow(l1);
    }
    let cap = i64::from(g).pow(l1);
    w * lambda * if dist < cap { dist } else { cap }
}

fn all_offsets(space: &LabelSpace) -> Vec<Vec<i32>> {
    (0..space.count()).map(|v| space.offsets(v).expect("in range")).collect()
}

/// Literal `Q²` evaluation of the min-plus message.
pub fn oracle_minplus(slice: &[i64], space: &LabelSpace, model: &SmoothnessModel, w: i64) -> Vec<i64> {
    let offsets = all_offsets(space);
    let l1 = model.prior.exponent();
    let mut out = Vec::with_capacity(slice.len());
    for target in 0..slice.len() {
        let mut best: Option<i64> = None;
        for source in 0..slice.len() {
            let cand = slice[source] + pair_penalty(&offsets[target], &offsets[source], l1, model.truncation, model.lambda, w);
            best = Some(match best {
                Some(b) if b <= cand => b,
                _ => cand,
            });
        }
        out.push(best.expect("non-empty slice"));
    }
    out
}

/// Grid energy re-summed edge list by edge list.
pub fn oracle_energy(volume: &CostVolume, model: &SmoothnessModel, field: &DisparityField) -> i64 {
    let offsets = all_offsets(volume.space());
    let l1 = model.prior.exponent();
    let (w, h) = (volume.width(), volume.height());
    let weight = |x: usize, y: usize, axis: Axis| match &model.weights {
        Some(ws) => i64::from(ws.weight(x, y, axis)),
        None => 1,
    };
    let mut total = 0i64;
    for y in 0..h {
        for x in 0..w {
            total += i64::from(volume.cost(x, y, field.label(x, y) as usize));
        }
    }
    for y in 0..h {
        for x in 1..w {
            let (a, b) = (field.label(x - 1, y) as usize, field.label(x, y) as usize);
            total += pair_penalty(&offsets[a], &offsets[b], l1, model.truncation, model.lambda, weight(x - 1, y, Axis::X));
        }
    }
    for y in 1..h {
        for x in 0..w {
            let (a, b) = (field.label(x, y - 1) as usize, field.label(x, y) as usize);
            total += pair_penalty(&offsets[a], &offsets[b], l1, model.truncation, model.lambda, weight(x, y - 1, Axis::Y));
        }
    }
    total
}

/// Exact chain minimum and every path attaining it (in lexicographic order).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainOptimum {
    pub energy: i64,
    pub paths: Vec<Vec<u32>>,
}

impl ChainOptimum {
    pub fn is_unique(&self) -> bool {
        self.paths.len() == 1
    }
}

/// Enumerates all `Q^len` paths of a scanline problem.
pub fn oracle_chain(problem: &ScanlineProblem) -> Result<ChainOptimum> {
    let q = problem.labels();
    let len = problem.len();
    let states = (q as u128).checked_pow(len as u32).unwrap_or(u128::MAX);
    if states > CHAIN_STATE_LIMIT {
        return Err(Error::StateSpaceTooLarge {
            states,
            limit: CHAIN_STATE_LIMIT,
        });
    }
    let offsets = all_offsets(problem.space());
    let model = problem.model();
    let l1 = model.prior.exponent();

    let mut path = vec![0u32; len];
    let mut best = ChainOptimum {
        energy: i64::MAX,
        paths: Vec::new(),
    };
    loop {
        let mut energy = 0i64;
        for x in 0..len {
            energy += problem.slice(x)[path[x] as usize];
            if x > 0 {
                energy += pair_penalty(
                    &offsets[path[x - 1] as usize],
                    &offsets[path[x] as usize],
                    l1,
                    model.truncation,
                    model.lambda,
                    problem.weight(x - 1),
                );
            }
        }
        if energy < best.energy {
            best.energy = energy;
            best.paths.clear();
        }
        if energy == best.energy {
            best.paths.push(path.clone());
        }
        // odometer, last pixel fastest so paths come out lexicographically
        let mut i = len;
        loop {
            if i == 0 {
                return Ok(best);
            }
            i -= 1;
            path[i] += 1;
            if (path[i] as usize) < q {
                break;
            }
            path[i] = 0;
        }
    }
}

/// A seeded grid small enough for exhaustive minimization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TinyInstance {
    pub seed: u64,
    pub volume: CostVolume,
    pub model: SmoothnessModel,
}

impl TinyInstance {
    pub fn new(seed: u64, volume: CostVolume, model: SmoothnessModel) -> Result<Self> {
        let states = (volume.labels() as u128)
            .checked_pow(volume.pixels() as u32)
            .unwrap_or(u128::MAX);
        if states > GRID_STATE_LIMIT {
            return Err(Error::StateSpaceTooLarge {
                states,
                limit: GRID_STATE_LIMIT,
            });
        }
        Ok(Self { seed, volume, model })
    }

    /// A [`random_grid`] instance, rejected if too large to enumerate.
    pub fn generate(seed: u64, width: usize, height: usize, labels: u32) -> Result<Self> {
        let (volume, model) = random_grid(seed, width, height, labels)?;
        Self::new(seed, volume, model)
    }
}

/// Random costs in `[0, 100]`, random prior, `g ∈ {1, 2}`, `λ ∈ [1, 40]`
/// and random edge weights in `{1, 2}`.
pub fn random_grid(seed: u64, width: usize, height: usize, labels: u32) -> Result<(CostVolume, SmoothnessModel)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prior = if rng.random_bool(0.5) { Prior::Linear } else { Prior::Quadratic };
    let g = rng.random_range(1..=2);
    let lambda = rng.random_range(1..=40);
    let space = LabelSpace::stereo(labels - 1)?;
    let volume = CostVolume::from_fn(width, height, space, 100, |_, _, _| rng.random_range(0..=100))?;
    let n = width * height;
    let horizontal = (0..n).map(|_| rng.random_range(1..=2)).collect();
    let vertical = (0..n).map(|_| rng.random_range(1..=2)).collect();
    let model = SmoothnessModel::new(prior, g, lambda)?.with_weights(EdgeWeights::new(width, height, horizontal, vertical)?);
    Ok((volume, model))
}

/// Exact 2D minimum by depth-first enumeration of every labeling.
///
/// Pixels are assigned in raster order; each partial energy includes the
/// data term and the edges to already-assigned left/upper neighbours, so
/// every complete labeling is scored exactly once. The first labeling (in
/// lexicographic raster order) reaching the minimum is returned.
pub fn oracle_grid(instance: &TinyInstance) -> Result<(i64, DisparityField)> {
    let volume = &instance.volume;
    let model = &instance.model;
    let (w, h, q) = (volume.width(), volume.height(), volume.labels());
    let states = (q as u128).checked_pow((w * h) as u32).unwrap_or(u128::MAX);
    if states > GRID_STATE_LIMIT {
        return Err(Error::StateSpaceTooLarge {
            states,
            limit: GRID_STATE_LIMIT,
        });
    }
    let offsets = all_offsets(volume.space());
    let l1 = model.prior.exponent();
    let weight = |x: usize, y: usize, axis: Axis| match &model.weights {
        Some(ws) => i64::from(ws.weight(x, y, axis)),
        None => 1,
    };
    // pen[edge][a][b] for every left and upper edge of every pixel
    let mut left_pen = vec![vec![0i64; q * q]; w * h];
    let mut up_pen = vec![vec![0i64; q * q]; w * h];
    for y in 0..h {
        for x in 0..w {
            for a in 0..q {
                for b in 0..q {
                    if x > 0 {
                        left_pen[y * w + x][a * q + b] =
                            pair_penalty(&offsets[a], &offsets[b], l1, model.truncation, model.lambda, weight(x - 1, y, Axis::X));
                    }
                    if y > 0 {
                        up_pen[y * w + x][a * q + b] =
                            pair_penalty(&offsets[a], &offsets[b], l1, model.truncation, model.lambda, weight(x, y - 1, Axis::Y));
                    }
                }
            }
        }
    }

    struct Search<'a> {
        w: usize,
        n: usize,
        q: usize,
        volume: &'a CostVolume,
        left_pen: &'a [Vec<i64>],
        up_pen: &'a [Vec<i64>],
        labels: Vec<usize>,
        best: i64,
        best_labels: Vec<usize>,
    }

    impl Search<'_> {
        fn descend(&mut self, i: usize, partial: i64) {
            if i == self.n {
                if partial < self.best {
                    self.best = partial;
                    self.best_labels.clone_from(&self.labels);
                }
                return;
            }
            let (x, y) = (i % self.w, i / self.w);
            for v in 0..self.q {
                let mut e = partial + i64::from(self.volume.cost(x, y, v));
                if x > 0 {
                    e += self.left_pen[i][self.labels[i - 1] * self.q + v];
                }
                if y > 0 {
                    e += self.up_pen[i][self.labels[i - self.w] * self.q + v];
                }
                self.labels[i] = v;
                self.descend(i + 1, e);
            }
        }
    }

    let mut search = Search {
        w,
        n: w * h,
        q,
        volume,
        left_pen: &left_pen,
        up_pen: &up_pen,
        labels: vec![0; w * h],
        best: i64::MAX,
        best_labels: vec![0; w * h],
    };
    search.descend(0, 0);
    let field = DisparityField::new(w, h, search.best_labels.iter().map(|&v| v as u32).collect())?;
    Ok((search.best, field))
}

fn floor_half(s: i64) -> i64 {
    if s >= 0 {
        s / 2
    } else {
        -((1 - s) / 2)
    }
}

/// Direction sums keyed by `(direction name, x, y)`, as a plain map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleSums {
    pub width: usize,
    pub height: usize,
    pub labels: usize,
    pub map: HashMap<(&'static str, usize, usize), Vec<i64>>,
}

const NAMES: [&str; 4] = ["+x", "-x", "+y", "-y"];

fn name_of(dir: Direction) -> &'static str {
    match dir {
        Direction::PosX => "+x",
        Direction::NegX => "-x",
        Direction::PosY => "+y",
        Direction::NegY => "-y",
    }
}

impl OracleSums {
    pub fn zeros(width: usize, height: usize, labels: usize) -> Self {
        let mut map = HashMap::new();
        for name in NAMES {
            for y in 0..height {
                for x in 0..width {
                    map.insert((name, x, y), vec![0; labels]);
                }
            }
        }
        Self {
            width,
            height,
            labels,
            map,
        }
    }

    /// Whether every value agrees with the engine's sums.
    pub fn first_difference(&self, sums: &DirectionSums) -> Option<String> {
        for dir in Direction::ALL {
            for y in 0..self.height {
                for x in 0..self.width {
                    let mine = &self.map[&(name_of(dir), x, y)];
                    let theirs = sums.slice(dir, x, y);
                    if mine.as_slice() != theirs {
                        return Some(format!("S{} at ({x}, {y}): oracle {mine:?}, engine {theirs:?}", name_of(dir)));
                    }
                }
            }
        }
        None
    }

    /// The four messages arriving at `(x, y)`, computed from the current map.
    fn messages(&self, volume: &CostVolume, model: &SmoothnessModel, scale: i64, x: usize, y: usize) -> HashMap<&'static str, Vec<i64>> {
        let scaled = SmoothnessModel {
            lambda: model.lambda * scale,
            ..model.clone()
        };
        let weight = |ex: usize, ey: usize, axis: Axis| match &model.weights {
            Some(ws) => i64::from(ws.weight(ex, ey, axis)),
            None => 1,
        };
        let mut out = HashMap::new();
        // (name, neighbour, edge owner, axis)
        let mut sources = Vec::new();
        if x >= 1 {
            sources.push(("+x", (x - 1, y), (x - 1, y), Axis::X));
        }
        if x + 1 < self.width {
            sources.push(("-x", (x + 1, y), (x, y), Axis::X));
        }
        if y >= 1 {
            sources.push(("+y", (x, y - 1), (x, y - 1), Axis::Y));
        }
        if y + 1 < self.height {
            sources.push(("-y", (x, y + 1), (x, y), Axis::Y));
        }
        for name in NAMES {
            out.insert(name, vec![0; self.labels]);
        }
        for (name, (nx, ny), (ex, ey), axis) in sources {
            let halved: Vec<i64> = self.map[&(name, nx, ny)].iter().map(|&s| floor_half(s)).collect();
            out.insert(name, oracle_minplus(&halved, volume.space(), &scaled, weight(ex, ey, axis)));
        }
        out
    }
}

fn opposite_name(name: &str) -> &'static str {
    match name {
        "+x" => "-x",
        "-x" => "+x",
        "+y" => "-y",
        _ => "+y",
    }
}

/// One literal raster pass of the direction-sum recursion.
#[allow(clippy::needless_range_loop)]
pub fn oracle_edp_step(
    sums: &OracleSums,
    volume: &CostVolume,
    model: &SmoothnessModel,
    order: ScanOrder,
    scale: i64,
) -> OracleSums {
    let mut next = sums.clone();
    let (xs, updated_x): (Vec<usize>, &str) = match order {
        ScanOrder::P1 | ScanOrder::P3 => ((0..sums.width).collect(), "+x"),
        ScanOrder::P2 | ScanOrder::P4 => ((0..sums.width).rev().collect(), "-x"),
    };
    let (ys, updated_y): (Vec<usize>, &str) = match order {
        ScanOrder::P1 | ScanOrder::P2 => ((0..sums.height).collect(), "+y"),
        ScanOrder::P3 | ScanOrder::P4 => ((0..sums.height).rev().collect(), "-y"),
    };
    let updated = [
        if updated_x == "+x" { "+x" } else { "-x" },
        if updated_y == "+y" { "+y" } else { "-y" },
    ];
    for &y in &ys {
        for &x in &xs {
            let messages = next.messages(volume, model, scale, x, y);
            for target in updated {
                let excluded = opposite_name(target);
                let mut value = Vec::with_capacity(sums.labels);
                for v in 0..sums.labels {
                    let kept: i64 = NAMES.iter().filter(|&&n| n != excluded).map(|n| messages[n][v]).sum();
                    value.push(i64::from(volume.cost(x, y, v)) * scale + kept - messages[excluded][v]);
                }
                next.map.insert((target, x, y), value);
            }
        }
    }
    next
}

/// `C + Σ_k m_k` at every pixel, literal form.
#[allow(clippy::needless_range_loop)]
pub fn oracle_marginals(sums: &OracleSums, volume: &CostVolume, model: &SmoothnessModel, scale: i64) -> Vec<i64> {
    let mut out = Vec::with_capacity(sums.width * sums.height * sums.labels);
    for y in 0..sums.height {
        for x in 0..sums.width {
            let messages = sums.messages(volume, model, scale, x, y);
            for v in 0..sums.labels {
                let incoming: i64 = NAMES.iter().map(|n| messages[n][v]).sum();
                out.push(i64::from(volume.cost(x, y, v)) * scale + incoming);
            }
        }
    }
    out
}
