//! Min-plus convolution of a label slice with the truncated prior:
//!
//! ```text
//! out(v') = min_v [ s(v) + w·λ·min(Σ_r f(|v'_r − v_r|), f(g)) ]
//! ```
//!
//! Three interchangeable realizations are provided, all bit-identical:
//!
//! * [`Operator::Sfms`] evaluates every candidate directly, `Q` per label.
//! * [`Operator::Grms`] splits the untruncated part per dimension. Each
//!   dimension only needs candidates with `|u_r| ≤ ⌈a·g⌉ − 1`, because
//!   anything further away is dominated by the clip term
//!   `min_v s(v) + w·λ·f(g)`. That is `R·(2⌈a·g⌉ − 1) + 1` candidates per label.
//! * [`Operator::Lrms`] (linear prior only) replaces each windowed pass by a
//!   forward and a backward running minimum plus a combine, `3R + 1` per label.
//!
//! Operation counts are tallied in [`OperatorStats`] per output label
//! ("vertex"). Window slots that fall outside the label box are counted as
//! comparisons against the infinity sentinel.

use crate::error::{Error, Result};
use crate::grid_model::{LabelSpace, Prior, SmoothnessModel};

/// Saturating stand-in for an empty minimum. Never appears in outputs.
pub const INFINITY: i64 = i64::MAX;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Operator {
    Sfms,
    Grms,
    Lrms,
}

impl Operator {
    pub const ALL: [Operator; 3] = [Operator::Sfms, Operator::Grms, Operator::Lrms];

    pub fn name(self) -> &'static str {
        match self {
            Operator::Sfms => "sfms",
            Operator::Grms => "grms",
            Operator::Lrms => "lrms",
        }
    }

    pub fn supports(self, prior: Prior) -> bool {
        self != Operator::Lrms || prior == Prior::Linear
    }

    /// Fastest operator valid for `prior`.
    pub fn fastest_for(prior: Prior) -> Self {
        match prior {
            Prior::Linear => Operator::Lrms,
            Prior::Quadratic => Operator::Grms,
        }
    }
}

impl std::fmt::Display for Operator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Operator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sfms" => Ok(Operator::Sfms),
            "grms" => Ok(Operator::Grms),
            "lrms" => Ok(Operator::Lrms),
            other => Err(Error::InvalidConfig(format!("unknown operator '{other}'"))),
        }
    }
}

/// Candidate comparisons performed, and the number of output labels they
/// produced.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct OperatorStats {
    pub comparisons: u64,
    pub vertices: u64,
}

impl OperatorStats {
    pub fn per_vertex(&self) -> f64 {
        if self.vertices == 0 {
            0.0
        } else {
            self.comparisons as f64 / self.vertices as f64
        }
    }

    pub fn merge(&mut self, other: &OperatorStats) {
        self.comparisons += other.comparisons;
        self.vertices += other.vertices;
    }
}

/// Minimum value of a slice and its lowest index.
pub fn slice_min(slice: &[i64]) -> (i64, usize) {
    assert!(!slice.is_empty(), "slice_min of an empty slice");
    let mut best = 0;
    for (i, &s) in slice.iter().enumerate().skip(1) {
        if s < slice[best] {
            best = i;
        }
    }
    (slice[best], best)
}

const SFMS_TABLE_LIMIT: usize = 1 << 22;

/// Reusable message operator for one label space and prior.
///
/// Scratch buffers live inside, so an instance is cheap to apply repeatedly
/// but must not be shared across threads; clone one per worker.
#[derive(Clone, Debug)]
pub struct MinPlus {
    extents: Vec<usize>,
    strides: Vec<usize>,
    count: usize,
    prior: Prior,
    lambda: i64,
    truncated: i64,
    half_window: usize,
    /// Per-label coordinate along each dimension, `coords[d][v]`.
    coords: Vec<Vec<usize>>,
    /// Unweighted truncated distance for every (target, source) pair.
    sfms_table: Option<Vec<u32>>,
    scratch_a: Vec<i64>,
    scratch_b: Vec<i64>,
}

impl MinPlus {
    /// Operator with the default window scale `a = 1`.
    pub fn new(space: &LabelSpace, model: &SmoothnessModel) -> Self {
        Self::with_window_scale(space, model, 1.0).expect("window scale 1 is valid")
    }

    pub fn with_window_scale(space: &LabelSpace, model: &SmoothnessModel, window_scale: f64) -> Result<Self> {
        if !(window_scale >= 1.0 && window_scale.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "window scale must be a finite value >= 1, got {window_scale}"
            )));
        }
        if model.truncation == 0 {
            return Err(Error::InvalidConfig("truncation g must be >= 1".into()));
        }
        let extents = space.extents();
        let strides: Vec<usize> = (0..space.dims()).map(|d| space.stride(d)).collect();
        let count = space.count();
        let coords = (0..space.dims())
            .map(|d| (0..count).map(|v| (v / strides[d]) % extents[d]).collect())
            .collect();
        let window = (window_scale * f64::from(model.truncation)).ceil() as usize;
        Ok(Self {
            extents,
            strides,
            count,
            prior: model.prior,
            lambda: model.lambda,
            truncated: model.truncated_distance() as i64,
            half_window: window - 1,
            coords,
            sfms_table: None,
            scratch_a: vec![0; count],
            scratch_b: vec![0; count],
        })
    }

    pub fn labels(&self) -> usize {
        self.count
    }

    pub fn dims(&self) -> usize {
        self.extents.len()
    }

    /// Per-dimension window half-width `⌈a·g⌉ − 1`.
    pub fn half_window(&self) -> usize {
        self.half_window
    }

    pub fn prior(&self) -> Prior {
        self.prior
    }

    /// Nominal comparisons per output label for `op`.
    pub fn comparisons_per_vertex(&self, op: Operator) -> u64 {
        let r = self.dims() as u64;
        match op {
            Operator::Sfms => self.count as u64,
            Operator::Grms => r * (2 * self.half_window as u64 + 1) + 1,
            Operator::Lrms => 3 * r + 1,
        }
    }

    pub fn check(&self, op: Operator) -> Result<()> {
        if op.supports(self.prior) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "operator {op} requires the linear prior (l1 = 1)"
            )))
        }
    }

    #[inline]
    fn unit_distance(&self, target: usize, source: usize) -> i64 {
        let dist: u64 = self
            .coords
            .iter()
            .map(|c| self.prior.distance(c[target].abs_diff(c[source]) as u64))
            .sum();
        (dist as i64).min(self.truncated)
    }

    /// Applies `op` to `input`, writing into `out`.
    pub fn apply(
        &mut self,
        op: Operator,
        input: &[i64],
        weight: i64,
        out: &mut [i64],
        stats: &mut OperatorStats,
    ) -> Result<()> {
        self.check(op)?;
        if input.len() != self.count || out.len() != self.count {
            return Err(Error::DimensionMismatch(format!(
                "operator expects slices of length {}, got {} and {}",
                self.count,
                input.len(),
                out.len()
            )));
        }
        match op {
            Operator::Sfms => self.sfms(input, weight, out, stats),
            Operator::Grms => self.grms(input, weight, out, stats),
            Operator::Lrms => self.lrms(input, weight, out, stats),
        }
        Ok(())
    }

    /// Allocating convenience wrapper around [`MinPlus::apply`].
    pub fn apply_vec(&mut self, op: Operator, input: &[i64], weight: i64) -> Result<Vec<i64>> {
        let mut out = vec![0; self.count];
        let mut stats = OperatorStats::default();
        self.apply(op, input, weight, &mut out, &mut stats)?;
        Ok(out)
    }

    fn sfms(&mut self, input: &[i64], weight: i64, out: &mut [i64], stats: &mut OperatorStats) {
        let q = self.count;
        let step = weight * self.lambda;
        if self.sfms_table.is_none() && q * q <= SFMS_TABLE_LIMIT {
            let table = (0..q)
                .flat_map(|t| (0..q).map(move |s| (t, s)))
                .map(|(t, s)| self.unit_distance(t, s) as u32)
                .collect();
            self.sfms_table = Some(table);
        }
        match &self.sfms_table {
            Some(table) => {
                for (target, o) in out.iter_mut().enumerate() {
                    let row = &table[target * q..(target + 1) * q];
                    *o = input
                        .iter()
                        .zip(row)
                        .map(|(&s, &d)| s + step * i64::from(d))
                        .min()
                        .unwrap_or(INFINITY);
                }
            }
            None => {
                for (target, o) in out.iter_mut().enumerate() {
                    *o = (0..q)
                        .map(|source| input[source] + step * self.unit_distance(target, source))
                        .min()
                        .unwrap_or(INFINITY);
                }
            }
        }
        stats.comparisons += (q * q) as u64;
        stats.vertices += q as u64;
    }

    /// Calls `f(first, stride, len)` for every line of the label box along `dim`.
    fn for_each_line(&self, dim: usize, mut f: impl FnMut(usize, usize, usize)) {
        let stride = self.strides[dim];
        let len = self.extents[dim];
        let block = stride * len;
        for start in (0..self.count).step_by(block) {
            for inner in 0..stride {
                f(start + inner, stride, len);
            }
        }
    }

    fn clip(&self, input: &[i64], weight: i64, out: &mut [i64], stats: &mut OperatorStats) {
        let (smin, _) = slice_min(input);
        let cap = smin.saturating_add(weight * self.lambda * self.truncated);
        for o in out.iter_mut() {
            *o = (*o).min(cap);
        }
        stats.comparisons += self.count as u64;
        stats.vertices += self.count as u64;
    }

    fn grms(&mut self, input: &[i64], weight: i64, out: &mut [i64], stats: &mut OperatorStats) {
        let h = self.half_window;
        let step = weight * self.lambda;
        let offsets: Vec<i64> = (0..=h).map(|u| step * self.prior.distance(u as u64) as i64).collect();

        let mut src = std::mem::take(&mut self.scratch_a);
        let mut dst = std::mem::take(&mut self.scratch_b);
        src.copy_from_slice(input);
        for dim in 0..self.dims() {
            self.for_each_line(dim, |first, stride, len| {
                for i in 0..len {
                    let mut best = INFINITY;
                    let lo = i.saturating_sub(h);
                    let hi = (i + h).min(len - 1);
                    for j in lo..=hi {
                        let cand = src[first + j * stride] + offsets[i.abs_diff(j)];
                        if cand < best {
                            best = cand;
                        }
                    }
                    dst[first + i * stride] = best;
                }
            });
            stats.comparisons += (self.count * (2 * h + 1)) as u64;
            std::mem::swap(&mut src, &mut dst);
        }
        out.copy_from_slice(&src);
        self.scratch_a = src;
        self.scratch_b = dst;
        self.clip(input, weight, out, stats);
    }

    fn lrms(&mut self, input: &[i64], weight: i64, out: &mut [i64], stats: &mut OperatorStats) {
        let step = weight * self.lambda;
        let mut src = std::mem::take(&mut self.scratch_a);
        let mut dst = std::mem::take(&mut self.scratch_b);
        src.copy_from_slice(input);
        for dim in 0..self.dims() {
            self.for_each_line(dim, |first, stride, len| {
                // forward: best over sources at or before i
                let mut carry = INFINITY;
                for i in 0..len {
                    let k = first + i * stride;
                    carry = carry.saturating_add(step).min(src[k]);
                    dst[k] = carry;
                }
                // backward: best over sources strictly after i, then combine
                let mut carry = INFINITY;
                for i in (0..len).rev() {
                    let k = first + i * stride;
                    let ahead = carry;
                    carry = carry.min(src[k]).saturating_add(step);
                    dst[k] = dst[k].min(ahead);
                }
            });
            stats.comparisons += 3 * self.count as u64;
            std::mem::swap(&mut src, &mut dst);
        }
        out.copy_from_slice(&src);
        self.scratch_a = src;
        self.scratch_b = dst;
        self.clip(input, weight, out, stats);
    }

    /// Lowest source label `v` attaining `input[v] + penalty(target, v) == achieved`,
    /// where `achieved` is the operator output at `target`.
    ///
    /// Only the window box around `target` is scanned; sources outside it all
    /// pay the truncated penalty, so the best of them is the first entry of
    /// `min_positions` (ascending indices of `input`'s minimum) outside the box.
    pub fn predecessor(
        &self,
        input: &[i64],
        min_positions: &[usize],
        weight: i64,
        target: usize,
        achieved: i64,
        stats: &mut OperatorStats,
    ) -> usize {
        let h = self.half_window;
        let step = weight * self.lambda;
        let dims = self.dims();
        let lo: Vec<usize> = (0..dims).map(|d| self.coords[d][target].saturating_sub(h)).collect();
        let hi: Vec<usize> = (0..dims)
            .map(|d| (self.coords[d][target] + h).min(self.extents[d] - 1))
            .collect();

        let mut best = usize::MAX;
        let mut cursor = lo.clone();
        loop {
            let source: usize = cursor.iter().zip(&self.strides).map(|(c, s)| c * s).sum();
            stats.comparisons += 1;
            if source < best && input[source] + step * self.unit_distance(target, source) == achieved {
                best = source;
            }
            let mut d = 0;
            while d < dims {
                if cursor[d] < hi[d] {
                    cursor[d] += 1;
                    break;
                }
                cursor[d] = lo[d];
                d += 1;
            }
            if d == dims {
                break;
            }
        }

        if let Some(&first) = min_positions.first() {
            if input[first] + step * self.truncated == achieved {
                let inside = |v: usize| (0..dims).all(|d| self.coords[d][v] >= lo[d] && self.coords[d][v] <= hi[d]);
                if let Some(&outside) = min_positions.iter().find(|&&v| !inside(v)) {
                    best = best.min(outside);
                }
            }
        }
        stats.vertices += 1;
        debug_assert!(best != usize::MAX, "no source attains the operator output");
        best
    }
}

/// Straightforward minimum search, `Q` candidates per label.
pub fn apply_sfms(slice: &[i64], space: &LabelSpace, model: &SmoothnessModel, weight: i64) -> Vec<i64> {
    MinPlus::new(space, model)
        .apply_vec(Operator::Sfms, slice, weight)
        .expect("sfms supports every prior")
}

/// Windowed per-dimension search with window scale `a ≥ 1`.
pub fn apply_grms(
    slice: &[i64],
    space: &LabelSpace,
    model: &SmoothnessModel,
    weight: i64,
    window_scale: f64,
) -> Result<Vec<i64>> {
    MinPlus::with_window_scale(space, model, window_scale)?.apply_vec(Operator::Grms, slice, weight)
}

/// Two-pass recursion for the truncated linear prior.
pub fn apply_lrms(slice: &[i64], space: &LabelSpace, model: &SmoothnessModel, weight: i64) -> Result<Vec<i64>> {
    MinPlus::new(space, model).apply_vec(Operator::Lrms, slice, weight)
}
