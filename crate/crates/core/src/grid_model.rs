//! Pixel grids, label spaces, cost volumes and smoothness models, plus the
//! reference energy evaluator every solver is measured against.
//!
//! All energies are integers. A labeling `v(x)` on a `width × height` grid
//! has energy
//!
//! ```text
//! E = Σ_x C(x, v(x)) + Σ_{(x, x+e)} w(x, e) · λ · min(Σ_r |Δv_r|^l1, g^l1)
//! ```
//!
//! where the second sum runs once over every horizontal and vertical
//! 4-neighbour pair (no wraparound).

use crate::error::{Error, Result};

/// A box of integer label offsets, one closed interval per dimension.
///
/// Linear indices enumerate the box with dimension 0 varying fastest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelSpace {
    bounds: Vec<(i32, i32)>,
    strides: Vec<usize>,
    count: usize,
}

impl LabelSpace {
    pub fn new(bounds: Vec<(i32, i32)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::InvalidConfig(
                "label space needs at least one dimension".into(),
            ));
        }
        let mut strides = Vec::with_capacity(bounds.len());
        let mut count = 1usize;
        for (dim, &(lower, upper)) in bounds.iter().enumerate() {
            if upper < lower {
                return Err(Error::InvalidConfig(format!(
                    "label dimension {dim} has empty range [{lower}, {upper}]"
                )));
            }
            strides.push(count);
            let extent = (i64::from(upper) - i64::from(lower) + 1) as usize;
            count = count.checked_mul(extent).ok_or_else(|| {
                Error::InvalidConfig("label count overflows usize".into())
            })?;
        }
        Ok(Self {
            bounds,
            strides,
            count,
        })
    }

    /// One-dimensional disparity range `[0, max_disparity]`.
    pub fn stereo(max_disparity: u32) -> Result<Self> {
        let upper = i32::try_from(max_disparity)
            .map_err(|_| Error::InvalidConfig("max disparity too large".into()))?;
        Self::new(vec![(0, upper)])
    }

    /// Two-dimensional motion box `[-range_x, range_x] × [-range_y, range_y]`.
    pub fn motion(range_x: u32, range_y: u32) -> Result<Self> {
        let rx = i32::try_from(range_x)
            .map_err(|_| Error::InvalidConfig("x range too large".into()))?;
        let ry = i32::try_from(range_y)
            .map_err(|_| Error::InvalidConfig("y range too large".into()))?;
        Self::new(vec![(-rx, rx), (-ry, ry)])
    }

    /// Number of dimensions `R`.
    pub fn dims(&self) -> usize {
        self.bounds.len()
    }

    /// Total number of labels `Q`.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn bounds(&self) -> &[(i32, i32)] {
        &self.bounds
    }

    pub fn extent(&self, dim: usize) -> usize {
        let (lower, upper) = self.bounds[dim];
        (i64::from(upper) - i64::from(lower) + 1) as usize
    }

    pub fn extents(&self) -> Vec<usize> {
        (0..self.dims()).map(|d| self.extent(d)).collect()
    }

    pub fn stride(&self, dim: usize) -> usize {
        self.strides[dim]
    }

    /// Linear index of a per-dimension offset vector.
    pub fn index(&self, offsets: &[i32]) -> Result<usize> {
        if offsets.len() != self.dims() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} label offsets, got {}",
                self.dims(),
                offsets.len()
            )));
        }
        let mut index = 0;
        for (dim, (&offset, &(lower, upper))) in offsets.iter().zip(&self.bounds).enumerate() {
            if offset < lower || offset > upper {
                return Err(Error::LabelOutOfRange {
                    dim,
                    offset,
                    lower,
                    upper,
                });
            }
            index += (offset - lower) as usize * self.strides[dim];
        }
        Ok(index)
    }

    /// Offset of label `index` along one dimension.
    pub fn offset(&self, index: usize, dim: usize) -> i32 {
        debug_assert!(index < self.count);
        let coord = (index / self.strides[dim]) % self.extent(dim);
        self.bounds[dim].0 + coord as i32
    }

    /// Inverse of [`LabelSpace::index`].
    pub fn offsets(&self, index: usize) -> Result<Vec<i32>> {
        if index >= self.count {
            return Err(Error::InvalidConfig(format!(
                "label index {index} outside [0, {})",
                self.count
            )));
        }
        Ok((0..self.dims()).map(|d| self.offset(index, d)).collect())
    }
}

/// An 8-bit image with one (grayscale) or three (RGB) interleaved channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PixelGrid {
    width: usize,
    height: usize,
    channels: usize,
    samples: Vec<u8>,
}

impl PixelGrid {
    pub fn new(width: usize, height: usize, channels: usize, samples: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidConfig(format!(
                "image must be non-empty, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidConfig(format!(
                "unsupported channel count {channels}"
            )));
        }
        if samples.len() != width * height * channels {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height}x{channels} image needs {} samples, got {}",
                width * height * channels,
                samples.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            samples,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> u8,
    ) -> Result<Self> {
        let mut samples = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    samples.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, samples)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let start = (y * self.width + x) * self.channels;
        &self.samples[start..start + self.channels]
    }

    /// Rounded mean of the channels.
    pub fn luminance(&self, x: usize, y: usize) -> u8 {
        let px = self.pixel(x, y);
        let sum: u32 = px.iter().map(|&s| u32::from(s)).sum();
        let c = px.len() as u32;
        ((2 * sum + c) / (2 * c)) as u8
    }
}

/// The disparity space image: one truncated matching cost per pixel and label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostVolume {
    width: usize,
    height: usize,
    space: LabelSpace,
    c_max: u32,
    costs: Vec<u32>,
}

impl CostVolume {
    /// Wraps pixel-major costs (`(y * width + x) * Q + label`).
    pub fn new(
        width: usize,
        height: usize,
        space: LabelSpace,
        c_max: u32,
        costs: Vec<u32>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidConfig("cost volume must be non-empty".into()));
        }
        let expected = width * height * space.count();
        if costs.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "cost volume needs {expected} entries, got {}",
                costs.len()
            )));
        }
        if let Some(bad) = costs.iter().find(|&&c| c > c_max) {
            return Err(Error::InvalidConfig(format!(
                "cost {bad} exceeds truncation bound {c_max}"
            )));
        }
        Ok(Self {
            width,
            height,
            space,
            c_max,
            costs,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        space: LabelSpace,
        c_max: u32,
        mut f: impl FnMut(usize, usize, usize) -> u32,
    ) -> Result<Self> {
        let q = space.count();
        let mut costs = Vec::with_capacity(width * height * q);
        for y in 0..height {
            for x in 0..width {
                for v in 0..q {
                    costs.push(f(x, y, v));
                }
            }
        }
        Self::new(width, height, space, c_max, costs)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn space(&self) -> &LabelSpace {
        &self.space
    }

    pub fn labels(&self) -> usize {
        self.space.count()
    }

    pub fn c_max(&self) -> u32 {
        self.c_max
    }

    pub fn costs(&self) -> &[u32] {
        &self.costs
    }

    pub fn slice(&self, x: usize, y: usize) -> &[u32] {
        let q = self.labels();
        let start = (y * self.width + x) * q;
        &self.costs[start..start + q]
    }

    pub fn cost(&self, x: usize, y: usize, label: usize) -> u32 {
        self.slice(x, y)[label]
    }

    /// Sum of all `N·Q` costs; the mean cost is `cost_sum() / costs().len()`.
    pub fn cost_sum(&self) -> u64 {
        self.costs.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn mean_cost(&self) -> f64 {
        self.cost_sum() as f64 / self.costs.len() as f64
    }
}

/// Shape of the distance function `f` in the truncated prior.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Prior {
    /// `f(u) = |u|`
    Linear,
    /// `f(u) = u²`
    Quadratic,
}

impl Prior {
    pub fn from_exponent(l1: u32) -> Result<Self> {
        match l1 {
            1 => Ok(Prior::Linear),
            2 => Ok(Prior::Quadratic),
            other => Err(Error::InvalidConfig(format!(
                "prior exponent must be 1 or 2, got {other}"
            ))),
        }
    }

    pub fn exponent(self) -> u32 {
        match self {
            Prior::Linear => 1,
            Prior::Quadratic => 2,
        }
    }

    #[inline]
    pub fn distance(self, delta: u64) -> u64 {
        match self {
            Prior::Linear => delta,
            Prior::Quadratic => delta * delta,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
}

/// Per-edge multipliers `w(x, axis)` for the edge from `x` to `x + e_axis`.
///
/// Entries on the last column (X) or last row (Y) have no edge and are
/// never read.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeWeights {
    width: usize,
    height: usize,
    horizontal: Vec<u8>,
    vertical: Vec<u8>,
}

impl EdgeWeights {
    pub fn uniform(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            horizontal: vec![1; width * height],
            vertical: vec![1; width * height],
        }
    }

    pub fn new(width: usize, height: usize, horizontal: Vec<u8>, vertical: Vec<u8>) -> Result<Self> {
        let n = width * height;
        if horizontal.len() != n || vertical.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "edge weights for {width}x{height} need {n} entries per axis"
            )));
        }
        Ok(Self {
            width,
            height,
            horizontal,
            vertical,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn weight(&self, x: usize, y: usize, axis: Axis) -> u8 {
        let i = y * self.width + x;
        match axis {
            Axis::X => self.horizontal[i],
            Axis::Y => self.vertical[i],
        }
    }

    pub fn set(&mut self, x: usize, y: usize, axis: Axis, w: u8) {
        let i = y * self.width + x;
        match axis {
            Axis::X => self.horizontal[i] = w,
            Axis::Y => self.vertical[i] = w,
        }
    }
}

/// The truncated pairwise prior and its optional adaptive edge weights.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmoothnessModel {
    pub prior: Prior,
    /// Truncation threshold `g` in label units.
    pub truncation: u32,
    /// Base penalty `λ` in energy units.
    pub lambda: i64,
    /// `None` means every edge has weight 1.
    pub weights: Option<EdgeWeights>,
}

impl SmoothnessModel {
    pub fn new(prior: Prior, truncation: u32, lambda: i64) -> Result<Self> {
        if truncation == 0 {
            return Err(Error::InvalidConfig("truncation g must be >= 1".into()));
        }
        if lambda < 0 {
            return Err(Error::InvalidConfig(format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(Self {
            prior,
            truncation,
            lambda,
            weights: None,
        })
    }

    pub fn with_weights(mut self, weights: EdgeWeights) -> Self {
        self.weights = Some(weights);
        self
    }

    /// `f(g)`, the cap on the summed label distance.
    pub fn truncated_distance(&self) -> u64 {
        self.prior.distance(u64::from(self.truncation))
    }

    /// Weight of the edge from `(x, y)` towards `+axis`.
    #[inline]
    pub fn edge_weight(&self, x: usize, y: usize, axis: Axis) -> i64 {
        self.weights
            .as_ref()
            .map_or(1, |w| i64::from(w.weight(x, y, axis)))
    }

    /// `w·λ·min(Σ_r f(|a_r − b_r|), f(g))`.
    pub fn edge_penalty(&self, a: &[i32], b: &[i32], weight: i64) -> i64 {
        let dist: u64 = a
            .iter()
            .zip(b)
            .map(|(&p, &q)| self.prior.distance(u64::from(p.abs_diff(q))))
            .sum();
        weight * self.lambda * dist.min(self.truncated_distance()) as i64
    }

    /// Same model with `λ` multiplied by `factor` (used for fixed-point scaling).
    pub fn scaled(&self, factor: i64) -> Self {
        Self {
            lambda: self.lambda * factor,
            ..self.clone()
        }
    }
}

/// One label index per pixel, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DisparityField {
    width: usize,
    height: usize,
    labels: Vec<u32>,
}

impl DisparityField {
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height} field needs {} labels, got {}",
                width * height,
                labels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn constant(width: usize, height: usize, label: u32) -> Self {
        Self {
            width,
            height,
            labels: vec![label; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, label: u32) {
        self.labels[y * self.width + x] = label;
    }

    /// Per-pixel argmin of the data cost (lowest label on ties).
    pub fn data_argmin(volume: &CostVolume) -> Self {
        let labels = volume
            .costs()
            .chunks_exact(volume.labels())
            .map(|slice| {
                let mut best = 0;
                for (v, &c) in slice.iter().enumerate() {
                    if c < slice[best] {
                        best = v;
                    }
                }
                best as u32
            })
            .collect();
        Self {
            width: volume.width(),
            height: volume.height(),
            labels,
        }
    }
}

/// Energy of a labeling split into its two terms.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct EnergyBreakdown {
    pub data: i64,
    pub smoothness: i64,
    pub pixels: u64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> i64 {
        self.data + self.smoothness
    }

    /// `Ē = E / N`.
    pub fn per_pixel(&self) -> f64 {
        self.total() as f64 / self.pixels as f64
    }

    /// `Ē` rounded half-up to two decimals, computed in integers.
    pub fn per_pixel_fixed2(&self) -> String {
        let n = i128::from(self.pixels);
        let hundredths = (200 * i128::from(self.total()) + n).div_euclid(2 * n);
        let sign = if hundredths < 0 { "-" } else { "" };
        let abs = hundredths.abs();
        format!("{sign}{}.{:02}", abs / 100, abs % 100)
    }
}

/// Total energy of `field` under `volume` and `model`.
pub fn evaluate_energy(
    volume: &CostVolume,
    model: &SmoothnessModel,
    field: &DisparityField,
) -> Result<EnergyBreakdown> {
    let (width, height) = (volume.width(), volume.height());
    if field.width() != width || field.height() != height {
        return Err(Error::DimensionMismatch(format!(
            "field is {}x{}, volume is {width}x{height}",
            field.width(),
            field.height()
        )));
    }
    if let Some(w) = &model.weights {
        if w.width() != width || w.height() != height {
            return Err(Error::DimensionMismatch(format!(
                "edge weights are {}x{}, volume is {width}x{height}",
                w.width(),
                w.height()
            )));
        }
    }
    let q = volume.labels();
    if let Some(&bad) = field.labels().iter().find(|&&l| l as usize >= q) {
        return Err(Error::InvalidConfig(format!("label {bad} outside [0, {q})")));
    }

    let space = volume.space();
    let offsets: Vec<Vec<i32>> = (0..q)
        .map(|v| (0..space.dims()).map(|d| space.offset(v, d)).collect())
        .collect();

    let mut data = 0i64;
    let mut smoothness = 0i64;
    for y in 0..height {
        for x in 0..width {
            let v = field.label(x, y) as usize;
            data += i64::from(volume.cost(x, y, v));
            if x + 1 < width {
                let right = field.label(x + 1, y) as usize;
                smoothness +=
                    model.edge_penalty(&offsets[v], &offsets[right], model.edge_weight(x, y, Axis::X));
            }
            if y + 1 < height {
                let below = field.label(x, y + 1) as usize;
                smoothness +=
                    model.edge_penalty(&offsets[v], &offsets[below], model.edge_weight(x, y, Axis::Y));
            }
        }
    }
    Ok(EnergyBreakdown {
        data,
        smoothness,
        pixels: (width * height) as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_index_stereo_and_motion() {
        let stereo = LabelSpace::stereo(59).unwrap();
        assert_eq!(stereo.count(), 60);
        assert_eq!(stereo.index(&[59]).unwrap(), 59);

        let motion = LabelSpace::motion(13, 7).unwrap();
        assert_eq!(motion.count(), 405);
        assert_eq!(motion.index(&[-13, -7]).unwrap(), 0);
        assert_eq!(motion.index(&[-12, -7]).unwrap(), 1);
        assert_eq!(motion.index(&[-13, -6]).unwrap(), 27);
        for i in 0..motion.count() {
            let m = motion.offsets(i).unwrap();
            assert_eq!(motion.index(&m).unwrap(), i);
        }
    }

    #[test]
    fn label_index_rejects_out_of_range() {
        let motion = LabelSpace::motion(13, 7).unwrap();
        assert!(matches!(
            motion.index(&[14, 0]),
            Err(Error::LabelOutOfRange { dim: 0, offset: 14, .. })
        ));
        assert!(motion.index(&[0]).is_err());
        assert!(motion.offsets(405).is_err());
        assert!(LabelSpace::new(vec![(3, 2)]).is_err());
    }

    #[test]
    fn constant_field_has_no_smoothness() {
        let space = LabelSpace::new(vec![(0, 1)]).unwrap();
        let volume = CostVolume::new(2, 2, space, 10, vec![1, 9, 2, 9, 3, 9, 4, 9]).unwrap();
        let model = SmoothnessModel::new(Prior::Linear, 1, 5).unwrap();
        let e = evaluate_energy(&volume, &model, &DisparityField::constant(2, 2, 0)).unwrap();
        assert_eq!(e.total(), 10);
        assert_eq!(e.smoothness, 0);
    }

    #[test]
    fn single_edge_is_truncated() {
        let space = LabelSpace::new(vec![(0, 1)]).unwrap();
        let volume = CostVolume::new(1, 2, space, 10, vec![0; 4]).unwrap();
        let model = SmoothnessModel::new(Prior::Linear, 1, 3).unwrap();
        let field = DisparityField::new(1, 2, vec![0, 1]).unwrap();
        let e = evaluate_energy(&volume, &model, &field).unwrap();
        assert_eq!(e.total(), 3);
        assert_eq!(e.data, 0);
    }

    #[test]
    fn motion_penalty_sums_dimensions_before_truncating() {
        let model = SmoothnessModel::new(Prior::Quadratic, 3, 2).unwrap();
        assert_eq!(model.edge_penalty(&[0, 0], &[1, 1], 1), 2 * 2);
        assert_eq!(model.edge_penalty(&[0, 0], &[2, 2], 1), 2 * 8);
        assert_eq!(model.edge_penalty(&[0, 0], &[3, 0], 2), 2 * 2 * 9);
        assert_eq!(model.edge_penalty(&[0, 0], &[-3, 2], 1), 2 * 9);
    }

    #[test]
    fn zero_lambda_reduces_to_data_term() {
        let space = LabelSpace::new(vec![(0, 2)]).unwrap();
        let volume = CostVolume::from_fn(3, 2, space, 50, |x, y, v| ((x * 7 + y * 3 + v * 11) % 50) as u32).unwrap();
        let model = SmoothnessModel::new(Prior::Linear, 2, 0).unwrap();
        let field = DisparityField::new(3, 2, vec![0, 2, 1, 1, 0, 2]).unwrap();
        let e = evaluate_energy(&volume, &model, &field).unwrap();
        assert_eq!(e.smoothness, 0);
        assert_eq!(e.total(), e.data);
    }

    #[test]
    fn adaptive_weight_scales_whole_edge() {
        let space = LabelSpace::new(vec![(0, 9)]).unwrap();
        let volume = CostVolume::new(2, 1, space, 0, vec![0; 20]).unwrap();
        let mut w = EdgeWeights::uniform(2, 1);
        w.set(0, 0, Axis::X, 2);
        let model = SmoothnessModel::new(Prior::Linear, 4, 3).unwrap().with_weights(w);
        let field = DisparityField::new(2, 1, vec![0, 9]).unwrap();
        assert_eq!(evaluate_energy(&volume, &model, &field).unwrap().total(), 2 * 3 * 4);
    }

    #[test]
    fn evaluate_rejects_mismatch() {
        let space = LabelSpace::new(vec![(0, 1)]).unwrap();
        let volume = CostVolume::new(2, 2, space, 1, vec![0; 8]).unwrap();
        let model = SmoothnessModel::new(Prior::Linear, 1, 1).unwrap();
        assert!(matches!(
            evaluate_energy(&volume, &model, &DisparityField::constant(3, 2, 0)),
            Err(Error::DimensionMismatch(_))
        ));
        let bad = DisparityField::constant(2, 2, 2);
        assert!(evaluate_energy(&volume, &model, &bad).is_err());
    }

    #[test]
    fn per_pixel_formatting() {
        let e = EnergyBreakdown { data: 30, smoothness: 10, pixels: 4 };
        assert_eq!(e.per_pixel_fixed2(), "10.00");
        let e = EnergyBreakdown { data: 2, smoothness: 0, pixels: 3 };
        assert_eq!(e.per_pixel_fixed2(), "0.67");
        let e = EnergyBreakdown { data: 1, smoothness: 0, pixels: 8 };
        assert_eq!(e.per_pixel_fixed2(), "0.13");
    }

    #[test]
    fn data_argmin_breaks_ties_low() {
        let space = LabelSpace::new(vec![(0, 2)]).unwrap();
        let volume = CostVolume::new(2, 1, space, 9, vec![4, 1, 1, 2, 2, 2]).unwrap();
        assert_eq!(DisparityField::data_argmin(&volume).labels(), &[1, 0]);
    }

    #[test]
    fn luminance_is_rounded_channel_mean() {
        let img = PixelGrid::new(2, 1, 3, vec![1, 1, 0, 255, 254, 254]).unwrap();
        assert_eq!(img.luminance(0, 0), 1);
        assert_eq!(img.luminance(1, 0), 254);
        assert!(PixelGrid::new(2, 2, 1, vec![0; 3]).is_err());
        assert!(PixelGrid::new(0, 2, 1, vec![]).is_err());
    }
}
