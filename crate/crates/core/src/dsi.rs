//! Cost volume construction from image pairs and triplets, the mean-cost
//! rule for `λ`, and the gradient-adaptive edge weights.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid_model::{Axis, CostVolume, EdgeWeights, LabelSpace, PixelGrid, Prior};

/// Luminance step below which an edge is considered to lie inside a smooth
/// region and gets weight 2.
pub const DEFAULT_GRADIENT_THRESHOLD: u8 = 10;

/// Which way a label offset moves into the target image.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum MatchDirection {
    /// Target sample at `x + v`.
    Forward,
    /// Target sample at `x - v` (left reference, right target in rectified stereo).
    Backward,
}

impl MatchDirection {
    pub fn reversed(self) -> Self {
        match self {
            MatchDirection::Forward => MatchDirection::Backward,
            MatchDirection::Backward => MatchDirection::Forward,
        }
    }

    fn sign(self) -> i64 {
        match self {
            MatchDirection::Forward => 1,
            MatchDirection::Backward => -1,
        }
    }
}

/// What a label pointing outside the target image costs.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Default)]
pub enum OutOfBounds {
    /// `C_max`, the same value a maximally different match gets.
    #[default]
    MaxCost,
    /// Sample the nearest border pixel.
    ClampToBorder,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchConfig {
    /// Cost exponent `l2`: 1 for absolute, 2 for squared differences.
    pub cost_exponent: u32,
    pub space: LabelSpace,
    pub direction: MatchDirection,
    pub out_of_bounds: OutOfBounds,
}

impl MatchConfig {
    pub fn new(cost_exponent: u32, space: LabelSpace, direction: MatchDirection) -> Result<Self> {
        if cost_exponent != 1 && cost_exponent != 2 {
            return Err(Error::InvalidConfig(format!(
                "cost exponent must be 1 or 2, got {cost_exponent}"
            )));
        }
        if space.dims() > 2 {
            return Err(Error::InvalidConfig(format!(
                "label space must have 1 (stereo) or 2 (motion) dimensions, got {}",
                space.dims()
            )));
        }
        Ok(Self {
            cost_exponent,
            space,
            direction,
            out_of_bounds: OutOfBounds::MaxCost,
        })
    }

    /// `C_max = 100^l2`.
    pub fn c_max(&self) -> u32 {
        100u32.pow(self.cost_exponent)
    }
}

/// Color distance `min(‖a − b‖₂^l2, C_max)`; for `l2 = 1` the Euclidean norm
/// is rounded to the nearest integer.
fn match_cost(a: &[u8], b: &[u8], cost_exponent: u32, c_max: u32) -> u32 {
    let squared: u64 = a
        .iter()
        .zip(b)
        .map(|(&p, &q)| {
            let d = u64::from(p.abs_diff(q));
            d * d
        })
        .sum();
    let cost = if cost_exponent == 2 {
        squared
    } else {
        let root = squared.isqrt();
        if squared - root * root > root {
            root + 1
        } else {
            root
        }
    };
    cost.min(u64::from(c_max)) as u32
}

fn check_pair(a: &PixelGrid, b: &PixelGrid) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() || a.channels() != b.channels() {
        return Err(Error::DimensionMismatch(format!(
            "images differ: {}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    Ok(())
}

/// `C(x, v) = min(‖I_target(x ± v) − I_ref(x)‖^l2, C_max)`.
pub fn build_cost_volume(
    reference: &PixelGrid,
    target: &PixelGrid,
    cfg: &MatchConfig,
) -> Result<CostVolume> {
    check_pair(reference, target)?;
    let (width, height) = (reference.width(), reference.height());
    let space = &cfg.space;
    let q = space.count();
    let c_max = cfg.c_max();
    let sign = cfg.direction.sign();

    let shifts: Vec<(i64, i64)> = (0..q)
        .map(|v| {
            let dx = i64::from(space.offset(v, 0));
            let dy = if space.dims() > 1 {
                i64::from(space.offset(v, 1))
            } else {
                0
            };
            (sign * dx, sign * dy)
        })
        .collect();

    let mut costs = vec![0u32; width * height * q];
    costs
        .par_chunks_mut(width * q)
        .enumerate()
        .for_each(|(y, row)| {
            for x in 0..width {
                let here = reference.pixel(x, y);
                let out = &mut row[x * q..(x + 1) * q];
                for (cost, &(dx, dy)) in out.iter_mut().zip(&shifts) {
                    let tx = x as i64 + dx;
                    let ty = y as i64 + dy;
                    let inside = tx >= 0 && ty >= 0 && tx < width as i64 && ty < height as i64;
                    *cost = if inside {
                        match_cost(here, target.pixel(tx as usize, ty as usize), cfg.cost_exponent, c_max)
                    } else {
                        match cfg.out_of_bounds {
                            OutOfBounds::MaxCost => c_max,
                            OutOfBounds::ClampToBorder => {
                                let cx = tx.clamp(0, width as i64 - 1) as usize;
                                let cy = ty.clamp(0, height as i64 - 1) as usize;
                                match_cost(here, target.pixel(cx, cy), cfg.cost_exponent, c_max)
                            }
                        }
                    };
                }
            }
        });
    CostVolume::new(width, height, space.clone(), c_max, costs)
}

/// Occlusion-tolerant triplet cost `min(C_{mid→right}(x, v), C_{mid→left}(x, −v))`.
///
/// `cfg.direction` describes how labels move into `right`; `left` is matched
/// with the mirrored displacement.
pub fn build_composite_cost(
    middle: &PixelGrid,
    right: &PixelGrid,
    left: &PixelGrid,
    cfg: &MatchConfig,
) -> Result<CostVolume> {
    check_pair(middle, left)?;
    let to_right = build_cost_volume(middle, right, cfg)?;
    let mirrored = MatchConfig {
        direction: cfg.direction.reversed(),
        ..cfg.clone()
    };
    let to_left = build_cost_volume(middle, left, &mirrored)?;
    let costs = to_right
        .costs()
        .iter()
        .zip(to_left.costs())
        .map(|(&a, &b)| a.min(b))
        .collect();
    CostVolume::new(
        middle.width(),
        middle.height(),
        cfg.space.clone(),
        cfg.c_max(),
        costs,
    )
}

/// `λ = floor(l2 · ⟨C⟩ / (l1 · g^l1))`, with `⟨C⟩` the mean over all `N·Q` costs.
pub fn estimate_lambda(volume: &CostVolume, prior: Prior, cost_exponent: u32, truncation: u32) -> Result<i64> {
    if truncation == 0 {
        return Err(Error::InvalidConfig("truncation g must be >= 1".into()));
    }
    let sum = u128::from(volume.cost_sum());
    let count = volume.costs().len() as u128;
    let l1 = u128::from(prior.exponent());
    let numerator = u128::from(cost_exponent) * sum;
    let denominator = count * l1 * u128::from(truncation).pow(prior.exponent());
    Ok((numerator / denominator) as i64)
}

/// `w = 2` where the luminance step across an edge is below `threshold`, else 1.
pub fn build_edge_weights(reference: &PixelGrid, threshold: u8) -> EdgeWeights {
    let (width, height) = (reference.width(), reference.height());
    let mut weights = EdgeWeights::uniform(width, height);
    let weight = |a: u8, b: u8| if a.abs_diff(b) < threshold { 2 } else { 1 };
    for y in 0..height {
        for x in 0..width {
            let here = reference.luminance(x, y);
            if x + 1 < width {
                weights.set(x, y, Axis::X, weight(here, reference.luminance(x + 1, y)));
            }
            if y + 1 < height {
                weights.set(x, y, Axis::Y, weight(here, reference.luminance(x, y + 1)));
            }
        }
    }
    weights
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> PixelGrid {
        PixelGrid::from_fn(width, height, 1, |x, y, _| f(x, y)).unwrap()
    }

    #[test]
    fn identical_images_zero_cost_at_zero_shift() {
        let img = gray(5, 4, |x, y| (x * 40 + y * 7) as u8);
        let cfg = MatchConfig::new(2, LabelSpace::stereo(3).unwrap(), MatchDirection::Backward).unwrap();
        let vol = build_cost_volume(&img, &img, &cfg).unwrap();
        for y in 0..4 {
            for x in 0..5 {
                assert_eq!(vol.cost(x, y, 0), 0);
            }
        }
    }

    #[test]
    fn squared_cost_truncates() {
        let a = gray(1, 1, |_, _| 200);
        let b = gray(1, 1, |_, _| 50);
        let cfg = MatchConfig::new(2, LabelSpace::stereo(0).unwrap(), MatchDirection::Forward).unwrap();
        assert_eq!(build_cost_volume(&a, &b, &cfg).unwrap().cost(0, 0, 0), 10_000);
    }

    #[test]
    fn absolute_cost() {
        let a = gray(1, 1, |_, _| 17);
        let b = gray(1, 1, |_, _| 10);
        let cfg = MatchConfig::new(1, LabelSpace::stereo(0).unwrap(), MatchDirection::Forward).unwrap();
        assert_eq!(build_cost_volume(&a, &b, &cfg).unwrap().cost(0, 0, 0), 7);
    }

    #[test]
    fn color_cost_is_euclidean() {
        let a = PixelGrid::new(1, 1, 3, vec![0, 0, 0]).unwrap();
        let b = PixelGrid::new(1, 1, 3, vec![3, 4, 0]).unwrap();
        let space = LabelSpace::stereo(0).unwrap();
        let l1 = MatchConfig::new(1, space.clone(), MatchDirection::Forward).unwrap();
        let l2 = MatchConfig::new(2, space, MatchDirection::Forward).unwrap();
        assert_eq!(build_cost_volume(&a, &b, &l1).unwrap().cost(0, 0, 0), 5);
        assert_eq!(build_cost_volume(&a, &b, &l2).unwrap().cost(0, 0, 0), 25);
        // sqrt(2) rounds to 1, sqrt(3) rounds to 2
        let c = PixelGrid::new(1, 1, 3, vec![1, 1, 0]).unwrap();
        let d = PixelGrid::new(1, 1, 3, vec![1, 1, 1]).unwrap();
        assert_eq!(match_cost(a.pixel(0, 0), c.pixel(0, 0), 1, 100), 1);
        assert_eq!(match_cost(a.pixel(0, 0), d.pixel(0, 0), 1, 100), 2);
    }

    #[test]
    fn out_of_bounds_costs_c_max() {
        let img = gray(4, 1, |x, _| x as u8);
        let cfg = MatchConfig::new(1, LabelSpace::stereo(2).unwrap(), MatchDirection::Backward).unwrap();
        let vol = build_cost_volume(&img, &img, &cfg).unwrap();
        assert_eq!(vol.slice(0, 0), &[0, 100, 100]);
        assert_eq!(vol.slice(1, 0), &[0, 1, 100]);
        assert_eq!(vol.slice(3, 0), &[0, 1, 2]);

        let clamp = MatchConfig {
            out_of_bounds: OutOfBounds::ClampToBorder,
            ..cfg
        };
        assert_eq!(build_cost_volume(&img, &img, &clamp).unwrap().slice(0, 0), &[0, 0, 0]);
    }

    #[test]
    fn motion_shifts_both_axes() {
        let reference = gray(3, 3, |x, y| (10 * x + 100 * y) as u8);
        let target = gray(3, 3, |x, y| (10 * x + 100 * y) as u8);
        let space = LabelSpace::motion(1, 1).unwrap();
        let cfg = MatchConfig::new(1, space.clone(), MatchDirection::Forward).unwrap();
        let vol = build_cost_volume(&reference, &target, &cfg).unwrap();
        let v = space.index(&[1, 1]).unwrap();
        assert_eq!(vol.cost(1, 1, v), 100);
        assert_eq!(vol.cost(2, 1, v), 100);
        let v = space.index(&[-1, 0]).unwrap();
        assert_eq!(vol.cost(1, 1, v), 10);
    }

    #[test]
    fn composite_takes_unoccluded_side() {
        // middle pixel 1 matches left at +1 (mirrored label 1) but right at -1 is off-image
        let middle = gray(3, 1, |x, _| [10, 20, 30][x]);
        let right = gray(3, 1, |_, _| 250);
        let left = gray(3, 1, |x, _| [0, 0, 24][x]);
        let cfg = MatchConfig::new(1, LabelSpace::stereo(1).unwrap(), MatchDirection::Backward).unwrap();
        let vol = build_composite_cost(&middle, &right, &left, &cfg).unwrap();
        assert_eq!(vol.cost(1, 0, 1), 4);
        assert_eq!(vol.cost(2, 0, 1), 100);
    }

    #[test]
    fn composite_of_equal_sides() {
        let middle = gray(4, 2, |x, y| (x * 30 + y * 5) as u8);
        let side = gray(4, 2, |x, y| (x * 31 + y * 3) as u8);
        let cfg = MatchConfig::new(2, LabelSpace::stereo(0).unwrap(), MatchDirection::Backward).unwrap();
        let single = build_cost_volume(&middle, &side, &cfg).unwrap();
        let both = build_composite_cost(&middle, &side, &side, &cfg).unwrap();
        assert_eq!(single, both);
    }

    #[test]
    fn lambda_formula() {
        let space = LabelSpace::stereo(0).unwrap();
        let vol = CostVolume::new(2, 1, space, 10_000, vec![50, 150]).unwrap();
        assert_eq!(estimate_lambda(&vol, Prior::Linear, 2, 5).unwrap(), 40);
        assert_eq!(estimate_lambda(&vol, Prior::Quadratic, 2, 3).unwrap(), 11);
        assert!(estimate_lambda(&vol, Prior::Linear, 2, 0).is_err());
    }

    #[test]
    fn edge_weights_follow_gradient() {
        let flat = gray(4, 3, |_, _| 77);
        let w = build_edge_weights(&flat, DEFAULT_GRADIENT_THRESHOLD);
        for y in 0..3 {
            for x in 0..3 {
                assert_eq!(w.weight(x, y, Axis::X), 2);
            }
        }
        let step = gray(4, 2, |x, _| if x < 2 { 100 } else { 150 });
        let w = build_edge_weights(&step, DEFAULT_GRADIENT_THRESHOLD);
        assert_eq!(w.weight(0, 0, Axis::X), 2);
        assert_eq!(w.weight(1, 0, Axis::X), 1);
        assert_eq!(w.weight(2, 1, Axis::X), 2);
        assert_eq!(w.weight(1, 0, Axis::Y), 2);
    }

    #[test]
    fn rejects_mismatched_images() {
        let a = gray(3, 2, |_, _| 0);
        let b = gray(2, 3, |_, _| 0);
        let cfg = MatchConfig::new(1, LabelSpace::stereo(1).unwrap(), MatchDirection::Forward).unwrap();
        assert!(matches!(build_cost_volume(&a, &b, &cfg), Err(Error::DimensionMismatch(_))));
        assert!(build_composite_cost(&a, &a, &b, &cfg).is_err());
        assert!(MatchConfig::new(3, LabelSpace::stereo(1).unwrap(), MatchDirection::Forward).is_err());
    }
}
