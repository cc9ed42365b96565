//! Images and parameters to a ready-to-solve `(volume, model)` pair.

use crate::dsi::{self, MatchConfig, MatchDirection, DEFAULT_GRADIENT_THRESHOLD};
use crate::error::{Error, Result};
use crate::grid_model::{CostVolume, LabelSpace, PixelGrid, Prior, SmoothnessModel};

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemConfig {
    pub space: LabelSpace,
    pub direction: MatchDirection,
    pub cost_exponent: u32,
    pub prior: Prior,
    pub truncation: u32,
    /// `None` estimates `λ` from the mean cost.
    pub lambda: Option<i64>,
    pub adaptive_weights: bool,
}

#[derive(Clone, Debug)]
pub struct Problem {
    pub volume: CostVolume,
    pub model: SmoothnessModel,
}

/// Builds the cost volume (composite when `mirror` is given), `λ` and weights.
pub fn build_problem(
    reference: &PixelGrid,
    target: &PixelGrid,
    mirror: Option<&PixelGrid>,
    cfg: &ProblemConfig,
) -> Result<Problem> {
    let matching = MatchConfig::new(cfg.cost_exponent, cfg.space.clone(), cfg.direction)?;
    let volume = match mirror {
        Some(left) => dsi::build_composite_cost(reference, target, left, &matching)?,
        None => dsi::build_cost_volume(reference, target, &matching)?,
    };
    let lambda = match cfg.lambda {
        Some(l) if l < 0 => return Err(Error::InvalidConfig(format!("lambda must be >= 0, got {l}"))),
        Some(l) => l,
        None => dsi::estimate_lambda(&volume, cfg.prior, cfg.cost_exponent, cfg.truncation)?,
    };
    let mut model = SmoothnessModel::new(cfg.prior, cfg.truncation, lambda)?;
    if cfg.adaptive_weights {
        model = model.with_weights(dsi::build_edge_weights(reference, DEFAULT_GRADIENT_THRESHOLD));
    }
    Ok(Problem { volume, model })
}
