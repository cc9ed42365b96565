//! Operator throughput and operation counts on identical random slices.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid_model::{LabelSpace, Prior, SmoothnessModel};
use crate::minplus::{MinPlus, Operator, OperatorStats};

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub space: LabelSpace,
    pub prior: Prior,
    pub truncation: u32,
    pub lambda: i64,
    /// Number of random slices each operator processes.
    pub trials: usize,
    /// Passes over the slice set; timing covers all of them.
    pub repeats: usize,
    pub seed: u64,
}

impl BenchConfig {
    pub fn new(space: LabelSpace, prior: Prior, truncation: u32, trials: usize) -> Self {
        Self {
            space,
            prior,
            truncation,
            lambda: 40,
            trials,
            repeats: 1,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorReport {
    pub operator: Operator,
    pub stats: OperatorStats,
    pub seconds: f64,
}

impl OperatorReport {
    pub fn comparisons_per_vertex(&self) -> f64 {
        self.stats.per_vertex()
    }

    pub fn vertices_per_second(&self) -> f64 {
        if self.seconds > 0.0 {
            self.stats.vertices as f64 / self.seconds
        } else {
            f64::INFINITY
        }
    }
}

/// Runs every operator valid for the prior over the same slices, checking
/// that all of them agree with the first one bit for bit.
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<OperatorReport>> {
    if cfg.trials == 0 {
        return Ok(Vec::new());
    }
    let q = cfg.space.count();
    let model = SmoothnessModel::new(cfg.prior, cfg.truncation, cfg.lambda)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let slices: Vec<i64> = (0..cfg.trials * q).map(|_| rng.random_range(0..=10_000)).collect();

    let mut reports = Vec::new();
    let mut reference: Option<Vec<i64>> = None;
    for op in Operator::ALL.into_iter().filter(|op| op.supports(cfg.prior)) {
        let mut engine = MinPlus::new(&cfg.space, &model);
        let mut out = vec![0i64; slices.len()];
        let mut stats = OperatorStats::default();
        let started = Instant::now();
        for _ in 0..cfg.repeats.max(1) {
            for (input, output) in slices.chunks_exact(q).zip(out.chunks_exact_mut(q)) {
                engine.apply(op, input, 1, output, &mut stats)?;
            }
        }
        let seconds = started.elapsed().as_secs_f64();
        match &reference {
            None => reference = Some(out),
            Some(expected) => {
                if let Some(i) = expected.iter().zip(&out).position(|(a, b)| a != b) {
                    return Err(Error::Golden {
                        suite: "bench".into(),
                        message: format!(
                            "{op} differs from {} at slice {}, label {}: {} vs {}",
                            reports.first().map_or("reference".into(), |r: &OperatorReport| r.operator.to_string()),
                            i / q,
                            i % q,
                            out[i],
                            expected[i]
                        ),
                    });
                }
            }
        }
        reports.push(OperatorReport {
            operator: op,
            stats,
            seconds,
        });
    }
    Ok(reports)
}
