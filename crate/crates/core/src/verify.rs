//! Golden-file suites: engines replayed against committed oracle output.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::edp::{self, DirectionSums, EdpConfig, ScanOrder};
use crate::error::{Error, Result};
use crate::golden::{self, ratio};
use crate::grid_model::evaluate_energy;
use crate::minplus::{MinPlus, Operator};
use crate::oracle::{self, OracleSums, TinyInstance};
use crate::scanline;
use crate::scenes;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Suite {
    Minplus,
    Chain,
    Grid,
    Edp,
    Scenes,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Minplus, Suite::Chain, Suite::Grid, Suite::Edp, Suite::Scenes];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Minplus => "minplus",
            Suite::Chain => "chain",
            Suite::Grid => "grid",
            Suite::Edp => "edp",
            Suite::Scenes => "scenes",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown suite {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub cases: usize,
    pub notes: Vec<String>,
}

fn fail(suite: Suite, message: String) -> Error {
    Error::Golden {
        suite: suite.name().to_string(),
        message,
    }
}

fn first_divergence(expected: &[i64], got: &[i64]) -> Option<(usize, i64, i64)> {
    expected
        .iter()
        .zip(got)
        .enumerate()
        .find(|(_, (e, g))| e != g)
        .map(|(i, (&e, &g))| (i, e, g))
}

pub fn verify_minplus(dir: &Path) -> Result<SuiteReport> {
    let suite = Suite::Minplus;
    let cases = golden::load_minplus(dir)?;
    for case in &cases {
        let truth = oracle::oracle_minplus(&case.input, &case.space, &case.model, case.weight);
        if let Some((i, e, g)) = first_divergence(&case.output, &truth) {
            return Err(fail(suite, format!("case {}: label {i}: golden {e}, oracle {g}", case.id)));
        }
        let mut engine = MinPlus::new(&case.space, &case.model);
        for op in Operator::ALL.into_iter().filter(|op| op.supports(case.model.prior)) {
            let got = engine.apply_vec(op, &case.input, case.weight)?;
            if let Some((i, e, g)) = first_divergence(&case.output, &got) {
                return Err(fail(suite, format!("case {} {op}: label {i}: expected {e}, got {g}", case.id)));
            }
        }
    }
    Ok(SuiteReport {
        suite,
        cases: cases.len(),
        notes: Vec::new(),
    })
}

pub fn verify_chain(dir: &Path) -> Result<SuiteReport> {
    let suite = Suite::Chain;
    let cases = golden::load_chain(dir)?;
    let mut unique = 0;
    for case in &cases {
        let p = &case.problem;
        let golden_path_energy = p.path_energy(&case.path);
        if golden_path_energy != case.min {
            return Err(fail(
                suite,
                format!("case {}: stored path costs {golden_path_energy}, stored min {}", case.id, case.min),
            ));
        }
        for op in Operator::ALL.into_iter().filter(|op| op.supports(p.model().prior)) {
            let pass = scanline::forward_pass(p, op)?;
            let (path, energy) = scanline::backtrack(&pass.sums, &pass.table);
            if energy != case.min || p.path_energy(&path) != case.min {
                return Err(fail(
                    suite,
                    format!("case {} {op}: backtracked energy {energy}, expected {}", case.id, case.min),
                ));
            }
            if case.optima == 1 {
                let marginals = scanline::bidirectional_marginals(p, op)?;
                let argmin = scanline::marginal_argmin_solution(&marginals, p.labels());
                if path != case.path || argmin != case.path {
                    return Err(fail(
                        suite,
                        format!(
                            "case {} {op}: unique optimum {:?}, backtracked {path:?}, marginal argmin {argmin:?}",
                            case.id, case.path
                        ),
                    ));
                }
            }
        }
        unique += usize::from(case.optima == 1);
    }
    Ok(SuiteReport {
        suite,
        cases: cases.len(),
        notes: vec![format!("{unique} cases with a unique optimum")],
    })
}

pub fn verify_grid(dir: &Path) -> Result<SuiteReport> {
    let suite = Suite::Grid;
    let cases = golden::load_grid(dir)?;
    let mut worst: f64 = 1.0;
    for case in &cases {
        let inst = &case.instance;
        let stored = evaluate_energy(&inst.volume, &inst.model, &case.field)?.total();
        if stored != case.min {
            return Err(fail(
                suite,
                format!("seed {}: stored field costs {stored}, stored min {}", inst.seed, case.min),
            ));
        }
        let outcome = golden::reference_edp(&inst.volume, &inst.model, case.edp_iterations)?;
        let energy = outcome.trace.last().expect("iterations > 0").energy.total();
        if energy < case.min {
            return Err(fail(
                suite,
                format!("seed {}: EDP energy {energy} below the exhaustive minimum {}", inst.seed, case.min),
            ));
        }
        if energy > case.edp_energy {
            return Err(fail(
                suite,
                format!(
                    "seed {}: EDP energy {energy} (ratio {:.4}) exceeds committed {} (ratio {:.4})",
                    inst.seed,
                    ratio(energy, case.min),
                    case.edp_energy,
                    case.ratio_bound()
                ),
            ));
        }
        worst = worst.max(ratio(energy, case.min));
    }
    Ok(SuiteReport {
        suite,
        cases: cases.len(),
        notes: vec![format!("worst EDP/optimum ratio {worst:.4}")],
    })
}

/// Seeds of the live engine-vs-interpreter comparison.
pub const EDP_SEEDS: std::ops::Range<u64> = 100..112;

/// Runs `iterations` full sweeps through both the engine and the literal
/// interpreter, comparing every pass and the final marginals.
pub fn compare_edp_with_oracle(instance: &TinyInstance, iterations: usize) -> Result<()> {
    let suite = Suite::Edp;
    let (volume, model) = (&instance.volume, &instance.model);
    let config = EdpConfig::new(iterations, Operator::fastest_for(model.prior));
    let mut solver = edp::EdpSolver::new(volume, model, config.clone())?;
    let mut sums: DirectionSums = solver.new_sums();
    let mut reference = OracleSums::zeros(volume.width(), volume.height(), volume.labels());
    for iteration in 1..=iterations {
        for order in ScanOrder::ALL {
            solver.pass(&mut sums, order)?;
            reference = oracle::oracle_edp_step(&reference, volume, model, order, config.scale);
            if let Some(diff) = reference.first_difference(&sums) {
                return Err(fail(
                    suite,
                    format!("seed {} iteration {iteration} {order:?}: {diff}", instance.seed),
                ));
            }
        }
    }
    let got = solver.marginals(&sums)?;
    let expected = oracle::oracle_marginals(&reference, volume, model, config.scale);
    if let Some((i, e, g)) = first_divergence(&expected, &got) {
        return Err(fail(suite, format!("seed {}: marginal {i}: oracle {e}, engine {g}", instance.seed)));
    }
    Ok(())
}

pub fn verify_edp() -> Result<SuiteReport> {
    let mut cases = 0;
    for seed in EDP_SEEDS {
        let (w, h) = if seed % 2 == 0 { (3, 3) } else { (4, 2) };
        compare_edp_with_oracle(&TinyInstance::generate(seed, w, h, 3)?, 2)?;
        cases += 1;
    }
    Ok(SuiteReport {
        suite: Suite::Edp,
        cases,
        notes: Vec::new(),
    })
}

pub fn verify_scenes(dir: &Path) -> Result<SuiteReport> {
    let suite = Suite::Scenes;
    let cases = golden::load_scenes(dir)?;
    let bundled = scenes::bundled()?;
    let mut notes = Vec::new();
    for case in &cases {
        let scene = bundled
            .iter()
            .find(|s| s.name == case.name)
            .ok_or_else(|| fail(suite, format!("unknown scene {:?}", case.name)))?;
        let (lambda, energy) = golden::run_scene(case, scene)?;
        if lambda != case.lambda {
            return Err(fail(suite, format!("{}: lambda {lambda}, committed {}", case.name, case.lambda)));
        }
        if energy > case.energy {
            return Err(fail(suite, format!("{}: energy {energy} exceeds committed {}", case.name, case.energy)));
        }
        notes.push(format!("{} energy {energy}", case.name));
    }
    Ok(SuiteReport {
        suite,
        cases: cases.len(),
        notes,
    })
}

pub fn run_suite(suite: Suite, dir: &Path) -> Result<SuiteReport> {
    match suite {
        Suite::Minplus => verify_minplus(dir),
        Suite::Chain => verify_chain(dir),
        Suite::Grid => verify_grid(dir),
        Suite::Edp => verify_edp(),
        Suite::Scenes => verify_scenes(dir),
    }
}
