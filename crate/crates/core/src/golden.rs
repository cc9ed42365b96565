//! Committed oracle outputs and their text format.
//!
//! Every file starts with `edp-golden <version> <suite>` and then holds
//! blocks of the form
//!
//! ```text
//! case <key> <value> <key> <value> ...
//! <field> <values...>
//! ...
//! end
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Label bounds are
//! written `lo:hi`, one per dimension, comma separated (`-2:2,-1:3`).
//! Cost and label arrays are row-major, labels fastest. The per-suite
//! fields are:
//!
//! | suite     | case keys                                   | fields |
//! |-----------|---------------------------------------------|--------|
//! | `minplus` | `id bounds l1 g lambda w`                   | `in`, `out` |
//! | `chain`   | `id bounds l1 g lambda len`                 | `costs`, `weights`, `min`, `optima`, `path` |
//! | `grid`    | `seed width height cmax bounds l1 g lambda` | `costs`, `wx`, `wy`, `min`, `field`, `edp <iterations> <energy>` |
//! | `scenes`  | `name l1 l2 g adaptive composite iterations`| `lambda`, `energy` |
//!
//! `chain` stores the lexicographically first optimal path and the number
//! of optima. `grid` stores the first optimal labeling in raster order and
//! the EDP energy observed when the file was generated, which is the
//! per-instance regression bound.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::edp::{self, EdpConfig};
use crate::error::{Error, Result};
use crate::grid_model::{Axis, CostVolume, DisparityField, EdgeWeights, LabelSpace, Prior, SmoothnessModel};
use crate::minplus::Operator;
use crate::oracle::{self, TinyInstance};
use crate::pipeline::{self, ProblemConfig};
use crate::scanline::ScanlineProblem;
use crate::scenes;

pub const FORMAT_VERSION: u32 = 1;

pub const MINPLUS_FILE: &str = "minplus.golden";
pub const CHAIN_FILE: &str = "chain.golden";
pub const GRID_FILE: &str = "grid.golden";
pub const SCENES_FILE: &str = "scenes.golden";

pub const GRID_EDP_ITERATIONS: usize = 8;
pub const SCENE_EDP_ITERATIONS: usize = 8;

/// Directory holding the committed golden files.
pub fn default_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("golden")
}

fn golden_err(suite: &str, message: impl Into<String>) -> Error {
    Error::Golden {
        suite: suite.to_string(),
        message: message.into(),
    }
}

struct Block {
    line: usize,
    params: Vec<(String, String)>,
    fields: Vec<(String, Vec<String>)>,
}

impl Block {
    fn param<T: FromStr>(&self, suite: &str, key: &str) -> Result<T> {
        let raw = self
            .params
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v)
            .ok_or_else(|| golden_err(suite, format!("line {}: case lacks `{key}`", self.line)))?;
        raw.parse()
            .map_err(|_| golden_err(suite, format!("line {}: bad `{key}` value {raw:?}", self.line)))
    }

    fn field(&self, suite: &str, key: &str) -> Result<&[String]> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| golden_err(suite, format!("case at line {} lacks `{key}`", self.line)))
    }

    fn values<T: FromStr>(&self, suite: &str, key: &str) -> Result<Vec<T>> {
        self.field(suite, key)?
            .iter()
            .map(|t| {
                t.parse()
                    .map_err(|_| golden_err(suite, format!("case at line {}: bad `{key}` entry {t:?}", self.line)))
            })
            .collect()
    }

    fn value<T: FromStr>(&self, suite: &str, key: &str) -> Result<T> {
        let mut v = self.values(suite, key)?;
        if v.len() != 1 {
            return Err(golden_err(suite, format!("case at line {}: `{key}` needs one value", self.line)));
        }
        Ok(v.remove(0))
    }

    fn space(&self, suite: &str) -> Result<LabelSpace> {
        let raw: String = self.param(suite, "bounds")?;
        let bounds = parse_bounds(&raw).ok_or_else(|| golden_err(suite, format!("line {}: bad bounds {raw:?}", self.line)))?;
        LabelSpace::new(bounds).map_err(|e| golden_err(suite, format!("line {}: {e}", self.line)))
    }

    fn model(&self, suite: &str) -> Result<SmoothnessModel> {
        let prior = Prior::from_exponent(self.param(suite, "l1")?).map_err(|e| golden_err(suite, e.to_string()))?;
        SmoothnessModel::new(prior, self.param(suite, "g")?, self.param(suite, "lambda")?)
            .map_err(|e| golden_err(suite, format!("line {}: {e}", self.line)))
    }
}

fn parse_bounds(raw: &str) -> Option<Vec<(i32, i32)>> {
    raw.split(',')
        .map(|d| {
            let (lo, hi) = d.split_once(':')?;
            Some((lo.parse().ok()?, hi.parse().ok()?))
        })
        .collect()
}

fn format_bounds(space: &LabelSpace) -> String {
    space
        .bounds()
        .iter()
        .map(|(lo, hi)| format!("{lo}:{hi}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_blocks(suite: &str, text: &str) -> Result<Vec<Block>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let expected = format!("edp-golden {FORMAT_VERSION} {suite}");
    match lines.next() {
        Some((_, header)) if header == expected => {}
        Some((n, header)) => return Err(golden_err(suite, format!("line {n}: expected header {expected:?}, got {header:?}"))),
        None => return Err(golden_err(suite, "empty file")),
    }
    let mut blocks = Vec::new();
    let mut current: Option<Block> = None;
    for (n, line) in lines {
        let mut tokens = line.split_whitespace().map(str::to_string);
        let key = tokens.next().expect("non-empty line");
        let rest: Vec<String> = tokens.collect();
        match (key.as_str(), current.as_mut()) {
            ("case", None) => {
                if !rest.len().is_multiple_of(2) {
                    return Err(golden_err(suite, format!("line {n}: case parameters must be key/value pairs")));
                }
                let params = rest.chunks(2).map(|kv| (kv[0].clone(), kv[1].clone())).collect();
                current = Some(Block {
                    line: n,
                    params,
                    fields: Vec::new(),
                });
            }
            ("end", Some(_)) => blocks.push(current.take().expect("open block")),
            (_, Some(block)) if key != "case" && key != "end" => block.fields.push((key, rest)),
            _ => return Err(golden_err(suite, format!("line {n}: unexpected `{key}`"))),
        }
    }
    if current.is_some() {
        return Err(golden_err(suite, "unterminated case at end of file"));
    }
    Ok(blocks)
}

fn join<T: ToString>(values: impl IntoIterator<Item = T>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

fn read_suite(dir: &Path, file: &str) -> Result<String> {
    let path = dir.join(file);
    fs::read_to_string(&path).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinplusCase {
    pub id: usize,
    pub space: LabelSpace,
    pub model: SmoothnessModel,
    pub weight: i64,
    pub input: Vec<i64>,
    pub output: Vec<i64>,
}

pub fn parse_minplus(text: &str) -> Result<Vec<MinplusCase>> {
    let suite = "minplus";
    parse_blocks(suite, text)?
        .iter()
        .map(|b| {
            let case = MinplusCase {
                id: b.param(suite, "id")?,
                space: b.space(suite)?,
                model: b.model(suite)?,
                weight: b.param(suite, "w")?,
                input: b.values(suite, "in")?,
                output: b.values(suite, "out")?,
            };
            if case.input.len() != case.space.count() || case.output.len() != case.space.count() {
                return Err(golden_err(suite, format!("case {}: slice length differs from label count", case.id)));
            }
            Ok(case)
        })
        .collect()
}

pub fn format_minplus(cases: &[MinplusCase]) -> String {
    let mut out = format!("edp-golden {FORMAT_VERSION} minplus\n");
    for c in cases {
        let _ = writeln!(
            out,
            "case id {} bounds {} l1 {} g {} lambda {} w {}\nin {}\nout {}\nend",
            c.id,
            format_bounds(&c.space),
            c.model.prior.exponent(),
            c.model.truncation,
            c.model.lambda,
            c.weight,
            join(&c.input),
            join(&c.output)
        );
    }
    out
}

fn random_space(rng: &mut ChaCha8Rng, max_1d: i32, max_box: i32) -> LabelSpace {
    let bounds = if rng.random_bool(0.6) {
        let lo = rng.random_range(-3..=3);
        vec![(lo, lo + rng.random_range(1..max_1d))]
    } else {
        (0..2)
            .map(|_| {
                let lo = rng.random_range(-4..=0);
                (lo, lo + rng.random_range(0..max_box))
            })
            .collect()
    };
    LabelSpace::new(bounds).expect("non-empty bounds")
}

/// Random slices for operator equivalence, outputs from the oracle.
pub fn generate_minplus(count: usize, seed: u64) -> Vec<MinplusCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|id| {
            let space = random_space(&mut rng, 64, 9);
            let prior = if rng.random_bool(0.5) { Prior::Linear } else { Prior::Quadratic };
            let model = SmoothnessModel::new(prior, rng.random_range(1..=8), rng.random_range(0..=10_000)).expect("valid");
            let weight = rng.random_range(1..=2);
            let input: Vec<i64> = (0..space.count()).map(|_| rng.random_range(0..=1_000_000)).collect();
            let output = oracle::oracle_minplus(&input, &space, &model, weight);
            MinplusCase {
                id,
                space,
                model,
                weight,
                input,
                output,
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct ChainCase {
    pub id: usize,
    pub problem: ScanlineProblem,
    pub min: i64,
    pub optima: usize,
    pub path: Vec<u32>,
}

pub fn parse_chain(text: &str) -> Result<Vec<ChainCase>> {
    let suite = "chain";
    parse_blocks(suite, text)?
        .iter()
        .map(|b| {
            let id: usize = b.param(suite, "id")?;
            let problem = ScanlineProblem::new(b.space(suite)?, b.model(suite)?, b.values(suite, "costs")?, b.values(suite, "weights")?)
                .map_err(|e| golden_err(suite, format!("case {id}: {e}")))?;
            let len: usize = b.param(suite, "len")?;
            let path: Vec<u32> = b.values(suite, "path")?;
            if problem.len() != len || path.len() != len {
                return Err(golden_err(suite, format!("case {id}: length mismatch")));
            }
            Ok(ChainCase {
                id,
                problem,
                min: b.value(suite, "min")?,
                optima: b.value(suite, "optima")?,
                path,
            })
        })
        .collect()
}

pub fn format_chain(cases: &[ChainCase]) -> String {
    let mut out = format!("edp-golden {FORMAT_VERSION} chain\n");
    for c in cases {
        let p = &c.problem;
        let costs: Vec<i64> = (0..p.len()).flat_map(|x| p.slice(x).to_vec()).collect();
        let weights: Vec<i64> = (0..p.len().saturating_sub(1)).map(|e| p.weight(e)).collect();
        let _ = writeln!(
            out,
            "case id {} bounds {} l1 {} g {} lambda {} len {}\ncosts {}\nweights {}\nmin {}\noptima {}\npath {}\nend",
            c.id,
            format_bounds(p.space()),
            p.model().prior.exponent(),
            p.model().truncation,
            p.model().lambda,
            p.len(),
            join(costs),
            join(weights),
            c.min,
            c.optima,
            join(&c.path)
        );
    }
    out
}

/// Random chains with `len ≤ 8` and `Q ≤ 5`, solved exhaustively.
pub fn generate_chain(count: usize, seed: u64) -> Result<Vec<ChainCase>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|id| {
            let space = loop {
                let s = random_space(&mut rng, 5, 3);
                if s.count() <= 5 {
                    break s;
                }
            };
            let len = rng.random_range(1..=8);
            let prior = if rng.random_bool(0.5) { Prior::Linear } else { Prior::Quadratic };
            let model = SmoothnessModel::new(prior, rng.random_range(1..=3), rng.random_range(0..=20))?;
            // small cost range so ties and co-optimal paths occur
            let costs = (0..len * space.count()).map(|_| rng.random_range(0..=40)).collect();
            let weights = (0..len - 1).map(|_| rng.random_range(1..=2)).collect();
            let problem = ScanlineProblem::new(space, model, costs, weights)?;
            let best = oracle::oracle_chain(&problem)?;
            Ok(ChainCase {
                id,
                min: best.energy,
                optima: best.paths.len(),
                path: best.paths[0].clone(),
                problem,
            })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct GridCase {
    pub instance: TinyInstance,
    pub min: i64,
    pub field: DisparityField,
    pub edp_iterations: usize,
    pub edp_energy: i64,
}

impl GridCase {
    /// Committed EDP energy over the exhaustive minimum.
    pub fn ratio_bound(&self) -> f64 {
        ratio(self.edp_energy, self.min)
    }
}

/// `energy / min`, with `0 / 0 = 1`.
pub fn ratio(energy: i64, min: i64) -> f64 {
    if min == 0 {
        if energy == 0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        energy as f64 / min as f64
    }
}

fn weight_rows(model: &SmoothnessModel, width: usize, height: usize, axis: Axis) -> Vec<u8> {
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            out.push(model.weights.as_ref().map_or(1, |w| w.weight(x, y, axis)));
        }
    }
    out
}

pub fn parse_grid(text: &str) -> Result<Vec<GridCase>> {
    let suite = "grid";
    parse_blocks(suite, text)?
        .iter()
        .map(|b| {
            let seed: u64 = b.param(suite, "seed")?;
            let (width, height): (usize, usize) = (b.param(suite, "width")?, b.param(suite, "height")?);
            let wrap = |e: Error| golden_err(suite, format!("seed {seed}: {e}"));
            let space = b.space(suite)?;
            let volume = CostVolume::new(width, height, space, b.param(suite, "cmax")?, b.values(suite, "costs")?).map_err(wrap)?;
            let weights = EdgeWeights::new(width, height, b.values(suite, "wx")?, b.values(suite, "wy")?).map_err(wrap)?;
            let model = b.model(suite)?.with_weights(weights);
            let instance = TinyInstance::new(seed, volume, model).map_err(wrap)?;
            let field = DisparityField::new(width, height, b.values(suite, "field")?).map_err(wrap)?;
            let edp: Vec<i64> = b.values(suite, "edp")?;
            let [iterations, energy] = edp[..] else {
                return Err(golden_err(suite, format!("seed {seed}: `edp` needs iterations and energy")));
            };
            Ok(GridCase {
                instance,
                min: b.value(suite, "min")?,
                field,
                edp_iterations: iterations as usize,
                edp_energy: energy,
            })
        })
        .collect()
}

pub fn format_grid(cases: &[GridCase]) -> String {
    let mut out = format!("edp-golden {FORMAT_VERSION} grid\n");
    for c in cases {
        let (v, m) = (&c.instance.volume, &c.instance.model);
        let (w, h) = (v.width(), v.height());
        let _ = writeln!(
            out,
            "case seed {} width {w} height {h} cmax {} bounds {} l1 {} g {} lambda {}\ncosts {}\nwx {}\nwy {}\nmin {}\nfield {}\nedp {} {}\nend",
            c.instance.seed,
            v.c_max(),
            format_bounds(v.space()),
            m.prior.exponent(),
            m.truncation,
            m.lambda,
            join(v.costs()),
            join(weight_rows(m, w, h, Axis::X)),
            join(weight_rows(m, w, h, Axis::Y)),
            c.min,
            join(c.field.labels()),
            c.edp_iterations,
            c.edp_energy
        );
    }
    out
}

/// The standard EDP run used for grid and scene regression values.
pub fn reference_edp(volume: &CostVolume, model: &SmoothnessModel, iterations: usize) -> Result<edp::EdpOutcome> {
    let op = Operator::fastest_for(model.prior);
    edp::solve(volume, model, &EdpConfig::new(iterations, op))
}

/// Seeds `0..count` of 4×4, Q=3 instances, exhaustive minima and EDP bounds.
pub fn generate_grid(count: u64) -> Result<Vec<GridCase>> {
    (0..count)
        .map(|seed| {
            let instance = TinyInstance::generate(seed, 4, 4, 3)?;
            let (min, field) = oracle::oracle_grid(&instance)?;
            let outcome = reference_edp(&instance.volume, &instance.model, GRID_EDP_ITERATIONS)?;
            let edp_energy = outcome.trace.last().expect("iterations > 0").energy.total();
            Ok(GridCase {
                instance,
                min,
                field,
                edp_iterations: GRID_EDP_ITERATIONS,
                edp_energy,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneCase {
    pub name: String,
    pub prior: Prior,
    pub cost_exponent: u32,
    pub truncation: u32,
    pub adaptive: bool,
    pub composite: bool,
    pub iterations: usize,
    pub lambda: i64,
    pub energy: i64,
}

impl SceneCase {
    pub fn problem_config(&self, scene: &scenes::Scene) -> ProblemConfig {
        ProblemConfig {
            space: scene.space.clone(),
            direction: scene.direction,
            cost_exponent: self.cost_exponent,
            prior: self.prior,
            truncation: self.truncation,
            lambda: None,
            adaptive_weights: self.adaptive,
        }
    }
}

pub fn parse_scenes(text: &str) -> Result<Vec<SceneCase>> {
    let suite = "scenes";
    parse_blocks(suite, text)?
        .iter()
        .map(|b| {
            let flag = |key: &str| -> Result<bool> { Ok(b.param::<u8>(suite, key)? != 0) };
            Ok(SceneCase {
                name: b.param(suite, "name")?,
                prior: Prior::from_exponent(b.param(suite, "l1")?).map_err(|e| golden_err(suite, e.to_string()))?,
                cost_exponent: b.param(suite, "l2")?,
                truncation: b.param(suite, "g")?,
                adaptive: flag("adaptive")?,
                composite: flag("composite")?,
                iterations: b.param(suite, "iterations")?,
                lambda: b.value(suite, "lambda")?,
                energy: b.value(suite, "energy")?,
            })
        })
        .collect()
}

pub fn format_scenes(cases: &[SceneCase]) -> String {
    let mut out = format!("edp-golden {FORMAT_VERSION} scenes\n");
    for c in cases {
        let _ = writeln!(
            out,
            "case name {} l1 {} l2 {} g {} adaptive {} composite {} iterations {}\nlambda {}\nenergy {}\nend",
            c.name,
            c.prior.exponent(),
            c.cost_exponent,
            c.truncation,
            u8::from(c.adaptive),
            u8::from(c.composite),
            c.iterations,
            c.lambda,
            c.energy
        );
    }
    out
}

/// Solves one bundled scene under `case`'s parameters; returns `(λ, energy)`.
pub fn run_scene(case: &SceneCase, scene: &scenes::Scene) -> Result<(i64, i64)> {
    let mirror = if case.composite {
        Some(scene.mirror.as_ref().ok_or_else(|| {
            Error::InvalidConfig(format!("scene {} has no third view for composite matching", scene.name))
        })?)
    } else {
        None
    };
    let problem = pipeline::build_problem(&scene.reference, &scene.target, mirror, &case.problem_config(scene))?;
    let outcome = reference_edp(&problem.volume, &problem.model, case.iterations)?;
    Ok((problem.model.lambda, outcome.trace.last().expect("iterations > 0").energy.total()))
}

pub fn generate_scenes() -> Result<Vec<SceneCase>> {
    let plans = [
        ("stereo-gray", 1, 2, 5, true, false),
        ("stereo-color", 1, 1, 3, true, false),
        ("stereo-triplet", 2, 2, 3, false, true),
        ("motion-pair", 1, 1, 3, true, false),
    ];
    let all = scenes::bundled()?;
    plans
        .iter()
        .map(|&(name, l1, l2, g, adaptive, composite)| {
            let scene = all.iter().find(|s| s.name == name).expect("bundled scene");
            let mut case = SceneCase {
                name: name.to_string(),
                prior: Prior::from_exponent(l1)?,
                cost_exponent: l2,
                truncation: g,
                adaptive,
                composite,
                iterations: SCENE_EDP_ITERATIONS,
                lambda: 0,
                energy: 0,
            };
            (case.lambda, case.energy) = run_scene(&case, scene)?;
            Ok(case)
        })
        .collect()
}

pub fn load_minplus(dir: &Path) -> Result<Vec<MinplusCase>> {
    parse_minplus(&read_suite(dir, MINPLUS_FILE)?)
}

pub fn load_chain(dir: &Path) -> Result<Vec<ChainCase>> {
    parse_chain(&read_suite(dir, CHAIN_FILE)?)
}

pub fn load_grid(dir: &Path) -> Result<Vec<GridCase>> {
    parse_grid(&read_suite(dir, GRID_FILE)?)
}

pub fn load_scenes(dir: &Path) -> Result<Vec<SceneCase>> {
    parse_scenes(&read_suite(dir, SCENES_FILE)?)
}

/// Rewrites every golden file in `dir`. The grid suite runs the exhaustive
/// enumeration and takes a while.
pub fn regenerate(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |file: &str, text: String| {
        let path = dir.join(file);
        fs::write(&path, text).map_err(|e| Error::io(path, e))
    };
    write(MINPLUS_FILE, format_minplus(&generate_minplus(120, 0x6d70)))?;
    write(CHAIN_FILE, format_chain(&generate_chain(200, 0x6368)?))?;
    write(GRID_FILE, format_grid(&generate_grid(20)?))?;
    write(SCENES_FILE, format_scenes(&generate_scenes()?))
}
