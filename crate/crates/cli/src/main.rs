use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use edp_core::bench::{self, BenchConfig};
use edp_core::dsi::MatchDirection;
use edp_core::edp::{self, EdpConfig, EnergyTrace, TraceEntry};
use edp_core::grid_model::evaluate_energy;
use edp_core::media_io::{self, DisparityFormat};
use edp_core::pipeline::{self, ProblemConfig};
use edp_core::scanline;
use edp_core::verify::{self, Suite};
use edp_core::{golden, Error, LabelSpace, Operator, Prior};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e {
                Error::Golden { .. } => 1,
                Error::Io { .. } | Error::MalformedHeader(_) | Error::UnsupportedMaxval(_) | Error::TruncatedPayload { .. } => 3,
                _ => 2,
            },
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Stereo and motion labeling by four-direction dynamic programming.
#[derive(Parser, Debug)]
#[command(name = "edp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate a disparity or motion field from an image pair or triplet.
    Solve(SolveArgs),
    /// Compare min-plus operators on random slices.
    Bench(BenchArgs),
    /// Replay the committed golden suites.
    Verify(VerifyArgs),
    /// Rewrite the golden files (slow: runs the exhaustive oracles).
    #[command(hide = true)]
    RegenerateGolden {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Stereo,
    Motion,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Algo {
    Edp,
    Scanline,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum OpArg {
    Sfms,
    Grms,
    Lrms,
}

impl From<OpArg> for Operator {
    fn from(op: OpArg) -> Self {
        match op {
            OpArg::Sfms => Operator::Sfms,
            OpArg::Grms => Operator::Grms,
            OpArg::Lrms => Operator::Lrms,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Pgm8,
    Pfm,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum DirectionArg {
    Forward,
    Backward,
}

#[derive(Args, Debug)]
struct SolveArgs {
    mode: Mode,
    /// Reference image (left view, first frame, or middle of a triplet).
    #[arg(long, alias = "left", alias = "first")]
    reference: PathBuf,
    /// Image the labels displace into (right view, second frame).
    #[arg(long, alias = "right", alias = "second")]
    target: PathBuf,
    /// Third view, displaced the opposite way; used with --composite.
    #[arg(long, alias = "third")]
    mirror: Option<PathBuf>,
    /// Take the elementwise minimum of the target and mirror costs.
    #[arg(long)]
    composite: bool,
    /// Largest stereo disparity; labels are 0..=max.
    #[arg(long, default_value_t = 59)]
    max_disp: u32,
    /// Motion search range ±x.
    #[arg(long, default_value_t = 13)]
    range_x: u32,
    /// Motion search range ±y.
    #[arg(long, default_value_t = 7)]
    range_y: u32,
    /// Displacement sign; defaults to backward for stereo, forward for motion.
    #[arg(long, value_enum)]
    direction: Option<DirectionArg>,
    /// Prior exponent (1 truncated linear, 2 truncated quadratic).
    #[arg(long, default_value_t = 1)]
    l1: u32,
    /// Cost exponent (1 absolute, 2 squared).
    #[arg(long, default_value_t = 2)]
    l2: u32,
    /// Truncation threshold; defaults to 5 for stereo, 3 for motion.
    #[arg(long)]
    g: Option<u32>,
    /// Fixed λ instead of the mean-cost estimate.
    #[arg(long)]
    lambda: Option<i64>,
    #[arg(long, default_value_t = 8)]
    iterations: usize,
    #[arg(long, value_enum, default_value_t = Algo::Edp)]
    algo: Algo,
    /// Message operator; defaults to the fastest one valid for --l1.
    #[arg(long, value_enum)]
    operator: Option<OpArg>,
    /// Double λ across edges with a luminance step below 10.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    adaptive_weights: bool,
    /// Scale of the per-dimension search window of grms.
    #[arg(long, default_value_t = 1.0)]
    window_scale: f64,
    #[arg(long)]
    disparity_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Pgm8)]
    disparity_format: FormatArg,
    /// Motion only: Middlebury .flo output.
    #[arg(long)]
    flow_out: Option<PathBuf>,
    /// Motion only: color-wheel PPM rendering of the field.
    #[arg(long)]
    flow_color: Option<PathBuf>,
    #[arg(long)]
    energy_log: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Label count of a one-dimensional space.
    #[arg(long, default_value_t = 60, conflicts_with = "labels_box")]
    q: usize,
    /// Two-dimensional label box, e.g. 27x15.
    #[arg(long = "box", value_name = "WxH")]
    labels_box: Option<String>,
    #[arg(long, default_value_t = 1)]
    l1: u32,
    #[arg(long, default_value_t = 5)]
    g: u32,
    #[arg(long, default_value_t = 40)]
    lambda: i64,
    /// Random slices per operator.
    #[arg(long, default_value_t = 2000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Run only these suites (minplus, chain, grid, edp, scenes).
    #[arg(long = "suite")]
    suites: Vec<String>,
    #[arg(long)]
    golden_dir: Option<PathBuf>,
}

fn echo(key: &str, value: impl std::fmt::Display) {
    eprintln!("{key}={value}");
}

fn echo_path(key: &str, path: Option<&Path>) {
    echo(key, path.map_or_else(|| "-".to_string(), |p| p.display().to_string()));
}

fn solve(args: &SolveArgs) -> CliResult<()> {
    let prior = Prior::from_exponent(args.l1).map_err(|e| CliError::Usage(e.to_string()))?;
    if args.l2 != 1 && args.l2 != 2 {
        return Err(CliError::Usage(format!("--l2 must be 1 or 2, got {}", args.l2)));
    }
    let operator = args.operator.map_or(Operator::fastest_for(prior), Operator::from);
    if !operator.supports(prior) {
        return Err(CliError::Usage(format!("operator {operator} requires --l1 1")));
    }
    if args.composite && args.mirror.is_none() {
        return Err(CliError::Usage("--composite requires a third image (--mirror)".into()));
    }
    if args.iterations == 0 && args.algo == Algo::Edp {
        return Err(CliError::Usage("--iterations must be at least 1".into()));
    }
    if args.mode == Mode::Stereo && (args.flow_out.is_some() || args.flow_color.is_some()) {
        return Err(CliError::Usage("flow outputs need motion mode (two label dimensions)".into()));
    }
    let (space, default_g, default_dir) = match args.mode {
        Mode::Stereo => (LabelSpace::stereo(args.max_disp)?, 5, DirectionArg::Backward),
        Mode::Motion => (LabelSpace::motion(args.range_x, args.range_y)?, 3, DirectionArg::Forward),
    };
    let g = args.g.unwrap_or(default_g);
    let direction = args.direction.unwrap_or(default_dir);

    let reference = media_io::read_image(&args.reference)?;
    let target = media_io::read_image(&args.target)?;
    let mirror = match (&args.mirror, args.composite) {
        (Some(path), true) => Some(media_io::read_image(path)?),
        _ => None,
    };
    let cfg = ProblemConfig {
        space: space.clone(),
        direction: match direction {
            DirectionArg::Forward => MatchDirection::Forward,
            DirectionArg::Backward => MatchDirection::Backward,
        },
        cost_exponent: args.l2,
        prior,
        truncation: g,
        lambda: args.lambda,
        adaptive_weights: args.adaptive_weights,
    };
    let problem = pipeline::build_problem(&reference, &target, mirror.as_ref(), &cfg)?;

    echo("MODE", format!("{:?}", args.mode).to_lowercase());
    echo_path("REFERENCE", Some(&args.reference));
    echo_path("TARGET", Some(&args.target));
    echo_path("MIRROR", mirror.as_ref().and(args.mirror.as_deref()));
    echo("COMPOSITE", args.composite);
    echo("WIDTH", reference.width());
    echo("HEIGHT", reference.height());
    let bounds: Vec<String> = space.bounds().iter().map(|(lo, hi)| format!("{lo}:{hi}")).collect();
    echo("LABEL_BOUNDS", bounds.join(","));
    echo("LABELS", space.count());
    echo("DIRECTION", format!("{direction:?}").to_lowercase());
    echo("L1", args.l1);
    echo("L2", args.l2);
    echo("G", g);
    echo("LAMBDA", problem.model.lambda);
    echo("LAMBDA_SOURCE", if args.lambda.is_some() { "fixed" } else { "estimated" });
    echo("ADAPTIVE_WEIGHTS", args.adaptive_weights);
    echo("ALGO", format!("{:?}", args.algo).to_lowercase());
    echo("OPERATOR", operator);
    echo("ITERATIONS", args.iterations);
    echo("WINDOW_SCALE", args.window_scale);

    let (field, trace) = match args.algo {
        Algo::Edp => {
            let mut config = EdpConfig::new(args.iterations, operator);
            config.window_scale = args.window_scale;
            let outcome = edp::solve(&problem.volume, &problem.model, &config)?;
            (outcome.field, outcome.trace)
        }
        Algo::Scanline => {
            let started = Instant::now();
            let field = scanline::solve_rows(&problem.volume, &problem.model, operator, args.window_scale)?;
            let seconds = started.elapsed().as_secs_f64();
            let energy = evaluate_energy(&problem.volume, &problem.model, &field)?;
            let trace = EnergyTrace {
                entries: vec![TraceEntry {
                    iteration: 1,
                    energy,
                    seconds,
                }],
            };
            (field, trace)
        }
    };

    if let Some(path) = &args.disparity_out {
        let format = match args.disparity_format {
            FormatArg::Pgm8 => DisparityFormat::Pgm8,
            FormatArg::Pfm => DisparityFormat::Pfm,
        };
        media_io::write_disparity(&field, &space, path, format)?;
    }
    if let Some(path) = &args.flow_out {
        media_io::write_flow(&field, &space, path)?;
    }
    if let Some(path) = &args.flow_color {
        media_io::write_image(&media_io::render_flow(&field, &space)?, path)?;
    }
    if let Some(path) = &args.energy_log {
        media_io::write_energy_log(&trace, path)?;
    }
    for entry in &trace.entries {
        println!(
            "iteration {} energy {} per_pixel {} seconds {:.3}",
            entry.iteration,
            entry.energy.total(),
            entry.energy.per_pixel_fixed2(),
            entry.seconds
        );
    }
    let last = trace.last().expect("at least one trace entry");
    println!("labels {}", space.count());
    println!("final_per_pixel_energy {}", last.energy.per_pixel_fixed2());
    Ok(())
}

fn parse_box(raw: &str) -> CliResult<LabelSpace> {
    let bad = || CliError::Usage(format!("--box expects WxH with odd sides, got {raw:?}"));
    let (w, h) = raw.split_once(['x', 'X']).ok_or_else(bad)?;
    let (w, h): (u32, u32) = (w.parse().map_err(|_| bad())?, h.parse().map_err(|_| bad())?);
    if w % 2 == 0 || h % 2 == 0 {
        return Err(bad());
    }
    Ok(LabelSpace::motion(w / 2, h / 2)?)
}

fn run_bench(args: &BenchArgs) -> CliResult<()> {
    let prior = Prior::from_exponent(args.l1).map_err(|e| CliError::Usage(e.to_string()))?;
    let space = match &args.labels_box {
        Some(raw) => parse_box(raw)?,
        None if args.q >= 2 => LabelSpace::stereo(args.q as u32 - 1)?,
        None => return Err(CliError::Usage("--q must be at least 2".into())),
    };
    let mut cfg = BenchConfig::new(space.clone(), prior, args.g, args.trials);
    cfg.lambda = args.lambda;
    cfg.seed = args.seed;
    echo("LABELS", space.count());
    echo("DIMS", space.dims());
    echo("L1", args.l1);
    echo("G", args.g);
    echo("LAMBDA", args.lambda);
    echo("TRIALS", args.trials);
    echo("SEED", args.seed);
    let reports = bench::run_bench(&cfg)?;
    if reports.is_empty() {
        println!("no trials");
        return Ok(());
    }
    println!("{:<6} {:>14} {:>16} {:>10}", "op", "cmp/vertex", "vertices/s", "speedup");
    let base = reports[0].vertices_per_second();
    for r in &reports {
        println!(
            "{:<6} {:>14.2} {:>16.0} {:>9.1}x",
            r.operator,
            r.comparisons_per_vertex(),
            r.vertices_per_second(),
            r.vertices_per_second() / base
        );
    }
    println!("results identical across operators");
    Ok(())
}

fn run_verify(args: &VerifyArgs) -> CliResult<()> {
    let suites = if args.suites.is_empty() {
        Suite::ALL.to_vec()
    } else {
        args.suites
            .iter()
            .map(|s| s.parse::<Suite>().map_err(|e| CliError::Usage(e.to_string())))
            .collect::<CliResult<_>>()?
    };
    let dir = args.golden_dir.clone().unwrap_or_else(golden::default_dir);
    echo_path("GOLDEN_DIR", Some(&dir));
    for suite in suites {
        let report = verify::run_suite(suite, &dir)?;
        let notes = if report.notes.is_empty() {
            String::new()
        } else {
            format!(" ({})", report.notes.join("; "))
        };
        println!("ok {suite}: {} cases{notes}", report.cases);
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Solve(args) => solve(&args),
        Command::Bench(args) => run_bench(&args),
        Command::Verify(args) => run_verify(&args),
        Command::RegenerateGolden { out } => {
            let dir = out.unwrap_or_else(golden::default_dir);
            golden::regenerate(&dir)?;
            println!("wrote golden files to {}", dir.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
