//! Command-line front end for the perception library: dimension
//! estimates on point-cloud files, routing decisions, synthetic scene
//! generation, message passing over saved scenes, and the benchmark
//! suite.
//!
//! Exit codes: 0 success, 1 usage or parameter error, 2 violated
//! guarantee in a benchmark run, 3 file I/O or format error.

use hope_cli::bench;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hope_core::error::Error as CoreError;
use hope_core::nalgebra::DMatrix;
use hope_core::ghn::{run_ghn, scene_at_dimension, HypergraphScene};
use hope_core::lid::{estimate_lid, io::read_cloud, LidConfig, LidMethod};
use hope_core::memory::TrackMode;
use hope_core::router::{
    hard_route, threshold_route, RouteDecision, RouterParams, NUM_PATHS, PATHS,
};
use hope_core::scenegen::{gen_scene, write_scenario_dir, read_scenario_dir, ScenarioConfig, SceneType};

const EXIT_CODES_HELP: &str = "Exit codes:\n  0  success\n  1  usage or parameter error\n  2  a benchmark guarantee was violated\n  3  file I/O or format error\n\nThe HOPE_SEED environment variable overrides the default base seed (0)\nfor every seeded command.";

#[derive(Parser)]
#[command(
    name = "hope",
    version,
    about = "Adaptive scene perception: dimension-driven routing over subspace message passing",
    after_help = EXIT_CODES_HELP
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the intrinsic dimension of a point-cloud file.
    ///
    /// Accepts the binary .hpc format or headered CSV; the format is
    /// sniffed from the file itself. Prints JSON with fields d_hat,
    /// n_used, and method.
    Lid(LidArgs),
    /// Map a complexity estimate to a processing path.
    ///
    /// Reads router parameters from a JSON file and prints the decision
    /// as JSON with fields weights, selected, rounds, and subspace_dim.
    Route(RouteArgs),
    /// Generate a synthetic scenario and write it to a directory.
    ///
    /// The directory receives scenario.json plus frames/frame_*.hpc and
    /// frames/obs_*.json, readable back by the library and by `ghn`.
    Scenegen(ScenegenArgs),
    /// Run subspace message passing over a saved scene.
    ///
    /// The scene comes from a scenario directory, a scenario.json, or a
    /// bare scene JSON file. The scene is restaged at the chosen path's
    /// width first, then processed for the path's round count.
    Ghn(GhnArgs),
    /// Benchmark experiments; each writes a CSV and prints statistics.
    ///
    /// Any violated guarantee is printed to stderr and the process
    /// exits with code 2.
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Args)]
struct LidArgs {
    /// Point-cloud file (.hpc or .csv).
    #[arg(long)]
    input: PathBuf,
    /// Voxel edge length in meters for density equalization; 0 disables
    /// the down-sampling pass.
    #[arg(long, default_value_t = 0.5)]
    voxel: f64,
    /// Estimator: "mle" (censored maximum likelihood) or "regress"
    /// (log survival regression).
    #[arg(long, default_value = "mle")]
    method: String,
    /// Fraction of the largest neighbor ratios discarded before the
    /// fit, in [0, 1).
    #[arg(long, default_value_t = 0.1)]
    discard: f64,
}

#[derive(Args)]
struct RouteArgs {
    /// Complexity estimate to route on.
    #[arg(long)]
    dhat: f64,
    /// JSON file with router parameters: centers, beta, tau1, tau2.
    #[arg(long)]
    config: PathBuf,
    /// "threshold" (hysteresis-free band thresholds), "hard" (argmax of
    /// the soft weights, weights one-hot), or "soft" (argmax selection
    /// with the full soft weights reported).
    #[arg(long, default_value = "threshold")]
    mode: String,
}

#[derive(Args)]
struct ScenegenArgs {
    /// Scene type: highway, suburban, urban, intersection,
    /// construction, or adverse.
    #[arg(long = "type")]
    scene_type: String,
    /// Number of frames to simulate.
    #[arg(long)]
    frames: Option<usize>,
    /// Scenario seed; defaults to the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GhnArgs {
    /// Scene input: a scenario directory, its scenario.json, or a JSON
    /// file holding one scene.
    #[arg(long)]
    scene: PathBuf,
    /// Processing path: shallow (2 rounds at width 8), medium (4 at
    /// 16), or deep (6 at 32).
    #[arg(long, default_value = "deep")]
    path: String,
    /// Write the processed scene as JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Latency scaling of attention, deep message passing, and the
    /// adaptively routed mixed stream.
    ///
    /// CSV columns: impl, l, trial, seed, latency_ns. Statistics include
    /// the fitted log-log exponents with bootstrap intervals and the
    /// attention/message-passing latency ratio.
    Scaling {
        /// Ascending agent counts (at least four).
        #[arg(long, value_delimiter = ',', default_value = "32,64,128,256,384,512")]
        agents: Vec<usize>,
        /// Timed trials per implementation and size.
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// CSV output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measured complexity per scene type over seeded scenarios.
    ///
    /// CSV columns: scene_type, seed, n_points, n_used, d_hat. Checks
    /// the complexity ordering across types.
    LidByScene {
        /// Seeds per scene type (at least 20).
        #[arg(long, default_value_t = 20)]
        seeds: usize,
        /// CSV output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Occlusion recovery rate per gap length and memory mode.
    ///
    /// CSV columns: suite, gap, mode, seed, occ_track. Checks the
    /// expected recovery pattern and that memory never hurts.
    Occlusion {
        /// Occlusion gap lengths in frames (each above 10).
        #[arg(long, value_delimiter = ',', default_value = "40,80")]
        gaps: Vec<usize>,
        /// Memory modes to compare.
        #[arg(long, value_delimiter = ',', default_value = "none,stm,stm+ltm")]
        modes: Vec<String>,
        /// Seeds for the randomized suite.
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        /// CSV output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Routing fidelity against random path choice at matched compute.
    ///
    /// CSV columns: seed, policy, mean_deviation, total_ops. Checks that
    /// complexity-driven routing deviates less from the deep reference
    /// than a compute-matched random policy.
    Routing {
        /// Independent streams to evaluate.
        #[arg(long, default_value_t = 20)]
        seeds: usize,
        /// CSV output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// CLI failure carrying its process exit code.
#[derive(Debug)]
enum CliError {
    Usage(String),
    Assertion(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Assertion(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Assertion(m) | CliError::Io(m) => m,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Io(_) | CoreError::Format(_) => CliError::Io(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(format!("json: {e}"))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn base_seed_from_env() -> Result<u64, CliError> {
    match std::env::var("HOPE_SEED") {
        Ok(raw) => raw.trim().parse::<u64>().map_err(|_| {
            CliError::Usage(format!(
                "HOPE_SEED must be an unsigned integer, got {raw:?}"
            ))
        }),
        Err(std::env::VarError::NotPresent) => Ok(0),
        Err(e) => Err(CliError::Usage(format!("HOPE_SEED: {e}"))),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let base_seed = base_seed_from_env()?;
    match cli.command {
        Command::Lid(args) => cmd_lid(args),
        Command::Route(args) => cmd_route(args),
        Command::Scenegen(args) => cmd_scenegen(args, base_seed),
        Command::Ghn(args) => cmd_ghn(args),
        Command::Bench(command) => cmd_bench(command, base_seed),
    }
}

#[derive(Serialize)]
struct LidReport {
    d_hat: f64,
    n_used: usize,
    method: LidMethod,
}

fn cmd_lid(args: LidArgs) -> Result<(), CliError> {
    if !args.voxel.is_finite() || args.voxel < 0.0 {
        return Err(CliError::Usage(format!(
            "--voxel must be zero or a positive length, got {}",
            args.voxel
        )));
    }
    let mut config = LidConfig {
        discard_fraction: args.discard,
        method: LidMethod::from_str(&args.method)?,
        ..LidConfig::default()
    };
    if args.voxel == 0.0 {
        config.voxel.enabled = false;
    } else {
        config.voxel.size_m = args.voxel;
    }
    let cloud = read_cloud(&args.input)?;
    let estimate = estimate_lid(&cloud, &config)?;
    let report = LidReport {
        d_hat: estimate.d_hat,
        n_used: estimate.n_used,
        method: estimate.method,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn cmd_route(args: RouteArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config)?;
    let params: RouterParams = serde_json::from_str(&text)
        .map_err(|e| CliError::Io(format!("router config: {e}")))?;
    let decision: RouteDecision = match args.mode.as_str() {
        "threshold" => threshold_route(args.dhat, &params)?,
        "soft" => hard_route(args.dhat, &params)?,
        "hard" => {
            let mut decision = hard_route(args.dhat, &params)?;
            let mut one_hot = [0.0; NUM_PATHS];
            one_hot[decision.selected] = 1.0;
            decision.weights = one_hot;
            decision
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown mode {other:?}, expected threshold, hard, or soft"
            )))
        }
    };
    println!("{}", serde_json::to_string_pretty(&decision)?);
    Ok(())
}

#[derive(Serialize)]
struct ScenegenReport<'a> {
    out: &'a Path,
    scene_type: SceneType,
    frames: usize,
    num_agents: usize,
    seed: u64,
}

fn cmd_scenegen(args: ScenegenArgs, base_seed: u64) -> Result<(), CliError> {
    let scene_type = SceneType::from_str(&args.scene_type)?;
    let seed = args.seed.unwrap_or(base_seed);
    let mut config = ScenarioConfig::for_type(scene_type, seed);
    if let Some(frames) = args.frames {
        config.frames = frames;
    }
    let scenario = gen_scene(&config)?;
    write_scenario_dir(&scenario, &args.out)?;
    let report = ScenegenReport {
        out: &args.out,
        scene_type,
        frames: scenario.frames.len(),
        num_agents: scenario.config.num_agents,
        seed,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

/// Loads a scene from a scenario directory, a scenario.json file, or a
/// bare scene JSON file.
fn load_scene(path: &Path) -> Result<HypergraphScene, CliError> {
    if path.is_dir() {
        return Ok(read_scenario_dir(path)?.seed_scene);
    }
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Io(format!("scene file: {e}")))?;
    let scene_value = match value.get("seed_scene") {
        Some(inner) => inner.clone(),
        None => value,
    };
    serde_json::from_value(scene_value)
        .map_err(|e| CliError::Io(format!("scene file: {e}")))
}

fn path_index(name: &str) -> Result<usize, CliError> {
    match name {
        "shallow" => Ok(0),
        "medium" => Ok(1),
        "deep" => Ok(2),
        other => Err(CliError::Usage(format!(
            "unknown path {other:?}, expected shallow, medium, or deep"
        ))),
    }
}

fn cmd_ghn(args: GhnArgs) -> Result<(), CliError> {
    let scene = load_scene(&args.scene)?;
    let path = PATHS[path_index(&args.path)?];
    let staged = scene_at_dimension(&scene, path.subspace_dim)?;
    let processed = run_ghn(&staged, path)?;
    let json = serde_json::to_string_pretty(&processed)?;
    match args.out {
        Some(out) => {
            std::fs::write(&out, json)?;
            let defect = processed
                .agents
                .iter()
                .map(|a| {
                    let u = a.subspace.basis();
                    let k = u.ncols();
                    (u.transpose() * u - DMatrix::identity(k, k)).norm()
                })
                .fold(0.0, f64::max);
            println!(
                "processed {} agents for {} rounds at width {}; max orthonormality defect {defect:.3e}; wrote {}",
                processed.agents.len(),
                path.rounds,
                path.subspace_dim,
                out.display()
            );
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn emit(result: bench::BenchResult, out: Option<PathBuf>) -> Result<(), CliError> {
    // With a file target the CSV goes to the file and statistics to
    // stdout; without one, stdout carries the pure CSV and statistics
    // move to stderr.
    match out {
        Some(path) => {
            result.write_csv(&path)?;
            println!("wrote {} rows to {}", result.rows.len(), path.display());
            print!("{}", result.summary());
        }
        None => {
            print!("{}", result.to_csv());
            eprint!("{}", result.summary());
        }
    }
    if result.violations.is_empty() {
        Ok(())
    } else {
        for violation in &result.violations {
            eprintln!("violated: {violation}");
        }
        Err(CliError::Assertion(format!(
            "{} benchmark guarantee(s) violated",
            result.violations.len()
        )))
    }
}

fn cmd_bench(command: BenchCommand, base_seed: u64) -> Result<(), CliError> {
    match command {
        BenchCommand::Scaling { agents, trials, out } => {
            emit(bench::bench_scaling(&agents, trials, base_seed)?, out)
        }
        BenchCommand::LidByScene { seeds, out } => {
            emit(bench::bench_lid_by_scene(seeds, base_seed)?, out)
        }
        BenchCommand::Occlusion {
            gaps,
            modes,
            seeds,
            out,
        } => {
            let modes: Vec<TrackMode> = modes
                .iter()
                .map(|m| TrackMode::from_str(m))
                .collect::<Result<_, _>>()?;
            emit(bench::bench_occlusion(&gaps, &modes, seeds, base_seed)?, out)
        }
        BenchCommand::Routing { seeds, out } => {
            emit(bench::bench_routing_ablation(seeds, base_seed)?, out)
        }
    }
}
