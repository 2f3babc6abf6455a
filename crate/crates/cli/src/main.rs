mod commands;
mod output;
mod ws;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use quadshape::{Config, Error, Mode};

/// Quadruped gait synthesis and joystick command shaping.
#[derive(Debug, Parser)]
#[command(name = "quadshape", version, about)]
struct Cli {
    /// TOML config file; falls back to $QUADSHAPE_CONFIG, then the defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample the foot trajectories and joint angles of one gait.
    GenTraj(GenTraj),
    /// Train a grid of gaits with augmented random search.
    TrainGaits(TrainGaits),
    /// Write the scripted accelerate, halt and flip demonstrations.
    SynthDemos(SynthDemos),
    /// Delay and scale demonstrations into a larger data set.
    Augment(Augment),
    /// Train the filter-bank shaper.
    TrainShaper(TrainShaper),
    /// Train the dense and plain convolutional comparison networks.
    TrainBaselines(TrainBaselines),
    /// Print a comparison table.
    Eval(Eval),
    /// Run a demo's novice stream through a teleop session.
    Replay(Replay),
    /// Serve teleop sessions over TCP or WebSocket.
    Serve(Serve),
}

#[derive(Debug, Args)]
struct GenTraj {
    /// Body speed, m/s.
    #[arg(long)]
    v: f64,
    /// Signed turning radius, m (positive turns right).
    #[arg(long, allow_negative_numbers = true, conflicts_with = "straight", required_unless_present = "straight")]
    r: Option<f64>,
    #[arg(long)]
    straight: bool,
    /// Samples per gait cycle.
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Use the trained weights of the nearest cell in this library.
    #[arg(long, value_name = "FILE")]
    library: Option<PathBuf>,
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainGaits {
    /// Speeds × curvatures, e.g. 3x3.
    #[arg(long, default_value = "3x3", value_parser = parse_grid)]
    grid: (usize, usize),
    #[arg(long)]
    seed: Option<u64>,
    /// ARS iterations per cell.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(short, long, value_name = "FILE")]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct SynthDemos {
    /// Leave out the mirrored manoeuvres.
    #[arg(long)]
    no_mirror: bool,
    #[arg(short, long, value_name = "FILE")]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct Augment {
    #[arg(short, long, value_name = "FILE")]
    input: PathBuf,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(short, long, value_name = "FILE")]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct TrainData {
    /// Demo file; the first `--train` demos train, the rest validate.
    #[arg(long, value_name = "FILE")]
    demos: PathBuf,
    #[arg(long, default_value_t = 10)]
    train: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Stop once the validation MSE falls below this (0 trains all epochs).
    #[arg(long)]
    target: Option<f64>,
}

#[derive(Debug, Args)]
struct TrainShaper {
    #[command(flatten)]
    data: TrainData,
    #[arg(short, long, value_name = "FILE")]
    output: PathBuf,
    /// Loss curve, one line per epoch.
    #[arg(long, value_name = "FILE")]
    curve: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BaselineKind {
    Dense,
    PlainConv,
    All,
}

#[derive(Debug, Args)]
struct TrainBaselines {
    #[command(flatten)]
    data: TrainData,
    #[arg(long, value_enum, default_value_t = BaselineKind::All)]
    kind: BaselineKind,
    /// Directory for `<kind>.qsnn` and `<kind>_curve.txt`.
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Compare {
    /// Trained gaits against uniform weights and the elliptical baseline.
    Gaits,
    /// Shaper against the least-squares filter on both flip directions.
    Filters,
    /// Validation loss against training-set size for all three networks.
    Baselines,
}

#[derive(Debug, Args)]
struct Eval {
    #[arg(long, value_enum)]
    compare: Compare,
    /// Gait library (gaits).
    #[arg(long, value_name = "FILE", required_if_eq("compare", "gaits"))]
    library: Option<PathBuf>,
    /// Trained shaper (filters).
    #[arg(long, value_name = "FILE", required_if_eq("compare", "filters"))]
    model: Option<PathBuf>,
    /// Augmented demo file (baselines).
    #[arg(long, value_name = "FILE", required_if_eq("compare", "baselines"))]
    demos: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Replay {
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    #[arg(long, value_name = "FILE")]
    demos: PathBuf,
    /// Demo label or index.
    #[arg(long, default_value = "0")]
    demo: String,
    #[arg(long, value_enum, default_value_t = ModeArg::Shaped)]
    mode: ModeArg,
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Raw,
    Shaped,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Raw => Mode::Raw,
            ModeArg::Shaped => Mode::Shaped,
        }
    }
}

#[derive(Debug, Args)]
struct Serve {
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8765)]
    port: u16,
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    #[arg(long, value_name = "FILE")]
    library: Option<PathBuf>,
    /// Mode new sessions start in.
    #[arg(long, value_enum, default_value_t = ModeArg::Shaped)]
    mode: ModeArg,
    /// Speak WebSocket (one message per text frame) instead of raw lines.
    #[arg(long)]
    websocket: bool,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected NxM, got {s:?}"))?;
    let n: usize = a.parse().map_err(|_| format!("bad speed count {a:?}"))?;
    let m: usize = b.parse().map_err(|_| format!("bad curvature count {b:?}"))?;
    if n == 0 || m == 0 {
        return Err("grid dimensions must be at least 1".into());
    }
    Ok((n, m))
}

const EXIT_DATA: u8 = 3;
const EXIT_DIVERGED: u8 = 4;

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::Diverged(_)) => EXIT_DIVERGED,
        _ => EXIT_DATA,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = Config::resolve(cli.config.as_deref())?;
    let inv = output::invocation();
    match cli.command {
        Command::GenTraj(a) => commands::gen_traj(&cfg, &inv, a),
        Command::TrainGaits(a) => commands::train_gaits(&cfg, &inv, a),
        Command::SynthDemos(a) => commands::synth_demos(&cfg, &inv, a),
        Command::Augment(a) => commands::augment(&inv, a),
        Command::TrainShaper(a) => commands::train_shaper(&cfg, &inv, a),
        Command::TrainBaselines(a) => commands::train_baselines(&cfg, &inv, a),
        Command::Eval(a) => commands::eval(&cfg, &inv, a),
        Command::Replay(a) => commands::replay(&cfg, &inv, a),
        Command::Serve(a) => commands::serve(&cfg, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
