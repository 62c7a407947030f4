use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "implicit-auth", version, about = "Continuous authentication from phone and watch motion sensors")]
struct Cli {
    /// TOML configuration file; command-line flags take precedence.
    #[arg(long, global = true, env = "IMPLICIT_AUTH_CONFIG")]
    config: Option<PathBuf>,

    /// Directory for evaluation outputs.
    #[arg(long, global = true, env = "IMPLICIT_AUTH_RESULTS_DIR")]
    results_dir: Option<PathBuf>,

    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

/// Operating-point settings that override the configuration file.
#[derive(Args, Debug, Default, Clone)]
pub struct Overrides {
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub sample_rate_hz: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub window_s: Option<f64>,
    /// Training vectors per model, half legitimate and half impostor.
    #[arg(long, global = true)]
    pub data_size: Option<usize>,
    /// KRR regularisation weight.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub rho: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub corr_threshold: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub epsilon_cs: Option<f64>,
    #[arg(long, global = true)]
    pub t_windows: Option<usize>,
    #[arg(long, global = true)]
    pub lockout_after: Option<u32>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Format {
    Csv,
    Jsonl,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SweepKind {
    Window,
    Data,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Mode {
    Aware,
    Free,
}

#[derive(Args, Debug, Clone)]
pub struct PopulationArgs {
    #[arg(long, default_value = "separable")]
    pub preset: implicit_auth::synth::Preset,
    #[arg(long, default_value_t = 10)]
    pub users: usize,
    /// Users in the separate population that trains the context detector.
    #[arg(long, default_value_t = 6)]
    pub lab_users: usize,
    /// Seconds of data per context per user.
    #[arg(long, default_value_t = 3000.0)]
    pub per_context_s: f64,
    #[arg(long, default_value_t = 300.0)]
    pub block_s: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write synthetic sensor recordings, one file per user, plus ground truth.
    Generate {
        /// Defaults to the configured data directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "separable")]
        preset: implicit_auth::synth::Preset,
        #[arg(long, default_value_t = 4)]
        users: usize,
        #[arg(long, default_value_t = 0)]
        first_id: u32,
        #[arg(long, default_value_t = 600.0)]
        per_context_s: f64,
        #[arg(long, default_value_t = 300.0)]
        block_s: f64,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Window sensor recordings and write a feature table.
    Extract {
        /// Recordings named `user_<id>.csv` or `user_<id>.jsonl`.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Ground-truth CSV with user_id, window, context.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// User id for a single input whose name carries none.
        #[arg(long)]
        user_id: Option<u32>,
        /// Write all nine candidate features per sensor instead of the production seven.
        #[arg(long)]
        candidates: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fisher scores, KS screening and correlation pruning over a feature table.
    Select {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the Stationary/Moving detector from a labelled feature table.
    TrainContext {
        #[arg(long)]
        features: PathBuf,
        /// Defaults to `context.json` in the model directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        trees: usize,
    },
    /// Train an owner's KRR models. Writes a model bank, or a single model with --context.
    TrainAuth {
        #[arg(long)]
        features: PathBuf,
        /// Defaults to `context.json` in the model directory.
        #[arg(long)]
        context_model: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        owner: u32,
        /// Write only the model for this context.
        #[arg(long)]
        context: Option<implicit_auth::context::ContextLabel>,
        #[arg(long, default_value = "phone_and_watch")]
        device_set: implicit_auth::pipeline::DeviceSet,
        /// Defaults to `bank.json`, or `<context>_<device_set>.json`, in the model directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Authenticate a recording window by window and write a JSONL decision log.
    Run {
        /// Bank file, or a directory holding `bank.json`. Defaults to the model directory.
        #[arg(long)]
        bank: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        /// Log destination; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validated 2x2 ablation on a synthetic population.
    Evaluate {
        #[command(flatten)]
        population: PopulationArgs,
        #[arg(long, default_value_t = 50)]
        iterations: usize,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        /// Exit 1 when phone+watch context-aware accuracy is below this.
        #[arg(long, default_value_t = 0.95)]
        min_accuracy: f64,
    },
    /// FRR/FAR as a function of window length or training size.
    Sweep {
        #[arg(long, value_enum)]
        kind: SweepKind,
        /// Comma-separated window lengths (s) or data sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        population: PopulationArgs,
        #[arg(long, default_value = "phone_and_watch")]
        device_set: implicit_auth::pipeline::DeviceSet,
        #[arg(long, value_enum, default_value = "aware")]
        mode: Mode,
        #[arg(long, default_value_t = 10)]
        iterations: usize,
        #[arg(long, default_value_t = 10)]
        folds: usize,
    },
    /// Attackers imitating one owner at several fidelities; survival against p^n.
    Masquerade {
        #[command(flatten)]
        population: PopulationArgs,
        #[arg(long, default_value_t = 0)]
        victim: u32,
        /// Recordings per attacker profile.
        #[arg(long, default_value_t = 5)]
        sessions: usize,
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
        lambdas: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        horizon: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    match commands::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
