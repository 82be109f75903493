//! `evtrack`: track features in event streams, synthesize test scenes, and
//! score tracks against ground truth.
//!
//! Exit codes: 0 success, 1 usage error, 2 input error, 3 internal error.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use evtrack_core::io::{config_entries, CONFIG_KEYS};
use evtrack_core::TrackerConfig;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Input(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Input(_) => 2,
            Failure::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Input(m) | Failure::Internal(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(name = "evtrack", version, about = "Event-camera feature tracking along SE(2) B-splines")]
struct Cli {
    /// Worker threads for feature-level parallelism (0 = one per core).
    /// Never changes output bytes.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track seeded features through an event stream.
    Track(TrackArgs),
    /// Generate a synthetic event stream with ground-truth tracks.
    Synth(SynthArgs),
    /// Score tracks against ground truth (feature age and error).
    Eval(EvalArgs),
    /// Pick evenly distributed Harris corners on an event-count image.
    Detect(DetectArgs),
}

#[derive(Args)]
pub struct TrackArgs {
    /// Events file, one `t x y p` line per event.
    #[arg(long)]
    pub events: PathBuf,
    /// Seeds file, one `t x y` line per feature.
    #[arg(long)]
    pub seeds: PathBuf,
    /// Config file of `key = value` lines. Flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for tracks.csv and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Scene description file.
    #[arg(long)]
    pub scene: PathBuf,
    /// Overrides the scene's random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for events.txt, gt_tracks.csv, seeds.txt and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Ground-truth tracks CSV.
    #[arg(long)]
    pub gt: PathBuf,
    /// Method tracks CSV as `label=path` or `path` (label = file stem). Repeatable.
    #[arg(long = "method", required = true)]
    pub methods: Vec<String>,
    /// Error threshold th (px) ending a feature's lifetime.
    #[arg(long, default_value_t = evtrack_core::eval::DEFAULT_THRESHOLD)]
    pub th: f64,
    /// Pool error over all (feature, t) samples instead of averaging per-feature means.
    #[arg(long)]
    pub pooled: bool,
    /// Dataset name in the metrics table (default: ground-truth file stem).
    #[arg(long)]
    pub dataset: Option<String>,
    /// Time step of the tracks-alive series (s).
    #[arg(long, default_value_t = 0.01)]
    pub alive_step: f64,
    /// Output directory for metrics.csv, features.csv, alive.csv and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct DetectArgs {
    /// Events file, one `t x y p` line per event.
    #[arg(long)]
    pub events: PathBuf,
    /// Start of the accumulation interval (s).
    #[arg(long, default_value_t = 0.0)]
    pub t0: f64,
    /// End of the accumulation interval (s).
    #[arg(long, default_value_t = 0.1)]
    pub t1: f64,
    /// Maximum number of seeds.
    #[arg(long, default_value_t = 60)]
    pub count: usize,
    #[arg(long, default_value_t = 240)]
    pub width: usize,
    #[arg(long, default_value_t = 180)]
    pub height: usize,
    /// Minimum distance between seeds (px).
    #[arg(long, default_value_t = 31.0)]
    pub min_distance: f64,
    /// Margin to the sensor border (px).
    #[arg(long, default_value_t = 15.0)]
    pub border: f64,
    /// Harris sensitivity k.
    #[arg(long, default_value_t = 0.04)]
    pub harris_k: f64,
    /// Responses below this fraction of the maximum are discarded.
    #[arg(long, default_value_t = 0.01)]
    pub relative_threshold: f64,
    /// Output directory for seeds.txt and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
}

fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

/// One `--key` flag per tracker config key, with the default in its help.
/// Boolean keys also work as bare switches (`--adaptive-window`).
fn config_args() -> Vec<Arg> {
    let defaults = config_entries(&TrackerConfig::default());
    CONFIG_KEYS
        .iter()
        .zip(defaults)
        .map(|(&(key, help), (_, default))| {
            let arg = Arg::new(key)
                .long(flag_name(key))
                .value_name("VALUE")
                .action(ArgAction::Set)
                .help(format!("{help} [default: {default}]"));
            if default == "true" || default == "false" {
                arg.num_args(0..=1).default_missing_value("true")
            } else {
                arg
            }
        })
        .collect()
}

/// Config key overrides given on the command line, in key order.
pub fn config_overrides(matches: &ArgMatches) -> Vec<(&'static str, String)> {
    CONFIG_KEYS
        .iter()
        .filter_map(|&(key, _)| matches.get_one::<String>(key).map(|v| (key, v.clone())))
        .collect()
}

fn command() -> clap::Command {
    Cli::command().mut_subcommand("track", |c| {
        c.next_help_heading("Tracker configuration").args(config_args())
    })
}

fn dispatch(cli: Cli, matches: &ArgMatches) -> Result<(), Failure> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| Failure::Internal(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Track(args) => {
            let sub = matches.subcommand_matches("track").expect("track matches");
            commands::track(args, &config_overrides(sub), cli.threads)
        }
        Command::Synth(args) => commands::synth(args),
        Command::Eval(args) => commands::eval(args),
        Command::Detect(args) => commands::detect(args),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = match command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| dispatch(cli, &matches))) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
        Err(_) => ExitCode::from(3),
    }
}
