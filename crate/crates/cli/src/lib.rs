//! `ddim`: batch experiments on delay equations in the product Hilbert space.
//!
//! ```text
//! ddim <simulate|roots|region|dimension|beta|trace-check> --config path.json
//!      [--set key=value ...] [--out dir] [--seed N] [--threads N] [--no-timestamp]
//! ```
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 failed numerical contract.

pub mod commands;
pub mod config;
pub mod svg;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, ValueEnum};
use serde::Serialize;

use config::{BetaConfig, DimensionConfig, RegionConfig, RootsConfig, SimulateConfig, TraceCheckConfig};

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Io(String),
    /// A computation finished but violated its acceptance contract, or the
    /// numerics could not be trusted (divergence, root on the contour, ...).
    Contract(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) | Failure::Io(_) => 1,
            Failure::Contract(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
            Failure::Contract(m) => write!(f, "contract failure: {m}"),
        }
    }
}

impl std::error::Error for Failure {}

impl From<ddim_core::Error> for Failure {
    fn from(e: ddim_core::Error) -> Self {
        use ddim_core::Error as E;
        match e {
            E::Shape(_) | E::Domain(_) | E::Config(_) => Failure::Usage(e.to_string()),
            _ => Failure::Contract(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Simulate,
    Roots,
    Region,
    Dimension,
    Beta,
    TraceCheck,
}

impl Command {
    fn seeded(self) -> bool {
        matches!(self, Command::Simulate | Command::Dimension | Command::Beta)
    }

    pub fn schema(self) -> String {
        match self {
            Command::Simulate => config::schema_dump::<SimulateConfig>(),
            Command::Roots => config::schema_dump::<RootsConfig>(),
            Command::Region => config::schema_dump::<RegionConfig>(),
            Command::Dimension => config::schema_dump::<DimensionConfig>(),
            Command::Beta => config::schema_dump::<BetaConfig>(),
            Command::TraceCheck => config::schema_dump::<TraceCheckConfig>(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ddim", version, about = "Dimension and inertial-manifold experiments for delay equations")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON file with the command's parameters; run without it to see the defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key, e.g. `--set alpha=0.75`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Seed for randomized commands (same as `--set seed=N`).
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, env = "DDIM_THREADS")]
    pub threads: Option<usize>,
    /// Leave the generation-time comment out of the SVG.
    #[arg(long)]
    pub no_timestamp: bool,
}

/// Runs a parsed command line and returns the written files.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>, Failure> {
    let Some(path) = &cli.config else {
        return Err(Failure::Usage(format!(
            "missing --config; the accepted keys with their defaults are\n{}",
            cli.command.schema()
        )));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut sets = cli.sets.clone();
    if let Some(seed) = cli.seed {
        if cli.command.seeded() {
            sets.push(format!("seed={seed}"));
        } else {
            eprintln!("note: --seed has no effect on this command");
        }
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be positive".into()));
        }
        // the global pool can only be set once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let out = &cli.out;
    match cli.command {
        Command::Simulate => commands::simulate(&config::load(&text, &sets)?, out),
        Command::Roots => commands::roots_cmd(&config::load(&text, &sets)?, out),
        Command::Region => {
            let cfg: RegionConfig = config::load(&text, &sets)?;
            let stamp = (cfg.timestamp && !cli.no_timestamp)
                .then(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0));
            commands::region(&cfg, out, stamp)
        }
        Command::Dimension => commands::dimension(&config::load(&text, &sets)?, out),
        Command::Beta => commands::beta(&config::load(&text, &sets)?, out),
        Command::TraceCheck => commands::trace_check(&config::load(&text, &sets)?, out),
    }
}

#[derive(Serialize)]
struct Written<'a> {
    written: &'a [PathBuf],
}

/// Full program: parse, run, report; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(files) => {
            println!("{}", serde_json::to_string(&Written { written: &files }).unwrap_or_default());
            0
        }
        Err(f) => {
            eprintln!("ddim: {f}");
            f.exit_code()
        }
    }
}
