//! `gridsgd` — experiment runner for the solver library.
//!
//! Subcommands: `run` executes one configured experiment and writes
//! `trace.csv` / `ledger.csv` / `summary.json`; `figure` emits the CSV
//! bundle behind one of the canned plots; `fetch` downloads a registry
//! dataset into the cache; `sweep` evaluates the cost model over a grid of
//! configurations. Exit codes: 0 success, 2 invalid config or arguments,
//! 3 solver divergence, 4 I/O or network failure.

mod config;
mod experiment;
mod figures;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gridsgd::costmodel::{sweep as run_sweep, SweepSpec};
use gridsgd::dataio::{default_cache_dir, fetch_dataset, Registry};
use gridsgd::seqsolvers::ConvergenceTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Validation,
    Divergence,
    Io,
}

impl ExitKind {
    fn code(self) -> u8 {
        match self {
            ExitKind::Validation => 2,
            ExitKind::Divergence => 3,
            ExitKind::Io => 4,
        }
    }
}

/// Error carrying its process exit code; a diverged run also carries the
/// trace recorded up to the blow-up so it can still be written out.
#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
    pub partial_trace: Option<ConvergenceTrace>,
}

impl CliError {
    pub fn new(kind: ExitKind, message: String) -> Self {
        CliError { kind, message, partial_trace: None }
    }
}

#[derive(Parser)]
#[command(name = "gridsgd", version, about = "SGD variants on a simulated processor grid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config file.
    Run {
        /// Path to the experiment config (see README for the schema).
        config: PathBuf,
    },
    /// Produce the CSV bundle for a named figure.
    Figure {
        /// One of: gd-vs-sgd, sstep-equivalence, fedavg-delay, grid-heatmap.
        name: String,
        /// Recipe parameter override, repeatable: --param key=value.
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
        /// Directory the figure's subdirectory is created in.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Dataset cache directory (else $GRIDSGD_CACHE, else .gridsgd-cache).
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
    /// Download a registry dataset into the local cache.
    Fetch {
        /// Registry name: w1a or breast-cancer.
        dataset: String,
        /// Cache directory (else $GRIDSGD_CACHE, else .gridsgd-cache).
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
    /// Evaluate the cost model over a sweep config and write sweep.csv.
    Sweep {
        /// Path to a JSON sweep spec.
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.kind.code())
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { config } => {
            let config = config::ExperimentConfig::from_file(&config)?;
            experiment::run(&config)
        }
        Command::Figure { name, params, out, cache_dir } => {
            let params = figures::Params::parse(&params)?;
            figures::run(&name, &params, &out, cache_dir.as_deref())
        }
        Command::Fetch { dataset, cache_dir } => fetch(&dataset, cache_dir),
        Command::Sweep { config, out } => sweep_cmd(&config, &out),
    }
}

fn fetch(name: &str, cache_dir: Option<PathBuf>) -> Result<(), CliError> {
    let registry = Registry::builtin();
    if registry.get(name).is_none() {
        return Err(CliError::new(
            ExitKind::Validation,
            format!("unknown dataset {name:?}; known: w1a, breast-cancer"),
        ));
    }
    let cache = default_cache_dir(cache_dir.as_deref());
    let data = fetch_dataset(&registry, name, &cache)
        .map_err(|e| CliError::new(ExitKind::Io, format!("fetch {name}: {e}")))?;
    println!(
        "{name}: {} rows x {} cols, {} nonzeros, cached under {}",
        data.num_rows(),
        data.num_cols(),
        data.matrix.nnz(),
        cache.display()
    );
    Ok(())
}

fn sweep_cmd(config: &std::path::Path, out: &std::path::Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(config).map_err(|e| {
        CliError::new(ExitKind::Io, format!("cannot read sweep config {}: {e}", config.display()))
    })?;
    let spec: SweepSpec = serde_json::from_str(&text).map_err(|e| {
        CliError::new(ExitKind::Validation, format!("sweep config {}: {e}", config.display()))
    })?;
    let result = run_sweep(&spec)
        .map_err(|e| CliError::new(ExitKind::Validation, format!("sweep: {e}")))?;
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::new(ExitKind::Io, format!("writing {}: {e}", out.display())))?;
    let path = out.join("sweep.csv");
    std::fs::write(&path, result.to_csv())
        .map_err(|e| CliError::new(ExitKind::Io, format!("writing {}: {e}", path.display())))?;
    let best = result.best_cell();
    println!(
        "{} cells -> {}; best: {} s={} p_r={} (modeled {:.3e}s, speedup {:.2}x)",
        result.cells.len(),
        path.display(),
        best.algorithm,
        best.block_len,
        best.rows,
        best.time,
        best.speedup
    );
    Ok(())
}
