//! Experiment configuration: JSON in, a validated plan plus a resolved
//! dataset out. Validation happens before any dataset work so a typo'd
//! config fails in milliseconds with the offending field named.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use gridsgd::dataio::{
    default_cache_dir, fetch_dataset, gen_synthetic, pad_rows, parse_libsvm, stand_in_dataset,
    Dataset, ParseOptions, Registry,
};
use gridsgd::parsolvers::FedSampling;
use gridsgd::seqsolvers::SolverConfig;
use gridsgd::simgrid::CostParams;

use crate::{CliError, ExitKind};

/// Where the training data comes from: a registry name (fetched and
/// cached, with a bundled stand-in as offline fallback), a LIBSVM file on
/// disk, or a generated problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetRef {
    Name(String),
    File { path: PathBuf },
    Synthetic { synthetic: SyntheticSpec },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub rows: usize,
    pub cols: usize,
    pub nnz_per_row: usize,
    /// Falls back to the experiment-level seed, then to 0.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingSpec {
    Contiguous,
    MatchedBlocks,
}

impl SamplingSpec {
    pub fn as_fed(self) -> FedSampling {
        match self {
            SamplingSpec::Contiguous => FedSampling::Contiguous,
            SamplingSpec::MatchedBlocks => FedSampling::MatchedBlocks,
        }
    }
}

fn default_sampling() -> SamplingSpec {
    SamplingSpec::Contiguous
}

/// Which solver to run, with its process layout. Batching, step size, and
/// schedule shape live in [`SolverConfig`]; only the layout is per-variant.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AlgorithmSpec {
    /// Full-gradient descent; the batching fields are ignored.
    Gd,
    /// Sequential mini-batch SGD with cyclic sampling.
    Sgd,
    /// Sequential SGD unrolled into blocks of `solver.block_len` steps.
    BlockSgd,
    /// Batch-parallel SGD on a `rows` x `cols` grid.
    ParSgd { rows: usize, cols: usize },
    /// Local SGD with periodic averaging over `workers` row shards.
    Fedavg {
        workers: usize,
        #[serde(default = "default_sampling")]
        sampling: SamplingSpec,
    },
    /// Averaging over `rows` teams, each a `cols`-way column-split blocked
    /// solver.
    Hybrid { rows: usize, cols: usize },
}

impl AlgorithmSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmSpec::Gd => "gd",
            AlgorithmSpec::Sgd => "sgd",
            AlgorithmSpec::BlockSgd => "block-sgd",
            AlgorithmSpec::ParSgd { .. } => "par-sgd",
            AlgorithmSpec::Fedavg { .. } => "fedavg",
            AlgorithmSpec::Hybrid { .. } => "hybrid",
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetRef,
    pub algorithm: AlgorithmSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Machine parameters for modeled time; defaults are fine when only
    /// iterates and exact counters matter.
    #[serde(default)]
    pub cost: CostParams,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Overrides the cache env var and default for registry datasets.
    pub cache_dir: Option<PathBuf>,
    /// Default seed for synthetic datasets.
    pub seed: Option<u64>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::new(ExitKind::Io, format!("cannot read config {}: {e}", path.display()))
        })?;
        let config: ExperimentConfig = serde_json::from_str(&text).map_err(|e| {
            CliError::new(ExitKind::Validation, format!("config {}: {e}", path.display()))
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Structural checks that need no dataset: every violated constraint is
    /// reported with the path of the field that caused it.
    pub fn validate(&self) -> Result<(), CliError> {
        let s = &self.solver;
        let fail = |field: &str, msg: String| {
            Err(CliError::new(ExitKind::Validation, format!("{field}: {msg}")))
        };
        if s.batch_size == 0 {
            return fail("solver.batch_size", "must be at least 1".into());
        }
        if !(s.step_size.is_finite() && s.step_size > 0.0) {
            return fail("solver.step_size", format!("must be positive and finite, got {}", s.step_size));
        }
        if s.iterations == 0 {
            return fail("solver.iterations", "must be at least 1".into());
        }
        match self.algorithm {
            AlgorithmSpec::Gd | AlgorithmSpec::Sgd => {}
            AlgorithmSpec::BlockSgd => {
                if s.block_len == 0 {
                    return fail("solver.block_len", "must be at least 1".into());
                }
                if s.iterations % s.block_len != 0 {
                    return fail(
                        "solver.iterations",
                        format!("{} is not a multiple of block_len {}", s.iterations, s.block_len),
                    );
                }
            }
            AlgorithmSpec::ParSgd { rows, cols } => {
                if rows == 0 || cols == 0 {
                    return fail("algorithm.rows/cols", "grid dimensions must be at least 1".into());
                }
                if s.batch_size % rows != 0 {
                    return fail(
                        "solver.batch_size",
                        format!("{} is not divisible by the {} grid rows", s.batch_size, rows),
                    );
                }
            }
            AlgorithmSpec::Fedavg { workers, .. } => {
                if workers == 0 {
                    return fail("algorithm.workers", "must be at least 1".into());
                }
                if s.local_iters == 0 {
                    return fail("solver.local_iters", "must be at least 1".into());
                }
                if s.iterations % s.local_iters != 0 {
                    return fail(
                        "solver.iterations",
                        format!("{} is not a multiple of local_iters {}", s.iterations, s.local_iters),
                    );
                }
                if s.batch_size % workers != 0 {
                    return fail(
                        "solver.batch_size",
                        format!("{} is not divisible by the {workers} workers", s.batch_size),
                    );
                }
            }
            AlgorithmSpec::Hybrid { rows, cols } => {
                if rows == 0 || cols == 0 {
                    return fail("algorithm.rows/cols", "grid dimensions must be at least 1".into());
                }
                if s.block_len == 0 {
                    return fail("solver.block_len", "must be at least 1".into());
                }
                if s.local_iters == 0 || s.local_iters % s.block_len != 0 {
                    return fail(
                        "solver.local_iters",
                        format!("{} is not a positive multiple of block_len {}", s.local_iters, s.block_len),
                    );
                }
                if s.iterations % s.local_iters != 0 {
                    return fail(
                        "solver.iterations",
                        format!("{} is not a multiple of local_iters {}", s.iterations, s.local_iters),
                    );
                }
                if s.batch_size % rows != 0 {
                    return fail(
                        "solver.batch_size",
                        format!("{} is not divisible by the {} grid rows", s.batch_size, rows),
                    );
                }
            }
        }
        Ok(())
    }
}

/// A loaded dataset plus where it actually came from, for the summary.
pub struct ResolvedDataset {
    pub data: Dataset,
    pub source: String,
}

/// Load the dataset a config points at. Registry names try the cache (and
/// network) first and fall back to the bundled stand-in so experiments run
/// offline; the summary records which one was used.
pub fn resolve_dataset(
    dataset: &DatasetRef,
    default_seed: Option<u64>,
    cache_override: Option<&Path>,
) -> Result<ResolvedDataset, CliError> {
    match dataset {
        DatasetRef::Name(name) => resolve_named(name, cache_override),
        DatasetRef::File { path } => {
            let file = File::open(path).map_err(|e| {
                CliError::new(ExitKind::Io, format!("cannot open dataset {}: {e}", path.display()))
            })?;
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "file".to_string());
            let data = parse_libsvm(BufReader::new(file), &ParseOptions::named(&stem))
                .map_err(|e| {
                    CliError::new(ExitKind::Io, format!("dataset {}: {e}", path.display()))
                })?;
            Ok(ResolvedDataset { data, source: format!("file:{}", path.display()) })
        }
        DatasetRef::Synthetic { synthetic } => {
            let seed = synthetic.seed.or(default_seed).unwrap_or(0);
            let data = gen_synthetic(synthetic.rows, synthetic.cols, synthetic.nnz_per_row, seed)
                .map_err(|e| CliError::new(ExitKind::Validation, format!("dataset.synthetic: {e}")))?;
            Ok(ResolvedDataset { data, source: format!("synthetic(seed={seed})") })
        }
    }
}

fn resolve_named(name: &str, cache_override: Option<&Path>) -> Result<ResolvedDataset, CliError> {
    let registry = Registry::builtin();
    if registry.get(name).is_none() {
        return Err(CliError::new(
            ExitKind::Validation,
            format!("dataset: unknown name {name:?}; known: w1a, breast-cancer"),
        ));
    }
    let cache = default_cache_dir(cache_override);
    match fetch_dataset(&registry, name, &cache) {
        Ok(data) => Ok(ResolvedDataset { data, source: format!("registry:{name}") }),
        Err(fetch_err) => match stand_in_dataset(name) {
            Some(data) => {
                eprintln!("note: could not fetch {name} ({fetch_err}); using the bundled stand-in");
                Ok(ResolvedDataset { data, source: format!("stand-in:{name}") })
            }
            None => Err(CliError::new(ExitKind::Io, format!("dataset {name}: {fetch_err}"))),
        },
    }
}

/// Pad so every batch, block, and shard boundary in the run lands on a row
/// boundary. The padded rows are all-zero and excluded from objectives.
pub fn pad_for(solver: &SolverConfig, data: &Dataset) -> Dataset {
    pad_rows(data, solver.block_len.max(1), solver.batch_size)
}
