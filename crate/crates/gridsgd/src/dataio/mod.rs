//! Dataset ingestion and distribution.
//!
//! Everything upstream of the solvers lives here: LIBSVM parsing, synthetic
//! data generation, label-scaling, row padding for cyclic batch alignment,
//! batch index generation, block partitioning over a processor grid, and a
//! registry-driven fetch-and-cache path for the benchmark datasets.

mod csr;
mod dataset;
mod fetch;
mod partition;
mod sampling;
mod standin;

pub use csr::CsrMatrix;
pub use dataset::{
    gen_synthetic, pad_rows, parse_libsvm, parse_libsvm_str, scale_rows_by_labels,
    to_libsvm_string, Dataset, LabelRule, ParseOptions,
};
pub use fetch::{default_cache_dir, fetch_dataset, Registry, RegistryEntry};
pub use partition::{partition, Layout, LocalBlock, Partition};
pub use sampling::{cyclic_batch, CyclicSampler};
pub use standin::{stand_in_dataset, stand_in_libsvm};

/// Errors from parsing, generation, partitioning, or fetching.
#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("labels do not fit the configured rule; observed raw labels {observed:?}")]
    LabelMap { observed: Vec<f64> },
    #[error("{0}")]
    Invalid(String),
    #[error("dataset {0:?} is not in the registry")]
    UnknownDataset(String),
    #[error("fetching {url} failed ({message}); this is retryable")]
    Network { url: String, message: String },
    #[error("checksum mismatch for {name}: expected {expected}, got {actual}")]
    ChecksumMismatch { name: String, expected: String, actual: String },
    #[error(transparent)]
    Io(std::io::Error),
}
