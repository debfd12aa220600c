//! Sequential solvers: the single-process baselines every distributed
//! variant is validated against.
//!
//! All three solvers minimize the mean logistic loss (see [`crate::logreg`])
//! over a label-scaled matrix `z`, starting from a caller-supplied iterate.
//! Mini-batches are drawn cyclically — batch `k` is rows
//! `[k*b, (k+1)*b) mod num_rows` — so every run is a pure function of its
//! inputs and algebraic identities between solvers can be tested exactly,
//! not just statistically.
//!
//! Datasets may carry zero padding rows at the end (see
//! [`crate::dataio::pad_rows`]). Padding rows take part in sampling — that
//! is what keeps block sizes uniform — but contribute nothing to any
//! update, and the objective reported in traces is always evaluated over
//! the `objective_rows` real rows only.

mod gd;
mod sgd;
pub(crate) mod sstep;

pub use gd::gd;
pub use sgd::sgd;
pub use sstep::sstep_sgd;

use crate::dataio::CsrMatrix;
use crate::logreg;

/// Hyperparameters shared by every solver. Fields irrelevant to a given
/// algorithm (for example `block_len` for plain SGD) are ignored by it.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Rows per mini-batch.
    pub batch_size: usize,
    /// Step size applied to each stochastic gradient.
    pub step_size: f64,
    /// Total mini-batch iterations (full-gradient steps for `gd`).
    pub iterations: usize,
    /// Iterations unrolled per communication block in `sstep_sgd`.
    pub block_len: usize,
    /// Local iterations per averaging round in the federated solvers.
    pub local_iters: usize,
    /// Record a trace point every this many iterations; 0 records only the
    /// initial and final iterates. Solvers that only materialize iterates
    /// at block boundaries record at the first boundary past each multiple.
    pub trace_interval: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            batch_size: 16,
            step_size: 1.0 / 16.0,
            iterations: 100,
            block_len: 1,
            local_iters: 1,
            trace_interval: 0,
        }
    }
}

impl SolverConfig {
    pub(crate) fn validate(&self, num_rows: usize) -> Result<(), SolverError> {
        if self.batch_size == 0 {
            return Err(SolverError::InvalidConfig("batch_size must be at least 1".into()));
        }
        if self.batch_size > num_rows {
            return Err(SolverError::InvalidConfig(format!(
                "batch_size {} exceeds the {} available rows",
                self.batch_size, num_rows
            )));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(SolverError::InvalidConfig(format!(
                "step_size must be positive and finite, got {}",
                self.step_size
            )));
        }
        Ok(())
    }

    pub(crate) fn validate_block(&self) -> Result<(), SolverError> {
        if self.block_len == 0 {
            return Err(SolverError::InvalidConfig("block_len must be at least 1".into()));
        }
        if self.iterations % self.block_len != 0 {
            return Err(SolverError::InvalidConfig(format!(
                "iterations ({}) must be a multiple of block_len ({})",
                self.iterations, self.block_len
            )));
        }
        Ok(())
    }
}

/// One objective measurement along a solver run.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TraceRecord {
    /// Mini-batch iterations completed when the snapshot was taken.
    pub iteration: usize,
    /// Cumulative per-row stochastic gradient evaluations across all
    /// workers — the work axis for comparing methods with different
    /// batch shapes.
    pub gradient_evaluations: u64,
    pub objective: f64,
    /// Time under the machine model. Sequential runs report 0.
    pub modeled_time_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTrace {
    pub records: Vec<TraceRecord>,
}

impl ConvergenceTrace {
    pub fn push(&mut self, record: TraceRecord) {
        self.records.push(record);
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.records.last().map(|r| r.objective)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,gradient_evaluations,objective,modeled_time_seconds\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.iteration, r.gradient_evaluations, r.objective, r.modeled_time_seconds
            ));
        }
        out
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum SolverError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    /// The objective stopped being finite. Carries everything recorded up
    /// to the failure so callers can still plot the blow-up.
    #[error("objective became non-finite at iteration {iteration}")]
    Diverged { iteration: usize, trace: ConvergenceTrace },
}

/// A completed sequential run.
#[derive(Debug, Clone)]
pub struct SolverRun {
    pub x: Vec<f64>,
    pub trace: ConvergenceTrace,
}

/// Shared trace bookkeeping: decides which iterations get an objective
/// measurement and performs the divergence check at each one.
pub(crate) struct Tracer<'a> {
    z: &'a CsrMatrix,
    objective_rows: usize,
    interval: usize,
    next_due: usize,
    trace: ConvergenceTrace,
}

impl<'a> Tracer<'a> {
    pub(crate) fn new(z: &'a CsrMatrix, objective_rows: usize, interval: usize) -> Self {
        assert!(objective_rows >= 1 && objective_rows <= z.num_rows);
        Tracer {
            z,
            objective_rows,
            interval,
            next_due: interval.max(1),
            trace: ConvergenceTrace::default(),
        }
    }

    /// Record a snapshot if `iteration` is due (or `force` is set), then
    /// fail the run if the objective is no longer finite.
    pub(crate) fn observe(
        &mut self,
        iteration: usize,
        gradient_evaluations: u64,
        x: &[f64],
        force: bool,
    ) -> Result<(), SolverError> {
        let due = self.interval > 0 && iteration >= self.next_due;
        if !(due || force) {
            return Ok(());
        }
        if due {
            while self.next_due <= iteration {
                self.next_due += self.interval;
            }
        }
        self.record(iteration, gradient_evaluations, x)
    }

    fn record(
        &mut self,
        iteration: usize,
        gradient_evaluations: u64,
        x: &[f64],
    ) -> Result<(), SolverError> {
        if self.trace.records.last().map(|r| r.iteration) == Some(iteration) {
            return Ok(());
        }
        let objective = logreg::objective(self.z, self.objective_rows, x);
        self.trace.push(TraceRecord {
            iteration,
            gradient_evaluations,
            objective,
            modeled_time_seconds: 0.0,
        });
        if !objective.is_finite() {
            return Err(SolverError::Diverged { iteration, trace: self.trace.clone() });
        }
        Ok(())
    }

    pub(crate) fn into_trace(self) -> ConvergenceTrace {
        self.trace
    }
}
