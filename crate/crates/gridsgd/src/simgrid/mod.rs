//! Simulated processor grid.
//!
//! Solvers written against this module look like MPI programs: a program
//! closure runs once per rank, ranks exchange data only through collectives
//! on row/column/world communicators, and every collective charges the
//! calling rank's cost ledger. The "network" is an in-process rendezvous
//! hub, so a whole grid runs inside one OS process and results are exactly
//! reproducible.
//!
//! Two execution modes are provided: [`ExecMode::Reference`] serializes
//! ranks into a deterministic round-robin schedule, [`ExecMode::Concurrent`]
//! runs them on free-running threads. Both must produce bit-identical
//! results and ledgers; the test suite holds them to that.

mod grid;
mod ledger;
mod runtime;

pub use grid::{CommKey, Communicator, ProcessorGrid};
pub use ledger::{
    hockney_time, CategoryCounters, CostCategory, CostLedger, CostParams, RunLedger,
    ALL_CATEGORIES,
};
pub use runtime::{run_grid, ExecMode, GridRun, RankCtx, SimError, SimFailure};

pub(crate) use runtime::ceil_log2;
