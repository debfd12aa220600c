//! Distributed SGD variants for sparse logistic regression, run on a
//! simulated processor grid with exact cost accounting.
//!
//! The crate is organized around a small pipeline:
//!
//! * [`dataio`] loads LIBSVM-format datasets (from a local cache, a remote
//!   registry, or built-in deterministic stand-ins), pads them for block
//!   algorithms, and partitions them across a processor grid.
//! * [`logreg`] holds the shared numerical kernels: the logistic objective,
//!   sigmoid/softplus evaluation, sparse batch products, and a
//!   finite-difference gradient oracle used only by tests.
//! * [`seqsolvers`] implements the sequential baselines (full-batch gradient
//!   descent, plain SGD, and the communication-avoiding s-step rewrite of
//!   SGD, which is algebraically exact, not an approximation).
//! * [`simgrid`] is the simulated grid: rank programs, collectives, cost
//!   ledgers, and a machine-model clock.
//! * [`parsolvers`] implements the distributed algorithms on top of
//!   [`simgrid`]: data-parallel SGD on 1D and 2D layouts, locally-averaged
//!   SGD (federated averaging), and the hybrid of the two.
//! * [`costmodel`] predicts flop/word/message counts for each algorithm in
//!   closed form and cross-checks the predictions against measured ledgers.

pub mod costmodel;
pub mod dataio;
pub mod logreg;
pub mod parsolvers;
pub mod seqsolvers;
pub mod simgrid;
