//! Distributed solvers, written as rank programs for the simulated grid.
//!
//! Each solver follows the same shape: the driver validates the
//! configuration, partitions the (label-scaled) data once, and launches one
//! rank program per processor with [`crate::simgrid::run_grid`]. Rank
//! programs communicate only through collectives, charge their cost ledgers
//! as they go, and snapshot their piece of the iterate at trace points.
//! The driver then reassembles full iterates from the snapshots, evaluates
//! the objective on them (measurement is free — it is not part of the
//! algorithm and never touches a ledger), and prices each snapshot's
//! ledger under the machine model to get a modeled-time axis.
//!
//! Equivalence contracts, enforced by tests rather than prose: on a 1x1
//! grid [`par_sgd`] is bit-identical to [`crate::seqsolvers::sgd`]; with
//! one worker [`fedavg`] is bit-identical to SGD; with a single grid row
//! [`hybrid_sgd`] reduces to column-parallel block SGD and with a single
//! grid column it matches [`fedavg`] up to block-reordering roundoff.

mod fedavg;
mod hybrid;
mod par_sgd;

pub use fedavg::{fedavg, FedSampling};
pub use hybrid::hybrid_sgd;
pub use par_sgd::par_sgd;

use crate::dataio::CsrMatrix;
use crate::logreg;
use crate::seqsolvers::{ConvergenceTrace, SolverError, TraceRecord};
use crate::simgrid::{
    hockney_time, CostLedger, CostParams, ProcessorGrid, RunLedger, SimError, SimFailure,
};

/// A completed distributed run: the final iterate (already gathered and
/// truncated to the dataset width), the objective/time trace, and the full
/// per-rank cost accounting.
#[derive(Debug, Clone)]
pub struct ParallelRun {
    pub x: Vec<f64>,
    pub trace: ConvergenceTrace,
    pub ledger: RunLedger,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum ParError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("simulation failed: {0}")]
    Sim(#[from] SimError),
}

/// One rank's state captured at a trace point: its slice of the iterate
/// and a copy of its cumulative ledger.
#[derive(Debug, Clone)]
pub(crate) struct Snapshot {
    pub iteration: usize,
    pub gradient_evaluations: u64,
    pub x_loc: Vec<f64>,
    pub ledger: CostLedger,
}

/// What every rank program returns: its final iterate slice plus the trace
/// snapshots (the first is always iteration 0, the last always the final
/// iteration).
#[derive(Debug, Clone)]
pub(crate) struct RankOutput {
    pub x_loc: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
}

/// Trace cadence shared by all rank programs: fire at the first eligible
/// point past each multiple of `interval`, and always at the end. Mirrors
/// the sequential solvers' cadence so traces line up across algorithms.
pub(crate) struct SnapshotSchedule {
    interval: usize,
    next_due: usize,
}

impl SnapshotSchedule {
    pub(crate) fn new(interval: usize) -> Self {
        SnapshotSchedule { interval, next_due: interval.max(1) }
    }

    pub(crate) fn due(&mut self, iteration: usize, is_final: bool) -> bool {
        let due = self.interval > 0 && iteration >= self.next_due;
        if due {
            while self.next_due <= iteration {
                self.next_due += self.interval;
            }
        }
        due || is_final
    }
}

/// Keep the first error in rank order; when a collective aborts, every
/// rank reports the same root cause, so this is deterministic.
impl<E: Into<ParError>> From<SimFailure<E>> for ParError {
    fn from(failure: SimFailure<E>) -> Self {
        let (_rank, err) = failure.errors.into_iter().next().expect("failure without errors");
        err.into()
    }
}

/// Rebuild full iterates from per-rank snapshots and price them.
///
/// Expects the layout invariant shared by all solvers here: the iterate
/// slice held by rank `(i, j)` depends only on `j`, and the full iterate is
/// the concatenation over `j` of grid row 0's slices, truncated to
/// `num_cols`. The cross-row replication is asserted, not assumed.
pub(crate) fn assemble_run(
    z: &CsrMatrix,
    objective_rows: usize,
    grid: &ProcessorGrid,
    per_rank: Vec<RankOutput>,
    ledger: RunLedger,
    params: &CostParams,
) -> Result<ParallelRun, ParError> {
    let num_points = per_rank[0].snapshots.len();
    for out in &per_rank {
        assert_eq!(out.snapshots.len(), num_points, "ranks disagree on trace points");
    }

    let mut trace = ConvergenceTrace::default();
    for point in 0..num_points {
        let lead = &per_rank[0].snapshots[point];
        for (rank, out) in per_rank.iter().enumerate() {
            let snap = &out.snapshots[point];
            assert_eq!(snap.iteration, lead.iteration, "rank {rank} traced off-schedule");
            let (i, j) = grid.coords_of(rank);
            let peer = &per_rank[grid.rank_of(0, j)].snapshots[point];
            assert_eq!(
                snap.x_loc, peer.x_loc,
                "iterate slice diverged between grid rows 0 and {i} (column {j})"
            );
        }
        if trace.records.last().map(|r| r.iteration) == Some(lead.iteration) {
            continue;
        }
        let x = gather_x(grid, &per_rank, point, z.num_cols);
        let snapshot_ledgers: Vec<CostLedger> =
            per_rank.iter().map(|o| o.snapshots[point].ledger.clone()).collect();
        let modeled = hockney_time(&RunLedger::merge(snapshot_ledgers).critical, params);
        let objective = logreg::objective(z, objective_rows, &x);
        trace.push(TraceRecord {
            iteration: lead.iteration,
            gradient_evaluations: lead.gradient_evaluations,
            objective,
            modeled_time_seconds: modeled,
        });
        if !objective.is_finite() {
            return Err(SolverError::Diverged { iteration: lead.iteration, trace }.into());
        }
    }

    let x = {
        let mut full = Vec::with_capacity(z.num_cols);
        for j in 0..grid.cols {
            full.extend_from_slice(&per_rank[grid.rank_of(0, j)].x_loc);
        }
        full.truncate(z.num_cols);
        full
    };
    Ok(ParallelRun { x, trace, ledger })
}

fn gather_x(
    grid: &ProcessorGrid,
    per_rank: &[RankOutput],
    point: usize,
    num_cols: usize,
) -> Vec<f64> {
    let mut full = Vec::with_capacity(num_cols);
    for j in 0..grid.cols {
        full.extend_from_slice(&per_rank[grid.rank_of(0, j)].snapshots[point].x_loc);
    }
    full.truncate(num_cols);
    full
}

/// Rows owned by batch slot: team `i` of `teams` owns the `i`-th slice of
/// every global batch, i.e. global rows whose batch offset `r % batch_size`
/// falls in `[i * batch_size/teams, (i+1) * batch_size/teams)`. Returned in
/// ascending order, which is also local storage order. With this ownership
/// every cyclic global batch splits into equal contiguous local runs, so a
/// rank's share of global batch `k` is exactly its own local cyclic batch
/// `k` — no index translation at runtime.
pub(crate) fn batch_aligned_rows(
    num_rows: usize,
    batch_size: usize,
    teams: usize,
    team: usize,
) -> Vec<usize> {
    debug_assert_eq!(num_rows % batch_size, 0);
    debug_assert_eq!(batch_size % teams, 0);
    let slice = batch_size / teams;
    let mut rows = Vec::with_capacity(num_rows / teams);
    for block_start in (0..num_rows).step_by(batch_size) {
        let lead = block_start + team * slice;
        rows.extend(lead..lead + slice);
    }
    rows
}

/// Slice `x0` for the rank holding columns `[j*width, (j+1)*width)`,
/// zero-extended past the true width (padded columns hold zeros forever:
/// no data touches them, so no update ever moves them).
pub(crate) fn x0_slice(x0: &[f64], j: usize, width: usize) -> Vec<f64> {
    let start = (j * width).min(x0.len());
    let end = ((j + 1) * width).min(x0.len());
    let mut out = x0[start..end].to_vec();
    out.resize(width, 0.0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_aligned_rows_tile_the_matrix() {
        // m = 12, b = 4, 2 teams: batches are [0..4), [4..8), [8..12);
        // team 0 takes the first half of each, team 1 the second half.
        assert_eq!(batch_aligned_rows(12, 4, 2, 0), vec![0, 1, 4, 5, 8, 9]);
        assert_eq!(batch_aligned_rows(12, 4, 2, 1), vec![2, 3, 6, 7, 10, 11]);
        // single team owns everything in order
        assert_eq!(batch_aligned_rows(8, 4, 1, 0), (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn batch_aligned_rows_cover_each_row_once() {
        let mut seen = vec![0u32; 24];
        for team in 0..4 {
            for r in batch_aligned_rows(24, 8, 4, team) {
                seen[r] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn x0_slices_partition_and_pad() {
        let x0 = [1.0, 2.0, 3.0, 4.0, 5.0];
        // width 2 over 3 column blocks: last block is half padding
        assert_eq!(x0_slice(&x0, 0, 2), vec![1.0, 2.0]);
        assert_eq!(x0_slice(&x0, 1, 2), vec![3.0, 4.0]);
        assert_eq!(x0_slice(&x0, 2, 2), vec![5.0, 0.0]);
    }

    #[test]
    fn schedule_fires_past_multiples_and_at_the_end() {
        let mut s = SnapshotSchedule::new(5);
        let fired: Vec<usize> = (1..=12).filter(|&k| s.due(k, k == 12)).collect();
        assert_eq!(fired, vec![5, 10, 12]);
        let mut off = SnapshotSchedule::new(0);
        let fired: Vec<usize> = (1..=12).filter(|&k| off.due(k, k == 12)).collect();
        assert_eq!(fired, vec![12]);
    }
}
