use super::{
    assemble_run, batch_aligned_rows, x0_slice, ParError, ParallelRun, RankOutput, Snapshot,
    SnapshotSchedule,
};
use crate::dataio::{scale_rows_by_labels, CsrMatrix, CyclicSampler, Dataset};
use crate::logreg;
use crate::seqsolvers::{SolverConfig, SolverError};
use crate::simgrid::{run_grid, CostCategory, CostParams, ExecMode, ProcessorGrid, SimError};

/// Data-parallel mini-batch SGD on a `rows x cols` processor grid.
///
/// The grid shape selects the layout: `(p, 1)` splits rows only (each rank
/// reduces a full-width gradient), `(1, p)` splits columns only (each rank
/// reduces full-batch inner products), and a general `(p_r, p_c)` splits
/// both, trading one big collective for two small ones per iteration.
///
/// Rows are assigned to grid rows by batch slot, not contiguously: grid
/// row `i` owns the `i`-th slice of every global batch (see
/// [`batch_aligned_rows`]). Every iteration then needs exactly two
/// collectives: a row-team reduction of `batch/p_r` inner products and a
/// column-team reduction of `cols/p_c` gradient entries. On a `1x1` grid
/// both collectives vanish and the run is bit-identical to
/// [`crate::seqsolvers::sgd`].
pub fn par_sgd(
    d: &Dataset,
    grid: &ProcessorGrid,
    mode: ExecMode,
    config: &SolverConfig,
    params: &CostParams,
    x0: &[f64],
) -> Result<ParallelRun, ParError> {
    config.validate(d.num_rows()).map_err(ParError::Solver)?;
    let m = d.num_rows();
    let n = d.num_cols();
    let b = config.batch_size;
    let (p_r, p_c) = (grid.rows, grid.cols);
    if m % b != 0 {
        return Err(SolverError::InvalidConfig(format!(
            "batch_size ({b}) must divide the row count ({m}); pad the dataset first"
        ))
        .into());
    }
    if b % p_r != 0 {
        return Err(SolverError::InvalidConfig(format!(
            "grid rows ({p_r}) must divide batch_size ({b})"
        ))
        .into());
    }
    assert_eq!(x0.len(), n, "start iterate width must match the dataset");

    let z = scale_rows_by_labels(d);
    let b_loc = b / p_r;
    let m_loc = m / p_r;
    let width = n.div_ceil(p_c);
    let step = config.step_size;
    let inv_b = 1.0 / b as f64;

    // Per-rank matrices and start slices, built once and shared read-only.
    let locals: Vec<CsrMatrix> = (0..grid.size())
        .map(|rank| {
            let (i, j) = grid.coords_of(rank);
            let rows = batch_aligned_rows(m, b, p_r, i);
            let block = z.extract_block(&rows, j * width, ((j + 1) * width).min(n));
            CsrMatrix { num_cols: width, ..block }
        })
        .collect();
    let starts: Vec<Vec<f64>> =
        (0..p_c).map(|j| x0_slice(x0, j, width)).collect();

    let run = run_grid::<RankOutput, SimError, _>(grid, mode, |ctx| {
        let zl = &locals[ctx.rank()];
        let (_i, j) = ctx.coords();
        let mut x_loc = starts[j].clone();
        let mut sampler = CyclicSampler::new(b_loc, m_loc);
        let mut schedule = SnapshotSchedule::new(config.trace_interval);
        let mut snapshots = vec![Snapshot {
            iteration: 0,
            gradient_evaluations: 0,
            x_loc: x_loc.clone(),
            ledger: ctx.ledger().clone(),
        }];
        let mut direction = vec![0.0; width];
        let row_team = ctx.row_team();
        let col_team = ctx.col_team();
        for k in 1..=config.iterations {
            let batch = sampler.next_batch();
            let nnz: u64 = batch.iter().map(|&r| zl.row_nnz(r) as u64).sum();

            ctx.record_flops(CostCategory::Spmv, 2 * nnz);
            let t_part = logreg::batch_matvec(zl, &batch, &x_loc);
            let t = ctx.allreduce_sum(&row_team, &t_part, CostCategory::SgdComm)?;

            ctx.record_flops(CostCategory::Gradient, 2 * b_loc as u64);
            ctx.record_transcendental(CostCategory::Gradient, b_loc as u64);
            let u: Vec<f64> = t.iter().map(|&ti| logreg::sigmoid_neg(ti)).collect();

            ctx.record_flops(CostCategory::MemoryMgmt, width as u64);
            direction.fill(0.0);
            ctx.record_flops(CostCategory::Gradient, 2 * nnz);
            logreg::batch_matvec_t(zl, &batch, &u, &mut direction);

            let mut g = ctx.allreduce_sum(&col_team, &direction, CostCategory::SgdComm)?;
            ctx.record_flops(CostCategory::Gradient, 3 * width as u64);
            for gi in &mut g {
                *gi *= inv_b;
            }
            for (xi, gi) in x_loc.iter_mut().zip(&g) {
                *xi += step * gi;
            }

            if schedule.due(k, k == config.iterations) {
                snapshots.push(Snapshot {
                    iteration: k,
                    gradient_evaluations: (k * b) as u64,
                    x_loc: x_loc.clone(),
                    ledger: ctx.ledger().clone(),
                });
            }
        }
        Ok(RankOutput { x_loc, snapshots })
    })?;

    assemble_run(&z, d.unpadded_rows(), grid, run.per_rank, run.ledger, params)
}
