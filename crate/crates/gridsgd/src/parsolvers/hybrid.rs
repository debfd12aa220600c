use super::{
    assemble_run, x0_slice, ParError, ParallelRun, RankOutput, Snapshot, SnapshotSchedule,
};
use crate::dataio::{partition, scale_rows_by_labels, CyclicSampler, Dataset, Layout};
use crate::logreg;
use crate::seqsolvers::{sstep::gram_lower_blocks, SolverConfig, SolverError};
use crate::simgrid::{run_grid, CostCategory, CostParams, ExecMode, ProcessorGrid, SimError};

/// Locally-averaged block SGD on a `rows x cols` grid: federated averaging
/// across grid rows, communication-avoiding block SGD within each row.
///
/// Grid row `i` owns the `i`-th contiguous shard of the data, split
/// column-wise over the row's `cols` ranks. Each round, every row team
/// independently runs `local_iters` iterations of its local SGD problem
/// (batch `batch_size / rows`), restructured into blocks of `block_len`
/// iterations: per block the team reduces its Gram panels and forward
/// products in a single row-team collective, then every member replays the
/// block's recurrence redundantly. After a round, column teams average the
/// iterates. Setting `rows = 1` removes the averaging and leaves
/// column-parallel block SGD; `cols = 1` removes the column split and
/// leaves federated averaging whose local solver happens to proceed in
/// blocks; `1 x 1` is bit-identical to [`crate::seqsolvers::sstep_sgd`].
pub fn hybrid_sgd(
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
    let s = config.block_len;
    let tau = config.local_iters;
    let (p_r, p_c) = (grid.rows, grid.cols);
    if s == 0 {
        return Err(SolverError::InvalidConfig("block_len must be at least 1".into()).into());
    }
    if tau == 0 || tau % s != 0 {
        return Err(SolverError::InvalidConfig(format!(
            "local_iters ({tau}) must be a positive multiple of block_len ({s})"
        ))
        .into());
    }
    if config.iterations % tau != 0 {
        return Err(SolverError::InvalidConfig(format!(
            "iterations ({}) must be a multiple of local_iters ({tau})",
            config.iterations
        ))
        .into());
    }
    if b % p_r != 0 {
        return Err(SolverError::InvalidConfig(format!(
            "grid rows ({p_r}) must divide batch_size ({b})"
        ))
        .into());
    }
    let b_loc = b / p_r;
    if m % p_r != 0 {
        return Err(SolverError::InvalidConfig(format!(
            "{p_r} grid rows do not divide {m} rows; pad the dataset first"
        ))
        .into());
    }
    let m_loc = m / p_r;
    if b_loc > m_loc {
        return Err(SolverError::InvalidConfig(format!(
            "local batch ({b_loc}) exceeds the {m_loc} rows per grid row"
        ))
        .into());
    }
    assert_eq!(x0.len(), n, "start iterate width must match the dataset");

    let z = scale_rows_by_labels(d);
    let scaled = Dataset {
        name: d.name.clone(),
        matrix: z.clone(),
        labels: d.labels.clone(),
        padded_rows: d.padded_rows,
    };
    let parts = partition(&scaled, grid, Layout::Grid2d)
        .map_err(|e| SolverError::InvalidConfig(e.to_string()))?;
    let width = parts.padded_cols / p_c;
    let starts: Vec<Vec<f64>> = (0..p_c).map(|j| x0_slice(x0, j, width)).collect();

    let rounds = config.iterations / tau;
    let blocks_per_round = tau / s;
    let pairs = s * (s - 1) / 2;
    let step = config.step_size;
    let inv_b = 1.0 / b_loc as f64;
    let coeff = step / b_loc as f64;

    let run = run_grid::<RankOutput, SimError, _>(grid, mode, |ctx| {
        let zl = &parts.blocks[ctx.rank()].matrix;
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
        let row_team = ctx.row_team();
        let col_team = ctx.col_team();
        let mut direction = vec![0.0; width];
        let mut u_all = vec![0.0; s * b_loc];
        for round in 1..=rounds {
            for _ in 0..blocks_per_round {
                let batches: Vec<Vec<usize>> = (0..s).map(|_| sampler.next_batch()).collect();
                let all_rows: Vec<usize> = batches.concat();
                let nnz: u64 = all_rows.iter().map(|&r| zl.row_nnz(r) as u64).sum();

                ctx.record_flops(CostCategory::Spmv, 2 * nnz);
                let v = logreg::batch_matvec(zl, &all_rows, &x_loc);
                let gram = gram_lower_blocks(zl, &batches);
                debug_assert_eq!(gram.batch_size(), b_loc);
                ctx.record_flops(CostCategory::Gram, 2 * gram.matched_pairs);

                // One collective per block: all Gram panels then the
                // forward products, flattened in a fixed order.
                let mut message = Vec::with_capacity(pairs * b_loc * b_loc + s * b_loc);
                for jj in 1..s {
                    for ll in 0..jj {
                        message.extend_from_slice(gram.block(jj, ll));
                    }
                }
                message.extend_from_slice(&v);
                let message =
                    ctx.allreduce_sum(&row_team, &message, CostCategory::SstepComm)?;
                let (gram_flat, v) = message.split_at(pairs * b_loc * b_loc);

                // Replay the block recurrence, redundantly on every team
                // member. Same operation order as the sequential solver.
                for jj in 0..s {
                    let (done, current) = u_all.split_at_mut(jj * b_loc);
                    let t_j = &mut current[..b_loc];
                    t_j.copy_from_slice(&v[jj * b_loc..(jj + 1) * b_loc]);
                    for ll in 0..jj {
                        let panel_at = (jj * (jj - 1) / 2 + ll) * b_loc * b_loc;
                        let g = &gram_flat[panel_at..panel_at + b_loc * b_loc];
                        let u_l = &done[ll * b_loc..(ll + 1) * b_loc];
                        ctx.record_flops(
                            CostCategory::Gram,
                            (b_loc * (2 * b_loc + 2)) as u64,
                        );
                        for r1 in 0..b_loc {
                            let mut acc = 0.0;
                            for r2 in 0..b_loc {
                                acc += g[r1 * b_loc + r2] * u_l[r2];
                            }
                            t_j[r1] += coeff * acc;
                        }
                    }
                    ctx.record_flops(CostCategory::Gradient, 2 * b_loc as u64);
                    ctx.record_transcendental(CostCategory::Gradient, b_loc as u64);
                    for t in t_j.iter_mut() {
                        *t = logreg::sigmoid_neg(*t);
                    }
                }

                ctx.record_flops(CostCategory::MemoryMgmt, width as u64);
                direction.fill(0.0);
                ctx.record_flops(CostCategory::Gradient, 2 * nnz);
                logreg::batch_matvec_t(zl, &all_rows, &u_all, &mut direction);
                ctx.record_flops(CostCategory::Gradient, 3 * width as u64);
                for di in &mut direction {
                    *di *= inv_b;
                }
                for (xi, di) in x_loc.iter_mut().zip(&direction) {
                    *xi += step * di;
                }
            }
            if p_r > 1 {
                x_loc = ctx.allreduce_sum(&col_team, &x_loc, CostCategory::FedavgComm)?;
                ctx.record_flops(CostCategory::Gradient, width as u64);
                let inv_p = 1.0 / p_r as f64;
                for xi in &mut x_loc {
                    *xi *= inv_p;
                }
            }
            let iteration = round * tau;
            if schedule.due(iteration, round == rounds) {
                snapshots.push(Snapshot {
                    iteration,
                    gradient_evaluations: (iteration * b) as u64,
                    x_loc: x_loc.clone(),
                    ledger: ctx.ledger().clone(),
                });
            }
        }
        Ok(RankOutput { x_loc, snapshots })
    })?;

    assemble_run(&z, d.unpadded_rows(), grid, run.per_rank, run.ledger, params)
}
