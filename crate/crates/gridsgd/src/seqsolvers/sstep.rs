use super::{SolverConfig, SolverError, SolverRun, Tracer};
use crate::dataio::{CsrMatrix, CyclicSampler};
use crate::logreg;

/// SGD restructured to materialize iterates only every `block_len`
/// iterations, exactly.
///
/// Let `x_0` be the iterate entering a block of `s = block_len` iterations
/// with batches `Z_0 .. Z_{s-1}` (stacked: `Y`). Plain SGD computes
/// `t_j = Z_j x_j` one iteration at a time. Substituting the running updates
/// `x_j = x_0 + (step/b) * sum_{l<j} Z_l^T u_l` gives
///
/// ```text
/// t_j = Z_j x_0 + (step/b) * sum_{l<j} (Z_j Z_l^T) u_l
/// ```
///
/// so the whole block needs only the forward products `v = Y x_0`, the
/// strictly-lower Gram blocks `G_{j,l} = Z_j Z_l^T`, and `s` rounds of
/// small dense corrections; the iterate is then advanced once by
/// `x_0 + (step/b) * Y^T u`. This is an algebraic regrouping of SGD, not an
/// approximation — with `block_len = 1` the code path degenerates to the
/// plain SGD kernel sequence and produces bit-identical iterates.
///
/// The payoff is distribution: `v` and the Gram blocks can be reduced in a
/// single collective per block instead of one per iteration. The
/// sequential form here is the reference the distributed version is tested
/// against.
pub fn sstep_sgd(
    z: &CsrMatrix,
    objective_rows: usize,
    config: &SolverConfig,
    x0: &[f64],
) -> Result<SolverRun, SolverError> {
    run_blocks(z, objective_rows, config, x0, true)
}

/// Same solver with the Gram correction term switchable, so tests can
/// demonstrate the corrections are load-bearing and not decorative.
#[cfg(test)]
pub(crate) fn sstep_sgd_uncorrected(
    z: &CsrMatrix,
    objective_rows: usize,
    config: &SolverConfig,
    x0: &[f64],
) -> Result<SolverRun, SolverError> {
    run_blocks(z, objective_rows, config, x0, false)
}

fn run_blocks(
    z: &CsrMatrix,
    objective_rows: usize,
    config: &SolverConfig,
    x0: &[f64],
    apply_corrections: bool,
) -> Result<SolverRun, SolverError> {
    config.validate(z.num_rows)?;
    config.validate_block()?;
    assert_eq!(x0.len(), z.num_cols);

    let s = config.block_len;
    let b = config.batch_size;
    let coeff = config.step_size / b as f64;
    let mut x = x0.to_vec();
    let mut sampler = CyclicSampler::new(b, z.num_rows);
    let mut tracer = Tracer::new(z, objective_rows, config.trace_interval);
    tracer.observe(0, 0, &x, true)?;

    let mut direction = vec![0.0; z.num_cols];
    let mut u_all = vec![0.0; s * b];
    for block in 0..config.iterations / s {
        let batches: Vec<Vec<usize>> = (0..s).map(|_| sampler.next_batch()).collect();
        let all_rows: Vec<usize> = batches.concat();

        let v = logreg::batch_matvec(z, &all_rows, &x);
        let gram = gram_lower_blocks(z, &batches);

        for j in 0..s {
            let (done, current) = u_all.split_at_mut(j * b);
            let t_j = &mut current[..b];
            t_j.copy_from_slice(&v[j * b..(j + 1) * b]);
            if apply_corrections {
                for l in 0..j {
                    let g = gram.block(j, l);
                    let u_l = &done[l * b..(l + 1) * b];
                    for r1 in 0..b {
                        let mut acc = 0.0;
                        for r2 in 0..b {
                            acc += g[r1 * b + r2] * u_l[r2];
                        }
                        t_j[r1] += coeff * acc;
                    }
                }
            }
            for t in t_j.iter_mut() {
                *t = logreg::sigmoid_neg(*t);
            }
        }

        direction.fill(0.0);
        logreg::batch_matvec_t(z, &all_rows, &u_all, &mut direction);
        let inv_b = 1.0 / b as f64;
        for d in &mut direction {
            *d *= inv_b;
        }
        for (xi, di) in x.iter_mut().zip(&direction) {
            *xi += config.step_size * di;
        }

        let iteration = (block + 1) * s;
        tracer.observe(
            iteration,
            (iteration * b) as u64,
            &x,
            iteration == config.iterations,
        )?;
    }
    Ok(SolverRun { x, trace: tracer.into_trace() })
}

/// The strictly-lower Gram blocks of one iteration block: `G_{j,l} = Z_j
/// Z_l^T` for `l < j`, each a dense `b x b` panel in row-major order. The
/// diagonal and upper blocks are never formed — the correction recurrence
/// only consumes earlier batches.
pub(crate) struct GramLower {
    blocks: Vec<Vec<f64>>,
    batch_size: usize,
    /// Sparse-row index matches summed over all panels: the multiply-add
    /// count a cost ledger should charge for building the blocks.
    pub(crate) matched_pairs: u64,
}

impl GramLower {
    pub(crate) fn block(&self, j: usize, l: usize) -> &[f64] {
        assert!(l < j);
        &self.blocks[j * (j - 1) / 2 + l]
    }

    pub(crate) fn batch_size(&self) -> usize {
        self.batch_size
    }
}

pub(crate) fn gram_lower_blocks(z: &CsrMatrix, batches: &[Vec<usize>]) -> GramLower {
    let b = batches.first().map(|batch| batch.len()).unwrap_or(0);
    let mut blocks = Vec::with_capacity(batches.len() * (batches.len() - 1) / 2);
    let mut matched_pairs = 0u64;
    for j in 1..batches.len() {
        for l in 0..j {
            let mut panel = vec![0.0; b * b];
            for r1 in 0..b {
                for r2 in 0..b {
                    let (value, matches) =
                        logreg::sparse_row_dot(z, batches[j][r1], batches[l][r2]);
                    panel[r1 * b + r2] = value;
                    matched_pairs += matches;
                }
            }
            blocks.push(panel);
        }
    }
    GramLower { blocks, batch_size: b, matched_pairs }
}
