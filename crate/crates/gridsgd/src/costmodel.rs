//! Closed-form cost predictions for the solver family.
//!
//! Each algorithm gets an explicit per-rank formula for flop, word, and
//! message counts over a whole run, mirroring what the simulated solvers
//! charge to their ledgers. [`Mode::Derived`] reproduces the ledger counts
//! exactly (integer widths, ceilings, and grid-degeneracy indicators), so a
//! prediction can be checked against a measured [`CostLedger`] with
//! [`compare`]: communication must match to the word and message,
//! arithmetic to within a factor of two (the model prices matrix sparsity
//! by its average, the run by the rows it actually sampled).
//! [`Mode::Table`] is the continuous relaxation of the same formulas —
//! real-valued divisions, `2 log2 p` messages per collective, no
//! degeneracy cutoffs — the form the counts take when quoted as closed
//! expressions.
//!
//! The formulas for the degenerate configurations are written out
//! independently per algorithm and agree exactly: a `rows x cols` grid
//! with one row is the column-parallel layout, with one column the
//! row-parallel layout; the hybrid with one grid row is column-parallel
//! block SGD, with one column and unit blocks it is local averaging; any
//! of them on a single rank collapses to the sequential method. All counts
//! stay below 2^53, so the f64 arithmetic on them is exact.
//!
//! [`sweep`] evaluates the hybrid over a grid of block lengths and
//! averaging-group counts at a fixed total rank budget and reports modeled
//! time and speedup against the best non-averaging column.

use serde::{Deserialize, Serialize};

use crate::simgrid::{ceil_log2, CostCategory, CostLedger, CostParams};

/// Algorithm whose cost is being predicted. Grid dimensions are part of
/// the algorithm choice, not of [`ModelParams`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Algorithm {
    /// Full-gradient descent on one rank.
    Gd,
    /// Mini-batch SGD on one rank.
    Sgd,
    /// Data-parallel SGD, rows of the matrix split over `ranks`.
    RowParallelSgd { ranks: usize },
    /// Data-parallel SGD, columns of the matrix split over `ranks`.
    ColParallelSgd { ranks: usize },
    /// Data-parallel SGD on a `rows x cols` processor grid.
    GridParallelSgd { rows: usize, cols: usize },
    /// Column-parallel block SGD: batches grouped into blocks of
    /// `block_len`, one collective per block.
    BlockSgd { ranks: usize },
    /// Locally-averaged SGD: independent workers, iterates averaged every
    /// `local_iters` iterations.
    LocalAvgSgd { workers: usize },
    /// Averaging groups of column-parallel block-SGD teams on a
    /// `rows x cols` grid.
    HybridSgd { rows: usize, cols: usize },
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Gd => "gd",
            Algorithm::Sgd => "sgd",
            Algorithm::RowParallelSgd { .. } => "row-parallel-sgd",
            Algorithm::ColParallelSgd { .. } => "col-parallel-sgd",
            Algorithm::GridParallelSgd { .. } => "grid-parallel-sgd",
            Algorithm::BlockSgd { .. } => "block-sgd",
            Algorithm::LocalAvgSgd { .. } => "local-avg-sgd",
            Algorithm::HybridSgd { .. } => "hybrid-sgd",
        }
    }
}

/// How to evaluate the formulas: exact ledger mirror or continuous
/// closed form. See the module docs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Derived,
    Table,
}

/// Problem and run shape the prediction is for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub num_rows: usize,
    pub num_cols: usize,
    /// Average nonzeros per matrix row; fractional values are fine.
    pub nnz_per_row: f64,
    pub batch_size: usize,
    pub iterations: usize,
    #[serde(default = "one")]
    pub block_len: usize,
    #[serde(default = "one")]
    pub local_iters: usize,
    #[serde(default)]
    pub cost: CostParams,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model input: {0}")]
    InvalidParams(String),
    #[error("{category} mismatch: predicted {predicted} {unit}, measured {measured}")]
    CommMismatch { category: String, unit: &'static str, predicted: u64, measured: u64 },
    #[error("arithmetic model off by more than 2x: predicted {predicted:.4e} flops, measured {measured:.4e}")]
    FlopDrift { predicted: f64, measured: f64 },
}

/// One communication category's predicted volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommTerm {
    pub category: CostCategory,
    pub words: f64,
    pub messages: f64,
}

/// Predicted per-rank cost of a whole run.
#[derive(Debug, Clone, PartialEq)]
pub struct CostPrediction {
    pub algorithm: &'static str,
    pub mode: Mode,
    pub flops: f64,
    pub transcendental: f64,
    /// Communication split by the category the solvers charge it to;
    /// `words` and `messages` are the totals over these.
    pub comm: [CommTerm; 3],
    pub words: f64,
    pub messages: f64,
    /// Modeled run time under the linear machine model in
    /// [`ModelParams::cost`].
    pub time: f64,
    /// Heuristic statistical-efficiency proxy: the variance scale
    /// `1/(iterations * batch_size)`, inflated by the averaging delay
    /// `1 + (local_iters - 1)(1 - 1/groups)`. Comparable between runs
    /// with the same data and step size only.
    pub rate_proxy: f64,
    /// For averaging runs, the heuristic regime in which the delay does
    /// not dominate the variance term, stated with the actual numbers.
    pub delay_condition: Option<String>,
}

impl CostPrediction {
    /// True when two predictions agree on every aggregate count, modeled
    /// time, and rate field — the algorithm label, mode, and the category
    /// split of the communication may differ. (A unit-block run and a
    /// plain SGD run move identical words through differently-labeled
    /// collectives.) This is the check behind the degeneracy identities.
    pub fn same_costs(&self, other: &CostPrediction) -> bool {
        self.flops == other.flops
            && self.transcendental == other.transcendental
            && self.words == other.words
            && self.messages == other.messages
            && self.time == other.time
            && self.rate_proxy == other.rate_proxy
            && self.delay_condition == other.delay_condition
    }
}

/// Flops of one SGD iteration on a `b_loc`-row batch slice of width `w`
/// with `c_loc` expected nonzeros per local row: forward products, sigmoid
/// map, zeroing the direction, transpose products, scale and step.
fn sgd_iter_flops(b_loc: f64, w: f64, c_loc: f64) -> f64 {
    2.0 * b_loc * c_loc + 2.0 * b_loc + w + 2.0 * b_loc * c_loc + 3.0 * w
}

/// Flops of one `s`-iteration block on a batch slice: forward products,
/// expected cross-batch pair products, the correction recurrence, sigmoid
/// map, zeroing, transpose products, scale and step. With `s = 1` the
/// pair terms vanish and this is exactly [`sgd_iter_flops`].
fn block_iter_flops(s: f64, b_loc: f64, w: f64, c_loc: f64) -> f64 {
    let pairs = s * (s - 1.0) / 2.0;
    2.0 * s * b_loc * c_loc
        + 2.0 * pairs * b_loc * b_loc * c_loc * c_loc / w
        + pairs * b_loc * (2.0 * b_loc + 2.0)
        + 2.0 * s * b_loc
        + w
        + 2.0 * s * b_loc * c_loc
        + 3.0 * w
}

/// Messages per allreduce over `p` ranks: two rounds of a binomial tree.
fn collective_msgs(p: usize, mode: Mode) -> f64 {
    match mode {
        Mode::Derived => 2.0 * ceil_log2(p) as f64,
        Mode::Table => 2.0 * (p as f64).log2(),
    }
}

/// Local column-block width when `n` columns are split `p` ways.
fn split_width(n: usize, p: usize, mode: Mode) -> f64 {
    match mode {
        Mode::Derived => n.div_ceil(p) as f64,
        Mode::Table => n as f64 / p as f64,
    }
}

fn ind(active: bool) -> f64 {
    if active {
        1.0
    } else {
        0.0
    }
}

fn delay_condition(local_iters: usize, groups: usize, iterations: usize) -> Option<String> {
    if groups <= 1 {
        return None;
    }
    let lhs = (local_iters as u128 * local_iters as u128) * groups as u128;
    let status = if lhs <= iterations as u128 { "holds" } else { "violated" };
    Some(format!(
        "local_iters^2 * groups <= iterations: {local_iters}^2 * {groups} <= {iterations} ({status})"
    ))
}

struct Tally {
    flops: f64,
    transcendental: f64,
    sgd: (f64, f64),
    sstep: (f64, f64),
    fedavg: (f64, f64),
    groups: usize,
}

impl Tally {
    fn finish(self, algorithm: &Algorithm, mode: Mode, p: &ModelParams) -> CostPrediction {
        let comm = [
            CommTerm { category: CostCategory::SgdComm, words: self.sgd.0, messages: self.sgd.1 },
            CommTerm {
                category: CostCategory::SstepComm,
                words: self.sstep.0,
                messages: self.sstep.1,
            },
            CommTerm {
                category: CostCategory::FedavgComm,
                words: self.fedavg.0,
                messages: self.fedavg.1,
            },
        ];
        let words = self.sgd.0 + self.sstep.0 + self.fedavg.0;
        let messages = self.sgd.1 + self.sstep.1 + self.fedavg.1;
        let time = p.cost.gamma
            * (self.flops + p.cost.transcendental_weight * self.transcendental)
            + p.cost.alpha * messages
            + p.cost.beta * words;
        let kb = (p.iterations as f64) * (p.batch_size as f64);
        let delay = (p.local_iters as f64 - 1.0) * (1.0 - 1.0 / self.groups as f64);
        CostPrediction {
            algorithm: algorithm.name(),
            mode,
            flops: self.flops,
            transcendental: self.transcendental,
            comm,
            words,
            messages,
            time,
            rate_proxy: (1.0 + delay) / kb,
            delay_condition: delay_condition(p.local_iters, self.groups, p.iterations),
        }
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), ModelError> {
    if ok {
        Ok(())
    } else {
        Err(ModelError::InvalidParams(msg()))
    }
}

fn validate_base(p: &ModelParams) -> Result<(), ModelError> {
    let (m, n) = (p.num_rows, p.num_cols);
    check(m >= 1 && n >= 1, || format!("empty problem shape {m}x{n}"))?;
    check(p.nnz_per_row.is_finite() && p.nnz_per_row > 0.0 && p.nnz_per_row <= n as f64, || {
        format!("nnz_per_row ({}) must lie in (0, num_cols]", p.nnz_per_row)
    })?;
    check(p.batch_size >= 1 && p.batch_size <= m, || {
        format!("batch_size ({}) must lie in [1, num_rows]", p.batch_size)
    })?;
    check(p.iterations >= 1, || "iterations must be at least 1".into())
}

fn validate_batch_aligned(p: &ModelParams, ranks: usize, what: &str) -> Result<(), ModelError> {
    check(ranks >= 1, || format!("{what} must be at least 1"))?;
    check(p.num_rows % p.batch_size == 0, || {
        format!(
            "batch_size ({}) must divide num_rows ({}); pad the dataset first",
            p.batch_size, p.num_rows
        )
    })?;
    check(p.batch_size % ranks == 0, || {
        format!("{what} ({ranks}) must divide batch_size ({})", p.batch_size)
    })
}

fn validate_blocks(p: &ModelParams) -> Result<(), ModelError> {
    check(p.block_len >= 1, || "block_len must be at least 1".into())?;
    check(p.iterations % p.block_len == 0, || {
        format!("block_len ({}) must divide iterations ({})", p.block_len, p.iterations)
    })
}

fn validate_rounds(p: &ModelParams) -> Result<(), ModelError> {
    check(p.local_iters >= 1, || "local_iters must be at least 1".into())?;
    check(p.iterations % p.local_iters == 0, || {
        format!("local_iters ({}) must divide iterations ({})", p.local_iters, p.iterations)
    })
}

/// Predict the per-rank cost of one run. Validation is per algorithm and
/// names the offending parameter.
pub fn predict(
    algorithm: &Algorithm,
    mode: Mode,
    p: &ModelParams,
) -> Result<CostPrediction, ModelError> {
    validate_base(p)?;
    let m = p.num_rows;
    let n = p.num_cols;
    let c = p.nnz_per_row;
    let bf = p.batch_size as f64;
    let kf = p.iterations as f64;
    let nf = n as f64;
    let zero = (0.0, 0.0);

    let tally = match *algorithm {
        Algorithm::Gd => Tally {
            flops: kf * sgd_iter_flops(m as f64, nf, c),
            transcendental: kf * m as f64,
            sgd: zero,
            sstep: zero,
            fedavg: zero,
            groups: 1,
        },
        Algorithm::Sgd => Tally {
            flops: kf * sgd_iter_flops(bf, nf, c),
            transcendental: kf * bf,
            sgd: zero,
            sstep: zero,
            fedavg: zero,
            groups: 1,
        },
        Algorithm::RowParallelSgd { ranks } => {
            validate_batch_aligned(p, ranks, "ranks")?;
            check(m % ranks == 0, || {
                format!("ranks ({ranks}) must divide num_rows ({m}); pad the dataset first")
            })?;
            let b_loc = (p.batch_size / ranks) as f64;
            let active = ind(ranks > 1);
            Tally {
                flops: kf * sgd_iter_flops(b_loc, nf, c),
                transcendental: kf * b_loc,
                sgd: (kf * (nf * active), kf * (collective_msgs(ranks, mode) * active)),
                sstep: zero,
                fedavg: zero,
                groups: 1,
            }
        }
        Algorithm::ColParallelSgd { ranks } => {
            validate_batch_aligned(p, 1, "ranks")?;
            check(ranks >= 1, || "ranks must be at least 1".into())?;
            let w = split_width(n, ranks, mode);
            let active = ind(ranks > 1);
            Tally {
                flops: kf * sgd_iter_flops(bf, w, c / ranks as f64),
                transcendental: kf * bf,
                sgd: (kf * (bf * active), kf * (collective_msgs(ranks, mode) * active)),
                sstep: zero,
                fedavg: zero,
                groups: 1,
            }
        }
        Algorithm::GridParallelSgd { rows, cols } => {
            validate_batch_aligned(p, rows, "grid rows")?;
            check(m % rows == 0, || {
                format!("grid rows ({rows}) must divide num_rows ({m}); pad the dataset first")
            })?;
            check(cols >= 1, || "grid cols must be at least 1".into())?;
            let b_loc = (p.batch_size / rows) as f64;
            let w = split_width(n, cols, mode);
            let (row_on, col_on) = (ind(cols > 1), ind(rows > 1));
            Tally {
                flops: kf * sgd_iter_flops(b_loc, w, c / cols as f64),
                transcendental: kf * b_loc,
                sgd: (
                    kf * (b_loc * row_on + w * col_on),
                    kf * (collective_msgs(cols, mode) * row_on
                        + collective_msgs(rows, mode) * col_on),
                ),
                sstep: zero,
                fedavg: zero,
                groups: 1,
            }
        }
        Algorithm::BlockSgd { ranks } => {
            check(ranks >= 1, || "ranks must be at least 1".into())?;
            validate_blocks(p)?;
            let s = p.block_len;
            let sf = s as f64;
            let blocks = (p.iterations / s) as f64;
            let w = split_width(n, ranks, mode);
            let pairs = (s * (s - 1) / 2) as f64;
            let per_block = pairs * bf * bf + sf * bf;
            let active = ind(ranks > 1);
            Tally {
                flops: blocks * block_iter_flops(sf, bf, w, c / ranks as f64),
                transcendental: kf * bf,
                sgd: zero,
                sstep: (
                    blocks * (per_block * active),
                    blocks * (collective_msgs(ranks, mode) * active),
                ),
                fedavg: zero,
                groups: 1,
            }
        }
        Algorithm::LocalAvgSgd { workers } => {
            check(workers >= 1, || "workers must be at least 1".into())?;
            check(m % workers == 0, || {
                format!("workers ({workers}) must divide num_rows ({m}); pad the dataset first")
            })?;
            check(p.batch_size >= workers, || {
                format!("batch_size ({}) must be at least workers ({workers})", p.batch_size)
            })?;
            validate_rounds(p)?;
            let b_loc = bf / workers as f64;
            let rounds = (p.iterations / p.local_iters) as f64;
            let active = ind(workers > 1);
            Tally {
                flops: kf * sgd_iter_flops(b_loc, nf, c) + rounds * (nf * active),
                transcendental: kf * b_loc,
                sgd: zero,
                sstep: zero,
                fedavg: (
                    rounds * (nf * active),
                    rounds * (collective_msgs(workers, mode) * active),
                ),
                groups: workers,
            }
        }
        Algorithm::HybridSgd { rows, cols } => {
            check(rows >= 1 && cols >= 1, || format!("empty processor grid {rows}x{cols}"))?;
            check(p.batch_size % rows == 0, || {
                format!("grid rows ({rows}) must divide batch_size ({})", p.batch_size)
            })?;
            check(m % rows == 0, || {
                format!("grid rows ({rows}) must divide num_rows ({m}); pad the dataset first")
            })?;
            validate_blocks(p)?;
            validate_rounds(p)?;
            check(p.local_iters % p.block_len == 0, || {
                format!(
                    "block_len ({}) must divide local_iters ({})",
                    p.block_len, p.local_iters
                )
            })?;
            let s = p.block_len;
            let sf = s as f64;
            let b_loc = (p.batch_size / rows) as f64;
            let blocks = (p.iterations / s) as f64;
            let rounds = (p.iterations / p.local_iters) as f64;
            let w = split_width(n, cols, mode);
            let pairs = (s * (s - 1) / 2) as f64;
            let per_block = pairs * b_loc * b_loc + sf * b_loc;
            let (row_on, col_on) = (ind(cols > 1), ind(rows > 1));
            Tally {
                flops: blocks * block_iter_flops(sf, b_loc, w, c / cols as f64)
                    + rounds * (w * col_on),
                transcendental: kf * b_loc,
                sgd: zero,
                sstep: (
                    blocks * (per_block * row_on),
                    blocks * (collective_msgs(cols, mode) * row_on),
                ),
                fedavg: (
                    rounds * (w * col_on),
                    rounds * (collective_msgs(rows, mode) * col_on),
                ),
                groups: rows,
            }
        }
    };
    Ok(tally.finish(algorithm, mode, p))
}

/// Agreement between a derived-mode prediction and a measured ledger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelAgreement {
    /// Predicted over measured flops; within `[0.5, 2]` by the time this
    /// is returned.
    pub flop_ratio: f64,
    pub transcendental_ratio: f64,
}

/// Check a derived-mode prediction against a measured per-rank ledger
/// (typically the critical path of a run). Word and message counts must
/// match exactly per category; flops must agree within a factor of two.
pub fn compare(pred: &CostPrediction, measured: &CostLedger) -> Result<ModelAgreement, ModelError> {
    if pred.mode != Mode::Derived {
        return Err(ModelError::InvalidParams(
            "comparison against a measured ledger needs a derived-mode prediction".into(),
        ));
    }
    for term in &pred.comm {
        let got = measured.category(term.category);
        if term.words as u64 != got.words_moved {
            return Err(ModelError::CommMismatch {
                category: term.category.name().into(),
                unit: "words",
                predicted: term.words as u64,
                measured: got.words_moved,
            });
        }
        if term.messages as u64 != got.messages {
            return Err(ModelError::CommMismatch {
                category: term.category.name().into(),
                unit: "messages",
                predicted: term.messages as u64,
                measured: got.messages,
            });
        }
    }
    let flop_ratio = pred.flops / measured.flops() as f64;
    if !(0.5..=2.0).contains(&flop_ratio) {
        return Err(ModelError::FlopDrift {
            predicted: pred.flops,
            measured: measured.flops() as f64,
        });
    }
    let mt = measured.transcendental_ops() as f64;
    let transcendental_ratio = if pred.transcendental == 0.0 && mt == 0.0 {
        1.0
    } else {
        pred.transcendental / mt
    };
    Ok(ModelAgreement { flop_ratio, transcendental_ratio })
}

/// Hybrid configuration sweep at a fixed total rank budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub total_ranks: usize,
    /// Block lengths to try; each must divide `params.local_iters`.
    pub block_lens: Vec<usize>,
    /// Averaging-group counts to try; each must divide `total_ranks`.
    pub row_counts: Vec<usize>,
    pub mode: Mode,
    pub params: ModelParams,
}

/// One evaluated sweep cell. The algorithm label reflects what the cell
/// degenerates to: no averaging and unit blocks is plain column-parallel
/// SGD, and so on.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub algorithm: &'static str,
    pub block_len: usize,
    pub local_iters: usize,
    pub rows: usize,
    pub cols: usize,
    pub flops: f64,
    pub words: f64,
    pub messages: f64,
    pub time: f64,
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
    /// Index of the fastest cell (first on ties).
    pub best: usize,
    /// Modeled time of the fastest cell without averaging (`rows == 1`),
    /// the reference all speedups are against.
    pub baseline_time: f64,
}

impl SweepResult {
    pub fn best_cell(&self) -> &SweepCell {
        &self.cells[self.best]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("algorithm,s,tau,p_r,p_c,F,W,L,modeled_time,speedup\n");
        for cell in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                cell.algorithm,
                cell.block_len,
                cell.local_iters,
                cell.rows,
                cell.cols,
                cell.flops,
                cell.words,
                cell.messages,
                cell.time,
                cell.speedup,
            ));
        }
        out
    }
}

fn cell_label(block_len: usize, rows: usize) -> &'static str {
    match (block_len > 1, rows > 1) {
        (false, false) => "col-parallel-sgd",
        (true, false) => "block-sgd",
        (false, true) => "local-avg-sgd",
        (true, true) => "hybrid-sgd",
    }
}

/// Evaluate every (block length, averaging groups) cell of the sweep.
/// Fails if any cell is invalid or if no cell has `rows == 1` to serve as
/// the baseline.
pub fn sweep(spec: &SweepSpec) -> Result<SweepResult, ModelError> {
    check(!spec.block_lens.is_empty() && !spec.row_counts.is_empty(), || {
        "sweep needs at least one block_len and one row count".into()
    })?;
    let mut cells = Vec::with_capacity(spec.block_lens.len() * spec.row_counts.len());
    for &rows in &spec.row_counts {
        check(rows >= 1 && spec.total_ranks % rows == 0, || {
            format!("row count {rows} must divide total_ranks ({})", spec.total_ranks)
        })?;
        let cols = spec.total_ranks / rows;
        for &s in &spec.block_lens {
            let params = ModelParams { block_len: s, ..spec.params.clone() };
            let pred = predict(&Algorithm::HybridSgd { rows, cols }, spec.mode, &params)?;
            cells.push(SweepCell {
                algorithm: cell_label(s, rows),
                block_len: s,
                local_iters: params.local_iters,
                rows,
                cols,
                flops: pred.flops,
                words: pred.words,
                messages: pred.messages,
                time: pred.time,
                speedup: 0.0,
            });
        }
    }
    let baseline_time = cells
        .iter()
        .filter(|c| c.rows == 1)
        .map(|c| c.time)
        .fold(f64::INFINITY, f64::min);
    check(baseline_time.is_finite(), || {
        "sweep needs a rows == 1 cell to serve as the speedup baseline".into()
    })?;
    for cell in &mut cells {
        cell.speedup = baseline_time / cell.time;
    }
    let best = cells
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.time.partial_cmp(&b.1.time).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    Ok(SweepResult { cells, best, baseline_time })
}
