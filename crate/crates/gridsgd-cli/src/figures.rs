//! Figure recipes: canned experiment sets that write one CSV per curve,
//! with gradient evaluations as the shared x-axis so methods with
//! different batch shapes land on comparable scales. No plotting here —
//! the CSVs feed whatever renders them.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use gridsgd::costmodel::{sweep, Mode, ModelParams, SweepSpec};
use gridsgd::dataio::scale_rows_by_labels;
use gridsgd::parsolvers::fedavg;
use gridsgd::seqsolvers::{gd, sgd, sstep_sgd, SolverConfig};
use gridsgd::simgrid::{CostParams, ExecMode};

use crate::config::{pad_for, resolve_dataset, DatasetRef, SamplingSpec};
use crate::{CliError, ExitKind};

pub const FIGURES: [&str; 4] =
    ["gd-vs-sgd", "sstep-equivalence", "fedavg-delay", "grid-heatmap"];

/// `--param key=value` pairs, checked against each recipe's known keys so
/// a misspelled parameter fails instead of silently keeping its default.
pub struct Params {
    values: BTreeMap<String, String>,
}

impl Params {
    pub fn parse(pairs: &[String]) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for pair in pairs {
            let Some((k, v)) = pair.split_once('=') else {
                return Err(CliError::new(
                    ExitKind::Validation,
                    format!("--param {pair:?} is not of the form key=value"),
                ));
            };
            values.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Params { values })
    }

    fn check_known(&self, known: &[&str]) -> Result<(), CliError> {
        for key in self.values.keys() {
            if !known.contains(&key.as_str()) {
                return Err(CliError::new(
                    ExitKind::Validation,
                    format!("unknown param {key:?}; known: {}", known.join(", ")),
                ));
            }
        }
        Ok(())
    }

    fn str_or(&self, key: &str, default: &str) -> String {
        self.values.get(key).cloned().unwrap_or_else(|| default.to_string())
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| bad_param(key, v, "a positive integer")),
        }
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| bad_param(key, v, "a number")),
        }
    }

    fn usize_list_or(&self, key: &str, default: &[usize]) -> Result<Vec<usize>, CliError> {
        match self.values.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|part| part.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| bad_param(key, v, "a comma-separated integer list")),
        }
    }
}

fn bad_param(key: &str, value: &str, wanted: &str) -> CliError {
    CliError::new(ExitKind::Validation, format!("param {key}={value:?}: expected {wanted}"))
}

pub fn run(name: &str, params: &Params, out_root: &Path, cache_dir: Option<&Path>) -> Result<(), CliError> {
    let files = match name {
        "gd-vs-sgd" => gd_vs_sgd(params, cache_dir)?,
        "sstep-equivalence" => sstep_equivalence(params, cache_dir)?,
        "fedavg-delay" => fedavg_delay(params, cache_dir)?,
        "grid-heatmap" => grid_heatmap(params)?,
        other => {
            return Err(CliError::new(
                ExitKind::Validation,
                format!("unknown figure {other:?}; known: {}", FIGURES.join(", ")),
            ))
        }
    };
    let dir = out_root.join(name);
    let io = |e: std::io::Error| CliError::new(ExitKind::Io, format!("writing {}: {e}", dir.display()));
    fs::create_dir_all(&dir).map_err(io)?;
    for (file, content) in &files {
        fs::write(dir.join(file), content).map_err(io)?;
    }
    println!("{name}: wrote {} files to {}", files.len(), dir.display());
    Ok(())
}

type Curves = Vec<(String, String)>;

fn load(params: &Params, default_name: &str, cache_dir: Option<&Path>) -> Result<gridsgd::dataio::Dataset, CliError> {
    let name = params.str_or("dataset", default_name);
    Ok(resolve_dataset(&DatasetRef::Name(name), None, cache_dir)?.data)
}

/// Full-gradient descent against mini-batch SGD at the same per-pass
/// evaluation budget: one GD step costs a full pass, so SGD takes
/// `rows/batch` steps per GD step and both curves share the x-axis.
fn gd_vs_sgd(params: &Params, cache_dir: Option<&Path>) -> Result<Curves, CliError> {
    params.check_known(&["dataset", "batch", "step", "passes"])?;
    let batch = params.usize_or("batch", 16)?;
    let step = params.f64_or("step", 1.0)?;
    let passes = params.usize_or("passes", 10)?;

    let raw = load(params, "w1a", cache_dir)?;
    let gd_cfg = SolverConfig {
        batch_size: batch,
        step_size: step,
        iterations: passes,
        trace_interval: 1,
        ..SolverConfig::default()
    };
    let padded = pad_for(&gd_cfg, &raw);
    let z = scale_rows_by_labels(&padded);
    let rows = padded.unpadded_rows();
    let x0 = vec![0.0; padded.num_cols()];

    let gd_run = gd(&z, rows, &gd_cfg, &x0).map_err(crate::experiment::solver_error)?;
    let steps_per_pass = padded.num_rows() / batch;
    let sgd_cfg = SolverConfig {
        iterations: passes * steps_per_pass,
        trace_interval: steps_per_pass,
        ..gd_cfg
    };
    let sgd_run = sgd(&z, rows, &sgd_cfg, &x0).map_err(crate::experiment::solver_error)?;
    Ok(vec![
        ("gd.csv".into(), gd_run.trace.to_csv()),
        ("sgd.csv".into(), sgd_run.trace.to_csv()),
    ])
}

/// Blocked SGD against the plain solver it reformulates: one trace per
/// block length plus a table of final-iterate deviations, which stay at
/// rounding level for every block length.
fn sstep_equivalence(params: &Params, cache_dir: Option<&Path>) -> Result<Curves, CliError> {
    params.check_known(&["dataset", "batch", "step", "iters", "s"])?;
    let batch = params.usize_or("batch", 16)?;
    let step = params.f64_or("step", 1.0 / 16.0)?;
    let iters = params.usize_or("iters", 512)?;
    let s_list = params.usize_list_or("s", &[16, 256])?;

    let raw = load(params, "w1a", cache_dir)?;
    let base = SolverConfig {
        batch_size: batch,
        step_size: step,
        iterations: iters,
        trace_interval: (iters / 16).max(1),
        ..SolverConfig::default()
    };
    let max_s = s_list.iter().copied().max().unwrap_or(1).max(1);
    let padded = gridsgd::dataio::pad_rows(&raw, max_s, batch);
    let z = scale_rows_by_labels(&padded);
    let rows = padded.unpadded_rows();
    let x0 = vec![0.0; padded.num_cols()];

    let plain = sgd(&z, rows, &base, &x0).map_err(crate::experiment::solver_error)?;
    let mut files: Curves = vec![("sgd.csv".into(), plain.trace.to_csv())];
    let mut diffs = String::from("block_len,max_abs_diff\n");
    for &s in &s_list {
        if s == 0 || iters % s != 0 {
            return Err(CliError::new(
                ExitKind::Validation,
                format!("param s: {s} does not divide iters {iters}"),
            ));
        }
        let cfg = SolverConfig { block_len: s, ..base.clone() };
        let run = sstep_sgd(&z, rows, &cfg, &x0).map_err(crate::experiment::solver_error)?;
        let max_diff = run
            .x
            .iter()
            .zip(&plain.x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        diffs.push_str(&format!("{s},{max_diff:e}\n"));
        files.push((format!("sstep-{s}.csv"), run.trace.to_csv()));
    }
    files.push(("diffs.csv".into(), diffs));
    Ok(files)
}

/// Local SGD with averaging at a fixed round length, for increasing worker
/// counts: one trace per worker count, on the global-evaluation axis.
fn fedavg_delay(params: &Params, cache_dir: Option<&Path>) -> Result<Curves, CliError> {
    params.check_known(&["dataset", "batch", "step", "iters", "tau", "workers"])?;
    let batch = params.usize_or("batch", 640)?;
    let step = params.f64_or("step", 1.0)?;
    let iters = params.usize_or("iters", 1000)?;
    let tau = params.usize_or("tau", 100)?;
    let workers_list = params.usize_list_or("workers", &[1, 4, 16])?;

    let raw = load(params, "w1a", cache_dir)?;
    let cfg = SolverConfig {
        batch_size: batch,
        step_size: step,
        iterations: iters,
        local_iters: tau,
        trace_interval: tau,
        ..SolverConfig::default()
    };
    let padded = pad_for(&cfg, &raw);
    let x0 = vec![0.0; padded.num_cols()];

    let mut files = Curves::new();
    for &workers in &workers_list {
        let run = fedavg(
            &padded,
            workers,
            ExecMode::Reference,
            &cfg,
            &CostParams::default(),
            &x0,
            SamplingSpec::Contiguous.as_fed(),
        )
        .map_err(|e| match e {
            gridsgd::parsolvers::ParError::Solver(se) => crate::experiment::solver_error(se),
            gridsgd::parsolvers::ParError::Sim(se) => {
                CliError::new(ExitKind::Io, format!("simulation failed: {se}"))
            }
        })?;
        files.push((format!("fedavg-p{workers}.csv"), run.trace.to_csv()));
    }
    Ok(files)
}

/// Modeled-time sweep over block length and averaging-group count at a
/// fixed rank budget, as one long-format CSV ready to pivot into a
/// heatmap.
fn grid_heatmap(params: &Params) -> Result<Curves, CliError> {
    params.check_known(&[
        "total_ranks", "s", "rows", "num_rows", "num_cols", "nnz_per_row", "batch", "iters",
        "tau", "alpha", "beta", "gamma", "phi",
    ])?;
    let spec = SweepSpec {
        total_ranks: params.usize_or("total_ranks", 32)?,
        block_lens: params.usize_list_or("s", &[1, 2, 4, 8, 16])?,
        row_counts: params.usize_list_or("rows", &[1, 2, 4, 8, 16])?,
        mode: Mode::Derived,
        params: ModelParams {
            num_rows: params.usize_or("num_rows", 4096)?,
            num_cols: params.usize_or("num_cols", 512)?,
            nnz_per_row: params.f64_or("nnz_per_row", 16.0)?,
            batch_size: params.usize_or("batch", 16)?,
            iterations: params.usize_or("iters", 512)?,
            block_len: 1,
            local_iters: params.usize_or("tau", 16)?,
            cost: CostParams {
                alpha: params.f64_or("alpha", 1e-3)?,
                beta: params.f64_or("beta", 1e-7)?,
                gamma: params.f64_or("gamma", 1e-11)?,
                transcendental_weight: params.f64_or("phi", 4.0)?,
            },
        },
    };
    let result = sweep(&spec).map_err(|e| CliError::new(ExitKind::Validation, format!("sweep: {e}")))?;
    let best = result.best_cell();
    println!(
        "best cell: {} s={} p_r={} (modeled {:.3e}s, speedup {:.2}x)",
        best.algorithm, best.block_len, best.rows, best.time, best.speedup
    );
    Ok(vec![("heatmap.csv".into(), result.to_csv())])
}
