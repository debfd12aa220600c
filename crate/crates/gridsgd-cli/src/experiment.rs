//! Runs one configured experiment and writes its three artifacts:
//! `trace.csv`, `ledger.csv`, and `summary.json`. Every byte written is a
//! pure function of the config, so rerunning a config reproduces its
//! artifacts exactly.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use gridsgd::dataio::{scale_rows_by_labels, Dataset};
use gridsgd::logreg::row_dot;
use gridsgd::parsolvers::{fedavg, hybrid_sgd, par_sgd, ParError, ParallelRun};
use gridsgd::seqsolvers::{gd, sgd, sstep_sgd, ConvergenceTrace, SolverError};
use gridsgd::simgrid::{hockney_time, CostLedger, ExecMode, ProcessorGrid, RunLedger};

use crate::config::{pad_for, resolve_dataset, AlgorithmSpec, ExperimentConfig, ResolvedDataset};
use crate::{CliError, ExitKind};

pub fn run(config: &ExperimentConfig) -> Result<(), CliError> {
    let ResolvedDataset { data, source } =
        resolve_dataset(&config.dataset, config.seed, config.cache_dir.as_deref())?;
    let padded = pad_for(&config.solver, &data);
    let z = scale_rows_by_labels(&padded);
    let x0 = vec![0.0; padded.num_cols()];
    let rows = padded.unpadded_rows();

    let outcome: Result<(Vec<f64>, ConvergenceTrace, Option<RunLedger>), CliError> =
        match &config.algorithm {
            AlgorithmSpec::Gd => seq_outcome(gd(&z, rows, &config.solver, &x0)),
            AlgorithmSpec::Sgd => seq_outcome(sgd(&z, rows, &config.solver, &x0)),
            AlgorithmSpec::BlockSgd => seq_outcome(sstep_sgd(&z, rows, &config.solver, &x0)),
            AlgorithmSpec::ParSgd { rows: gr, cols: gc } => par_outcome(par_sgd(
                &padded,
                &ProcessorGrid::new(*gr, *gc),
                ExecMode::Reference,
                &config.solver,
                &config.cost,
                &x0,
            )),
            AlgorithmSpec::Fedavg { workers, sampling } => par_outcome(fedavg(
                &padded,
                *workers,
                ExecMode::Reference,
                &config.solver,
                &config.cost,
                &x0,
                sampling.as_fed(),
            )),
            AlgorithmSpec::Hybrid { rows: gr, cols: gc } => par_outcome(hybrid_sgd(
                &padded,
                &ProcessorGrid::new(*gr, *gc),
                ExecMode::Reference,
                &config.solver,
                &config.cost,
                &x0,
            )),
        };

    let (x, trace, ledger) = match outcome {
        Ok(parts) => parts,
        Err(mut err) => {
            // A blown-up run still leaves its partial trace behind for
            // inspection; only the summary and ledger are withheld.
            if let Some(trace) = err.partial_trace.take() {
                fs::create_dir_all(&config.output_dir).ok();
                fs::write(config.output_dir.join("trace.csv"), trace.to_csv()).ok();
            }
            return Err(err);
        }
    };

    let critical = ledger.as_ref().map(|l| l.critical.clone()).unwrap_or_default();
    let modeled_time = hockney_time(&critical, &config.cost);
    let summary = summarize(config, &padded, &source, &x, &trace, &critical, modeled_time);

    write_artifacts(&config.output_dir, &trace, &critical, &summary)?;
    println!(
        "{} on {}: objective {:.6}, accuracy {:.4}, modeled time {:.3e}s -> {}",
        config.algorithm.name(),
        source,
        trace.final_objective().unwrap_or(f64::NAN),
        summary["training_accuracy"].as_f64().unwrap_or(f64::NAN),
        modeled_time,
        config.output_dir.display(),
    );
    Ok(())
}

fn seq_outcome(
    res: Result<gridsgd::seqsolvers::SolverRun, SolverError>,
) -> Result<(Vec<f64>, ConvergenceTrace, Option<RunLedger>), CliError> {
    match res {
        Ok(run) => Ok((run.x, run.trace, None)),
        Err(e) => Err(solver_error(e)),
    }
}

fn par_outcome(
    res: Result<ParallelRun, ParError>,
) -> Result<(Vec<f64>, ConvergenceTrace, Option<RunLedger>), CliError> {
    match res {
        Ok(run) => Ok((run.x, run.trace, Some(run.ledger))),
        Err(ParError::Solver(e)) => Err(solver_error(e)),
        Err(ParError::Sim(e)) => Err(CliError::new(ExitKind::Io, format!("simulation failed: {e}"))),
    }
}

pub(crate) fn solver_error(e: SolverError) -> CliError {
    match e {
        SolverError::InvalidConfig(msg) => CliError::new(ExitKind::Validation, format!("solver: {msg}")),
        SolverError::Diverged { iteration, trace } => {
            let mut err = CliError::new(
                ExitKind::Divergence,
                format!("objective became non-finite at iteration {iteration}"),
            );
            err.partial_trace = Some(trace);
            err
        }
    }
}

fn summarize(
    config: &ExperimentConfig,
    padded: &Dataset,
    source: &str,
    x: &[f64],
    trace: &ConvergenceTrace,
    critical: &CostLedger,
    modeled_time: f64,
) -> serde_json::Value {
    serde_json::json!({
        "algorithm": config.algorithm.name(),
        "config": serde_json::to_value(config).expect("config serializes"),
        "dataset": {
            "source": source,
            "rows": padded.unpadded_rows(),
            "cols": padded.num_cols(),
            "nnz": padded.matrix.nnz(),
            "padded_rows": padded.padded_rows,
        },
        "final_objective": trace.final_objective(),
        "training_accuracy": training_accuracy(padded, x),
        "x_checksum_sha256": checksum(x),
        "modeled_time_seconds": modeled_time,
        "ledger": critical.to_json(),
    })
}

/// Fraction of real rows the solution classifies correctly; a row exactly
/// on the boundary counts as wrong.
fn training_accuracy(d: &Dataset, x: &[f64]) -> f64 {
    let z = scale_rows_by_labels(d);
    let rows = d.unpadded_rows();
    let correct = (0..rows).filter(|&i| row_dot(&z, i, x) > 0.0).count();
    correct as f64 / rows as f64
}

fn checksum(x: &[f64]) -> String {
    let mut hasher = Sha256::new();
    for v in x {
        hasher.update(v.to_le_bytes());
    }
    hex::encode(hasher.finalize())
}

fn write_artifacts(
    dir: &Path,
    trace: &ConvergenceTrace,
    critical: &CostLedger,
    summary: &serde_json::Value,
) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::new(ExitKind::Io, format!("writing {}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    fs::write(dir.join("trace.csv"), trace.to_csv()).map_err(io)?;
    fs::write(dir.join("ledger.csv"), critical.to_csv()).map_err(io)?;
    let mut json = serde_json::to_string_pretty(summary).expect("summary serializes");
    json.push('\n');
    fs::write(dir.join("summary.json"), json).map_err(io)?;
    Ok(())
}
