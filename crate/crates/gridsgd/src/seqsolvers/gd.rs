use super::{SolverConfig, SolverError, SolverRun, Tracer};
use crate::dataio::CsrMatrix;
use crate::logreg;

/// Full-batch gradient descent: `x <- x - step_size * grad f(x)`, with the
/// gradient taken over all `objective_rows` real rows. The batching fields
/// of the config are ignored.
pub fn gd(
    z: &CsrMatrix,
    objective_rows: usize,
    config: &SolverConfig,
    x0: &[f64],
) -> Result<SolverRun, SolverError> {
    if !(config.step_size.is_finite() && config.step_size > 0.0) {
        return Err(SolverError::InvalidConfig(format!(
            "step_size must be positive and finite, got {}",
            config.step_size
        )));
    }
    assert_eq!(x0.len(), z.num_cols);

    let mut x = x0.to_vec();
    let mut tracer = Tracer::new(z, objective_rows, config.trace_interval);
    tracer.observe(0, 0, &x, true)?;
    let mut evals = 0u64;
    for k in 1..=config.iterations {
        let g = logreg::gradient(z, objective_rows, &x);
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= config.step_size * gi;
        }
        evals += objective_rows as u64;
        tracer.observe(k, evals, &x, k == config.iterations)?;
    }
    Ok(SolverRun { x, trace: tracer.into_trace() })
}
