//! Numerical kernels for sparse logistic regression.
//!
//! Throughout, `z` is the label-scaled data matrix: row `i` of `z` is
//! `y_i * a_i` for feature row `a_i` and label `y_i` in {-1, +1} (see
//! [`crate::dataio::scale_rows_by_labels`]). The regression objective is the
//! mean logistic loss
//!
//! ```text
//! f(x) = (1/m) * sum_i log(1 + exp(-z_i . x))
//! ```
//!
//! and its gradient is `-(1/m) * z^T u` with `u_i = sigmoid(-z_i . x)`.
//! Every solver in the crate is built from the pieces here: forward batch
//! products, the stable sigmoid/softplus pair, pairwise sparse row dots for
//! Gram blocks, and transposed accumulation for gradient assembly.

use crate::dataio::CsrMatrix;

/// `sigmoid(-t) = 1 / (1 + e^t)`, evaluated without overflow for any `t`.
///
/// The two branches keep every intermediate exponential at most 1, so the
/// result is exact to rounding even for |t| in the thousands.
pub fn sigmoid_neg(t: f64) -> f64 {
    if t >= 0.0 {
        let e = (-t).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + t.exp())
    }
}

/// `softplus(z) = log(1 + e^z)`, evaluated without overflow for any `z`.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Dot product of one sparse row with a dense vector.
pub fn row_dot(z: &CsrMatrix, row: usize, x: &[f64]) -> f64 {
    let (cols, vals) = z.row(row);
    let mut acc = 0.0;
    for (&c, &v) in cols.iter().zip(vals) {
        acc += v * x[c];
    }
    acc
}

/// Forward batch product: `out[j] = z[rows[j]] . x`.
///
/// Costs 2 flops per stored entry of the selected rows.
pub fn batch_matvec(z: &CsrMatrix, rows: &[usize], x: &[f64]) -> Vec<f64> {
    rows.iter().map(|&r| row_dot(z, r, x)).collect()
}

/// Transposed accumulation: `out += sum_j coeff[j] * z[rows[j]]`.
///
/// `out` is dense over the column space of `z` and is *not* cleared first,
/// so callers control (and pay for) buffer reuse explicitly. Costs 2 flops
/// per stored entry of the selected rows.
pub fn batch_matvec_t(z: &CsrMatrix, rows: &[usize], coeff: &[f64], out: &mut [f64]) {
    assert_eq!(rows.len(), coeff.len());
    assert_eq!(out.len(), z.num_cols);
    for (&r, &c) in rows.iter().zip(coeff) {
        let (cols, vals) = z.row(r);
        for (&col, &v) in cols.iter().zip(vals) {
            out[col] += c * v;
        }
    }
}

/// Dot product of two sparse rows by index merge.
///
/// Returns the value together with the number of index matches, which is
/// exactly the multiply-add count the caller should charge (2 flops per
/// match).
pub fn sparse_row_dot(z: &CsrMatrix, row_a: usize, row_b: usize) -> (f64, u64) {
    let (ca, va) = z.row(row_a);
    let (cb, vb) = z.row(row_b);
    let mut acc = 0.0;
    let mut matches = 0u64;
    let (mut i, mut j) = (0usize, 0usize);
    while i < ca.len() && j < cb.len() {
        match ca[i].cmp(&cb[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += va[i] * vb[j];
                matches += 1;
                i += 1;
                j += 1;
            }
        }
    }
    (acc, matches)
}

/// Mean logistic loss over the first `num_rows` rows of `z`.
///
/// Padding rows sit at the end of a padded dataset, so passing the original
/// (unpadded) row count evaluates the objective of the real problem even on
/// a padded matrix. The result is finite for finite inputs; a non-finite
/// value signals that `x` itself has blown up.
pub fn objective(z: &CsrMatrix, num_rows: usize, x: &[f64]) -> f64 {
    assert!(num_rows <= z.num_rows);
    assert!(num_rows > 0, "objective over zero rows");
    let mut acc = 0.0;
    for i in 0..num_rows {
        acc += softplus(-row_dot(z, i, x));
    }
    acc / num_rows as f64
}

/// Exact gradient of [`objective`]: `-(1/num_rows) * z^T u`.
pub fn gradient(z: &CsrMatrix, num_rows: usize, x: &[f64]) -> Vec<f64> {
    assert!(num_rows <= z.num_rows);
    let rows: Vec<usize> = (0..num_rows).collect();
    let t = batch_matvec(z, &rows, x);
    let u: Vec<f64> = t.iter().map(|&ti| sigmoid_neg(ti)).collect();
    let mut g = vec![0.0; z.num_cols];
    batch_matvec_t(z, &rows, &u, &mut g);
    let scale = -1.0 / num_rows as f64;
    for gi in &mut g {
        *gi *= scale;
    }
    g
}

/// Central-difference approximation of the objective gradient, used as an
/// independent check on [`gradient`] and on the solver update direction.
pub fn gradient_fd(z: &CsrMatrix, num_rows: usize, x: &[f64], step: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for k in 0..x.len() {
        let saved = probe[k];
        probe[k] = saved + step;
        let above = objective(z, num_rows, &probe);
        probe[k] = saved - step;
        let below = objective(z, num_rows, &probe);
        probe[k] = saved;
        g[k] = (above - below) / (2.0 * step);
    }
    g
}

/// Relative L2 distance `|a - b| / max(|b|, floor)`.
pub fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut diff = 0.0;
    let mut norm = 0.0;
    for (&ai, &bi) in a.iter().zip(b) {
        diff += (ai - bi) * (ai - bi);
        norm += bi * bi;
    }
    diff.sqrt() / norm.sqrt().max(1e-300)
}
