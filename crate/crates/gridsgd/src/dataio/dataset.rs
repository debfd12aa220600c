use std::io::BufRead;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::csr::CsrMatrix;
use super::DataError;

/// A binary classification problem: feature matrix plus labels in {+1, -1}.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub matrix: CsrMatrix,
    pub labels: Vec<f64>,
    /// Number of trailing all-zero rows appended by [`pad_rows`]. These rows
    /// carry label +1 and are excluded from the full-dataset objective.
    pub padded_rows: usize,
}

impl Dataset {
    pub fn num_rows(&self) -> usize {
        self.matrix.num_rows
    }

    pub fn num_cols(&self) -> usize {
        self.matrix.num_cols
    }

    /// Rows of the original dataset, before padding.
    pub fn unpadded_rows(&self) -> usize {
        self.matrix.num_rows - self.padded_rows
    }
}

/// How raw labels in an input file map onto {+1, -1}.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum LabelRule {
    /// Labels already in {+1, -1} pass through; otherwise the file must use
    /// exactly two distinct raw labels and the numerically larger one becomes
    /// +1 (e.g. raw {2, 4} maps 4 to +1).
    LargerPositive,
    /// Explicit raw values for the two classes.
    Explicit { positive: f64, negative: f64 },
}

impl Default for LabelRule {
    fn default() -> Self {
        LabelRule::LargerPositive
    }
}

#[derive(Debug, Clone)]
pub struct ParseOptions {
    pub name: String,
    pub label_rule: LabelRule,
    /// Force the column count, for feature spaces wider than the largest
    /// index present in the file. Must not be smaller than any stored index.
    pub num_cols: Option<usize>,
}

impl ParseOptions {
    pub fn named(name: &str) -> Self {
        ParseOptions { name: name.to_string(), label_rule: LabelRule::default(), num_cols: None }
    }

    pub fn with_num_cols(mut self, n: usize) -> Self {
        self.num_cols = Some(n);
        self
    }

    pub fn with_label_rule(mut self, rule: LabelRule) -> Self {
        self.label_rule = rule;
        self
    }
}

/// Parse a dataset in LIBSVM text format: one sample per nonempty line,
/// `<label> <index>:<value> ...` with 1-based, strictly increasing indices.
/// Indices are converted to 0-based. Raw labels are remapped per the
/// configured [`LabelRule`] after the whole file is read.
pub fn parse_libsvm<R: BufRead>(reader: R, opts: &ParseOptions) -> Result<Dataset, DataError> {
    let mut raw_labels: Vec<f64> = Vec::new();
    let mut row_ptr = vec![0usize];
    let mut col_idx: Vec<usize> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut max_col = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(DataError::Io)?;
        let mut fields = line.split_whitespace();
        let label_field = match fields.next() {
            Some(f) => f,
            None => continue, // blank line
        };
        let label: f64 = label_field
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad label {label_field:?}")))?;
        raw_labels.push(label);

        let mut prev_col: Option<usize> = None;
        for field in fields {
            let (idx_str, val_str) = field
                .split_once(':')
                .ok_or_else(|| parse_err(lineno, format!("bad feature {field:?}")))?;
            let idx: usize = idx_str
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad index {idx_str:?}")))?;
            if idx == 0 {
                return Err(parse_err(lineno, "indices are 1-based; found 0".into()));
            }
            let val: f64 = val_str
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad value {val_str:?}")))?;
            let col = idx - 1;
            if let Some(p) = prev_col {
                if col <= p {
                    return Err(parse_err(
                        lineno,
                        format!("indices must be strictly increasing; {} follows {}", idx, p + 1),
                    ));
                }
            }
            prev_col = Some(col);
            max_col = max_col.max(col);
            col_idx.push(col);
            values.push(val);
        }
        row_ptr.push(col_idx.len());
    }

    let observed_cols = if col_idx.is_empty() { 0 } else { max_col + 1 };
    let num_cols = match opts.num_cols {
        Some(n) if n < observed_cols => {
            return Err(DataError::Invalid(format!(
                "forced column count {n} is below the largest stored index {observed_cols}"
            )));
        }
        Some(n) => n,
        None => observed_cols,
    };

    let labels = remap_labels(&raw_labels, opts.label_rule)?;
    let num_rows = labels.len();
    Ok(Dataset {
        name: opts.name.clone(),
        matrix: CsrMatrix::new(num_rows, num_cols, row_ptr, col_idx, values),
        labels,
        padded_rows: 0,
    })
}

pub fn parse_libsvm_str(text: &str, opts: &ParseOptions) -> Result<Dataset, DataError> {
    parse_libsvm(text.as_bytes(), opts)
}

fn parse_err(line: usize, message: String) -> DataError {
    DataError::Parse { line, message }
}

fn remap_labels(raw: &[f64], rule: LabelRule) -> Result<Vec<f64>, DataError> {
    let mut distinct: Vec<f64> = Vec::new();
    for &l in raw {
        if !l.is_finite() {
            return Err(DataError::Invalid(format!("non-finite label {l}")));
        }
        if !distinct.contains(&l) {
            distinct.push(l);
        }
    }
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let map = |positive: f64, negative: f64| -> Result<Vec<f64>, DataError> {
        raw.iter()
            .map(|&l| {
                if l == positive {
                    Ok(1.0)
                } else if l == negative {
                    Ok(-1.0)
                } else {
                    Err(DataError::LabelMap { observed: distinct.clone() })
                }
            })
            .collect()
    };

    match rule {
        LabelRule::Explicit { positive, negative } => map(positive, negative),
        LabelRule::LargerPositive => {
            if raw.is_empty() {
                return Ok(Vec::new());
            }
            if distinct.iter().all(|&l| l == 1.0 || l == -1.0) {
                return Ok(raw.to_vec());
            }
            if distinct.len() != 2 {
                return Err(DataError::LabelMap { observed: distinct });
            }
            map(distinct[1], distinct[0])
        }
    }
}

/// Render a dataset back to LIBSVM text. Values print in shortest
/// round-trip form, so reparsing reproduces them exactly.
pub fn to_libsvm_string(d: &Dataset) -> String {
    let mut out = String::new();
    for i in 0..d.num_rows() {
        let label = if d.labels[i] > 0.0 { "+1" } else { "-1" };
        out.push_str(label);
        let (cols, vals) = d.matrix.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            out.push_str(&format!(" {}:{}", c + 1, v));
        }
        out.push('\n');
    }
    out
}

/// Deterministic random sparse dataset: every row has exactly `nnz_per_row`
/// nonzeros at distinct columns, values uniform in [-1, 1], labels uniform
/// in {+1, -1}.
pub fn gen_synthetic(
    rows: usize,
    cols: usize,
    nnz_per_row: usize,
    seed: u64,
) -> Result<Dataset, DataError> {
    if nnz_per_row > cols {
        return Err(DataError::Invalid(format!(
            "nnz_per_row {nnz_per_row} exceeds column count {cols}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let value_dist = Uniform::new_inclusive(-1.0f64, 1.0);
    let mut row_ptr = Vec::with_capacity(rows + 1);
    row_ptr.push(0);
    let mut col_idx = Vec::with_capacity(rows * nnz_per_row);
    let mut values = Vec::with_capacity(rows * nnz_per_row);
    let mut labels = Vec::with_capacity(rows);
    for _ in 0..rows {
        let mut picks = rand::seq::index::sample(&mut rng, cols, nnz_per_row).into_vec();
        picks.sort_unstable();
        for c in picks {
            col_idx.push(c);
            values.push(value_dist.sample(&mut rng));
        }
        row_ptr.push(col_idx.len());
        labels.push(if rng.gen::<bool>() { 1.0 } else { -1.0 });
    }
    Ok(Dataset {
        name: format!("synthetic-{rows}x{cols}x{nnz_per_row}-{seed}"),
        matrix: CsrMatrix::new(rows, cols, row_ptr, col_idx, values),
        labels,
        padded_rows: 0,
    })
}

use rand::Rng;

/// Scale each row of the feature matrix by its label: the matrix whose
/// row `i` is `y_i * a_i`. Sparsity structure is unchanged.
pub fn scale_rows_by_labels(d: &Dataset) -> CsrMatrix {
    let mut z = d.matrix.clone();
    for i in 0..z.num_rows {
        let y = d.labels[i];
        for v in &mut z.values[z.row_ptr[i]..z.row_ptr[i + 1]] {
            *v *= y;
        }
    }
    z
}

/// Append the minimum number of all-zero rows (label +1) so the row count
/// becomes a multiple of `max_block_len * batch_size`. Cyclic batch
/// sampling then always sees whole batches and whole unrolled blocks.
pub fn pad_rows(d: &Dataset, max_block_len: usize, batch_size: usize) -> Dataset {
    let unit = max_block_len * batch_size;
    assert!(unit > 0, "padding unit must be positive");
    let m = d.num_rows();
    let target = m.div_ceil(unit) * unit;
    let extra = target - m;
    if extra == 0 {
        return d.clone();
    }
    let mut out = d.clone();
    out.matrix.num_rows = target;
    out.matrix.row_ptr.extend(std::iter::repeat(d.matrix.nnz()).take(extra));
    out.labels.extend(std::iter::repeat(1.0).take(extra));
    out.padded_rows += extra;
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_two_row_example() {
        let d = parse_libsvm_str("+1 1:0.5 3:2.0\n-1 2:1.0\n", &ParseOptions::named("tiny")).unwrap();
        assert_eq!(d.num_rows(), 2);
        assert_eq!(d.num_cols(), 3);
        assert_eq!(d.matrix.nnz(), 3);
        assert_eq!(d.labels, vec![1.0, -1.0]);
        assert_eq!(d.matrix.row(0), (&[0usize, 2][..], &[0.5, 2.0][..]));
        assert_eq!(d.matrix.row(1), (&[1usize][..], &[1.0][..]));
    }

    #[test]
    fn skips_blank_lines_and_handles_empty_input() {
        let d = parse_libsvm_str("+1 1:1\n\n-1 1:2\n", &ParseOptions::named("t")).unwrap();
        assert_eq!(d.num_rows(), 2);
        let e = parse_libsvm_str("", &ParseOptions::named("empty")).unwrap();
        assert_eq!(e.num_rows(), 0);
        assert_eq!(e.num_cols(), 0);
        assert_eq!(e.matrix.nnz(), 0);
    }

    #[test]
    fn rejects_nonincreasing_indices_with_line_number() {
        let err = parse_libsvm_str("+1 2:1 2:2\n", &ParseOptions::named("t")).unwrap_err();
        match err {
            DataError::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected error {other:?}"),
        }
        let err = parse_libsvm_str("+1 1:1\n-1 3:1 2:1\n", &ParseOptions::named("t")).unwrap_err();
        match err {
            DataError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_malformed_fields() {
        assert!(matches!(
            parse_libsvm_str("x 1:1\n", &ParseOptions::named("t")),
            Err(DataError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_libsvm_str("+1 0:1\n", &ParseOptions::named("t")),
            Err(DataError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_libsvm_str("+1 1=3\n", &ParseOptions::named("t")),
            Err(DataError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn maps_larger_raw_label_to_positive() {
        let d = parse_libsvm_str("2 1:1\n4 1:2\n2 2:1\n", &ParseOptions::named("bc")).unwrap();
        assert_eq!(d.labels, vec![-1.0, 1.0, -1.0]);
    }

    #[test]
    fn unknown_label_reports_observed_set() {
        let err = parse_libsvm_str("2 1:1\n4 1:1\n7 1:1\n", &ParseOptions::named("t")).unwrap_err();
        match err {
            DataError::LabelMap { observed } => assert_eq!(observed, vec![2.0, 4.0, 7.0]),
            other => panic!("unexpected error {other:?}"),
        }
        let opts = ParseOptions::named("t")
            .with_label_rule(LabelRule::Explicit { positive: 4.0, negative: 2.0 });
        assert!(matches!(
            parse_libsvm_str("4 1:1\n5 1:1\n", &opts),
            Err(DataError::LabelMap { .. })
        ));
    }

    #[test]
    fn forced_num_cols_widens_but_never_narrows() {
        let opts = ParseOptions::named("t").with_num_cols(10);
        let d = parse_libsvm_str("+1 1:1 3:1\n", &opts).unwrap();
        assert_eq!(d.num_cols(), 10);
        let opts = ParseOptions::named("t").with_num_cols(2);
        assert!(matches!(parse_libsvm_str("+1 1:1 3:1\n", &opts), Err(DataError::Invalid(_))));
    }

    #[test]
    fn round_trips_through_serialization() {
        let text = "+1 1:0.5 3:-2.25\n-1 2:0.1\n+1 1:3\n";
        let opts = ParseOptions::named("t");
        let d = parse_libsvm_str(text, &opts).unwrap();
        let d2 = parse_libsvm_str(&to_libsvm_string(&d), &opts).unwrap();
        assert_eq!(d, d2);
    }

    #[test]
    fn synthetic_has_exact_row_counts_and_is_deterministic() {
        let a = gen_synthetic(100, 50, 5, 7).unwrap();
        let b = gen_synthetic(100, 50, 5, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.matrix.nnz(), 500);
        for i in 0..100 {
            assert_eq!(a.matrix.row_nnz(i), 5);
        }
        for &v in &a.matrix.values {
            assert!((-1.0..=1.0).contains(&v));
        }
        let dense = gen_synthetic(8, 4, 4, 1).unwrap();
        assert_eq!(dense.matrix.nnz(), 32);
        assert!(gen_synthetic(4, 3, 5, 0).is_err());
        let other_seed = gen_synthetic(100, 50, 5, 8).unwrap();
        assert_ne!(a, other_seed);
    }

    #[test]
    fn label_scaling_flips_negative_rows() {
        let d = parse_libsvm_str("+1 1:2 2:3\n-1 1:4\n", &ParseOptions::named("t")).unwrap();
        let z = scale_rows_by_labels(&d);
        assert_eq!(z.row(0).1, &[2.0, 3.0]);
        assert_eq!(z.row(1).1, &[-4.0]);
        assert_eq!(z.col_idx, d.matrix.col_idx);
    }

    #[test]
    fn padding_reaches_next_multiple() {
        let d = parse_libsvm_str(&"+1 1:1\n".repeat(10), &ParseOptions::named("t")).unwrap();
        let p = pad_rows(&d, 2, 4);
        assert_eq!(p.num_rows(), 16);
        assert_eq!(p.padded_rows, 6);
        for i in 10..16 {
            assert_eq!(p.matrix.row_nnz(i), 0);
            assert_eq!(p.labels[i], 1.0);
        }
        // already aligned: unchanged
        let q = pad_rows(&p, 2, 4);
        assert_eq!(q, p);
        // the published w1a shape
        let big = parse_libsvm_str(&"+1 1:1\n".repeat(2477), &ParseOptions::named("t")).unwrap();
        let bp = pad_rows(&big, 16, 16);
        assert_eq!(bp.num_rows(), 2560);
        assert_eq!(bp.padded_rows, 83);
        assert_eq!(bp.unpadded_rows(), 2477);
    }
}
