/// Sparse matrix in compressed sparse row form.
///
/// `row_ptr` has `num_rows + 1` entries; row `i` occupies the half-open
/// slice `row_ptr[i]..row_ptr[i + 1]` of `col_idx` / `values`. Column
/// indices are 0-based and strictly increasing within a row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub num_rows: usize,
    pub num_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(
        num_rows: usize,
        num_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        assert_eq!(row_ptr.len(), num_rows + 1, "row_ptr length mismatch");
        assert_eq!(col_idx.len(), values.len(), "col_idx/values length mismatch");
        assert_eq!(*row_ptr.last().unwrap(), col_idx.len(), "row_ptr tail mismatch");
        assert_eq!(row_ptr[0], 0, "row_ptr must start at 0");
        for i in 0..num_rows {
            assert!(row_ptr[i] <= row_ptr[i + 1], "row_ptr must be nondecreasing");
            let row = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            for w in row.windows(2) {
                assert!(w[0] < w[1], "column indices must be strictly increasing in row {i}");
            }
            if let Some(&last) = row.last() {
                assert!(last < num_cols, "column index {last} out of range in row {i}");
            }
        }
        CsrMatrix { num_rows, num_cols, row_ptr, col_idx, values }
    }

    pub fn zero(num_rows: usize, num_cols: usize) -> Self {
        CsrMatrix {
            num_rows,
            num_cols,
            row_ptr: vec![0; num_rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    /// Fraction of structurally zero entries.
    pub fn sparsity(&self) -> f64 {
        let cells = self.num_rows * self.num_cols;
        if cells == 0 {
            return 0.0;
        }
        1.0 - self.nnz() as f64 / cells as f64
    }

    /// New matrix holding `rows` of `self` in the given order.
    pub fn gather_rows(&self, rows: &[usize]) -> CsrMatrix {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for &r in rows {
            let (cols, vals) = self.row(r);
            col_idx.extend_from_slice(cols);
            values.extend_from_slice(vals);
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { num_rows: rows.len(), num_cols: self.num_cols, row_ptr, col_idx, values }
    }

    /// Submatrix of `rows` restricted to columns `col_start..col_end`,
    /// with column indices rebased to the local range.
    pub fn extract_block(&self, rows: &[usize], col_start: usize, col_end: usize) -> CsrMatrix {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for &r in rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                if c >= col_start && c < col_end {
                    col_idx.push(c - col_start);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { num_rows: rows.len(), num_cols: col_end - col_start, row_ptr, col_idx, values }
    }
}
