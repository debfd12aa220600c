use super::csr::CsrMatrix;
use super::dataset::Dataset;
use super::DataError;
use crate::simgrid::ProcessorGrid;

/// Data layout over the processor grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// Rows split across processors; every processor sees all columns.
    Row1d,
    /// Columns split across processors; every processor sees all rows.
    Col1d,
    /// Rows split across grid rows, columns across grid columns.
    Grid2d,
}

/// One processor's share of the matrix under a [`Layout`].
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBlock {
    pub matrix: CsrMatrix,
    /// Global rows owned by this processor, in local storage order.
    pub rows: Vec<usize>,
    /// Global column range owned by this processor (end may exceed the
    /// dataset width when columns were padded to divide evenly).
    pub col_start: usize,
    pub col_end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub layout: Layout,
    pub grid: ProcessorGrid,
    /// Blocks in rank order (`rank = grid_row * grid.cols + grid_col`).
    pub blocks: Vec<LocalBlock>,
    /// Column count after padding to a multiple of `grid.cols`.
    pub padded_cols: usize,
}

/// Split a dataset's rows and columns into contiguous per-processor blocks.
/// Grid rows must divide the (padded) row count; columns are padded with
/// empty trailing columns when the grid columns do not divide them.
pub fn partition(d: &Dataset, grid: &ProcessorGrid, layout: Layout) -> Result<Partition, DataError> {
    if grid.rows == 0 || grid.cols == 0 {
        return Err(DataError::Invalid("processor grid has a zero dimension".into()));
    }
    match layout {
        Layout::Row1d if grid.cols != 1 => {
            return Err(DataError::Invalid(format!(
                "row layout requires a single grid column, got {}",
                grid.cols
            )));
        }
        Layout::Col1d if grid.rows != 1 => {
            return Err(DataError::Invalid(format!(
                "column layout requires a single grid row, got {}",
                grid.rows
            )));
        }
        _ => {}
    }
    let m = d.num_rows();
    if m % grid.rows != 0 {
        return Err(DataError::Invalid(format!(
            "{} grid rows do not divide {m} matrix rows; pad the dataset first",
            grid.rows
        )));
    }
    let padded_cols = d.num_cols().div_ceil(grid.cols) * grid.cols;
    let rows_per = m / grid.rows;
    let cols_per = padded_cols / grid.cols;

    let mut blocks = Vec::with_capacity(grid.size());
    for i in 0..grid.rows {
        let rows: Vec<usize> = (i * rows_per..(i + 1) * rows_per).collect();
        for j in 0..grid.cols {
            let col_start = j * cols_per;
            let col_end = col_start + cols_per;
            let matrix = d.matrix.extract_block(&rows, col_start, col_end.min(d.num_cols()));
            // widen the last block to the padded width; padding columns are empty
            let matrix = CsrMatrix {
                num_cols: cols_per,
                ..matrix
            };
            blocks.push(LocalBlock { matrix, rows: rows.clone(), col_start, col_end });
        }
    }
    Ok(Partition { layout, grid: grid.clone(), blocks, padded_cols })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{gen_synthetic, parse_libsvm_str, ParseOptions};

    #[test]
    fn blocks_have_expected_shape() {
        let d = gen_synthetic(12, 6, 3, 1).unwrap();
        let grid = ProcessorGrid::new(3, 2);
        let p = partition(&d, &grid, Layout::Grid2d).unwrap();
        assert_eq!(p.blocks.len(), 6);
        for b in &p.blocks {
            assert_eq!(b.matrix.num_rows, 4);
            assert_eq!(b.matrix.num_cols, 3);
        }
        assert_eq!(p.blocks[3].rows, vec![4, 5, 6, 7]); // rank (1, 1)
        assert_eq!(p.blocks[3].col_start, 3);
    }

    #[test]
    fn nonzeros_are_conserved() {
        let d = gen_synthetic(24, 10, 4, 9).unwrap();
        for (grid, layout) in [
            (ProcessorGrid::new(4, 1), Layout::Row1d),
            (ProcessorGrid::new(1, 5), Layout::Col1d),
            (ProcessorGrid::new(2, 3), Layout::Grid2d),
        ] {
            let p = partition(&d, &grid, layout).unwrap();
            let total: usize = p.blocks.iter().map(|b| b.matrix.nnz()).sum();
            assert_eq!(total, d.matrix.nnz(), "{layout:?}");
        }
    }

    #[test]
    fn blocks_reassemble_the_matrix() {
        let d = gen_synthetic(12, 7, 3, 5).unwrap();
        let grid = ProcessorGrid::new(3, 2);
        let p = partition(&d, &grid, Layout::Grid2d).unwrap();
        assert_eq!(p.padded_cols, 8);
        for gr in 0..12 {
            let i = gr / 4;
            let local_r = gr % 4;
            let (cols, vals) = d.matrix.row(gr);
            let mut rebuilt: Vec<(usize, f64)> = Vec::new();
            for j in 0..2 {
                let b = &p.blocks[i * 2 + j];
                let (bc, bv) = b.matrix.row(local_r);
                for (&c, &v) in bc.iter().zip(bv) {
                    rebuilt.push((c + b.col_start, v));
                }
            }
            let expected: Vec<(usize, f64)> = cols.iter().zip(vals).map(|(&c, &v)| (c, v)).collect();
            assert_eq!(rebuilt, expected);
        }
    }

    #[test]
    fn degenerate_grid_matches_col1d() {
        let d = gen_synthetic(8, 6, 2, 3).unwrap();
        let a = partition(&d, &ProcessorGrid::new(1, 3), Layout::Col1d).unwrap();
        let b = partition(&d, &ProcessorGrid::new(1, 3), Layout::Grid2d).unwrap();
        assert_eq!(a.blocks, b.blocks);
    }

    #[test]
    fn invalid_grids_are_rejected() {
        let d = gen_synthetic(8, 6, 2, 3).unwrap();
        assert!(partition(&d, &ProcessorGrid::new(1, 0), Layout::Col1d).is_err());
        assert!(partition(&d, &ProcessorGrid::new(3, 1), Layout::Row1d).is_err());
        assert!(partition(&d, &ProcessorGrid::new(2, 2), Layout::Row1d).is_err());
    }

    #[test]
    fn padded_rows_partition_evenly() {
        let d = parse_libsvm_str("+1 1:1\n-1 2:1\n+1 3:1\n", &ParseOptions::named("t")).unwrap();
        let padded = crate::dataio::pad_rows(&d, 1, 4);
        let p = partition(&padded, &ProcessorGrid::new(2, 1), Layout::Row1d).unwrap();
        assert_eq!(p.blocks[1].matrix.row_nnz(1), 0);
    }
}
