/// Row indices `[start, start + batch_size)` taken cyclically modulo
/// `num_rows`. When `num_rows` is a multiple of `batch_size` (guaranteed
/// after padding) and `start` advances by `batch_size` each step, consecutive
/// batches tile the row range before repeating.
pub fn cyclic_batch(start: usize, batch_size: usize, num_rows: usize) -> Vec<usize> {
    assert!(num_rows > 0, "cannot sample an empty matrix");
    assert!(batch_size <= num_rows, "batch larger than the matrix");
    assert!(start < num_rows, "start index out of range");
    (0..batch_size).map(|t| (start + t) % num_rows).collect()
}

/// Stateful cyclic batch source used by the solvers.
#[derive(Debug, Clone)]
pub struct CyclicSampler {
    next_start: usize,
    batch_size: usize,
    num_rows: usize,
}

impl CyclicSampler {
    pub fn new(batch_size: usize, num_rows: usize) -> Self {
        assert!(batch_size <= num_rows, "batch larger than the matrix");
        CyclicSampler { next_start: 0, batch_size, num_rows }
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        let ids = cyclic_batch(self.next_start, self.batch_size, self.num_rows);
        self.next_start = (self.next_start + self.batch_size) % self.num_rows;
        ids
    }
}
