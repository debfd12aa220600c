/// Rectangular arrangement of simulated processors. Ranks are numbered
/// row-major: rank = grid_row * cols + grid_col.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ProcessorGrid {
    pub rows: usize,
    pub cols: usize,
}

impl ProcessorGrid {
    pub fn new(rows: usize, cols: usize) -> Self {
        ProcessorGrid { rows, cols }
    }

    pub fn size(&self) -> usize {
        self.rows * self.cols
    }

    pub fn rank_of(&self, grid_row: usize, grid_col: usize) -> usize {
        debug_assert!(grid_row < self.rows && grid_col < self.cols);
        grid_row * self.cols + grid_col
    }

    pub fn coords_of(&self, rank: usize) -> (usize, usize) {
        debug_assert!(rank < self.size());
        (rank / self.cols, rank % self.cols)
    }

    pub fn world(&self) -> Communicator {
        Communicator { key: CommKey::World, members: (0..self.size()).collect() }
    }

    /// Ranks sharing grid row `i`, ascending.
    pub fn row_team(&self, i: usize) -> Communicator {
        Communicator {
            key: CommKey::Row(i),
            members: (0..self.cols).map(|j| self.rank_of(i, j)).collect(),
        }
    }

    /// Ranks sharing grid column `j`, ascending.
    pub fn col_team(&self, j: usize) -> Communicator {
        Communicator {
            key: CommKey::Col(j),
            members: (0..self.rows).map(|i| self.rank_of(i, j)).collect(),
        }
    }
}

/// Identity of a communicator within one run. Collective calls on the same
/// key are matched across ranks by arrival order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CommKey {
    World,
    Row(usize),
    Col(usize),
}

impl std::fmt::Display for CommKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CommKey::World => write!(f, "world"),
            CommKey::Row(i) => write!(f, "row-team-{i}"),
            CommKey::Col(j) => write!(f, "col-team-{j}"),
        }
    }
}

/// A set of ranks that perform collectives together, in ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Communicator {
    pub key: CommKey,
    pub members: Vec<usize>,
}

impl Communicator {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn member_position(&self, rank: usize) -> Option<usize> {
        self.members.iter().position(|&r| r == rank)
    }
}
