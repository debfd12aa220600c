use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Condvar, Mutex};

use super::grid::{CommKey, Communicator, ProcessorGrid};
use super::ledger::{CostCategory, CostLedger, RunLedger};

/// How rank programs are interleaved. Results and ledgers are identical in
/// both modes; only the thread schedule differs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    /// One rank computes at a time, in a deterministic sequence: a rank runs
    /// until it blocks on a collective, then the lowest runnable rank takes
    /// over. This is the reference schedule.
    Reference,
    /// Ranks run on concurrently scheduled threads and rendezvous at
    /// collectives.
    Concurrent,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("deadlock: collective on {comm} (seq {seq}) is missing rank {missing_rank}")]
    CollectiveMismatch { comm: String, seq: u64, missing_rank: usize },
    #[error("length mismatch on {comm} (seq {seq}): expected {expected} words, rank {rank} sent {got}")]
    LengthMismatch { comm: String, seq: u64, expected: usize, got: usize, rank: usize },
    #[error("rank {rank} panicked")]
    RankPanicked { rank: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// Per-rank execution context handed to the program closure. Owns the
/// rank's cost ledger; collective calls charge it automatically.
pub struct RankCtx<'a> {
    rank: usize,
    grid: ProcessorGrid,
    hub: &'a Hub,
    seq: BTreeMap<CommKey, u64>,
    ledger: CostLedger,
}

impl RankCtx<'_> {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn grid(&self) -> &ProcessorGrid {
        &self.grid
    }

    /// This rank's coordinates: (grid row, grid column).
    pub fn coords(&self) -> (usize, usize) {
        self.grid.coords_of(self.rank)
    }

    pub fn world(&self) -> Communicator {
        self.grid.world()
    }

    /// The row team containing this rank.
    pub fn row_team(&self) -> Communicator {
        self.grid.row_team(self.coords().0)
    }

    /// The column team containing this rank.
    pub fn col_team(&self) -> Communicator {
        self.grid.col_team(self.coords().1)
    }

    pub fn record_flops(&mut self, category: CostCategory, amount: u64) {
        self.ledger.record_flops(category, amount);
    }

    pub fn record_transcendental(&mut self, category: CostCategory, amount: u64) {
        self.ledger.record_transcendental(category, amount);
    }

    pub fn ledger(&self) -> &CostLedger {
        &self.ledger
    }

    /// Element-wise sum of `v` across the communicator, reduced in ascending
    /// member order (a left fold, so every rank sees bit-identical results
    /// regardless of arrival order). Every participant is charged the vector
    /// length in words and 2*ceil(log2 size) messages under `category`;
    /// single-member communicators return the input unchanged at zero cost.
    pub fn allreduce_sum(
        &mut self,
        comm: &Communicator,
        v: &[f64],
        category: CostCategory,
    ) -> Result<Vec<f64>, SimError> {
        let pos = comm
            .member_position(self.rank)
            .unwrap_or_else(|| panic!("rank {} is not in {}", self.rank, comm.key));
        if comm.size() == 1 {
            return Ok(v.to_vec());
        }
        self.ledger.record_comm(
            category,
            v.len() as u64,
            2 * ceil_log2(comm.size()),
        );
        let seq = self.seq.entry(comm.key).or_insert(0);
        let this_seq = *seq;
        *seq += 1;
        self.hub.allreduce(self.rank, pos, comm, this_seq, v)
    }
}

pub(crate) fn ceil_log2(p: usize) -> u64 {
    debug_assert!(p >= 1);
    (usize::BITS - (p - 1).leading_zeros()) as u64
}

/// Results of a completed distributed run, in rank order.
#[derive(Debug)]
pub struct GridRun<T> {
    pub per_rank: Vec<T>,
    pub ledger: RunLedger,
}

/// All rank failures from an aborted run, in rank order.
#[derive(Debug)]
pub struct SimFailure<E> {
    pub errors: Vec<(usize, E)>,
}

/// Launch one OS thread per rank and run `program` on each. The call
/// returns when every rank has finished or the run has aborted.
pub fn run_grid<T, E, F>(
    grid: &ProcessorGrid,
    mode: ExecMode,
    program: F,
) -> Result<GridRun<T>, SimFailure<E>>
where
    F: Fn(&mut RankCtx) -> Result<T, E> + Sync,
    T: Send,
    E: Send + From<SimError>,
{
    assert!(grid.rows > 0 && grid.cols > 0, "grid must have positive dimensions");
    let size = grid.size();
    let hub = Hub::new(size, mode);

    let outcomes: Vec<(Result<T, E>, CostLedger)> = std::thread::scope(|scope| {
        let hub = &hub;
        let program = &program;
        let handles: Vec<_> = (0..size)
            .map(|rank| {
                let grid = grid.clone();
                scope.spawn(move || {
                    if mode == ExecMode::Reference {
                        hub.wait_for_baton(rank);
                    }
                    let mut ctx = RankCtx {
                        rank,
                        grid,
                        hub,
                        seq: BTreeMap::new(),
                        ledger: CostLedger::new(),
                    };
                    let out = match catch_unwind(AssertUnwindSafe(|| program(&mut ctx))) {
                        Ok(r) => r,
                        Err(_) => Err(E::from(SimError::RankPanicked { rank })),
                    };
                    hub.finish(rank);
                    (out, ctx.ledger)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("rank thread died")).collect()
    });

    let mut results = Vec::with_capacity(size);
    let mut ledgers = Vec::with_capacity(size);
    let mut errors = Vec::new();
    for (rank, (out, ledger)) in outcomes.into_iter().enumerate() {
        ledgers.push(ledger);
        match out {
            Ok(v) => results.push(v),
            Err(e) => errors.push((rank, e)),
        }
    }
    if errors.is_empty() {
        Ok(GridRun { per_rank: results, ledger: RunLedger::merge(ledgers) })
    } else {
        Err(SimFailure { errors })
    }
}

// Rendezvous point shared by all ranks of a run.
struct Hub {
    state: Mutex<HubState>,
    cv: Condvar,
    size: usize,
    mode: ExecMode,
}

struct HubState {
    slots: BTreeMap<(CommKey, u64), Slot>,
    finished: Vec<bool>,
    /// Rank is parked inside an incomplete collective.
    blocked: Vec<bool>,
    /// Reference mode: the single rank currently allowed to compute.
    baton: usize,
    aborted: Option<SimError>,
}

struct Slot {
    members: Vec<usize>,
    contributions: Vec<Option<Vec<f64>>>,
    arrived: usize,
    taken: usize,
    result: Option<Vec<f64>>,
}

impl Hub {
    fn new(size: usize, mode: ExecMode) -> Self {
        Hub {
            state: Mutex::new(HubState {
                slots: BTreeMap::new(),
                finished: vec![false; size],
                blocked: vec![false; size],
                baton: 0,
                aborted: None,
            }),
            cv: Condvar::new(),
            size,
            mode,
        }
    }

    fn wait_for_baton(&self, rank: usize) {
        let mut st = self.state.lock().unwrap();
        while st.baton != rank && st.aborted.is_none() {
            st = self.cv.wait(st).unwrap();
        }
    }

    fn allreduce(
        &self,
        rank: usize,
        pos: usize,
        comm: &Communicator,
        seq: u64,
        v: &[f64],
    ) -> Result<Vec<f64>, SimError> {
        let key = (comm.key, seq);
        let mut st = self.state.lock().unwrap();
        if let Some(err) = &st.aborted {
            return Err(err.clone());
        }

        // a member that already finished its program can never arrive
        if let Some(&gone) = comm.members.iter().find(|&&m| st.finished[m]) {
            let err = SimError::CollectiveMismatch {
                comm: comm.key.to_string(),
                seq,
                missing_rank: gone,
            };
            st.aborted = Some(err.clone());
            self.cv.notify_all();
            return Err(err);
        }

        let p = comm.size();
        let slot = st.slots.entry(key).or_insert_with(|| Slot {
            members: comm.members.clone(),
            contributions: vec![None; p],
            arrived: 0,
            taken: 0,
            result: None,
        });
        if let Some(expected) = slot.contributions.iter().flatten().next() {
            if expected.len() != v.len() {
                let err = SimError::LengthMismatch {
                    comm: comm.key.to_string(),
                    seq,
                    expected: expected.len(),
                    got: v.len(),
                    rank,
                };
                st.aborted = Some(err.clone());
                self.cv.notify_all();
                return Err(err);
            }
        }
        assert!(slot.contributions[pos].is_none(), "rank {rank} deposited twice on {key:?}");
        slot.contributions[pos] = Some(v.to_vec());
        slot.arrived += 1;

        if slot.arrived == p {
            // ascending-member left fold: ((c0 + c1) + c2) + ...
            let mut acc = slot.contributions[0].clone().unwrap();
            for c in slot.contributions[1..].iter().flatten() {
                for (a, b) in acc.iter_mut().zip(c) {
                    *a += b;
                }
            }
            slot.result = Some(acc);
            for m in slot.members.clone() {
                st.blocked[m] = false;
            }
            self.cv.notify_all();
            return Ok(self.take(&mut st, key));
        }

        // park until the collective completes
        st.blocked[rank] = true;
        match self.mode {
            ExecMode::Reference => {
                if !advance_baton(&mut st, rank, self.size) {
                    let err = deadlock_error(&st);
                    st.aborted = Some(err.clone());
                    self.cv.notify_all();
                    return Err(err);
                }
                self.cv.notify_all();
            }
            ExecMode::Concurrent => {
                let stuck = st.blocked.iter().filter(|&&b| b).count()
                    + st.finished.iter().filter(|&&f| f).count();
                if stuck == self.size {
                    let err = deadlock_error(&st);
                    st.aborted = Some(err.clone());
                    self.cv.notify_all();
                    return Err(err);
                }
            }
        }

        loop {
            if let Some(err) = &st.aborted {
                return Err(err.clone());
            }
            let ready = st.slots.get(&key).map(|s| s.result.is_some()).unwrap_or(false);
            if ready && (self.mode == ExecMode::Concurrent || st.baton == rank) {
                return Ok(self.take(&mut st, key));
            }
            st = self.cv.wait(st).unwrap();
        }
    }

    /// Copy the finished result out of the slot, dropping the slot once the
    /// last member has taken it.
    fn take(&self, st: &mut HubState, key: (CommKey, u64)) -> Vec<f64> {
        let slot = st.slots.get_mut(&key).unwrap();
        slot.taken += 1;
        if slot.taken == slot.members.len() {
            st.slots.remove(&key).unwrap().result.unwrap()
        } else {
            st.slots.get(&key).unwrap().result.clone().unwrap()
        }
    }

    fn finish(&self, rank: usize) {
        let mut st = self.state.lock().unwrap();
        st.finished[rank] = true;
        if st.aborted.is_none() {
            // any slot still waiting on this rank is now a deadlock
            let pending = st.slots.iter().find_map(|((ck, seq), slot)| {
                slot.members.contains(&rank)
                    .then(|| slot.result.is_none())
                    .and_then(|incomplete| incomplete.then(|| (ck.to_string(), *seq)))
            });
            if let Some((comm, seq)) = pending {
                st.aborted = Some(SimError::CollectiveMismatch { comm, seq, missing_rank: rank });
            } else if self.mode == ExecMode::Reference && st.baton == rank {
                if !advance_baton(&mut st, rank, self.size) {
                    let all_done = st.finished.iter().all(|&f| f);
                    if !all_done {
                        let err = deadlock_error(&st);
                        st.aborted = Some(err);
                    }
                }
            } else if self.mode == ExecMode::Concurrent {
                let stuck = st.blocked.iter().filter(|&&b| b).count()
                    + st.finished.iter().filter(|&&f| f).count();
                if stuck == self.size && st.blocked.iter().any(|&b| b) {
                    let err = deadlock_error(&st);
                    st.aborted = Some(err);
                }
            }
        }
        self.cv.notify_all();
    }
}

/// Hand the baton to the next runnable rank after `from`, scanning
/// ascending with wraparound. Returns false when nobody can run.
fn advance_baton(st: &mut HubState, from: usize, size: usize) -> bool {
    for step in 1..=size {
        let r = (from + step) % size;
        if !st.finished[r] && !st.blocked[r] {
            st.baton = r;
            return true;
        }
    }
    false
}

fn deadlock_error(st: &HubState) -> SimError {
    // deterministic choice: the lowest-keyed incomplete slot
    for ((ck, seq), slot) in &st.slots {
        if slot.result.is_none() {
            let missing = slot
                .members
                .iter()
                .zip(&slot.contributions)
                .find(|(_, c)| c.is_none())
                .map(|(&m, _)| m)
                .unwrap_or(slot.members[0]);
            return SimError::CollectiveMismatch {
                comm: ck.to_string(),
                seq: *seq,
                missing_rank: missing,
            };
        }
    }
    // all slots complete yet nobody can run: every rank is parked on a
    // result it cannot take, which cannot happen
    unreachable!("deadlock reported with no incomplete collective")
}
