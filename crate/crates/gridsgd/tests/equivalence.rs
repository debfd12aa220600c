//! Cross-cutting equivalence properties, exercised through the public API
//! the way a downstream user would: every distributed layout has a cheap
//! sequential twin, and the simulated grid must be deterministic enough
//! that reruns and scheduler changes are invisible in the results.

use proptest::prelude::*;

use gridsgd::dataio::gen_synthetic;
use gridsgd::logreg::rel_l2;
use gridsgd::parsolvers::{fedavg, hybrid_sgd, par_sgd, FedSampling};
use gridsgd::seqsolvers::{sgd, sstep_sgd, SolverConfig};
use gridsgd::simgrid::{run_grid, CostCategory, CostParams, ExecMode, ProcessorGrid, SimError};

/// The collective sums in ascending member order, and that order is part of
/// the contract: with order-sensitive addends every rank must reproduce the
/// serial left fold bit for bit, on both schedulers. (The runtime's own
/// tests use exactly-representable values, which any summation order would
/// satisfy; this one would catch a tree reduction.)
#[test]
fn reduction_order_is_pinned_bit_for_bit() {
    for mode in [ExecMode::Reference, ExecMode::Concurrent] {
        for p in [3usize, 5, 13, 64] {
            let grid = ProcessorGrid::new(p, 1);
            let contribution = |rank: usize| -> Vec<f64> {
                (0..9).map(|i| ((rank * 31 + i * 17) as f64).sin()).collect()
            };
            let run = run_grid::<Vec<f64>, SimError, _>(&grid, mode, |ctx| {
                ctx.allreduce_sum(&ctx.world(), &contribution(ctx.rank()), CostCategory::SgdComm)
            })
            .unwrap();
            let mut expected = contribution(0);
            for r in 1..p {
                for (e, v) in expected.iter_mut().zip(contribution(r)) {
                    *e += v;
                }
            }
            let expected_bits: Vec<u64> = expected.iter().map(|v| v.to_bits()).collect();
            for (rank, got) in run.per_rank.iter().enumerate() {
                let got_bits: Vec<u64> = got.iter().map(|v| v.to_bits()).collect();
                assert_eq!(got_bits, expected_bits, "p={p} rank={rank} mode={mode:?}");
            }
        }
    }
}

/// Scheduler-mode identity is a hard invariant at the solver level too, and
/// it must be stable under repetition: free-running threads are allowed any
/// arrival order, never a different answer.
#[test]
fn concurrent_reruns_never_drift_from_the_reference_schedule() {
    let d = gen_synthetic(96, 14, 6, 77).unwrap();
    let x0 = vec![0.0; d.num_cols()];
    let params = CostParams::default();
    let cfg = SolverConfig {
        batch_size: 12,
        step_size: 0.25,
        iterations: 24,
        block_len: 2,
        local_iters: 4,
        trace_interval: 8,
        ..SolverConfig::default()
    };

    let grid = ProcessorGrid::new(2, 3);
    let reference = par_sgd(&d, &grid, ExecMode::Reference, &cfg, &params, &x0).unwrap();
    for trial in 0..3 {
        let run = par_sgd(&d, &grid, ExecMode::Concurrent, &cfg, &params, &x0).unwrap();
        assert_eq!(run.x, reference.x, "par trial {trial}");
        assert_eq!(run.trace, reference.trace, "par trial {trial}");
        assert_eq!(run.ledger, reference.ledger, "par trial {trial}");
    }

    let reference =
        fedavg(&d, 4, ExecMode::Reference, &cfg, &params, &x0, FedSampling::Contiguous).unwrap();
    for trial in 0..3 {
        let run =
            fedavg(&d, 4, ExecMode::Concurrent, &cfg, &params, &x0, FedSampling::Contiguous)
                .unwrap();
        assert_eq!(run.x, reference.x, "fedavg trial {trial}");
        assert_eq!(run.ledger, reference.ledger, "fedavg trial {trial}");
    }

    let grid = ProcessorGrid::new(2, 2);
    let reference = hybrid_sgd(&d, &grid, ExecMode::Reference, &cfg, &params, &x0).unwrap();
    for trial in 0..3 {
        let run = hybrid_sgd(&d, &grid, ExecMode::Concurrent, &cfg, &params, &x0).unwrap();
        assert_eq!(run.x, reference.x, "hybrid trial {trial}");
        assert_eq!(run.ledger, reference.ledger, "hybrid trial {trial}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    /// Any grid shape computes the same iterates as sequential SGD on the
    /// same batches; splitting rows and columns only reorders floating-point
    /// sums, so agreement is near-bitwise.
    #[test]
    fn every_layout_tracks_sequential_sgd(
        rows in prop_oneof![Just(1usize), Just(2), Just(4)],
        cols in 1usize..=3,
        seed in 0u64..1_000,
        step_num in 1u32..=8,
        iterations in 1usize..=24,
    ) {
        let d = gen_synthetic(64, 11, 5, seed).unwrap();
        let cfg = SolverConfig {
            batch_size: 8,
            step_size: step_num as f64 / 16.0,
            iterations,
            trace_interval: 0,
            ..SolverConfig::default()
        };
        let x0 = vec![0.0; d.num_cols()];
        let z = gridsgd::dataio::scale_rows_by_labels(&d);
        let seq = sgd(&z, d.num_rows(), &cfg, &x0).unwrap();
        let grid = ProcessorGrid::new(rows, cols);
        let run = par_sgd(&d, &grid, ExecMode::Reference, &cfg, &CostParams::default(), &x0)
            .unwrap();
        let err = rel_l2(&run.x, &seq.x);
        prop_assert!(err <= 1e-12, "{rows}x{cols}: rel err {err:e}");
    }

    /// Grouping any number of steps into blocks is algebra, not a new
    /// method: the blocked solver must track the plain one for every block
    /// length dividing the iteration count.
    #[test]
    fn any_block_length_tracks_plain_sgd(
        block_len in 1usize..=6,
        blocks in 1usize..=8,
        seed in 0u64..1_000,
        step_num in 1u32..=8,
    ) {
        let d = gen_synthetic(72, 13, 6, seed).unwrap();
        let z = gridsgd::dataio::scale_rows_by_labels(&d);
        let cfg = SolverConfig {
            batch_size: 8,
            step_size: step_num as f64 / 16.0,
            iterations: block_len * blocks,
            block_len,
            trace_interval: 0,
            ..SolverConfig::default()
        };
        let x0 = vec![0.0; d.num_cols()];
        let plain_cfg = SolverConfig { block_len: 1, ..cfg.clone() };
        let plain = sgd(&z, d.num_rows(), &plain_cfg, &x0).unwrap();
        let blocked = sstep_sgd(&z, d.num_rows(), &cfg, &x0).unwrap();
        let err = rel_l2(&blocked.x, &plain.x);
        prop_assert!(err <= 1e-10, "block_len {block_len}: rel err {err:e}");
    }

    /// A column-only grid changes the data layout, not the algorithm: it
    /// must track the sequential blocked solver for any split.
    #[test]
    fn column_splits_track_the_blocked_solver(
        cols in 1usize..=4,
        block_len in 1usize..=4,
        seed in 0u64..1_000,
    ) {
        let d = gen_synthetic(64, 12, 5, seed).unwrap();
        let z = gridsgd::dataio::scale_rows_by_labels(&d);
        let cfg = SolverConfig {
            batch_size: 8,
            step_size: 0.25,
            iterations: block_len * 6,
            block_len,
            local_iters: block_len,
            trace_interval: 0,
            ..SolverConfig::default()
        };
        let x0 = vec![0.0; d.num_cols()];
        let seq = sstep_sgd(&z, d.num_rows(), &cfg, &x0).unwrap();
        let grid = ProcessorGrid::new(1, cols);
        let run = hybrid_sgd(&d, &grid, ExecMode::Reference, &cfg, &CostParams::default(), &x0)
            .unwrap();
        let err = rel_l2(&run.x, &seq.x);
        prop_assert!(err <= 1e-12, "1x{cols} block_len {block_len}: rel err {err:e}");
    }
}
