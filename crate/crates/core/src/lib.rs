//! Two-sample permutation tests for the dispersion of unit-vector clouds.
//!
//! The test maps the mean direction of one cloud onto the other with a single
//! Householder reflection, pools the aligned clouds, and compares the
//! log-breadth difference of the observed split against random relabelings of
//! the pool. Two engines compute the permutation distribution: a reference
//! loop ([`naive_test`]) and a batched engine ([`engine_run`]) that recovers all
//! permuted group sums of a block with one matrix product against a ±1 sign
//! matrix. Both consume the same sign stream and agree permutation by
//! permutation.

// `!(x >= bound)` is used on purpose so that NaN falls into the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod dispersion;
mod error;
pub mod geometry;
pub mod io;
pub mod permutation;
pub mod rng;
pub mod stats;
pub mod synthetic;

pub use dispersion::{breadth, kappa_from_mrl, log_breadth, mrl, test_statistic, DispersionStats};
pub use error::{Error, Result};
pub use geometry::{
    apply_alignment, build_alignment, mean_direction, normalize_rows, EmbeddingCloud,
    HouseholderAlignment, MeanDirection,
};
pub use permutation::{
    engine_run, naive_test, p_value, pool, run_batch, run_pair, subsample, AlignmentMode,
    Alternative, PairOutcome, PooledSample, SignBlock, SignStream, TestConfig, TestResult,
};
