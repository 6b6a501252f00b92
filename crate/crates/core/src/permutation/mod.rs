//! Fixed-space permutation tests on an aligned pooled sample.
//!
//! Permutations are encoded as rows of a ±1 sign matrix with exactly `n`
//! entries `+1` (group 1). Sign rows come from a [`SignStream`], which splits
//! `B` permutations into blocks of at most `B₀` rows, each generated from its
//! own seeded substream. [`naive_test`] and [`engine_run`] read the same
//! stream, so they see the same partitions in the same order.

mod engine;
mod naive;
mod pair;
mod signs;

use std::fmt;
use std::str::FromStr;

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::dispersion::resultant_length;
use crate::geometry::EmbeddingCloud;
use crate::{Error, Result};

pub use engine::{block_statistics, engine_run, engine_statistics, workspace_bytes};
pub use naive::{naive_statistics, naive_test, partition_statistic};
pub use pair::{
    prepare_pair, run_batch, run_pair, run_pair_raw, subsample, AlignmentMode, PairOutcome,
    PreparedPair,
};
pub use signs::{generate_sign_block, SignBlock, SignStream};

pub const DEFAULT_PERMUTATIONS: usize = 5000;
pub const DEFAULT_BLOCK_SIZE: usize = 1024;
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Permuted statistics within this distance of the observed one count as ties,
/// and ties count as exceedances.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    /// Group 1 is broader: counts `T⁽ᵇ⁾ ≥ T_obs`.
    #[default]
    Greater,
    /// Counts `|T⁽ᵇ⁾| ≥ |T_obs|`.
    TwoSided,
}

impl Alternative {
    #[inline]
    pub fn exceeds(self, permuted: f64, observed: f64) -> bool {
        match self {
            Alternative::Greater => permuted >= observed - TIE_TOLERANCE,
            Alternative::TwoSided => permuted.abs() >= observed.abs() - TIE_TOLERANCE,
        }
    }
}

impl fmt::Display for Alternative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Alternative::Greater => "greater",
            Alternative::TwoSided => "two-sided",
        })
    }
}

impl FromStr for Alternative {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greater" => Ok(Alternative::Greater),
            "two-sided" | "two_sided" => Ok(Alternative::TwoSided),
            other => Err(Error::InvalidConfig(format!(
                "unknown alternative `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub n_permutations: usize,
    /// Requested block size; blocks never exceed `n_permutations`.
    pub block_size: usize,
    pub alternative: Alternative,
    pub seed: u64,
    /// Only used when reporting rejections.
    pub alpha: f64,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            n_permutations: DEFAULT_PERMUTATIONS,
            block_size: DEFAULT_BLOCK_SIZE,
            alternative: Alternative::Greater,
            seed: 0,
            alpha: DEFAULT_ALPHA,
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_permutations == 0 {
            return Err(Error::InvalidConfig("need at least one permutation".into()));
        }
        if self.block_size == 0 {
            return Err(Error::InvalidConfig("block size must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn effective_block_size(&self) -> usize {
        self.block_size.clamp(1, self.n_permutations.max(1))
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestResult {
    pub t_obs: f64,
    pub p_value: f64,
    pub exceedances: usize,
    pub r_x: f64,
    pub r_y: f64,
    pub alternative: Alternative,
    pub b_used: usize,
}

impl TestResult {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value <= alpha
    }
}

/// Permutation p-value with the +1 correction, `(1 + exceedances)/(B + 1)`.
pub fn p_value(exceedances: usize, n_permutations: usize) -> f64 {
    debug_assert!(exceedances <= n_permutations);
    (1 + exceedances) as f64 / (n_permutations + 1) as f64
}

/// The pooled matrix `Z = X' ∪ Y` (X' rows first), frozen for the whole test.
#[derive(Clone, Debug, PartialEq)]
pub struct PooledSample {
    z: Array2<f64>,
    n: usize,
    m: usize,
}

impl PooledSample {
    /// Wraps an already-stacked matrix whose first `n` rows form group 1.
    pub fn from_matrix(z: Array2<f64>, n: usize) -> Result<Self> {
        let total = z.nrows();
        if n == 0 || n >= total {
            return Err(Error::InvalidShape(format!(
                "both groups need at least one row (n = {n}, N = {total})"
            )));
        }
        if z.ncols() < 2 {
            return Err(Error::InvalidShape("pooled dimension must be >= 2".into()));
        }
        Ok(Self { z, n, m: total - n })
    }

    pub fn z(&self) -> ArrayView2<'_, f64> {
        self.z.view()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_total(&self) -> usize {
        self.n + self.m
    }

    pub fn dim(&self) -> usize {
        self.z.ncols()
    }

    /// Column sums `t = 1ᵀZ`.
    pub fn total(&self) -> Array1<f64> {
        self.z.sum_axis(Axis(0))
    }

    /// Resultant lengths of the unpermuted groups.
    pub fn observed_mrls(&self) -> (f64, f64) {
        let sx = self.z.slice(s![..self.n, ..]).sum_axis(Axis(0));
        let sy = self.z.slice(s![self.n.., ..]).sum_axis(Axis(0));
        (
            resultant_length(sx.view(), self.n),
            resultant_length(sy.view(), self.m),
        )
    }
}

/// Stacks the aligned `X'` rows on top of the `Y` rows.
pub fn pool(x_aligned: &EmbeddingCloud, y: &EmbeddingCloud) -> Result<PooledSample> {
    if x_aligned.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x_aligned.dim(),
            found: y.dim(),
        });
    }
    let z = concatenate(Axis(0), &[x_aligned.data(), y.data()])
        .expect("row counts are free and column counts match");
    PooledSample::from_matrix(z, x_aligned.n_rows())
}

fn finish(
    pooled: &PooledSample,
    t_obs: f64,
    exceedances: usize,
    config: &TestConfig,
) -> TestResult {
    let (r_x, r_y) = pooled.observed_mrls();
    TestResult {
        t_obs,
        p_value: p_value(exceedances, config.n_permutations),
        exceedances,
        r_x,
        r_y,
        alternative: config.alternative,
        b_used: config.n_permutations,
    }
}
