//! Timing harness comparing the reference loop with the batched engine.

use std::time::Instant;

use serde::Serialize;

use crate::permutation::{engine_run, naive_test, prepare_pair, AlignmentMode, TestConfig};
use crate::rng::{substream, Domain};
use crate::synthetic::{direction_at_angle, random_unit_vector, sample_vmf_with};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchParams {
    /// Pooled row count `N`, split evenly between the groups.
    pub rows: usize,
    pub dim: usize,
    pub n_permutations: usize,
    pub block_size: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for BenchParams {
    fn default() -> Self {
        Self {
            rows: 2000,
            dim: 256,
            n_permutations: 20_000,
            block_size: 1024,
            repeats: 1,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub n_total: usize,
    pub dim: usize,
    pub b: usize,
    pub block_size: usize,
    pub repeats: usize,
    /// Best wall-clock time over the repeats.
    pub naive_total_ms: f64,
    pub engine_total_ms: f64,
    pub naive_per_perm_ms: f64,
    pub engine_per_perm_ms: f64,
    /// `naive_total_ms / engine_total_ms`.
    pub speedup: f64,
    pub exceedances: usize,
}

/// Times both engines on one synthetic pair with the same sign stream.
///
/// Fails with [`Error::EquivalenceFailure`] instead of reporting times when
/// the exceedance counts differ in any repeat.
pub fn run_bench(params: &BenchParams) -> Result<BenchReport> {
    if params.rows < 4 || params.dim < 2 || params.repeats == 0 {
        return Err(Error::InvalidConfig(
            "bench needs at least 4 rows, d >= 2 and one repeat".into(),
        ));
    }
    let config = TestConfig {
        n_permutations: params.n_permutations,
        block_size: params.block_size,
        seed: params.seed,
        ..TestConfig::default()
    };
    config.validate()?;

    let mut rng = substream(params.seed, Domain::Bench, 0);
    let n = params.rows / 2;
    let m = params.rows - n;
    let mu_x = random_unit_vector(params.dim, &mut rng);
    let mu_y = direction_at_angle(&mu_x, 0.5, &mut rng);
    let x = sample_vmf_with(&mu_x, params.dim as f64, n, &mut rng)?;
    let y = sample_vmf_with(&mu_y, params.dim as f64, m, &mut rng)?;
    let pair = prepare_pair(&x, &y, AlignmentMode::Aligned)?;

    let mut naive_best = f64::INFINITY;
    let mut engine_best = f64::INFINITY;
    let mut exceedances = 0;
    for _ in 0..params.repeats {
        let start = Instant::now();
        let naive = naive_test(&pair.pooled, pair.t_obs, &config)?;
        naive_best = naive_best.min(start.elapsed().as_secs_f64() * 1e3);

        let start = Instant::now();
        let engine = engine_run(&pair.pooled, pair.t_obs, &config)?;
        engine_best = engine_best.min(start.elapsed().as_secs_f64() * 1e3);

        if naive.exceedances != engine.exceedances {
            return Err(Error::EquivalenceFailure {
                naive: naive.exceedances,
                engine: engine.exceedances,
            });
        }
        exceedances = engine.exceedances;
    }

    let b = params.n_permutations as f64;
    Ok(BenchReport {
        n_total: params.rows,
        dim: params.dim,
        b: params.n_permutations,
        block_size: config.effective_block_size(),
        repeats: params.repeats,
        naive_total_ms: naive_best,
        engine_total_ms: engine_best,
        naive_per_perm_ms: naive_best / b,
        engine_per_perm_ms: engine_best / b,
        speedup: naive_best / engine_best,
        exceedances,
    })
}
