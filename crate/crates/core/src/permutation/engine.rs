//! Batched engine: all permuted group sums of a block from one matrix product.
//!
//! For a sign block `S` (rows `s⁽ᵇ⁾`), `U = S·Z` holds `group1 − group2` sums
//! row by row. With the column totals `t = 1ᵀZ`, the group sums follow as
//! `σ₁ = (t + U_b)/2` and `σ₂ = (t − U_b)/2`, so one GEMM per block suffices.
//! Only the exceedance count survives a block; working memory beyond `Z` is
//! the sign block, `U`, and `t`.

use faer::linalg::matmul::matmul;
use faer::{Accum, MatMut, MatRef, Par};
use ndarray::{Array1, Array2, ArrayView1};

use super::{finish, PooledSample, SignBlock, SignStream, TestConfig, TestResult};
use crate::dispersion::statistic_from_mrl;
use crate::{Error, Result};

/// Bytes of working memory the engine holds besides `Z` for a block size of `block`.
pub fn workspace_bytes(n_total: usize, dim: usize, block: usize) -> usize {
    let f = std::mem::size_of::<f64>();
    block * n_total * f + block * dim * f + dim * f + n_total * std::mem::size_of::<u32>()
}

/// Computes `U = S·Z` into `u` and hands every `T⁽ᵇ⁾` of the block to `visit`.
pub(crate) fn visit_block(
    pooled: &PooledSample,
    total: ArrayView1<'_, f64>,
    block: &SignBlock,
    u: &mut Array2<f64>,
    mut visit: impl FnMut(f64),
) {
    let rows = block.rows();
    let (n_total, dim) = (pooled.n_total(), pooled.dim());
    let signs = block.matrix();
    let z = pooled.z();
    let u = &mut u.as_slice_mut().expect("U is standard-layout")[..rows * dim];
    matmul(
        MatMut::from_row_major_slice_mut(u, rows, dim),
        Accum::Replace,
        MatRef::from_row_major_slice(
            signs.as_slice().expect("sign blocks are standard-layout"),
            rows,
            n_total,
        ),
        MatRef::from_row_major_slice(z.as_slice().expect("Z is standard-layout"), n_total, dim),
        1.0,
        Par::Seq,
    );

    let two_n = 2.0 * pooled.n() as f64;
    let two_m = 2.0 * pooled.m() as f64;
    let total = total.as_slice().expect("column totals are contiguous");
    for diff in u.chunks_exact(dim) {
        let mut sq1 = 0.0;
        let mut sq2 = 0.0;
        for (&tk, &uk) in total.iter().zip(diff) {
            let a = tk + uk;
            let b = tk - uk;
            sq1 += a * a;
            sq2 += b * b;
        }
        visit(statistic_from_mrl(
            sq1.sqrt() / two_n,
            sq2.sqrt() / two_m,
            dim,
        ));
    }
}

fn check_block(pooled: &PooledSample, block: &SignBlock) -> Result<()> {
    if block.n_total() != pooled.n_total() {
        return Err(Error::DimensionMismatch {
            expected: pooled.n_total(),
            found: block.n_total(),
        });
    }
    if block.n_plus() != pooled.n() {
        return Err(Error::InvalidShape(format!(
            "sign rows select {} rows but group 1 has {}",
            block.n_plus(),
            pooled.n()
        )));
    }
    Ok(())
}

/// `T⁽ᵇ⁾` for explicitly supplied sign rows.
pub fn block_statistics(pooled: &PooledSample, block: &SignBlock) -> Result<Vec<f64>> {
    check_block(pooled, block)?;
    let total = pooled.total();
    let mut u = Array2::zeros((block.rows(), pooled.dim()));
    let mut out = Vec::with_capacity(block.rows());
    visit_block(pooled, total.view(), block, &mut u, |t| out.push(t));
    Ok(out)
}

fn for_each_statistic(pooled: &PooledSample, config: &TestConfig, mut visit: impl FnMut(f64)) {
    let stream = SignStream::new(config, pooled.n(), pooled.m());
    let total: Array1<f64> = pooled.total();
    let mut u = Array2::zeros((stream.block_size(), pooled.dim()));
    let mut block = SignBlock::empty();
    for k in 0..stream.block_count() {
        stream.fill_block(k, &mut block);
        visit_block(pooled, total.view(), &block, &mut u, &mut visit);
    }
}

/// Every permuted statistic, in stream order.
pub fn engine_statistics(pooled: &PooledSample, config: &TestConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let mut out = Vec::with_capacity(config.n_permutations);
    for_each_statistic(pooled, config, |t| out.push(t));
    Ok(out)
}

pub fn engine_run(pooled: &PooledSample, t_obs: f64, config: &TestConfig) -> Result<TestResult> {
    config.validate()?;
    if !t_obs.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "observed statistic {t_obs} is not finite"
        )));
    }
    let alt = config.alternative;
    let mut count = 0;
    for_each_statistic(pooled, config, |t| {
        if alt.exceeds(t, t_obs) {
            count += 1;
        }
    });
    Ok(finish(pooled, t_obs, count, config))
}
