//! Reference loop: one partition at a time, group sums rebuilt from the rows.

use ndarray::ArrayView1;

use super::{finish, PooledSample, SignBlock, SignStream, TestConfig, TestResult};
use crate::dispersion::statistic_from_mrl;
use crate::{Error, Result};

/// `T` for the partition encoded by one sign row, summing each group's rows directly.
pub fn partition_statistic(pooled: &PooledSample, signs: ArrayView1<'_, f64>) -> f64 {
    let d = pooled.dim();
    let mut sum1 = vec![0.0; d];
    let mut sum2 = vec![0.0; d];
    partition_statistic_into(pooled, signs, &mut sum1, &mut sum2)
}

fn partition_statistic_into(
    pooled: &PooledSample,
    signs: ArrayView1<'_, f64>,
    sum1: &mut [f64],
    sum2: &mut [f64],
) -> f64 {
    sum1.fill(0.0);
    sum2.fill(0.0);
    let z = pooled.z();
    for (row, &s) in z.rows().into_iter().zip(signs.iter()) {
        let row = row.as_slice().expect("pooled rows are contiguous");
        let acc = if s > 0.0 { &mut *sum1 } else { &mut *sum2 };
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
    let r1 = norm(sum1) / pooled.n() as f64;
    let r2 = norm(sum2) / pooled.m() as f64;
    statistic_from_mrl(r1, r2, pooled.dim())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn for_each_statistic(pooled: &PooledSample, config: &TestConfig, mut visit: impl FnMut(f64)) {
    let d = pooled.dim();
    let mut sum1 = vec![0.0; d];
    let mut sum2 = vec![0.0; d];
    let stream = SignStream::new(config, pooled.n(), pooled.m());
    let mut block = SignBlock::empty();
    for k in 0..stream.block_count() {
        stream.fill_block(k, &mut block);
        for b in 0..block.rows() {
            visit(partition_statistic_into(
                pooled,
                block.row(b),
                &mut sum1,
                &mut sum2,
            ));
        }
    }
}

/// Every permuted statistic, in stream order.
pub fn naive_statistics(pooled: &PooledSample, config: &TestConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let mut out = Vec::with_capacity(config.n_permutations);
    for_each_statistic(pooled, config, |t| out.push(t));
    Ok(out)
}

pub fn naive_test(pooled: &PooledSample, t_obs: f64, config: &TestConfig) -> Result<TestResult> {
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
