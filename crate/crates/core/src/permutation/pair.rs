use std::collections::HashMap;

use ndarray::{Array1, Array2};
use rand::seq::index;
use serde::Serialize;

use super::engine::visit_block;
use super::{
    engine_run, finish, pool, PooledSample, SignBlock, SignStream, TestConfig, TestResult,
};
use crate::dispersion::{test_statistic, DispersionStats};
use crate::geometry::{
    build_alignment, mean_direction, normalize_rows, EmbeddingCloud, HouseholderAlignment,
};
use crate::rng::{substream, Domain};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlignmentMode {
    /// Reflect X onto Y's mean direction before pooling.
    #[default]
    Aligned,
    /// Pool the clouds as they are.
    Baseline,
}

/// An observed pair after alignment and pooling, ready for permutation.
#[derive(Clone, Debug)]
pub struct PreparedPair {
    pub pooled: PooledSample,
    pub t_obs: f64,
    pub mode: AlignmentMode,
    pub alignment: Option<HouseholderAlignment>,
    pub x_stats: DispersionStats,
    pub y_stats: DispersionStats,
}

#[derive(Clone, Debug)]
pub struct PairOutcome {
    pub result: TestResult,
    pub mode: AlignmentMode,
    /// `None` in baseline mode.
    pub alignment: Option<HouseholderAlignment>,
    pub x_stats: DispersionStats,
    pub y_stats: DispersionStats,
}

impl PairOutcome {
    pub fn aligned(&self) -> bool {
        self.mode == AlignmentMode::Aligned
    }
}

/// Normalized clouds → (optional) alignment of X → `T_obs` → pooled `Z`.
/// Y is never transformed.
pub fn prepare_pair(
    x: &EmbeddingCloud,
    y: &EmbeddingCloud,
    mode: AlignmentMode,
) -> Result<PreparedPair> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    let (x_used, alignment) = match mode {
        AlignmentMode::Aligned => {
            let mx = mean_direction(x)?;
            let my = mean_direction(y)?;
            let alignment = build_alignment(mx.direction.view(), my.direction.view())?;
            (alignment.apply(x)?, Some(alignment))
        }
        AlignmentMode::Baseline => (x.clone(), None),
    };
    let t_obs = test_statistic(&x_used, y)?;
    let x_stats = DispersionStats::of(&x_used)?;
    let y_stats = DispersionStats::of(y)?;
    Ok(PreparedPair {
        pooled: pool(&x_used, y)?,
        t_obs,
        mode,
        alignment,
        x_stats,
        y_stats,
    })
}

fn outcome(prepared: PreparedPair, result: TestResult) -> PairOutcome {
    PairOutcome {
        result,
        mode: prepared.mode,
        alignment: prepared.alignment,
        x_stats: prepared.x_stats,
        y_stats: prepared.y_stats,
    }
}

pub fn run_pair(
    x: &EmbeddingCloud,
    y: &EmbeddingCloud,
    config: &TestConfig,
    mode: AlignmentMode,
) -> Result<PairOutcome> {
    config.validate()?;
    let prepared = prepare_pair(x, y, mode)?;
    let result = engine_run(&prepared.pooled, prepared.t_obs, config)?;
    Ok(outcome(prepared, result))
}

/// [`run_pair`] on raw vectors, normalizing both clouds first.
pub fn run_pair_raw(
    x_raw: Array2<f64>,
    y_raw: Array2<f64>,
    config: &TestConfig,
    mode: AlignmentMode,
) -> Result<PairOutcome> {
    run_pair(
        &normalize_rows(x_raw)?,
        &normalize_rows(y_raw)?,
        config,
        mode,
    )
}

/// Tests many pairs with common group sizes, generating each sign block once
/// and applying it to every pair before moving on.
///
/// Every outcome equals what [`run_pair`] returns for that pair with the same
/// config.
pub fn run_batch(
    pairs: &[(EmbeddingCloud, EmbeddingCloud)],
    config: &TestConfig,
    mode: AlignmentMode,
) -> Result<Vec<PairOutcome>> {
    config.validate()?;
    let Some((first_x, first_y)) = pairs.first() else {
        return Ok(Vec::new());
    };
    let (n, m) = (first_x.n_rows(), first_y.n_rows());
    for (index, (x, y)) in pairs.iter().enumerate() {
        if (x.n_rows(), y.n_rows()) != (n, m) {
            return Err(Error::MixedShapes {
                index,
                n: x.n_rows(),
                m: y.n_rows(),
                expected_n: n,
                expected_m: m,
            });
        }
    }

    let prepared = pairs
        .iter()
        .map(|(x, y)| prepare_pair(x, y, mode))
        .collect::<Result<Vec<_>>>()?;
    let totals: Vec<Array1<f64>> = prepared.iter().map(|p| p.pooled.total()).collect();
    let mut counts = vec![0usize; prepared.len()];

    let stream = SignStream::new(config, n, m);
    let alt = config.alternative;
    // One U buffer per distinct dimension, shared by all pairs of that dimension.
    let mut u_buffers: HashMap<usize, Array2<f64>> = HashMap::new();
    let mut block = SignBlock::empty();
    for k in 0..stream.block_count() {
        stream.fill_block(k, &mut block);
        for ((pair, total), count) in prepared.iter().zip(&totals).zip(counts.iter_mut()) {
            let dim = pair.pooled.dim();
            let u = u_buffers
                .entry(dim)
                .or_insert_with(|| Array2::zeros((stream.block_size(), dim)));
            let t_obs = pair.t_obs;
            visit_block(&pair.pooled, total.view(), &block, u, |t| {
                if alt.exceeds(t, t_obs) {
                    *count += 1;
                }
            });
        }
    }

    Ok(prepared
        .into_iter()
        .zip(counts)
        .map(|(p, count)| {
            let result = finish(&p.pooled, p.t_obs, count, config);
            outcome(p, result)
        })
        .collect())
}

/// Seeded uniform subsample of `size` rows without replacement, kept in
/// their original order.
pub fn subsample(cloud: &EmbeddingCloud, size: usize, seed: u64) -> Result<EmbeddingCloud> {
    if size == 0 || size > cloud.n_rows() {
        return Err(Error::InvalidConfig(format!(
            "cannot subsample {size} rows from a cloud of {}",
            cloud.n_rows()
        )));
    }
    let mut rng = substream(seed, Domain::Subsample, 0);
    let mut rows = index::sample(&mut rng, cloud.n_rows(), size).into_vec();
    rows.sort_unstable();
    cloud.select_rows(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use ndarray::Array2;
    use rand_distr::{Distribution, StandardNormal};

    fn cloud(rows: usize, dim: usize, seed: u64, shift: f64) -> EmbeddingCloud {
        let mut rng = substream(seed, Domain::Synthetic, 9);
        let raw = Array2::from_shape_fn((rows, dim), |(_, j)| {
            let z: f64 = StandardNormal.sample(&mut rng);
            if j == 0 {
                z + shift
            } else {
                z
            }
        });
        normalize_rows(raw).unwrap()
    }

    fn config(seed: u64) -> TestConfig {
        TestConfig {
            n_permutations: 500,
            block_size: 128,
            seed,
            ..TestConfig::default()
        }
    }

    #[test]
    fn aligned_mode_leaves_y_and_maps_x_mean_onto_y_mean() {
        let x = cloud(30, 6, 1, 2.0);
        let y = cloud(25, 6, 2, -1.5);
        let p = prepare_pair(&x, &y, AlignmentMode::Aligned).unwrap();
        let z = p.pooled.z();
        for j in 0..25 {
            assert_eq!(z.row(30 + j), y.row(j));
        }
        let x_aligned =
            EmbeddingCloud::from_unit_rows(z.slice(ndarray::s![..30, ..]).to_owned()).unwrap();
        let mx = mean_direction(&x_aligned).unwrap().direction;
        let my = mean_direction(&y).unwrap().direction;
        assert!((&mx - &my).iter().all(|v| v.abs() < 1e-9));
        // Rotation does not change dispersion, hence not T_obs either.
        let b = prepare_pair(&x, &y, AlignmentMode::Baseline).unwrap();
        assert!((p.t_obs - b.t_obs).abs() < 1e-12);
        assert!(b.alignment.is_none());
    }

    #[test]
    fn batch_equals_independent_runs() {
        let pairs: Vec<_> = (0..3)
            .map(|i| (cloud(20, 5, 10 + i, 1.0), cloud(15, 5, 20 + i, 0.3)))
            .collect();
        for mode in [AlignmentMode::Aligned, AlignmentMode::Baseline] {
            let batch = run_batch(&pairs, &config(77), mode).unwrap();
            for ((x, y), out) in pairs.iter().zip(&batch) {
                let single = run_pair(x, y, &config(77), mode).unwrap();
                assert_eq!(single.result, out.result);
            }
        }
    }

    #[test]
    fn identical_pairs_give_identical_results() {
        let pair = (cloud(12, 4, 1, 0.5), cloud(12, 4, 2, 0.5));
        let pairs = vec![pair.clone(), pair.clone(), pair];
        let out = run_batch(&pairs, &config(3), AlignmentMode::Aligned).unwrap();
        assert_eq!(out[0].result, out[1].result);
        assert_eq!(out[1].result, out[2].result);
    }

    #[test]
    fn mixed_shapes_are_rejected() {
        let pairs = vec![
            (cloud(12, 4, 1, 0.5), cloud(10, 4, 2, 0.5)),
            (cloud(11, 4, 3, 0.5), cloud(10, 4, 4, 0.5)),
        ];
        let err = run_batch(&pairs, &config(3), AlignmentMode::Aligned).unwrap_err();
        assert!(matches!(
            err,
            Error::MixedShapes {
                index: 1,
                n: 11,
                ..
            }
        ));
        assert!(run_batch(&[], &config(3), AlignmentMode::Aligned)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn degenerate_mean_surfaces_in_aligned_mode() {
        let x = EmbeddingCloud::from_unit_rows(ndarray::arr2(&[[1.0, 0.0], [-1.0, 0.0]])).unwrap();
        let y = cloud(5, 2, 1, 1.0);
        let err = run_pair(&x, &y, &config(1), AlignmentMode::Aligned).unwrap_err();
        assert!(matches!(err, Error::DegenerateMean));
        let err = run_pair(&x, &y, &config(1), AlignmentMode::Baseline).unwrap_err();
        assert!(matches!(err, Error::DegenerateBreadth));
    }

    #[test]
    fn subsampling_is_seeded_and_without_replacement() {
        let c = cloud(50, 3, 4, 0.0);
        let a = subsample(&c, 20, 9).unwrap();
        let b = subsample(&c, 20, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_rows(), 20);
        let mut seen = Vec::new();
        for i in 0..20 {
            let pos = (0..50).find(|&j| c.row(j) == a.row(i)).unwrap();
            assert!(!seen.contains(&pos));
            seen.push(pos);
        }
        assert!(seen.windows(2).all(|w| w[0] < w[1]));
        assert_ne!(subsample(&c, 20, 10).unwrap(), a);
        assert_eq!(subsample(&c, 50, 1).unwrap(), c);
        assert!(subsample(&c, 51, 1).is_err());
    }

    #[test]
    fn raw_inputs_are_normalized() {
        let mut rng = substream(3, Domain::Synthetic, 0);
        let x = Array2::from_shape_fn((10, 3), |_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            5.0 * z + 1.0
        });
        let y = Array2::from_shape_fn((8, 3), |_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            0.1 * z + 0.2
        });
        let raw = run_pair_raw(x.clone(), y.clone(), &config(5), AlignmentMode::Aligned).unwrap();
        let unit = run_pair(
            &normalize_rows(x).unwrap(),
            &normalize_rows(y).unwrap(),
            &config(5),
            AlignmentMode::Aligned,
        )
        .unwrap();
        assert_eq!(raw.result, unit.result);
    }
}
