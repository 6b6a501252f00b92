//! Unit-sphere clouds, mean directions and Householder mean-direction alignment.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::{Error, Result};

/// Rows with a Euclidean norm below this are rejected as zero vectors.
pub const ZERO_NORM: f64 = 1e-12;
/// Resultant norms below this leave the mean direction undefined.
pub const DEGENERATE_MEAN: f64 = 1e-12;
/// Mean directions closer than this are treated as coincident.
pub const COINCIDENT_DIRECTIONS: f64 = 1e-9;

/// An `n_rows × dim` matrix of row vectors on the unit sphere.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingCloud {
    data: Array2<f64>,
}

impl EmbeddingCloud {
    /// Wraps rows that are already unit-norm. Only the shape is checked.
    pub fn from_unit_rows(data: Array2<f64>) -> Result<Self> {
        check_shape(&data)?;
        Ok(Self { data })
    }

    pub fn n_rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.row(i)
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.data
    }

    /// Sum of all rows.
    pub fn resultant(&self) -> Array1<f64> {
        self.data.sum_axis(Axis(0))
    }

    /// A new cloud made of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        Self::from_unit_rows(self.data.select(Axis(0), rows))
    }
}

fn check_shape(data: &Array2<f64>) -> Result<()> {
    if data.nrows() == 0 {
        return Err(Error::InvalidShape("a cloud needs at least one row".into()));
    }
    if data.ncols() < 2 {
        return Err(Error::InvalidShape(format!(
            "a cloud needs dimension >= 2, got {}",
            data.ncols()
        )));
    }
    Ok(())
}

/// Projects every row onto the unit sphere.
pub fn normalize_rows(mut raw: Array2<f64>) -> Result<EmbeddingCloud> {
    check_shape(&raw)?;
    for (i, mut row) in raw.rows_mut().into_iter().enumerate() {
        let norm = row.dot(&row).sqrt();
        if !(norm >= ZERO_NORM) {
            return Err(Error::ZeroVector(i));
        }
        row /= norm;
    }
    Ok(EmbeddingCloud { data: raw })
}

/// Unit mean direction of a cloud together with the norm of its mean vector.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanDirection {
    pub direction: Array1<f64>,
    /// `||x̄||`, which is also the cloud's mean resultant length.
    pub resultant_norm: f64,
}

pub fn mean_direction(cloud: &EmbeddingCloud) -> Result<MeanDirection> {
    let mean = cloud.resultant() / cloud.n_rows() as f64;
    let norm = mean.dot(&mean).sqrt();
    if !(norm >= DEGENERATE_MEAN) {
        return Err(Error::DegenerateMean);
    }
    Ok(MeanDirection {
        direction: mean / norm,
        resultant_norm: norm,
    })
}

/// The reflection `H = I − 2uuᵀ` that maps one unit mean direction onto another.
///
/// `H` is never materialized; it is applied as one dot product and one scaled
/// subtraction per vector.
#[derive(Clone, Debug, PartialEq)]
pub struct HouseholderAlignment {
    axis: Array1<f64>,
    identity: bool,
}

impl HouseholderAlignment {
    pub fn identity(dim: usize) -> Self {
        Self {
            axis: Array1::zeros(dim),
            identity: true,
        }
    }

    /// Unit normal of the reflecting hyperplane (all zeros for the identity).
    pub fn axis(&self) -> ArrayView1<'_, f64> {
        self.axis.view()
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    pub fn dim(&self) -> usize {
        self.axis.len()
    }

    /// `v − 2u(uᵀv)`.
    pub fn reflect(&self, v: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v.len(),
            });
        }
        let mut out = v.to_owned();
        if !self.identity {
            let proj = self.axis.dot(&v);
            out.scaled_add(-2.0 * proj, &self.axis);
        }
        Ok(out)
    }

    /// Applies the reflection to every row: `X' = X − 2(Xu)uᵀ`.
    pub fn apply(&self, cloud: &EmbeddingCloud) -> Result<EmbeddingCloud> {
        if cloud.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: cloud.dim(),
            });
        }
        if self.identity {
            return Ok(cloud.clone());
        }
        let proj = cloud.data.dot(&self.axis);
        let mut data = cloud.data.clone();
        for (mut row, p) in data.rows_mut().into_iter().zip(proj.iter()) {
            row.scaled_add(-2.0 * p, &self.axis);
        }
        Ok(EmbeddingCloud { data })
    }
}

/// Builds the reflection taking `x_dir` to `y_dir`. Both inputs must be unit vectors.
pub fn build_alignment(
    x_dir: ArrayView1<'_, f64>,
    y_dir: ArrayView1<'_, f64>,
) -> Result<HouseholderAlignment> {
    if x_dir.len() != y_dir.len() {
        return Err(Error::DimensionMismatch {
            expected: x_dir.len(),
            found: y_dir.len(),
        });
    }
    debug_assert!((x_dir.dot(&x_dir).sqrt() - 1.0).abs() < 1e-6);
    debug_assert!((y_dir.dot(&y_dir).sqrt() - 1.0).abs() < 1e-6);

    let diff = &x_dir - &y_dir;
    let norm = diff.dot(&diff).sqrt();
    if norm < COINCIDENT_DIRECTIONS {
        return Ok(HouseholderAlignment::identity(x_dir.len()));
    }
    Ok(HouseholderAlignment {
        axis: diff / norm,
        identity: false,
    })
}

pub fn apply_alignment(
    cloud: &EmbeddingCloud,
    alignment: &HouseholderAlignment,
) -> Result<EmbeddingCloud> {
    alignment.apply(cloud)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Domain};
    use ndarray::{arr1, arr2};
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn random_raw(rows: usize, dim: usize, seed: u64) -> Array2<f64> {
        let mut rng = substream(seed, Domain::Synthetic, 0);
        Array2::from_shape_fn((rows, dim), |_| StandardNormal.sample(&mut rng))
    }

    fn random_unit(dim: usize, seed: u64) -> Array1<f64> {
        normalize_rows(random_raw(1, dim, seed))
            .unwrap()
            .row(0)
            .to_owned()
    }

    /// Dense `I − 2uuᵀ`, the textbook form the rank-1 path must agree with.
    fn dense_reflection(axis: ArrayView1<'_, f64>) -> Array2<f64> {
        let d = axis.len();
        Array2::from_shape_fn((d, d), |(i, j)| {
            let delta = if i == j { 1.0 } else { 0.0 };
            delta - 2.0 * axis[i] * axis[j]
        })
    }

    fn close(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>, tol: f64) -> bool {
        a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn normalize_hand_examples() {
        let cloud = normalize_rows(arr2(&[[3.0, 4.0], [1.0, 0.0], [1.0, 1.0]])).unwrap();
        assert!(close(cloud.row(0), arr1(&[0.6, 0.8]).view(), 1e-15));
        assert!(close(cloud.row(1), arr1(&[1.0, 0.0]).view(), 1e-15));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(cloud.row(2), arr1(&[h, h]).view(), 1e-15));
    }

    #[test]
    fn normalize_rejects_zero_rows_and_bad_shapes() {
        let err = normalize_rows(arr2(&[[1.0, 0.0], [0.0, 0.0]])).unwrap_err();
        assert!(matches!(err, Error::ZeroVector(1)));
        let err = normalize_rows(arr2(&[[1e-13, 0.0]])).unwrap_err();
        assert!(matches!(err, Error::ZeroVector(0)));
        assert!(matches!(
            normalize_rows(Array2::zeros((0, 3))),
            Err(Error::InvalidShape(_))
        ));
        assert!(matches!(
            normalize_rows(arr2(&[[1.0], [2.0]])),
            Err(Error::InvalidShape(_))
        ));
        let err = normalize_rows(arr2(&[[f64::NAN, 1.0]])).unwrap_err();
        assert!(matches!(err, Error::ZeroVector(0)));
    }

    #[test]
    fn mean_direction_examples() {
        let single = EmbeddingCloud::from_unit_rows(arr2(&[[0.0, 1.0]])).unwrap();
        let md = mean_direction(&single).unwrap();
        assert!(close(md.direction.view(), arr1(&[0.0, 1.0]).view(), 1e-15));
        assert!((md.resultant_norm - 1.0).abs() < 1e-15);

        let pair = EmbeddingCloud::from_unit_rows(arr2(&[[1.0, 0.0], [0.0, 1.0]])).unwrap();
        let md = mean_direction(&pair).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(md.direction.view(), arr1(&[h, h]).view(), 1e-12));
        assert!((md.resultant_norm - h).abs() < 1e-12);

        let antipodal = EmbeddingCloud::from_unit_rows(arr2(&[[1.0, 0.0], [-1.0, 0.0]])).unwrap();
        assert!(matches!(
            mean_direction(&antipodal),
            Err(Error::DegenerateMean)
        ));
    }

    #[test]
    fn alignment_two_dimensional_hand_case() {
        let a = build_alignment(arr1(&[1.0, 0.0]).view(), arr1(&[0.0, 1.0]).view()).unwrap();
        assert!(!a.is_identity());
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(a.axis(), arr1(&[h, -h]).view(), 1e-12));
        let image = a.reflect(arr1(&[1.0, 0.0]).view()).unwrap();
        assert!(close(image.view(), arr1(&[0.0, 1.0]).view(), 1e-12));

        let cloud = EmbeddingCloud::from_unit_rows(arr2(&[[1.0, 0.0]])).unwrap();
        let moved = apply_alignment(&cloud, &a).unwrap();
        assert!(close(moved.row(0), arr1(&[0.0, 1.0]).view(), 1e-12));
    }

    #[test]
    fn coincident_directions_give_identity() {
        let a = build_alignment(arr1(&[0.0, 1.0]).view(), arr1(&[0.0, 1.0]).view()).unwrap();
        assert!(a.is_identity());
        let cloud = normalize_rows(random_raw(5, 2, 3)).unwrap();
        assert_eq!(apply_alignment(&cloud, &a).unwrap(), cloud);
    }

    #[test]
    fn alignment_matches_dense_reflection_in_16_dims() {
        for seed in 0..20 {
            let x = random_unit(16, 2 * seed);
            let y = random_unit(16, 2 * seed + 1);
            let a = build_alignment(x.view(), y.view()).unwrap();
            assert!((a.axis().dot(&a.axis()).sqrt() - 1.0).abs() < 1e-9);
            let dense = dense_reflection(a.axis());
            let via_dense = dense.dot(&x);
            assert!(close(via_dense.view(), y.view(), 1e-9));
            let via_rank_one = a.reflect(x.view()).unwrap();
            assert!(close(via_rank_one.view(), y.view(), 1e-9));
        }
    }

    #[test]
    fn alignment_preserves_pairwise_distances() {
        let cloud = normalize_rows(random_raw(50, 32, 11)).unwrap();
        let a = build_alignment(random_unit(32, 12).view(), random_unit(32, 13).view()).unwrap();
        let moved = apply_alignment(&cloud, &a).unwrap();
        for i in 0..50 {
            for j in 0..50 {
                let before = (&cloud.row(i) - &cloud.row(j)).mapv(|v| v * v).sum().sqrt();
                let after = (&moved.row(i) - &moved.row(j)).mapv(|v| v * v).sum().sqrt();
                assert!((before - after).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let a = build_alignment(random_unit(3, 1).view(), random_unit(3, 2).view()).unwrap();
        let cloud = normalize_rows(random_raw(4, 5, 3)).unwrap();
        assert!(matches!(
            apply_alignment(&cloud, &a),
            Err(Error::DimensionMismatch {
                expected: 3,
                found: 5
            })
        ));
        assert!(matches!(
            build_alignment(random_unit(3, 1).view(), random_unit(4, 2).view()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn reflection_properties(seed in any::<u64>(), rows in 1usize..30, dim in 2usize..40) {
            let x = normalize_rows(random_raw(rows, dim, seed)).unwrap();
            let y = normalize_rows(random_raw(rows + 3, dim, seed ^ 0xabc)).unwrap();
            let (Ok(mx), Ok(my)) = (mean_direction(&x), mean_direction(&y)) else {
                return Ok(());
            };
            let a = build_alignment(mx.direction.view(), my.direction.view()).unwrap();
            let once = apply_alignment(&x, &a).unwrap();
            let twice = apply_alignment(&once, &a).unwrap();
            for i in 0..rows {
                prop_assert!(close(twice.row(i), x.row(i), 1e-6));
                prop_assert!((once.row(i).dot(&once.row(i)).sqrt() - 1.0).abs() < 1e-6);
            }
            let moved = mean_direction(&once).unwrap();
            prop_assert!(close(moved.direction.view(), my.direction.view(), 1e-6));
        }
    }
}
