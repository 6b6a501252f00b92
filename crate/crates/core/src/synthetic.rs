//! Synthetic von Mises–Fisher clouds and calibration experiments.
//!
//! The experiments run the pair test in baseline and aligned mode on the same
//! data and the same sign stream, and report how often each mode rejects.

use ndarray::{Array1, Array2};
use rand::seq::index;
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::Serialize;

use crate::geometry::{build_alignment, normalize_rows, EmbeddingCloud};
use crate::permutation::{run_pair, AlignmentMode, TestConfig};
use crate::rng::{derive_seed, substream, Domain};
use crate::stats::{ks_uniform, KsSummary};
use crate::{Error, Result};

pub const DEFAULT_TRIALS: usize = 500;

#[derive(Clone, Debug, PartialEq)]
pub struct VmfSpec {
    pub mean_direction: Array1<f64>,
    /// κ ≥ 0; zero gives the uniform distribution and ignores the mean direction.
    pub concentration: f64,
    pub n_samples: usize,
    pub seed: u64,
}

pub fn sample_vmf(spec: &VmfSpec) -> Result<EmbeddingCloud> {
    let mut rng = substream(spec.seed, Domain::Synthetic, 0);
    sample_vmf_with(
        &spec.mean_direction,
        spec.concentration,
        spec.n_samples,
        &mut rng,
    )
}

pub fn random_unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Array1<f64> {
    loop {
        let v: Array1<f64> = Array1::from_shape_fn(dim, |_| StandardNormal.sample(rng));
        let norm = v.dot(&v).sqrt();
        if norm > 1e-6 {
            return v / norm;
        }
    }
}

/// A unit vector at `angle` radians from `mu`, in a uniformly random 2-plane through `mu`.
pub fn direction_at_angle<R: Rng + ?Sized>(
    mu: &Array1<f64>,
    angle: f64,
    rng: &mut R,
) -> Array1<f64> {
    let tangent = loop {
        let g = random_unit_vector(mu.len(), rng);
        let t = &g - &(mu * g.dot(mu));
        let norm = t.dot(&t).sqrt();
        if norm > 1e-6 {
            break t / norm;
        }
    };
    mu * angle.cos() + tangent * angle.sin()
}

/// Draws `n` vMF(μ, κ) samples with Wood's rejection sampler.
///
/// The cosine `w` to the mean direction is drawn by rejection from a
/// transformed Beta((d−1)/2, (d−1)/2) envelope; the tangent part is uniform on
/// the sphere orthogonal to `e₁`. Samples are built around `e₁` and reflected
/// onto `μ` at the end.
pub fn sample_vmf_with<R: Rng + ?Sized>(
    mean_direction: &Array1<f64>,
    kappa: f64,
    n: usize,
    rng: &mut R,
) -> Result<EmbeddingCloud> {
    let dim = mean_direction.len();
    if dim < 2 {
        return Err(Error::InvalidConfig(format!(
            "vMF sampling needs d >= 2, got {dim}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidConfig("vMF sampling needs n >= 1".into()));
    }
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "concentration must be finite and >= 0, got {kappa}"
        )));
    }
    if kappa == 0.0 {
        let raw = Array2::from_shape_fn((n, dim), |_| StandardNormal.sample(rng));
        return normalize_rows(raw);
    }
    let norm = mean_direction.dot(mean_direction).sqrt();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidConfig(format!(
            "mean direction has norm {norm}, expected 1"
        )));
    }

    let dm1 = (dim - 1) as f64;
    let b = dm1 / (2.0 * kappa + (4.0 * kappa * kappa + dm1 * dm1).sqrt());
    let x0 = (1.0 - b) / (1.0 + b);
    let c = kappa * x0 + dm1 * (1.0 - x0 * x0).ln();
    let envelope = Beta::new(dm1 / 2.0, dm1 / 2.0).expect("shape parameters are positive");

    let mut data = Array2::zeros((n, dim));
    for mut row in data.rows_mut() {
        let w = loop {
            let z: f64 = envelope.sample(rng);
            let w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
            let u: f64 = rng.gen();
            if kappa * w + dm1 * (1.0 - x0 * w).ln() - c >= u.ln() {
                break w;
            }
        };
        let tangent = loop {
            let mut sq = 0.0;
            for j in 1..dim {
                let g: f64 = StandardNormal.sample(rng);
                row[j] = g;
                sq += g * g;
            }
            if sq > 1e-12 {
                break sq.sqrt();
            }
        };
        let scale = (1.0 - w * w).max(0.0).sqrt() / tangent;
        row[0] = w;
        for j in 1..dim {
            row[j] *= scale;
        }
    }

    let cloud = EmbeddingCloud::from_unit_rows(data)?;
    let mut e1 = Array1::zeros(dim);
    e1[0] = 1.0;
    let unit_mean = mean_direction / norm;
    build_alignment(e1.view(), unit_mean.view())?.apply(&cloud)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    NullSameDispersion,
    AlternativeDiffDispersion,
    SplitHalf,
}

/// Parameters of a two-cloud experiment. `config.seed` seeds everything.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentParams {
    pub dim: usize,
    pub n: usize,
    pub m: usize,
    pub kappa_x: f64,
    pub kappa_y: f64,
    pub angle_degrees: f64,
    pub trials: usize,
    pub config: TestConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub mode: ExperimentKind,
    pub trials: usize,
    pub alpha: f64,
    pub rejection_rate_baseline: f64,
    pub rejection_rate_aligned: f64,
    pub mean_abs_p_diff: f64,
    pub max_abs_p_diff: f64,
    /// Uniformity of each mode's p-values.
    pub ks_baseline: KsSummary,
    pub ks_aligned: KsSummary,
    pub n_permutations: usize,
    pub seed: u64,
    #[serde(skip)]
    pub p_values_baseline: Vec<f64>,
    #[serde(skip)]
    pub p_values_aligned: Vec<f64>,
}

impl CalibrationReport {
    fn from_p_values(
        mode: ExperimentKind,
        config: &TestConfig,
        baseline: Vec<f64>,
        aligned: Vec<f64>,
    ) -> Self {
        let trials = baseline.len();
        let rate =
            |ps: &[f64]| ps.iter().filter(|&&p| p <= config.alpha).count() as f64 / trials as f64;
        let diffs: Vec<f64> = baseline
            .iter()
            .zip(&aligned)
            .map(|(a, b)| (a - b).abs())
            .collect();
        Self {
            mode,
            trials,
            alpha: config.alpha,
            rejection_rate_baseline: rate(&baseline),
            rejection_rate_aligned: rate(&aligned),
            mean_abs_p_diff: diffs.iter().sum::<f64>() / trials as f64,
            max_abs_p_diff: diffs.iter().copied().fold(0.0, f64::max),
            ks_baseline: ks_uniform(&baseline),
            ks_aligned: ks_uniform(&aligned),
            n_permutations: config.n_permutations,
            seed: config.seed,
            p_values_baseline: baseline,
            p_values_aligned: aligned,
        }
    }
}

fn check_trials(trials: usize, config: &TestConfig) -> Result<()> {
    config.validate()?;
    if trials == 0 {
        return Err(Error::InvalidConfig("need at least one trial".into()));
    }
    Ok(())
}

/// Runs both modes on `(x, y)` with a shared sign stream.
fn both_modes(x: &EmbeddingCloud, y: &EmbeddingCloud, config: &TestConfig) -> Result<(f64, f64)> {
    let base = run_pair(x, y, config, AlignmentMode::Baseline)?;
    let aligned = run_pair(x, y, config, AlignmentMode::Aligned)?;
    Ok((base.result.p_value, aligned.result.p_value))
}

pub fn run_experiment(params: &ExperimentParams) -> Result<CalibrationReport> {
    let config = &params.config;
    check_trials(params.trials, config)?;
    if params.dim < 2 || params.n < 2 || params.m < 2 {
        return Err(Error::InvalidConfig(
            "experiments need d >= 2 and at least two rows per group".into(),
        ));
    }
    if !params.angle_degrees.is_finite() || !(0.0..=180.0).contains(&params.angle_degrees) {
        return Err(Error::InvalidConfig(format!(
            "angle must lie in [0, 180] degrees, got {}",
            params.angle_degrees
        )));
    }
    let kind = if params.kappa_x == params.kappa_y {
        ExperimentKind::NullSameDispersion
    } else {
        ExperimentKind::AlternativeDiffDispersion
    };
    let angle = params.angle_degrees.to_radians();
    let mut baseline = Vec::with_capacity(params.trials);
    let mut aligned = Vec::with_capacity(params.trials);
    for trial in 0..params.trials as u64 {
        let mut rng = substream(config.seed, Domain::Trial, trial);
        let mu_x = random_unit_vector(params.dim, &mut rng);
        let mu_y = direction_at_angle(&mu_x, angle, &mut rng);
        let x = sample_vmf_with(&mu_x, params.kappa_x, params.n, &mut rng)?;
        let y = sample_vmf_with(&mu_y, params.kappa_y, params.m, &mut rng)?;
        let trial_config = config.with_seed(derive_seed(config.seed, Domain::Trial, trial));
        let (pb, pa) = both_modes(&x, &y, &trial_config)?;
        baseline.push(pb);
        aligned.push(pa);
    }
    Ok(CalibrationReport::from_p_values(
        kind, config, baseline, aligned,
    ))
}

/// Equal concentrations, means `angle_degrees` apart: rejections are Type-I errors.
pub fn type1_experiment(
    dim: usize,
    n: usize,
    kappa: f64,
    angle_degrees: f64,
    trials: usize,
    config: &TestConfig,
) -> Result<CalibrationReport> {
    run_experiment(&ExperimentParams {
        dim,
        n,
        m: n,
        kappa_x: kappa,
        kappa_y: kappa,
        angle_degrees,
        trials,
        config: config.clone(),
    })
}

/// Different concentrations: rejections measure power.
pub fn power_experiment(
    dim: usize,
    n: usize,
    kappa_x: f64,
    kappa_y: f64,
    angle_degrees: f64,
    trials: usize,
    config: &TestConfig,
) -> Result<CalibrationReport> {
    run_experiment(&ExperimentParams {
        dim,
        n,
        m: n,
        kappa_x,
        kappa_y,
        angle_degrees,
        trials,
        config: config.clone(),
    })
}

/// Splits one cloud into random halves repeatedly and tests the halves
/// against each other in both modes.
pub fn split_half_check(
    cloud: &EmbeddingCloud,
    trials: usize,
    config: &TestConfig,
) -> Result<CalibrationReport> {
    check_trials(trials, config)?;
    let total = cloud.n_rows();
    if total < 20 {
        return Err(Error::InvalidConfig(format!(
            "split-half check needs at least 20 rows, got {total}"
        )));
    }
    let half = total / 2;
    let mut baseline = Vec::with_capacity(trials);
    let mut aligned = Vec::with_capacity(trials);
    for trial in 0..trials as u64 {
        let mut rng = substream(config.seed, Domain::Trial, trial);
        let order = index::sample(&mut rng, total, total).into_vec();
        let x = cloud.select_rows(&order[..half])?;
        let y = cloud.select_rows(&order[half..])?;
        let trial_config = config.with_seed(derive_seed(config.seed, Domain::Trial, trial));
        let (pb, pa) = both_modes(&x, &y, &trial_config)?;
        baseline.push(pb);
        aligned.push(pa);
    }
    Ok(CalibrationReport::from_p_values(
        ExperimentKind::SplitHalf,
        config,
        baseline,
        aligned,
    ))
}
