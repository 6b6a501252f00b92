//! Dispersion proxies: mean resultant length, concentration and breadth.
//!
//! Concentration uses the high-dimensional von Mises–Fisher approximation
//! `κ̂ = r(d − r²)/(1 − r²)`. Breadth is `v = 1/κ̂`, and two clouds are compared
//! through the log-breadth difference `log v(X) − log v(Y)`.

use ndarray::ArrayView1;
use serde::Serialize;

use crate::geometry::EmbeddingCloud;
use crate::{Error, Result};

/// Upper clamp applied to `r` before the concentration map.
pub const MAX_MRL: f64 = 1.0 - 1e-9;
/// Resultant lengths below this have no finite breadth.
pub const DEGENERATE_MRL: f64 = 1e-12;

/// Mean resultant length `||(1/n) Σ xᵢ||`.
pub fn mrl(cloud: &EmbeddingCloud) -> f64 {
    let sum = cloud.resultant();
    resultant_length(sum.view(), cloud.n_rows())
}

/// `||sum / count||`, accumulated in f64.
#[inline]
pub fn resultant_length(sum: ArrayView1<'_, f64>, count: usize) -> f64 {
    sum.dot(&sum).sqrt() / count as f64
}

#[inline]
fn clamp_mrl(r: f64) -> f64 {
    r.clamp(0.0, MAX_MRL)
}

/// `κ̂ = r(d − r²)/(1 − r²)` with `r` clamped to `[0, 1 − 1e-9]`.
pub fn kappa_from_mrl(r: f64, dim: usize) -> f64 {
    let r = clamp_mrl(r);
    let r2 = r * r;
    r * (dim as f64 - r2) / (1.0 - r2)
}

/// `log κ̂`, evaluated term by term so that it stays accurate near `r = 1`.
#[inline]
fn log_kappa(r: f64, dim: usize) -> f64 {
    let r = clamp_mrl(r);
    let r2 = r * r;
    r.ln() + (dim as f64 - r2).ln() - (-r2).ln_1p()
}

/// Breadth `v = 1/κ̂`.
pub fn breadth(r: f64, dim: usize) -> Result<f64> {
    if !(r >= DEGENERATE_MRL) {
        return Err(Error::DegenerateBreadth);
    }
    Ok(1.0 / kappa_from_mrl(r, dim))
}

/// `log v = −log κ̂`.
pub fn log_breadth(r: f64, dim: usize) -> Result<f64> {
    if !(r >= DEGENERATE_MRL) {
        return Err(Error::DegenerateBreadth);
    }
    Ok(-log_kappa(r, dim))
}

/// Log-breadth of a permuted group. A group with no resultant is maximally
/// dispersed and gets `+∞`.
#[inline]
pub fn group_log_breadth(r: f64, dim: usize) -> f64 {
    if r >= DEGENERATE_MRL {
        -log_kappa(r, dim)
    } else {
        f64::INFINITY
    }
}

/// `log v(group 1) − log v(group 2)` from the two groups' resultant lengths.
/// Two degenerate groups are equally broad and give 0.
#[inline]
pub fn statistic_from_mrl(r1: f64, r2: f64, dim: usize) -> f64 {
    let a = group_log_breadth(r1, dim);
    let b = group_log_breadth(r2, dim);
    if a == f64::INFINITY && b == f64::INFINITY {
        0.0
    } else {
        a - b
    }
}

/// `T = log v(X') − log v(Y)`.
pub fn test_statistic(x_aligned: &EmbeddingCloud, y: &EmbeddingCloud) -> Result<f64> {
    if x_aligned.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x_aligned.dim(),
            found: y.dim(),
        });
    }
    let dim = y.dim();
    Ok(log_breadth(mrl(x_aligned), dim)? - log_breadth(mrl(y), dim)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DispersionStats {
    pub mrl: f64,
    pub kappa: f64,
    pub breadth: f64,
    pub dim: usize,
}

impl DispersionStats {
    pub fn from_mrl(r: f64, dim: usize) -> Result<Self> {
        Ok(Self {
            mrl: r,
            kappa: kappa_from_mrl(r, dim),
            breadth: breadth(r, dim)?,
            dim,
        })
    }

    pub fn of(cloud: &EmbeddingCloud) -> Result<Self> {
        Self::from_mrl(mrl(cloud), cloud.dim())
    }
}
