//! Logistic loss with `p = e^F / (e^F + e^-F) = 1 / (1 + e^{-2F})`.
//!
//! The gradient keeps the factor 2 that comes from this parameterisation:
//! `dℓ/dF = 2 (p - y)`.

use thiserror::Error;

use crate::dataset::SparseDataset;

/// Probability clamp applied before taking logs.
pub const PROB_EPS: f64 = 1e-15;

/// Upper bound on `|logistic_gradient|`.
pub const GRADIENT_BOUND: f64 = 2.0;

#[derive(Debug, Error, PartialEq)]
#[error("dimension mismatch: expected {expected}, got {got}")]
pub struct DimensionMismatch {
    pub expected: usize,
    pub got: usize,
}

/// Per-distinct-sample scores `F_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(pub Vec<f64>);

impl ScoreVector {
    pub fn constant(n: usize, value: f64) -> Self {
        ScoreVector(vec![value; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientFlavor {
    /// `G`, the full-data gradient weighted by `m_i`.
    Full,
    /// `L'_random`, weighted by the sampled `m'_i`.
    Sampled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector {
    pub values: Vec<f64>,
    pub flavor: GradientFlavor,
}

/// `p = 1 / (1 + e^{-2F})`, evaluated without overflow.
#[inline]
pub fn probability(f: f64) -> f64 {
    let z = 2.0 * f;
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `-ln p` for `y = 1`, `-ln(1 - p)` otherwise, with `p` clamped to
/// `[PROB_EPS, 1 - PROB_EPS]`. Evaluated as a softplus so the tails keep
/// full relative precision.
pub fn logistic_loss(y: u8, f: f64) -> f64 {
    let z = if y == 1 { -2.0 * f } else { 2.0 * f };
    let softplus = z.max(0.0) + (-z.abs()).exp().ln_1p();
    softplus.clamp(-(-PROB_EPS).ln_1p(), -PROB_EPS.ln())
}

pub fn logistic_gradient(y: u8, f: f64) -> f64 {
    2.0 * (probability(f) - y as f64)
}

fn check_dim(ds: &SparseDataset, f: &ScoreVector) -> Result<(), DimensionMismatch> {
    if f.len() != ds.len() {
        return Err(DimensionMismatch { expected: ds.len(), got: f.len() });
    }
    Ok(())
}

/// `Σ_i m_i ℓ(y_i, F_i)`.
pub fn total_loss(ds: &SparseDataset, f: &ScoreVector) -> Result<f64, DimensionMismatch> {
    check_dim(ds, f)?;
    Ok(ds
        .labels()
        .iter()
        .zip(ds.frequencies())
        .zip(&f.0)
        .map(|((&y, &m), &fi)| m as f64 * logistic_loss(y, fi))
        .sum())
}

/// `G = [m_1 ℓ'_1, …, m_N ℓ'_N]`.
pub fn gradient_vector(ds: &SparseDataset, f: &ScoreVector) -> Result<GradientVector, DimensionMismatch> {
    check_dim(ds, f)?;
    let values = ds
        .labels()
        .iter()
        .zip(ds.frequencies())
        .zip(&f.0)
        .map(|((&y, &m), &fi)| m as f64 * logistic_gradient(y, fi))
        .collect();
    Ok(GradientVector { values, flavor: GradientFlavor::Full })
}
