//! Bernoulli sampling of raw rows and the inverse-probability weighted
//! target `L'_random = [m'_1 ℓ'_1, …, m'_N ℓ'_N]` with
//! `m'_i = Σ_j Q_ij / R_ij`.
//!
//! Every `Q_ij` is a pure function of `(seed, draw index, i, j)`, so a draw
//! can be replayed anywhere without coordination.

use std::fmt;

use thiserror::Error;

use crate::dataset::SparseDataset;
use crate::loss::{logistic_gradient, DimensionMismatch, GradientFlavor, GradientVector, ScoreVector};
use crate::rng;

/// Index offset between successive redraws when a draw comes up empty.
pub const RESAMPLE_STRIDE: u64 = 1 << 40;

/// Default Monte Carlo trial count for [`estimate_diversity`].
pub const DEFAULT_TRIALS: usize = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("sampling rate {rate} at sample {sample}, replica {replica} not in (0, 1]")]
    BadRate { sample: usize, replica: usize, rate: f64 },
    #[error("plan has {plan} rows for sample {sample} with frequency {frequency}")]
    Shape { sample: usize, plan: usize, frequency: u32 },
    #[error("plan covers {plan} samples, dataset has {dataset}")]
    Length { plan: usize, dataset: usize },
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
    #[error("at least {min} trials required, got {got}")]
    Trials { min: usize, got: usize },
}

/// Inclusion probabilities `R_ij` for each raw replica `j` of sample `i`.
#[derive(Debug, Clone, PartialEq)]
pub enum SamplingPlan {
    /// The same rate for every replica.
    Uniform(f64),
    /// `rates[i][j]`, one row per distinct sample with `m_i` entries.
    PerReplica(Vec<Vec<f64>>),
}

impl SamplingPlan {
    pub fn uniform(rate: f64) -> Result<Self, SamplerError> {
        check_rate(rate, 0, 0)?;
        Ok(SamplingPlan::Uniform(rate))
    }

    /// Check rates and shape against `ds`.
    pub fn validate(&self, ds: &SparseDataset) -> Result<(), SamplerError> {
        match self {
            SamplingPlan::Uniform(r) => check_rate(*r, 0, 0),
            SamplingPlan::PerReplica(rows) => {
                if rows.len() != ds.len() {
                    return Err(SamplerError::Length { plan: rows.len(), dataset: ds.len() });
                }
                for (i, (row, &m)) in rows.iter().zip(ds.frequencies()).enumerate() {
                    if row.len() != m as usize {
                        return Err(SamplerError::Shape { sample: i, plan: row.len(), frequency: m });
                    }
                    for (j, &r) in row.iter().enumerate() {
                        check_rate(r, i, j)?;
                    }
                }
                Ok(())
            }
        }
    }

    #[inline]
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        match self {
            SamplingPlan::Uniform(r) => *r,
            SamplingPlan::PerReplica(rows) => rows[i][j],
        }
    }

    fn is_full(&self) -> bool {
        match self {
            SamplingPlan::Uniform(r) => *r == 1.0,
            SamplingPlan::PerReplica(rows) => rows.iter().flatten().all(|&r| r == 1.0),
        }
    }
}

fn check_rate(rate: f64, sample: usize, replica: usize) -> Result<(), SamplerError> {
    if rate > 0.0 && rate <= 1.0 {
        Ok(())
    } else {
        Err(SamplerError::BadRate { sample, replica, rate })
    }
}

/// One observed value of `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleDraw {
    pub seed: u64,
    /// Index the caller asked for.
    pub index: u64,
    /// Redraws needed before a non-empty draw came up (0 normally).
    pub resamples: u32,
    q: Vec<bool>,
    offsets: Vec<usize>,
    weights: Vec<f64>,
    support: Vec<bool>,
}

impl SampleDraw {
    /// `Q_ij` for every replica of sample `i`.
    pub fn q(&self, i: usize) -> &[bool] {
        &self.q[self.offsets[i]..self.offsets[i + 1]]
    }

    /// `m'_i`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Q'_i = OR_j Q_ij`.
    pub fn support(&self) -> &[bool] {
        &self.support
    }

    pub fn support_size(&self) -> usize {
        self.support.iter().filter(|&&b| b).count()
    }

    pub fn included(&self) -> Vec<u32> {
        self.support
            .iter()
            .enumerate()
            .filter_map(|(i, &s)| s.then_some(i as u32))
            .collect()
    }
}

fn draw_once(plan: &SamplingPlan, ds: &SparseDataset, seed: u64, key: u64) -> SampleDraw {
    let n = ds.len();
    let mut q = Vec::with_capacity(ds.n_raw() as usize);
    let mut offsets = Vec::with_capacity(n + 1);
    let mut weights = Vec::with_capacity(n);
    let mut support = Vec::with_capacity(n);
    let full = plan.is_full();
    for (i, &m) in ds.frequencies().iter().enumerate() {
        offsets.push(q.len());
        let mut w = 0.0;
        let mut any = false;
        for j in 0..m as usize {
            let r = plan.rate(i, j);
            let bit = full || rng::uniform(&[seed, rng::streams::SAMPLE, key, i as u64, j as u64]) < r;
            q.push(bit);
            if bit {
                w += 1.0 / r;
                any = true;
            }
        }
        weights.push(w);
        support.push(any);
    }
    offsets.push(q.len());
    SampleDraw { seed, index: key, resamples: 0, q, offsets, weights, support }
}

/// Draw `Q` without redrawing empty outcomes.
pub fn draw_raw(plan: &SamplingPlan, ds: &SparseDataset, seed: u64, index: u64) -> SampleDraw {
    draw_once(plan, ds, seed, index)
}

/// Draw `Q` for training. If every `Q'_i` is 0 the draw is repeated at
/// `index + k * RESAMPLE_STRIDE` for `k = 1, 2, …` until one sample is
/// included. The returned draw records the requested `index`.
pub fn draw(plan: &SamplingPlan, ds: &SparseDataset, seed: u64, index: u64) -> SampleDraw {
    let mut k = 0u64;
    loop {
        let mut d = draw_once(plan, ds, seed, index.wrapping_add(k.wrapping_mul(RESAMPLE_STRIDE)));
        if d.support.iter().any(|&s| s) || ds.is_empty() {
            d.index = index;
            d.resamples = k as u32;
            return d;
        }
        k += 1;
    }
}

/// The sampled target for one draw.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTarget {
    /// `m'_i ℓ'(y_i, F_i)`; exactly 0 for excluded samples.
    pub gradient: GradientVector,
    /// `m'_i`.
    pub weights: Vec<f64>,
    /// Samples with `Q'_i = 1`, ascending.
    pub included: Vec<u32>,
}

impl SampledTarget {
    /// Per-sample value `g_i / m'_i` (i.e. `ℓ'_i`) for included samples.
    pub fn per_sample(&self, i: usize) -> f64 {
        self.gradient.values[i] / self.weights[i]
    }
}

pub fn weighted_target(
    d: &SampleDraw,
    ds: &SparseDataset,
    f: &ScoreVector,
) -> Result<SampledTarget, SamplerError> {
    if f.len() != ds.len() {
        return Err(DimensionMismatch { expected: ds.len(), got: f.len() }.into());
    }
    if d.weights.len() != ds.len() {
        return Err(DimensionMismatch { expected: ds.len(), got: d.weights.len() }.into());
    }
    let values = d
        .weights
        .iter()
        .zip(ds.labels())
        .zip(&f.0)
        .map(|((&w, &y), &fi)| if w > 0.0 { w * logistic_gradient(y, fi) } else { 0.0 })
        .collect();
    Ok(SampledTarget {
        gradient: GradientVector { values, flavor: GradientFlavor::Sampled },
        weights: d.weights.clone(),
        included: d.included(),
    })
}

/// `Δ = max_i P(Q'_i = 1) = max_i [1 - Π_j (1 - R_ij)]`.
pub fn analytic_delta(plan: &SamplingPlan, ds: &SparseDataset) -> f64 {
    ds.frequencies()
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let miss: f64 = (0..m as usize).map(|j| 1.0 - plan.rate(i, j)).product();
            1.0 - miss
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiversityStats {
    /// Largest number of distinct samples in one draw.
    pub omega: usize,
    pub delta: f64,
    /// Fraction of consecutive draw pairs whose supports intersect.
    pub rho: f64,
    pub mean_support: f64,
    pub n_samples: usize,
    pub trials: usize,
}

impl fmt::Display for DiversityStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "omega={}", self.omega)?;
        writeln!(f, "delta={}", self.delta)?;
        writeln!(f, "rho={}", self.rho)?;
        writeln!(f, "n_samples={}", self.n_samples)?;
        writeln!(f, "mean_support={}", self.mean_support)?;
        write!(f, "trials={}", self.trials)
    }
}

/// Monte Carlo estimate of `Ω` and `ρ` over `trials` raw draws (empty draws
/// are kept, so the statistics describe the plain Bernoulli process).
pub fn estimate_diversity(
    plan: &SamplingPlan,
    ds: &SparseDataset,
    trials: usize,
    seed: u64,
) -> Result<DiversityStats, SamplerError> {
    if trials < 2 {
        return Err(SamplerError::Trials { min: 2, got: trials });
    }
    plan.validate(ds)?;
    let mut omega = 0;
    let mut support_total = 0usize;
    let mut intersecting = 0usize;
    let mut prev: Option<Vec<bool>> = None;
    for t in 0..trials {
        let d = draw_raw(plan, ds, seed, t as u64);
        let size = d.support_size();
        omega = omega.max(size);
        support_total += size;
        if let Some(p) = &prev {
            if p.iter().zip(&d.support).any(|(&a, &b)| a && b) {
                intersecting += 1;
            }
        }
        prev = Some(d.support);
    }
    Ok(DiversityStats {
        omega,
        delta: analytic_delta(plan, ds),
        rho: intersecting as f64 / (trials - 1) as f64,
        mean_support: support_total as f64 / trials as f64,
        n_samples: ds.len(),
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SparseVec;
    use crate::loss::gradient_vector;
    use proptest::prelude::*;

    fn ds_with(freqs: &[u32]) -> SparseDataset {
        let samples = (0..freqs.len())
            .map(|i| SparseVec::from_pairs([(0, i as f64 + 1.0)]).unwrap())
            .collect();
        let labels = (0..freqs.len()).map(|i| (i % 2) as u8).collect();
        SparseDataset::new(samples, labels, freqs.to_vec(), 1).unwrap()
    }

    #[test]
    fn full_rate_keeps_everything() {
        let ds = ds_with(&[1, 3, 2]);
        let d = draw(&SamplingPlan::Uniform(1.0), &ds, 9, 4);
        assert_eq!(d.weights(), &[1.0, 3.0, 2.0]);
        assert!(d.support().iter().all(|&s| s));
        assert!(d.q(1).iter().all(|&b| b));
        assert_eq!(d.q(1).len(), 3);
    }

    #[test]
    fn half_rate_doubles_weight() {
        let ds = ds_with(&[1; 64]);
        let d = draw(&SamplingPlan::Uniform(0.5), &ds, 1, 0);
        for i in 0..ds.len() {
            let expected = if d.q(i)[0] { 2.0 } else { 0.0 };
            assert_eq!(d.weights()[i], expected);
            assert_eq!(d.support()[i], d.weights()[i] > 0.0);
        }
    }

    #[test]
    fn weights_are_unbiased() {
        let ds = ds_with(&[1, 2, 3, 4, 5]);
        let plan = SamplingPlan::Uniform(0.3);
        let n = 10_000;
        let mut sums = vec![0.0; ds.len()];
        for t in 0..n {
            let d = draw(&plan, &ds, 42, t);
            for (s, w) in sums.iter_mut().zip(d.weights()) {
                *s += w;
            }
        }
        for (i, &m) in ds.frequencies().iter().enumerate() {
            let mean = sums[i] / n as f64;
            let se = (m as f64 * 0.7 / 0.3 / n as f64).sqrt();
            assert!((mean - m as f64).abs() < 3.0 * se, "sample {i}: {mean} vs {m}");
        }
    }

    #[test]
    fn sampled_target_expectation_matches_full_gradient() {
        let ds = ds_with(&[2, 1, 4]);
        let f = ScoreVector(vec![0.3, -0.4, 1.1]);
        let g = gradient_vector(&ds, &f).unwrap();
        let plan = SamplingPlan::Uniform(0.5);
        let n = 10_000;
        let mut sums = vec![0.0; ds.len()];
        for t in 0..n {
            let tgt = weighted_target(&draw(&plan, &ds, 5, t), &ds, &f).unwrap();
            for (s, v) in sums.iter_mut().zip(&tgt.gradient.values) {
                *s += v;
            }
        }
        for i in 0..ds.len() {
            let lp = logistic_gradient(ds.labels()[i], f.0[i]);
            let m = ds.frequencies()[i] as f64;
            let se = lp.abs() * (m * 0.5 / 0.5 / n as f64).sqrt();
            assert!((sums[i] / n as f64 - g.values[i]).abs() < 4.0 * se);
        }
    }

    #[test]
    fn target_with_full_rate_equals_gradient_vector() {
        let ds = ds_with(&[2, 1, 4]);
        let f = ScoreVector(vec![0.3, -0.4, 1.1]);
        let t = weighted_target(&draw(&SamplingPlan::Uniform(1.0), &ds, 0, 0), &ds, &f).unwrap();
        assert_eq!(t.gradient.values, gradient_vector(&ds, &f).unwrap().values);
        assert_eq!(t.included, vec![0, 1, 2]);
    }

    #[test]
    fn excluded_samples_get_exact_zero() {
        let ds = ds_with(&[1; 32]);
        let f = ScoreVector::constant(32, 0.2);
        let d = draw(&SamplingPlan::Uniform(0.5), &ds, 3, 1);
        let t = weighted_target(&d, &ds, &f).unwrap();
        for i in 0..32 {
            if !d.support()[i] {
                assert_eq!(t.gradient.values[i], 0.0);
                assert!(!t.included.contains(&(i as u32)));
            }
        }
        assert_eq!(t.gradient.flavor, GradientFlavor::Sampled);
    }

    #[test]
    fn empty_draws_are_redrawn() {
        let ds = ds_with(&[1]);
        let plan = SamplingPlan::Uniform(0.01);
        let d = draw(&plan, &ds, 11, 0);
        assert!(d.support()[0]);
        assert_eq!(d.index, 0);
        assert!(d.resamples > 0);
        // raw draws may be empty
        assert!((0..50).any(|t| draw_raw(&plan, &ds, 11, t).support_size() == 0));
    }

    #[test]
    fn draws_replay_bit_identically() {
        let ds = ds_with(&[3, 1, 2, 5]);
        let plan = SamplingPlan::Uniform(0.37);
        let a = draw(&plan, &ds, 99, 17);
        let handle = std::thread::spawn({
            let ds = ds.clone();
            let plan = plan.clone();
            move || draw(&plan, &ds, 99, 17)
        });
        assert_eq!(a, handle.join().unwrap());
    }

    #[test]
    fn delta_examples() {
        assert!((analytic_delta(&SamplingPlan::Uniform(0.3), &ds_with(&[1, 1])) - 0.3).abs() < 1e-15);
        assert!((analytic_delta(&SamplingPlan::Uniform(0.5), &ds_with(&[2])) - 0.75).abs() < 1e-15);
        let plan = SamplingPlan::PerReplica(vec![vec![0.1], vec![1.0]]);
        assert_eq!(analytic_delta(&plan, &ds_with(&[1, 1])), 1.0);
    }

    #[test]
    fn plan_validation() {
        let ds = ds_with(&[1, 2]);
        assert!(SamplingPlan::uniform(0.0).is_err());
        assert!(SamplingPlan::uniform(1.5).is_err());
        assert!(SamplingPlan::PerReplica(vec![vec![0.5]]).validate(&ds).is_err());
        assert!(SamplingPlan::PerReplica(vec![vec![0.5], vec![0.5]]).validate(&ds).is_err());
        assert!(SamplingPlan::PerReplica(vec![vec![0.5], vec![0.5, 0.0]]).validate(&ds).is_err());
        assert!(SamplingPlan::PerReplica(vec![vec![0.5], vec![0.5, 1.0]]).validate(&ds).is_ok());
    }

    #[test]
    fn diversity_at_full_rate() {
        let ds = ds_with(&[1, 2, 3]);
        let s = estimate_diversity(&SamplingPlan::Uniform(1.0), &ds, 10, 0).unwrap();
        assert_eq!(s.omega, 3);
        assert_eq!(s.rho, 1.0);
        assert_eq!(s.delta, 1.0);
        assert!(estimate_diversity(&SamplingPlan::Uniform(1.0), &ds, 1, 0).is_err());
    }

    #[test]
    fn rho_for_two_samples_matches_enumeration() {
        // Enumerate the 16 outcomes of two independent draws over two
        // samples, each included with probability 1/2.
        let mut hit = 0;
        for bits in 0u32..16 {
            let (a0, a1, b0, b1) = (bits & 1, bits >> 1 & 1, bits >> 2 & 1, bits >> 3 & 1);
            if (a0 & b0) | (a1 & b1) == 1 {
                hit += 1;
            }
        }
        let exact = hit as f64 / 16.0;
        assert_eq!(exact, 0.4375);
        let s = estimate_diversity(&SamplingPlan::Uniform(0.5), &ds_with(&[1, 1]), 10_000, 8).unwrap();
        assert!((s.rho - exact).abs() < 0.05, "rho {}", s.rho);
    }

    #[test]
    fn tiny_rate_on_many_samples() {
        let ds = ds_with(&vec![1; 10_000]);
        let s = estimate_diversity(&SamplingPlan::Uniform(1e-3), &ds, 200, 2).unwrap();
        assert!(s.omega < 100, "omega {}", s.omega);
        assert!(s.rho < 0.1, "rho {}", s.rho);
        assert!((s.mean_support - 10.0).abs() < 2.0);
    }

    #[test]
    fn diversity_is_deterministic() {
        let ds = ds_with(&[1, 4, 2, 1]);
        let plan = SamplingPlan::Uniform(0.2);
        assert_eq!(
            estimate_diversity(&plan, &ds, 100, 3).unwrap(),
            estimate_diversity(&plan, &ds, 100, 3).unwrap()
        );
    }

    proptest! {
        #[test]
        fn delta_is_monotone_in_rates(
            base in proptest::collection::vec(0.01..1.0f64, 1..6),
            pick in 0usize..6,
            bump in 0.0..1.0f64,
        ) {
            let ds = ds_with(&vec![1; base.len()]);
            let lo = SamplingPlan::PerReplica(base.iter().map(|&r| vec![r]).collect());
            let mut raised = base.clone();
            let k = pick % base.len();
            raised[k] = (raised[k] + bump).min(1.0);
            let hi = SamplingPlan::PerReplica(raised.iter().map(|&r| vec![r]).collect());
            prop_assert!(analytic_delta(&hi, &ds) >= analytic_delta(&lo, &ds));
        }

        #[test]
        fn weight_zero_iff_unsupported(seed in any::<u64>(), idx in any::<u64>(), rate in 0.05..1.0f64) {
            let ds = ds_with(&[1, 3, 2]);
            let d = draw_raw(&SamplingPlan::Uniform(rate), &ds, seed, idx);
            for i in 0..3 {
                prop_assert_eq!(d.weights()[i] == 0.0, !d.support()[i]);
            }
        }
    }
}
