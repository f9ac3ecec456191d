//! Sparse binary-labelled datasets with duplicate folding.
//!
//! A [`SparseDataset`] stores each distinct `(features, label)` pair once,
//! together with its multiplicity in the raw data. Everything downstream
//! (loss, sampling, tree building) works on distinct samples and carries
//! the multiplicity as a weight.

mod bins;
mod libsvm;

use std::collections::HashMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use bins::{FeatureBins, DEFAULT_MAX_BINS};
pub use libsvm::{parse_libsvm, read_libsvm, write_libsvm};

use crate::rng;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("split would leave an empty part ({n_raw} rows, test fraction {fraction})")]
    EmptySplit { n_raw: u64, fraction: f64 },
}

/// Sparse feature vector. Indices are strictly increasing and values are
/// never zero; an absent index means value 0.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVec {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseVec {
    /// Build from `(index, value)` pairs. Indices must be strictly
    /// increasing; zero values are dropped.
    pub fn from_pairs<I>(pairs: I) -> Result<Self, DatasetError>
    where
        I: IntoIterator<Item = (u32, f64)>,
    {
        let mut out = SparseVec::default();
        for (idx, val) in pairs {
            if let Some(&last) = out.indices.last() {
                if idx <= last {
                    return Err(DatasetError::Invalid(format!(
                        "feature indices not strictly increasing ({last} then {idx})"
                    )));
                }
            }
            if !val.is_finite() {
                return Err(DatasetError::Invalid(format!("non-finite value at feature {idx}")));
            }
            if val != 0.0 {
                out.indices.push(idx);
                out.values.push(val);
            }
        }
        Ok(out)
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    /// Value of feature `idx` (0 when absent).
    pub fn get(&self, idx: u32) -> f64 {
        match self.indices.binary_search(&idx) {
            Ok(p) => self.values[p],
            Err(_) => 0.0,
        }
    }

    pub fn max_index(&self) -> Option<u32> {
        self.indices.last().copied()
    }

    /// Euclidean distance between two sparse vectors.
    pub fn distance(&self, other: &SparseVec) -> f64 {
        let (mut a, mut b) = (0, 0);
        let mut acc = 0.0;
        while a < self.indices.len() || b < other.indices.len() {
            let ia = self.indices.get(a).copied().unwrap_or(u32::MAX);
            let ib = other.indices.get(b).copied().unwrap_or(u32::MAX);
            let d = if ia == ib {
                let d = self.values[a] - other.values[b];
                a += 1;
                b += 1;
                d
            } else if ia < ib {
                a += 1;
                self.values[a - 1]
            } else {
                b += 1;
                other.values[b - 1]
            };
            acc += d * d;
        }
        acc.sqrt()
    }

    /// Exact identity: index list plus value bit patterns.
    pub(crate) fn key(&self) -> RowKey {
        (self.indices.clone(), self.values.iter().map(|v| v.to_bits()).collect())
    }
}

/// Distinct samples with multiplicities.
pub(crate) type RowKey = (Vec<u32>, Vec<u64>);

#[derive(Debug, Clone, PartialEq)]
pub struct SparseDataset {
    samples: Vec<SparseVec>,
    labels: Vec<u8>,
    frequencies: Vec<u32>,
    n_features: usize,
}

impl SparseDataset {
    /// Assemble a dataset, checking the structural invariants. Samples are
    /// not deduplicated here; see [`SparseDataset::deduplicate`].
    pub fn new(
        samples: Vec<SparseVec>,
        labels: Vec<u8>,
        frequencies: Vec<u32>,
        n_features: usize,
    ) -> Result<Self, DatasetError> {
        if samples.len() != labels.len() || samples.len() != frequencies.len() {
            return Err(DatasetError::Invalid(format!(
                "length mismatch: {} samples, {} labels, {} frequencies",
                samples.len(),
                labels.len(),
                frequencies.len()
            )));
        }
        if let Some(&y) = labels.iter().find(|&&y| y > 1) {
            return Err(DatasetError::Invalid(format!("label {y} not in {{0,1}}")));
        }
        if frequencies.contains(&0) {
            return Err(DatasetError::Invalid("zero frequency".into()));
        }
        if let Some(m) = samples.iter().filter_map(SparseVec::max_index).max() {
            if m as usize >= n_features {
                return Err(DatasetError::Invalid(format!(
                    "feature index {m} out of range for {n_features} features"
                )));
            }
        }
        Ok(SparseDataset { samples, labels, frequencies, n_features })
    }

    /// Build a dataset of raw rows (frequency 1 each), inferring the feature
    /// count from the largest index.
    pub fn from_rows(rows: Vec<(SparseVec, u8)>) -> Result<Self, DatasetError> {
        let n_features = rows
            .iter()
            .filter_map(|(x, _)| x.max_index())
            .max()
            .map_or(0, |m| m as usize + 1);
        let n = rows.len();
        let (samples, labels) = rows.into_iter().unzip();
        Self::new(samples, labels, vec![1; n], n_features)
    }

    /// Number of distinct samples, `N`.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[SparseVec] {
        &self.samples
    }

    pub fn sample(&self, i: usize) -> &SparseVec {
        &self.samples[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn frequencies(&self) -> &[u32] {
        &self.frequencies
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Widen the feature dimension (e.g. to match a training set).
    pub fn with_n_features(mut self, n_features: usize) -> Result<Self, DatasetError> {
        if n_features < self.n_features {
            return Err(DatasetError::Invalid(format!(
                "cannot shrink feature count from {} to {n_features}",
                self.n_features
            )));
        }
        self.n_features = n_features;
        Ok(self)
    }

    /// Original row count, `Σ m_j`.
    pub fn n_raw(&self) -> u64 {
        self.frequencies.iter().map(|&m| m as u64).sum()
    }

    pub fn max_frequency(&self) -> u32 {
        self.frequencies.iter().copied().max().unwrap_or(0)
    }

    /// Merge identical `(features, label)` rows, summing frequencies and
    /// keeping first-occurrence order.
    pub fn deduplicate(&self) -> SparseDataset {
        let mut index: HashMap<(RowKey, u8), usize> = HashMap::new();
        let mut samples = Vec::new();
        let mut labels = Vec::new();
        let mut frequencies: Vec<u32> = Vec::new();
        for ((x, &y), &m) in self.samples.iter().zip(&self.labels).zip(&self.frequencies) {
            match index.entry((x.key(), y)) {
                std::collections::hash_map::Entry::Occupied(e) => frequencies[*e.get()] += m,
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(samples.len());
                    samples.push(x.clone());
                    labels.push(y);
                    frequencies.push(m);
                }
            }
        }
        SparseDataset { samples, labels, frequencies, n_features: self.n_features }
    }

    /// Expand to raw rows as distinct-sample indices, `m_j` copies each.
    fn raw_rows(&self) -> Vec<usize> {
        self.frequencies
            .iter()
            .enumerate()
            .flat_map(|(i, &m)| std::iter::repeat_n(i, m as usize))
            .collect()
    }

    fn select_raw(&self, rows: &[usize]) -> SparseDataset {
        let raw = SparseDataset {
            samples: rows.iter().map(|&i| self.samples[i].clone()).collect(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            frequencies: vec![1; rows.len()],
            n_features: self.n_features,
        };
        raw.deduplicate()
    }

    /// Partition raw rows into `(train, test)` by a seeded shuffle.
    ///
    /// The test part gets `round(test_fraction * n_raw)` rows. If that
    /// rounds to 0 or to `n_raw` the split is rejected. Both parts keep the
    /// full feature dimension and are deduplicated.
    pub fn split_train_test(
        &self,
        test_fraction: f64,
        seed: u64,
    ) -> Result<(SparseDataset, SparseDataset), DatasetError> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(DatasetError::Invalid(format!(
                "test fraction {test_fraction} not in (0,1)"
            )));
        }
        let n_raw = self.n_raw();
        let n_test = (test_fraction * n_raw as f64).round() as u64;
        if n_test == 0 || n_test >= n_raw {
            return Err(DatasetError::EmptySplit { n_raw, fraction: test_fraction });
        }
        let mut order: Vec<usize> = (0..n_raw as usize).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(rng::derive(seed, rng::streams::SPLIT, 0));
        order.shuffle(&mut rng);
        let (test_pos, train_pos) = order.split_at(n_test as usize);
        let mut test_pos = test_pos.to_vec();
        let mut train_pos = train_pos.to_vec();
        test_pos.sort_unstable();
        train_pos.sort_unstable();
        let rows = self.raw_rows();
        let pick = |pos: &[usize]| pos.iter().map(|&p| rows[p]).collect::<Vec<_>>();
        Ok((self.select_raw(&pick(&train_pos)), self.select_raw(&pick(&test_pos))))
    }

    /// Content hash over samples, labels, frequencies and dimension.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n_features as u64).to_le_bytes());
        for ((x, &y), &m) in self.samples.iter().zip(&self.labels).zip(&self.frequencies) {
            h.update([y]);
            h.update(m.to_le_bytes());
            h.update((x.nnz() as u64).to_le_bytes());
            for (i, v) in x.iter() {
                h.update(i.to_le_bytes());
                h.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(&h.finalize()[..16])
    }

    pub fn stats(&self) -> DatasetStats {
        let n_raw = self.n_raw();
        let positives: u64 = self
            .labels
            .iter()
            .zip(&self.frequencies)
            .filter(|(&y, _)| y == 1)
            .map(|(_, &m)| m as u64)
            .sum();
        DatasetStats {
            n_samples: self.len(),
            n_raw,
            n_features: self.n_features,
            duplication_ratio: if self.is_empty() { 0.0 } else { n_raw as f64 / self.len() as f64 },
            positive_rate: if n_raw == 0 { 0.0 } else { positives as f64 / n_raw as f64 },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub n_samples: usize,
    pub n_raw: u64,
    pub n_features: usize,
    /// `n_raw / n_samples`.
    pub duplication_ratio: f64,
    pub positive_rate: f64,
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n_samples={}", self.n_samples)?;
        writeln!(f, "n_raw={}", self.n_raw)?;
        writeln!(f, "n_features={}", self.n_features)?;
        writeln!(f, "duplication_ratio={}", self.duplication_ratio)?;
        write!(f, "positive_rate={}", self.positive_rate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(pairs: &[(u32, f64)]) -> SparseVec {
        SparseVec::from_pairs(pairs.iter().copied()).unwrap()
    }

    fn rows(rows: &[(&[(u32, f64)], u8)]) -> SparseDataset {
        SparseDataset::from_rows(rows.iter().map(|(p, y)| (sv(p), *y)).collect()).unwrap()
    }

    #[test]
    fn dedup_counts_repeats_in_first_occurrence_order() {
        let a: &[(u32, f64)] = &[(0, 1.0)];
        let b: &[(u32, f64)] = &[(1, 2.0)];
        let ds = rows(&[(a, 1), (a, 1), (b, 0)]).deduplicate();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.frequencies(), &[2, 1]);
        assert_eq!(ds.sample(0), &sv(a));
        assert_eq!(ds.n_raw(), 3);
    }

    #[test]
    fn dedup_identity_when_all_distinct() {
        let ds = rows(&[(&[(0, 1.0)], 1), (&[(0, 2.0)], 1), (&[], 0)]);
        let d = ds.deduplicate();
        assert_eq!(d.len(), 3);
        assert_eq!(d.frequencies(), &[1, 1, 1]);
    }

    #[test]
    fn dedup_keeps_conflicting_labels_apart() {
        let a: &[(u32, f64)] = &[(0, 1.0)];
        let d = rows(&[(a, 1), (a, 0)]).deduplicate();
        assert_eq!(d.len(), 2);
        assert_eq!(d.labels(), &[1, 0]);
    }

    #[test]
    fn dedup_is_bitwise_on_values() {
        let d = rows(&[(&[(0, 0.1 + 0.2)], 1), (&[(0, 0.3)], 1)]).deduplicate();
        assert_eq!(d.len(), 2);
    }

    #[test]
    fn zero_values_are_implicit() {
        let x = sv(&[(0, 0.0), (2, 3.0)]);
        assert_eq!(x.indices(), &[2]);
        assert_eq!(x.get(0), 0.0);
        assert_eq!(x.get(2), 3.0);
    }

    #[test]
    fn distance_handles_disjoint_supports() {
        let a = sv(&[(0, 3.0)]);
        let b = sv(&[(1, 4.0)]);
        assert_eq!(a.distance(&b), 5.0);
        assert_eq!(a.distance(&a), 0.0);
    }

    #[test]
    fn split_ten_rows() {
        let ds = rows(
            &(0..10)
                .map(|i| (vec![(0u32, i as f64 + 1.0)], (i % 2) as u8))
                .collect::<Vec<_>>()
                .iter()
                .map(|(p, y)| (p.as_slice(), *y))
                .collect::<Vec<_>>(),
        );
        let (tr, te) = ds.split_train_test(0.2, 7).unwrap();
        assert_eq!(tr.n_raw(), 8);
        assert_eq!(te.n_raw(), 2);
        for x in te.samples() {
            assert!(!tr.samples().contains(x));
        }
        let (tr2, te2) = ds.split_train_test(0.2, 7).unwrap();
        assert_eq!(tr, tr2);
        assert_eq!(te, te2);
    }

    #[test]
    fn split_rejects_empty_part() {
        let ds = rows(&[(&[(0, 1.0)], 1), (&[(0, 2.0)], 0)]);
        assert!(matches!(ds.split_train_test(0.999, 1), Err(DatasetError::EmptySplit { .. })));
        assert!(matches!(ds.split_train_test(0.1, 1), Err(DatasetError::EmptySplit { .. })));
        let (a, b) = ds.split_train_test(0.5, 1).unwrap();
        assert_eq!((a.n_raw(), b.n_raw()), (1, 1));
    }

    #[test]
    fn split_expands_duplicates() {
        let ds = SparseDataset::new(vec![sv(&[(0, 1.0)])], vec![1], vec![10], 1).unwrap();
        let (tr, te) = ds.split_train_test(0.3, 3).unwrap();
        assert_eq!(tr.frequencies(), &[7]);
        assert_eq!(te.frequencies(), &[3]);
    }

    #[test]
    fn new_rejects_bad_invariants() {
        assert!(SparseDataset::new(vec![sv(&[(3, 1.0)])], vec![1], vec![1], 3).is_err());
        assert!(SparseDataset::new(vec![sv(&[])], vec![2], vec![1], 1).is_err());
        assert!(SparseDataset::new(vec![sv(&[])], vec![1], vec![0], 1).is_err());
        assert!(SparseVec::from_pairs([(2, 1.0), (1, 1.0)]).is_err());
    }

    #[test]
    fn stats_report() {
        let ds = SparseDataset::new(vec![sv(&[(0, 1.0)]), sv(&[])], vec![1, 0], vec![3, 1], 2).unwrap();
        let s = ds.stats();
        assert_eq!(s.n_samples, 2);
        assert_eq!(s.n_raw, 4);
        assert_eq!(s.duplication_ratio, 2.0);
        assert_eq!(s.positive_rate, 0.75);
        assert!(s.to_string().contains("n_raw=4"));
    }
}
