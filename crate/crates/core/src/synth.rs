//! Bundled synthetic datasets at the two ends of the diversity scale.

use std::str::FromStr;

use crate::dataset::{SparseDataset, SparseVec};
use crate::rng;

pub const LOWDIV_FREQUENCIES: [u32; 3] = [10_000, 20_000, 30_000];
pub const HIGHDIV_ROWS: usize = 2_000;
pub const HIGHDIV_NOISE_FEATURES: usize = 200;
/// Nonzero noise entries per highdiv row.
pub const HIGHDIV_NOISE_NNZ: usize = 6;
/// Minimum `|w·x|` of the signal part; rows inside the band are redrawn.
pub const HIGHDIV_MARGIN: f64 = 0.05;

/// Three distinct samples with frequencies 10000, 20000 and 30000.
///
/// The first two share a feature vector and disagree on the label, so the
/// loss has a finite minimiser on that point; the third is separable.
pub fn lowdiv() -> SparseDataset {
    let a = SparseVec::from_pairs([(0, 1.0), (1, 0.5)]).expect("valid row");
    let b = SparseVec::from_pairs([(0, 2.0), (1, 1.5)]).expect("valid row");
    SparseDataset::new(vec![a.clone(), a, b], vec![1, 0, 1], LOWDIV_FREQUENCIES.to_vec(), 2)
        .expect("valid dataset")
}

/// `n` distinct rows, frequency 1 each: two dense signal features in
/// `[-1, 1]`, labelled by `x0 + 0.5 x1 > 0`, plus a few sparse noise
/// features out of [`HIGHDIV_NOISE_FEATURES`].
pub fn highdiv(n: usize, seed: u64) -> SparseDataset {
    let u = |row: u64, k: u64| rng::uniform(&[seed, rng::streams::SYNTH, row, k]);
    let mut rows = Vec::with_capacity(n);
    for r in 0..n as u64 {
        let mut attempt = 0u64;
        let (x0, x1) = loop {
            let x0 = 2.0 * u(r, 2 * attempt) - 1.0;
            let x1 = 2.0 * u(r, 2 * attempt + 1) - 1.0;
            if (x0 + 0.5 * x1).abs() >= HIGHDIV_MARGIN {
                break (x0, x1);
            }
            attempt += 1;
        };
        let label = u8::from(x0 + 0.5 * x1 > 0.0);
        let mut noise: Vec<u32> = Vec::with_capacity(HIGHDIV_NOISE_NNZ);
        let mut k = 0u64;
        while noise.len() < HIGHDIV_NOISE_NNZ {
            let f = 2 + (rng::mix(&[seed, rng::streams::SYNTH, r, 1 << 32 | k]) % HIGHDIV_NOISE_FEATURES as u64) as u32;
            if !noise.contains(&f) {
                noise.push(f);
            }
            k += 1;
        }
        noise.sort_unstable();
        let pairs = [(0, x0), (1, x1)]
            .into_iter()
            .chain(noise.iter().enumerate().map(|(j, &f)| (f, 0.01 + u(r, 1 << 33 | j as u64))));
        rows.push((SparseVec::from_pairs(pairs).expect("ascending indices"), label));
    }
    SparseDataset::from_rows(rows)
        .expect("valid rows")
        .with_n_features(2 + HIGHDIV_NOISE_FEATURES)
        .expect("features fit")
        .deduplicate()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Synthetic {
    LowDiv,
    HighDiv,
}

impl FromStr for Synthetic {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lowdiv" => Ok(Synthetic::LowDiv),
            "highdiv" => Ok(Synthetic::HighDiv),
            _ => Err(format!("unknown synthetic dataset {s:?} (expected lowdiv or highdiv)")),
        }
    }
}

impl Synthetic {
    /// `rows` and `seed` only affect highdiv.
    pub fn generate(self, rows: usize, seed: u64) -> SparseDataset {
        match self {
            Synthetic::LowDiv => lowdiv(),
            Synthetic::HighDiv => highdiv(rows, seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowdiv_shape() {
        let d = lowdiv();
        assert_eq!(d.len(), 3);
        assert_eq!(d.n_raw(), 60_000);
        assert_eq!(d.frequencies(), &LOWDIV_FREQUENCIES);
        assert_eq!(d.deduplicate(), d);
    }

    #[test]
    fn highdiv_is_distinct_and_separable() {
        let d = highdiv(HIGHDIV_ROWS, 7);
        assert_eq!(d.len(), HIGHDIV_ROWS);
        assert!(d.frequencies().iter().all(|&m| m == 1));
        assert_eq!(d.n_features(), 2 + HIGHDIV_NOISE_FEATURES);
        let pos = d.labels().iter().filter(|&&y| y == 1).count();
        assert!(pos > 800 && pos < 1200, "{pos}");
        for (x, &y) in d.samples().iter().zip(d.labels()) {
            let s = x.get(0) + 0.5 * x.get(1);
            assert!(s.abs() >= HIGHDIV_MARGIN);
            assert_eq!(y == 1, s > 0.0);
            assert_eq!(x.nnz(), 2 + HIGHDIV_NOISE_NNZ);
        }
        assert_eq!(highdiv(50, 7), highdiv(50, 7));
        assert_ne!(highdiv(50, 7), highdiv(50, 8));
    }
}
