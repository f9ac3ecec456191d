use super::{DatasetError, SparseDataset};

pub const DEFAULT_MAX_BINS: usize = 255;

/// Per-feature histogram bins plus the bin of every stored entry.
///
/// Bin `b` of feature `f` holds values `v` with
/// `uppers[f][b-1] < v <= uppers[f][b]`; the last upper bound is `+inf`.
/// Absent entries (value 0) live in `zero_bin(f)`.
#[derive(Debug, Clone)]
pub struct FeatureBins {
    uppers: Vec<Vec<f64>>,
    zero_bin: Vec<u8>,
    rows: Vec<Vec<(u32, u8)>>,
    offsets: Vec<usize>,
}

impl FeatureBins {
    /// Quantile bins over the frequency-weighted value multiset of each
    /// feature. Features with at most `max_bins` distinct values get one bin
    /// per value.
    pub fn build(ds: &SparseDataset, max_bins: usize) -> Result<Self, DatasetError> {
        if !(2..=256).contains(&max_bins) {
            return Err(DatasetError::Invalid(format!("max_bins {max_bins} not in [2, 256]")));
        }
        let nf = ds.n_features();
        let mut values: Vec<Vec<(f64, u64)>> = vec![Vec::new(); nf];
        let mut present_weight = vec![0u64; nf];
        for (x, &m) in ds.samples().iter().zip(ds.frequencies()) {
            for (i, v) in x.iter() {
                values[i as usize].push((v, m as u64));
                present_weight[i as usize] += m as u64;
            }
        }
        let n_raw = ds.n_raw();
        let mut uppers = Vec::with_capacity(nf);
        for (f, mut vals) in values.into_iter().enumerate() {
            let zeros = n_raw - present_weight[f];
            if zeros > 0 {
                vals.push((0.0, zeros));
            }
            uppers.push(quantile_uppers(vals, max_bins));
        }
        let zero_bin: Vec<u8> = uppers.iter().map(|u| locate(u, 0.0)).collect();
        let rows = ds
            .samples()
            .iter()
            .map(|x| x.iter().map(|(i, v)| (i, locate(&uppers[i as usize], v))).collect())
            .collect();
        let mut offsets = Vec::with_capacity(nf + 1);
        let mut acc = 0;
        for u in &uppers {
            offsets.push(acc);
            acc += u.len();
        }
        offsets.push(acc);
        Ok(FeatureBins { uppers, zero_bin, rows, offsets })
    }

    pub fn n_features(&self) -> usize {
        self.uppers.len()
    }

    pub fn n_samples(&self) -> usize {
        self.rows.len()
    }

    pub fn n_bins(&self, feature: usize) -> usize {
        self.uppers[feature].len()
    }

    /// Upper bounds of each bin of `feature`; the last is `+inf`.
    pub fn uppers(&self, feature: usize) -> &[f64] {
        &self.uppers[feature]
    }

    pub fn zero_bin(&self, feature: usize) -> u8 {
        self.zero_bin[feature]
    }

    /// Bin containing `value` for `feature`.
    pub fn bin_for_value(&self, feature: usize, value: f64) -> u8 {
        locate(&self.uppers[feature], value)
    }

    /// Bin of sample `i` on `feature`.
    pub fn bin_of(&self, i: usize, feature: usize) -> u8 {
        let row = &self.rows[i];
        match row.binary_search_by_key(&(feature as u32), |&(f, _)| f) {
            Ok(p) => row[p].1,
            Err(_) => self.zero_bin[feature],
        }
    }

    /// Stored (non-zero) entries of sample `i` as `(feature, bin)`.
    pub(crate) fn row(&self, i: usize) -> &[(u32, u8)] {
        &self.rows[i]
    }

    /// Start of each feature's slot range in a flat histogram; the final
    /// element is the total bin count.
    pub(crate) fn offsets(&self) -> &[usize] {
        &self.offsets
    }
}

fn locate(uppers: &[f64], value: f64) -> u8 {
    uppers.partition_point(|&u| u < value) as u8
}

fn quantile_uppers(mut vals: Vec<(f64, u64)>, max_bins: usize) -> Vec<f64> {
    vals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut distinct: Vec<(f64, u64)> = Vec::with_capacity(vals.len());
    for (v, w) in vals {
        match distinct.last_mut() {
            Some(last) if last.0 == v => last.1 += w,
            _ => distinct.push((v, w)),
        }
    }
    if distinct.len() <= 1 {
        return vec![f64::INFINITY];
    }
    let max_value = distinct[distinct.len() - 1].0;
    let mut uppers = Vec::new();
    if distinct.len() <= max_bins {
        uppers.extend(distinct[..distinct.len() - 1].iter().map(|d| d.0));
    } else {
        let total: u64 = distinct.iter().map(|d| d.1).sum();
        let mut cum = 0u64;
        let mut k = 1usize;
        for &(v, w) in &distinct {
            cum += w;
            // cut after v once the cumulative weight reaches k/max_bins of the total
            let mut crossed = false;
            while k < max_bins && (cum as u128) * (max_bins as u128) >= (k as u128) * (total as u128) {
                crossed = true;
                k += 1;
            }
            if crossed && v < max_value && uppers.last().is_none_or(|&u| u < v) {
                uppers.push(v);
            }
            if k >= max_bins {
                break;
            }
        }
    }
    uppers.push(f64::INFINITY);
    uppers
}
