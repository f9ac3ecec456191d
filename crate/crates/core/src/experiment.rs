//! Paired training runs and the updates-to-threshold metric.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::dataset::{RowKey, SparseDataset};
use crate::sampler::SamplingPlan;
use crate::trainer::{train, Forest, History, TrainConfig, TrainError};

pub const SUMMARY_HEADER: &str = "value,updates_to_threshold,final_loss";

/// Lowest mean loss any function of `x` can reach: rows sharing a feature
/// vector are best predicted by their label frequency. Separable groups
/// contribute 0 (an infimum, never attained).
pub fn optimal_loss(ds: &SparseDataset) -> f64 {
    let mut groups: HashMap<RowKey, (f64, f64)> = HashMap::new();
    for ((x, &y), &m) in ds.samples().iter().zip(ds.labels()).zip(ds.frequencies()) {
        let g = groups.entry(x.key()).or_default();
        g.0 += m as f64;
        g.1 += (m as u64 * y as u64) as f64;
    }
    let total: f64 = groups
        .values()
        .map(|&(n, pos)| {
            let p = pos / n;
            let h = |q: f64| if q > 0.0 { -q * q.ln() } else { 0.0 };
            n * (h(p) + h(1.0 - p))
        })
        .sum();
    total / ds.n_raw() as f64
}

/// `L* + fraction·(L0 - L*)`: the loss at which a run has closed
/// `1 - fraction` of its gap to the optimum.
pub fn gap_threshold(initial: f64, optimum: f64, fraction: f64) -> f64 {
    optimum + fraction * (initial - optimum)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Workers,
    Rate,
}

impl FromStr for SweepAxis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "workers" => Ok(SweepAxis::Workers),
            "rate" => Ok(SweepAxis::Rate),
            _ => Err(format!("unknown sweep axis {s:?} (expected workers or rate)")),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::Workers => "workers",
            SweepAxis::Rate => "rate",
        })
    }
}

impl SweepAxis {
    /// `base` with this axis set to `value`.
    pub fn apply(self, base: &TrainConfig, value: f64) -> Result<TrainConfig, TrainError> {
        let mut cfg = base.clone();
        match self {
            SweepAxis::Workers => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(TrainError::Config(format!("worker count {value} is not a positive integer")));
                }
                cfg.n_workers = value as usize;
            }
            SweepAxis::Rate => cfg.plan = SamplingPlan::uniform(value)?,
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub value: f64,
    pub forest: Forest,
    pub history: History,
    /// `None` when the threshold was never reached.
    pub updates_to_threshold: Option<u64>,
}

impl SweepCell {
    pub fn final_loss(&self) -> f64 {
        self.history.final_train_loss()
    }
}

/// One training run per value, everything else from `base`.
pub fn sweep(
    ds: &SparseDataset,
    test: Option<&SparseDataset>,
    base: &TrainConfig,
    axis: SweepAxis,
    values: &[f64],
    threshold: f64,
) -> Result<Vec<SweepCell>, TrainError> {
    values
        .iter()
        .map(|&value| {
            let cfg = axis.apply(base, value)?;
            let (forest, history) = train(ds, test, &cfg)?;
            let updates_to_threshold = history.updates_to_threshold(threshold);
            Ok(SweepCell { value, forest, history, updates_to_threshold })
        })
        .collect()
}

pub fn write_summary<W: Write>(cells: &[SweepCell], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for c in cells {
        let u = c.updates_to_threshold.map_or_else(|| "saturated".to_string(), |u| u.to_string());
        writeln!(out, "{},{},{}", c.value, u, c.final_loss())?;
    }
    Ok(())
}

/// Updates to threshold with `workers` workers over the same with one.
/// `None` if either run never reaches the threshold.
pub fn slowdown(
    ds: &SparseDataset,
    base: &TrainConfig,
    workers: usize,
    threshold: f64,
) -> Result<Option<f64>, TrainError> {
    let cells = sweep(ds, None, base, SweepAxis::Workers, &[1.0, workers as f64], threshold)?;
    Ok(match (cells[0].updates_to_threshold, cells[1].updates_to_threshold) {
        (Some(a), Some(b)) if a > 0 => Some(b as f64 / a as f64),
        _ => None,
    })
}
