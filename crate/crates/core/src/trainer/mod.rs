//! Boosting loops over a single logical parameter server.
//!
//! The server owns the forest, the per-sample scores and the published
//! target. Workers pull the latest target snapshot, fit a tree, and push it
//! back; the server applies pushes one at a time:
//!
//! 1. append the tree with step `v`,
//! 2. draw a fresh `Q`,
//! 3. recompute the sampled target on the updated scores,
//! 4. publish it, replacing the previous one.
//!
//! Three drivers share that server: [`train_serial`], and [`train_async`]
//! in either the deterministic virtual scheduler or real threads.

mod forest;
mod history;
mod metrics;
mod server;
mod serial;
mod threads;
mod virtual_sched;

use std::str::FromStr;

use thiserror::Error;

pub use forest::{init_forest, score_vector, Forest};
pub use history::{History, UpdateRecord, HISTORY_HEADER};
pub use metrics::{auc, evaluate, Metrics};
pub use server::{BuildJob, HistogramBuilder, Snapshot, TreeBuilder};

use crate::dataset::{DatasetError, SparseDataset};
use crate::sampler::{SamplerError, SamplingPlan};
use crate::tree::{TreeError, TreeParams};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("all {0} workers failed before training finished")]
    AllWorkersFailed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// One loop, no server/worker split.
    Serial,
    /// Discrete-event simulation of workers; single-threaded and replayable.
    Virtual,
    /// One OS thread per worker.
    Threads,
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "serial" => Ok(Mode::Serial),
            "virtual" => Ok(Mode::Virtual),
            "threads" => Ok(Mode::Threads),
            _ => Err(format!("unknown mode {s:?} (expected serial, virtual or threads)")),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Serial => "serial",
            Mode::Virtual => "virtual",
            Mode::Threads => "threads",
        })
    }
}

/// Cap on `τ_j`, the number of updates applied between a worker's pull and
/// the application of its tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StalenessBound {
    /// `2 × n_workers`.
    Auto,
    Bounded(u64),
    Unbounded,
}

impl StalenessBound {
    pub fn resolve(self, n_workers: usize) -> Option<u64> {
        match self {
            StalenessBound::Auto => Some(2 * n_workers as u64),
            StalenessBound::Bounded(s) => Some(s),
            StalenessBound::Unbounded => None,
        }
    }
}

impl FromStr for StalenessBound {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(StalenessBound::Auto),
            "unbounded" => Ok(StalenessBound::Unbounded),
            n => n
                .parse()
                .map(StalenessBound::Bounded)
                .map_err(|_| format!("invalid staleness bound {s:?}")),
        }
    }
}

impl std::fmt::Display for StalenessBound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StalenessBound::Auto => f.write_str("auto"),
            StalenessBound::Bounded(s) => write!(f, "{s}"),
            StalenessBound::Unbounded => f.write_str("unbounded"),
        }
    }
}

/// Simulated durations for the virtual scheduler, in abstract ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimTiming {
    pub build_ticks: u64,
    /// Server time per update (receive, draw, target recompute, publish).
    pub server_ticks: u64,
    /// Each build takes `build_ticks + U{0..=jitter_ticks}`, seeded.
    pub jitter_ticks: u64,
}

impl Default for SimTiming {
    fn default() -> Self {
        SimTiming { build_ticks: 10, server_ticks: 1, jitter_ticks: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub n_trees: usize,
    /// Step length `v`.
    pub step: f64,
    pub plan: SamplingPlan,
    /// `feature_seed` is ignored; each tree derives its own from `tree_seed`.
    pub tree: TreeParams,
    pub max_bins: usize,
    pub n_workers: usize,
    pub max_staleness: StalenessBound,
    pub mode: Mode,
    pub sample_seed: u64,
    pub tree_seed: u64,
    pub schedule_seed: u64,
    pub sim: SimTiming,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_trees: 100,
            step: 0.1,
            plan: SamplingPlan::Uniform(1.0),
            tree: TreeParams::default(),
            max_bins: crate::dataset::DEFAULT_MAX_BINS,
            n_workers: 1,
            max_staleness: StalenessBound::Auto,
            mode: Mode::Virtual,
            sample_seed: 1,
            tree_seed: 2,
            schedule_seed: 3,
            sim: SimTiming::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, ds: &SparseDataset) -> Result<(), TrainError> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(TrainError::Config(format!("step {} must be positive", self.step)));
        }
        if self.n_workers < 1 {
            return Err(TrainError::Config("n_workers must be at least 1".into()));
        }
        if self.mode == Mode::Serial && self.n_workers != 1 {
            return Err(TrainError::Config("serial mode runs exactly one worker".into()));
        }
        if self.mode == Mode::Virtual && self.sim.build_ticks == 0 && self.sim.server_ticks == 0 {
            return Err(TrainError::Config("virtual mode needs nonzero simulated time".into()));
        }
        if ds.is_empty() {
            return Err(TrainError::Config("training set is empty".into()));
        }
        self.tree.validate()?;
        self.plan.validate(ds)?;
        Ok(())
    }
}

/// Run training in the configured mode.
pub fn train(
    ds: &SparseDataset,
    test: Option<&SparseDataset>,
    cfg: &TrainConfig,
) -> Result<(Forest, History), TrainError> {
    train_with_builder(ds, test, cfg, &HistogramBuilder)
}

/// [`train`] with a custom tree builder.
pub fn train_with_builder(
    ds: &SparseDataset,
    test: Option<&SparseDataset>,
    cfg: &TrainConfig,
    builder: &dyn TreeBuilder,
) -> Result<(Forest, History), TrainError> {
    match cfg.mode {
        Mode::Serial => serial::run(ds, test, cfg, builder),
        Mode::Virtual => virtual_sched::run(ds, test, cfg, builder),
        Mode::Threads => threads::run(ds, test, cfg, builder),
    }
}

/// Serial boosting: draw, fit, apply, `n_trees` times. With rate 1 this is
/// plain GBDT; with rate < 1 it is stochastic GBDT.
pub fn train_serial(
    ds: &SparseDataset,
    test: Option<&SparseDataset>,
    cfg: &TrainConfig,
) -> Result<(Forest, History), TrainError> {
    let cfg = TrainConfig { mode: Mode::Serial, n_workers: 1, ..cfg.clone() };
    serial::run(ds, test, &cfg, &HistogramBuilder)
}

/// Asynchronous boosting in `cfg.mode` (virtual or threads).
pub fn train_async(
    ds: &SparseDataset,
    test: Option<&SparseDataset>,
    cfg: &TrainConfig,
) -> Result<(Forest, History), TrainError> {
    match cfg.mode {
        Mode::Serial => Err(TrainError::Config("train_async needs virtual or threads mode".into())),
        _ => train(ds, test, cfg),
    }
}

/// Admission rule for a pull at `version` with trees still in flight.
///
/// Keeps `(version - k) + (in_flight - 1) <= bound` for every in-flight
/// tree built on version `k`, which caps the staleness of each tree when it
/// lands at `bound`.
pub(crate) fn may_pull(version: u64, in_flight: &std::collections::BTreeMap<u64, usize>, bound: Option<u64>) -> bool {
    let Some(bound) = bound else { return true };
    let Some((&oldest, _)) = in_flight.iter().next() else { return true };
    let count: usize = in_flight.values().sum();
    (version - oldest) + count as u64 <= bound
}
