use std::sync::Arc;

use super::forest::{init_forest, Forest};
use super::history::{History, UpdateRecord};
use super::metrics::accuracy;
use super::{TrainConfig, TrainError};
use crate::dataset::{FeatureBins, SparseDataset};
use crate::loss::{logistic_gradient, logistic_loss};
use crate::rng;
use crate::sampler::draw;
use crate::tree::{fit_values, RegressionTree, TreeError, TreeParams};

/// A published target, immutable once shared.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// Number of updates applied when this target was computed.
    pub version: u64,
    /// Samples with `Q'_i = 1`.
    pub included: Vec<u32>,
    /// Descent direction per sample, `-ℓ'_i`, for included samples.
    pub values: Vec<f64>,
    /// `m'_i`.
    pub weights: Vec<f64>,
}

/// Everything a worker needs to build one tree.
pub struct BuildJob<'a> {
    pub bins: &'a FeatureBins,
    pub snapshot: &'a Snapshot,
    /// Tree parameters with this tree's feature seed filled in.
    pub params: TreeParams,
    pub worker: usize,
    /// 1-based count of trees this worker has started.
    pub local_index: u64,
}

pub trait TreeBuilder: Sync {
    fn build(&self, job: &BuildJob<'_>) -> Result<RegressionTree, TreeError>;
}

/// The standard leaf-wise histogram builder.
pub struct HistogramBuilder;

impl TreeBuilder for HistogramBuilder {
    fn build(&self, job: &BuildJob<'_>) -> Result<RegressionTree, TreeError> {
        let s = job.snapshot;
        fit_values(job.bins, &s.included, &s.values, &s.weights, &job.params)
    }
}

pub(crate) fn make_job<'a>(
    bins: &'a FeatureBins,
    snapshot: &'a Snapshot,
    cfg: &TrainConfig,
    worker: usize,
    local_index: u64,
) -> BuildJob<'a> {
    let feature_seed = rng::mix(&[cfg.tree_seed, rng::streams::FEATURES, worker as u64, local_index]);
    BuildJob { bins, snapshot, params: TreeParams { feature_seed, ..cfg.tree.clone() }, worker, local_index }
}

pub(crate) fn run_job(builder: &dyn TreeBuilder, job: &BuildJob<'_>) -> Result<RegressionTree, TreeError> {
    let mut tree = builder.build(job)?;
    tree.draw_index = job.snapshot.version;
    Ok(tree)
}

/// The single owner of mutable training state.
pub(crate) struct Server<'a> {
    ds: &'a SparseDataset,
    test: Option<&'a SparseDataset>,
    cfg: &'a TrainConfig,
    pub bins: Arc<FeatureBins>,
    pub forest: Forest,
    scores: Vec<f64>,
    test_scores: Vec<f64>,
    pub history: History,
    published: Arc<Snapshot>,
}

impl<'a> Server<'a> {
    pub fn new(ds: &'a SparseDataset, test: Option<&'a SparseDataset>, cfg: &'a TrainConfig) -> Result<Self, TrainError> {
        cfg.validate(ds)?;
        if let Some(t) = test {
            if t.n_features() > ds.n_features() {
                return Err(TrainError::Config(format!(
                    "test set has {} features, training set {}",
                    t.n_features(),
                    ds.n_features()
                )));
            }
        }
        let bins = Arc::new(FeatureBins::build(ds, cfg.max_bins)?);
        let mut forest = init_forest(ds)?;
        forest.manifest = manifest(cfg);
        let scores = vec![forest.f0; ds.len()];
        let test_scores = test.map_or_else(Vec::new, |t| vec![forest.f0; t.len()]);
        let published = Arc::new(target(ds, cfg, &scores, 0));
        let history = History { initial_train_loss: mean_loss(ds, &scores), records: Vec::new() };
        Ok(Server { ds, test, cfg, bins, forest, scores, test_scores, history, published })
    }

    pub fn version(&self) -> u64 {
        self.forest.len() as u64
    }

    pub fn published(&self) -> Arc<Snapshot> {
        Arc::clone(&self.published)
    }

    /// Apply one received tree and publish the next target.
    pub fn apply(&mut self, tree: RegressionTree, worker: usize, built_on: u64, clock: f64, build_time: f64, server_time: f64) {
        let before = self.version();
        let v = self.cfg.step;
        for (s, x) in self.scores.iter_mut().zip(self.ds.samples()) {
            *s += v * tree.predict(x);
        }
        if let Some(t) = self.test {
            for (s, x) in self.test_scores.iter_mut().zip(t.samples()) {
                *s += v * tree.predict(x);
            }
        }
        self.forest.push(tree, v);
        let j = self.version();
        self.published = Arc::new(target(self.ds, self.cfg, &self.scores, j));
        let (test_loss, acc) = match self.test {
            Some(t) => (
                Some(mean_loss(t, &self.test_scores)),
                Some(accuracy(&self.test_scores, t.labels(), t.frequencies())),
            ),
            None => (None, None),
        };
        self.history.records.push(UpdateRecord {
            update: j,
            worker,
            staleness: before - built_on,
            train_loss: mean_loss(self.ds, &self.scores),
            test_loss,
            accuracy: acc,
            clock,
            build_time,
            server_time,
        });
    }

    pub fn finish(self) -> (Forest, History) {
        (self.forest, self.history)
    }
}

fn manifest(cfg: &TrainConfig) -> std::collections::BTreeMap<String, String> {
    let rate = match &cfg.plan {
        crate::sampler::SamplingPlan::Uniform(r) => format!("{r:?}"),
        crate::sampler::SamplingPlan::PerReplica(_) => "per-replica".into(),
    };
    [
        ("step", format!("{:?}", cfg.step)),
        ("rate", rate),
        ("max_leaves", cfg.tree.max_leaves.to_string()),
        ("min_samples_leaf", cfg.tree.min_samples_leaf.to_string()),
        ("feature_fraction", format!("{:?}", cfg.tree.feature_fraction)),
        ("max_bins", cfg.max_bins.to_string()),
        ("sample_seed", cfg.sample_seed.to_string()),
        ("tree_seed", cfg.tree_seed.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

fn target(ds: &SparseDataset, cfg: &TrainConfig, scores: &[f64], version: u64) -> Snapshot {
    let d = draw(&cfg.plan, ds, cfg.sample_seed, version);
    let included = d.included();
    let mut values = vec![0.0; ds.len()];
    for &i in &included {
        let i = i as usize;
        values[i] = -logistic_gradient(ds.labels()[i], scores[i]);
    }
    Snapshot { version, included, values, weights: d.weights().to_vec() }
}

fn mean_loss(ds: &SparseDataset, scores: &[f64]) -> f64 {
    let total: f64 = ds
        .labels()
        .iter()
        .zip(ds.frequencies())
        .zip(scores)
        .map(|((&y, &m), &f)| m as f64 * logistic_loss(y, f))
        .sum();
    total / ds.n_raw() as f64
}
