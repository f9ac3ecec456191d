//! Run configuration: a sectioned `key = value` file (TOML), command-line
//! overrides, and the echo written next to every run's outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DEFAULT_MAX_BINS;
use crate::sampler::SamplingPlan;
use crate::trainer::{SimTiming, StalenessBound, TrainConfig};
use crate::tree::TreeParams;

/// Output directory used when neither the config nor the command line
/// names one.
pub const OUT_DIR_ENV: &str = "ASGBDT_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "asgbdt-out";
pub const ECHO_FILE: &str = "run.toml";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid override {0:?}: expected section.key=value")]
    Override(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Hold out this fraction of raw training rows when `test` is unset.
    pub test_fraction: Option<f64>,
    pub split_seed: u64,
    pub max_bins: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection { train: None, test: None, test_fraction: None, split_seed: 0, max_bins: DEFAULT_MAX_BINS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub n_trees: usize,
    pub step: f64,
    pub rate: f64,
    pub max_leaves: usize,
    pub min_samples_leaf: u32,
    pub feature_fraction: f64,
    pub n_workers: usize,
    pub max_staleness: Staleness,
    /// `"serial"`, `"virtual"` or `"threads"`.
    pub mode: String,
    pub sample_seed: u64,
    pub tree_seed: u64,
    pub schedule_seed: u64,
    pub build_ticks: u64,
    pub server_ticks: u64,
    pub jitter_ticks: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            n_trees: t.n_trees,
            step: t.step,
            rate: 1.0,
            max_leaves: t.tree.max_leaves,
            min_samples_leaf: t.tree.min_samples_leaf,
            feature_fraction: t.tree.feature_fraction,
            n_workers: t.n_workers,
            max_staleness: Staleness::from(t.max_staleness),
            mode: t.mode.to_string(),
            sample_seed: t.sample_seed,
            tree_seed: t.tree_seed,
            schedule_seed: t.schedule_seed,
            build_ticks: t.sim.build_ticks,
            server_ticks: t.sim.server_ticks,
            jitter_ticks: t.sim.jitter_ticks,
        }
    }
}

/// `max_staleness`: a number, `"auto"` or `"unbounded"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Staleness {
    Count(u64),
    Word(String),
}

impl From<StalenessBound> for Staleness {
    fn from(b: StalenessBound) -> Self {
        match b {
            StalenessBound::Bounded(n) => Staleness::Count(n),
            other => Staleness::Word(other.to_string()),
        }
    }
}

impl Staleness {
    pub fn bound(&self) -> Result<StalenessBound, String> {
        match self {
            Staleness::Count(n) => Ok(StalenessBound::Bounded(*n)),
            Staleness::Word(w) => w.parse(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    pub train: TrainSection,
    pub output: OutputSection,
}

/// Parse the right-hand side of an override as a TOML value, falling back
/// to a bare string (`mode=threads`).
fn override_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

impl RunConfig {
    /// Parse config text, then apply `section.key=value` overrides in order.
    pub fn from_text(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            let (key, value) = o.split_once('=').ok_or_else(|| ConfigError::Override(o.clone()))?;
            let (section, field) = key.trim().split_once('.').ok_or_else(|| ConfigError::Override(o.clone()))?;
            let entry = table
                .entry(section.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let toml::Value::Table(sec) = entry else {
                return Err(ConfigError::Override(o.clone()));
            };
            sec.insert(field.to_string(), override_value(value.trim()));
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.train_config()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|source| ConfigError::Io { path: p.to_path_buf(), source })?,
            None => String::new(),
        };
        Self::from_text(&text, overrides)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn train_config(&self) -> Result<TrainConfig, ConfigError> {
        let t = &self.train;
        let invalid = ConfigError::Invalid;
        Ok(TrainConfig {
            n_trees: t.n_trees,
            step: t.step,
            plan: SamplingPlan::uniform(t.rate).map_err(|e| invalid(e.to_string()))?,
            tree: TreeParams {
                max_leaves: t.max_leaves,
                min_samples_leaf: t.min_samples_leaf,
                feature_fraction: t.feature_fraction,
                feature_seed: 0,
            },
            max_bins: self.data.max_bins,
            n_workers: t.n_workers,
            max_staleness: t.max_staleness.bound().map_err(invalid)?,
            mode: t.mode.parse().map_err(invalid)?,
            sample_seed: t.sample_seed,
            tree_seed: t.tree_seed,
            schedule_seed: t.schedule_seed,
            sim: SimTiming { build_ticks: t.build_ticks, server_ticks: t.server_ticks, jitter_ticks: t.jitter_ticks },
        })
    }

    /// `explicit`, then the config's `output.dir`, then `$ASGBDT_OUT_DIR`,
    /// then [`DEFAULT_OUT_DIR`].
    pub fn output_dir(&self, explicit: Option<&Path>) -> PathBuf {
        explicit
            .map(Path::to_path_buf)
            .or_else(|| self.output.dir.clone())
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::Mode;

    #[test]
    fn empty_config_gives_defaults() {
        let c = RunConfig::from_text("", &[]).unwrap();
        let t = c.train_config().unwrap();
        assert_eq!(t, TrainConfig::default());
    }

    #[test]
    fn sections_and_overrides() {
        let text = "[data]\ntrain = \"a.svm\"\n[train]\nn_trees = 7\nmode = \"serial\"\n";
        let c = RunConfig::from_text(
            text,
            &["train.step=0.25".into(), "train.max_staleness=3".into(), "train.mode=threads".into(), "output.dir=o".into()],
        )
        .unwrap();
        assert_eq!(c.data.train.as_deref(), Some(Path::new("a.svm")));
        let t = c.train_config().unwrap();
        assert_eq!(t.n_trees, 7);
        assert_eq!(t.step, 0.25);
        assert_eq!(t.max_staleness, StalenessBound::Bounded(3));
        assert_eq!(t.mode, Mode::Threads);
        assert_eq!(c.output_dir(None), PathBuf::from("o"));
        assert_eq!(c.output_dir(Some(Path::new("x"))), PathBuf::from("x"));
    }

    #[test]
    fn echo_round_trips() {
        let c = RunConfig::from_text("[train]\nrate = 0.5\nmax_staleness = \"unbounded\"\n", &["data.test_fraction=0.2".into()]).unwrap();
        let back = RunConfig::from_text(&c.to_text(), &[]).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::from_text("[train]\nbogus = 1\n", &[]).is_err());
        assert!(RunConfig::from_text("[train]\nmode = \"gpu\"\n", &[]).is_err());
        assert!(RunConfig::from_text("[train]\nrate = 0\n", &[]).is_err());
        assert!(RunConfig::from_text("", &["nodot=1".into()]).is_err());
        assert!(RunConfig::from_text("", &["train.n_trees".into()]).is_err());
        assert!(RunConfig::from_text("not toml [", &[]).is_err());
        assert!(RunConfig::from_text("[train]\nmax_staleness = \"often\"\n", &[]).is_err());
    }
}
