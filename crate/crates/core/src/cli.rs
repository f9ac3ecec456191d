//! The `asgbdt` command line.
//!
//! Exit codes: 0 on success, 2 for usage, config or data errors, 3 for
//! internal failures.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use crate::config::{RunConfig, ECHO_FILE};
use crate::dataset::{read_libsvm, write_libsvm, SparseDataset};
use crate::experiment::{sweep, write_summary, SweepAxis};
use crate::sampler::{estimate_diversity, SamplingPlan, DEFAULT_TRIALS};
use crate::synth::{Synthetic, HIGHDIV_ROWS};
use crate::theory::{self, TheoryConstants, TheoryReport};
use crate::trainer::{evaluate, init_forest, train, Forest, TrainError};

pub const FOREST_FILE: &str = "forest.txt";
pub const HISTORY_FILE: &str = "history.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Internal(String),
    /// Stdout was closed by the reader (`| head`); not reported.
    Closed,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
            CliError::Closed => 0,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Internal(m) => m,
            CliError::Closed => "",
        }
    }
}

impl From<crate::config::ConfigError> for CliError {
    fn from(e: crate::config::ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<crate::dataset::DatasetError> for CliError {
    fn from(e: crate::dataset::DatasetError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<theory::TheoryError> for CliError {
    fn from(e: theory::TheoryError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) | TrainError::Dataset(_) | TrainError::Sampler(_) => CliError::Usage(e.to_string()),
            TrainError::Tree(_) | TrainError::AllWorkersFailed(_) => CliError::Internal(e.to_string()),
        }
    }
}

fn write_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Internal(format!("cannot write {}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "asgbdt", version, about = "Asynchronous stochastic gradient-boosted trees")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a forest; writes forest.txt, history.csv and run.toml.
    Train(TrainArgs),
    /// Print loss, accuracy and AUC of a forest on a dataset.
    Eval(EvalArgs),
    /// Dataset and sampling-diversity statistics.
    Stats(StatsArgs),
    /// Step length, iteration bound and contraction report.
    Theory(TheoryArgs),
    /// One training run per value of a worker count or sampling rate.
    Sweep(SweepArgs),
    /// Write a bundled synthetic dataset in LIBSVM format.
    GenData(GenDataArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Config file (TOML sections [data], [train], [output]).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a config entry, e.g. `--set train.step=0.05`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Training data (LIBSVM); overrides data.train.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Test data (LIBSVM); overrides data.test.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
    /// Output directory; falls back to output.dir, then $ASGBDT_OUT_DIR.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub forest: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub rate: f64,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    /// Strong-convexity modulus (placeholder 1 if unset).
    #[arg(long)]
    pub c: Option<f64>,
    /// Lipschitz constant (placeholder 1 if unset).
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long = "M")]
    pub m: Option<f64>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub delta_cap: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub zeta: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub tau: f64,
    #[arg(long)]
    pub delta_leaf: Option<f64>,
    #[arg(long)]
    pub m_max: Option<f64>,
    /// Numerator inside the iteration bound's log (defaults to lambda).
    #[arg(long)]
    pub log_l: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub d0: f64,
    /// Step for the contraction report; the computed v if unset.
    #[arg(long)]
    pub v: Option<f64>,
    /// Build time per tree, any unit.
    #[arg(long)]
    pub t_build: Option<f64>,
    /// Communication plus target time per update, same unit.
    #[arg(long)]
    pub t_comm: Option<f64>,
    /// Estimate Ω, Δ, ρ, M, ζ, δ, m_max from this dataset.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Forest whose trees supply the leaf partitions for estimation.
    #[arg(long)]
    pub forest: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub rate: f64,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV sweep over τ, inclusive range `FROM:TO`.
    #[arg(long, value_name = "FROM:TO")]
    pub tau_sweep: Option<String>,
    /// CSV sweep over sampling rates (needs --data), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub rate_sweep: Vec<f64>,
    /// Write sweep CSV here instead of stdout.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub axis: String,
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
    /// Train-loss threshold for updates-to-threshold.
    #[arg(long)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// `lowdiv` or `highdiv`.
    pub kind: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Rows for highdiv.
    #[arg(long, default_value_t = HIGHDIV_ROWS)]
    pub rows: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Parse arguments, run, report errors on stderr, and return the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    match execute(cli.command, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(CliError::Closed) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

pub fn execute<W: Write>(cmd: Command, out: &mut W) -> Result<(), CliError> {
    match cmd {
        Command::Train(a) => cmd_train(&a.run, out),
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Stats(a) => cmd_stats(&a, out),
        Command::Theory(a) => cmd_theory(&a, out),
        Command::Sweep(a) => cmd_sweep(&a, out),
        Command::GenData(a) => cmd_gen_data(&a, out),
    }
}

fn stdout_err(e: std::io::Error) -> CliError {
    if e.kind() == std::io::ErrorKind::BrokenPipe {
        CliError::Closed
    } else {
        CliError::Internal(format!("cannot write output: {e}"))
    }
}

fn print<W: Write>(out: &mut W, text: impl std::fmt::Display) -> Result<(), CliError> {
    writeln!(out, "{text}").map_err(stdout_err)
}

/// Read and deduplicate a LIBSVM file.
pub fn load_dataset(path: &Path) -> Result<SparseDataset, CliError> {
    Ok(read_libsvm(path)?.deduplicate())
}

fn load_config(run: &RunArgs) -> Result<RunConfig, CliError> {
    let mut overrides = run.overrides.clone();
    let mut push = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            overrides.push(format!("{k}={v}"));
        }
    };
    push("train.mode", run.mode.clone());
    push("train.n_workers", run.workers.map(|v| v.to_string()));
    push("train.n_trees", run.trees.map(|v| v.to_string()));
    push("train.rate", run.rate.map(|v| format!("{v:?}")));
    push("train.step", run.step.map(|v| format!("{v:?}")));
    let mut cfg = RunConfig::load(run.config.as_deref(), &overrides)?;
    if let Some(p) = &run.train {
        cfg.data.train = Some(p.clone());
    }
    if let Some(p) = &run.test {
        cfg.data.test = Some(p.clone());
    }
    Ok(cfg)
}

/// Training set and optional test set per the `[data]` section, with both
/// sharing one feature dimension.
fn load_data(cfg: &RunConfig) -> Result<(SparseDataset, Option<SparseDataset>), CliError> {
    let path = cfg
        .data
        .train
        .as_deref()
        .ok_or_else(|| CliError::Usage("no training data: pass --train or set data.train".into()))?;
    let full = load_dataset(path)?;
    let (train, test) = match (&cfg.data.test, cfg.data.test_fraction) {
        (Some(t), _) => (full, Some(load_dataset(t)?)),
        (None, Some(f)) => {
            let (a, b) = full.split_train_test(f, cfg.data.split_seed)?;
            (a, Some(b))
        }
        (None, None) => (full, None),
    };
    let dim = train.n_features().max(test.as_ref().map_or(0, SparseDataset::n_features));
    let train = train.with_n_features(dim)?;
    let test = test.map(|t| t.with_n_features(dim)).transpose()?;
    Ok((train, test))
}

fn write_run(dir: &Path, forest: &Forest, history: &crate::trainer::History) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(write_err(dir))?;
    let fp = dir.join(FOREST_FILE);
    fs::write(&fp, forest.to_text()).map_err(write_err(&fp))?;
    let hp = dir.join(HISTORY_FILE);
    fs::write(&hp, history.to_csv()).map_err(write_err(&hp))?;
    Ok(())
}

fn write_echo(dir: &Path, cfg: &RunConfig) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(write_err(dir))?;
    let mut echo = cfg.clone();
    echo.output.dir = Some(dir.to_path_buf());
    let p = dir.join(ECHO_FILE);
    fs::write(&p, echo.to_text()).map_err(write_err(&p))
}

pub fn cmd_train<W: Write>(run: &RunArgs, out: &mut W) -> Result<(), CliError> {
    let cfg = load_config(run)?;
    let tc = cfg.train_config()?;
    let (train_ds, test_ds) = load_data(&cfg)?;
    let dir = cfg.output_dir(run.out.as_deref());
    info!("training {} trees in {} mode with {} workers", tc.n_trees, tc.mode, tc.n_workers);
    let (forest, history) = train(&train_ds, test_ds.as_ref(), &tc)?;
    write_run(&dir, &forest, &history)?;
    write_echo(&dir, &cfg)?;
    print(out, format_args!("out_dir={}", dir.display()))?;
    print(out, format_args!("updates={}", history.len()))?;
    print(out, format_args!("max_staleness={}", history.max_staleness()))?;
    print(out, format_args!("train_loss={}", history.final_train_loss()))?;
    if let Some(t) = &test_ds {
        let m = evaluate(&forest, t);
        print(out, format_args!("test_loss={}\ntest_accuracy={}\ntest_auc={}", m.loss, m.accuracy, m.auc))?;
    }
    Ok(())
}

pub fn read_forest(path: &Path) -> Result<Forest, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    Forest::from_text(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn cmd_eval<W: Write>(a: &EvalArgs, out: &mut W) -> Result<(), CliError> {
    let forest = read_forest(&a.forest)?;
    let ds = load_dataset(&a.data)?;
    if ds.n_features() > forest.n_features {
        return Err(CliError::Data(format!(
            "dimension mismatch: {} has {} features, forest was trained on {}",
            a.data.display(),
            ds.n_features(),
            forest.n_features
        )));
    }
    print(out, evaluate(&forest, &ds))
}

pub fn cmd_stats<W: Write>(a: &StatsArgs, out: &mut W) -> Result<(), CliError> {
    let ds = load_dataset(&a.data)?;
    let plan = SamplingPlan::uniform(a.rate).map_err(|e| CliError::Usage(e.to_string()))?;
    let div = estimate_diversity(&plan, &ds, a.trials, a.seed).map_err(|e| CliError::Usage(e.to_string()))?;
    print(out, ds.stats())?;
    print(out, format_args!("rate={}", a.rate))?;
    print(out, div)
}

fn base_constants(a: &TheoryArgs) -> TheoryConstants {
    if a.c.is_none() || a.lambda.is_none() {
        warn!("c and lambda default to 1.0; pass --c and --lambda for meaningful bounds");
    }
    let d = TheoryConstants::default();
    TheoryConstants {
        c: a.c.unwrap_or(d.c),
        lambda: a.lambda.unwrap_or(d.lambda),
        m: a.m.unwrap_or(d.m),
        omega: a.omega.unwrap_or(d.omega),
        delta_cap: a.delta_cap.unwrap_or(d.delta_cap),
        rho: a.rho.unwrap_or(d.rho),
        zeta: a.zeta.unwrap_or(d.zeta),
        tau: a.tau,
        delta_leaf: a.delta_leaf.unwrap_or(d.delta_leaf),
        m_max: a.m_max.unwrap_or(d.m_max),
        phi: d.phi,
        log_numerator_l: a.log_l,
    }
}

fn parse_range(s: &str) -> Result<std::ops::RangeInclusive<u64>, CliError> {
    let bad = || CliError::Usage(format!("invalid range {s:?}: expected FROM:TO"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if a > b {
        return Err(bad());
    }
    Ok(a..=b)
}

pub const RATE_SWEEP_HEADER: &str = "rate,omega,delta_cap,rho,M,zeta,v,t,r,diameter";

pub fn cmd_theory<W: Write>(a: &TheoryArgs, out: &mut W) -> Result<(), CliError> {
    let mut k = base_constants(a);
    let data = a.data.as_deref().map(load_dataset).transpose()?;
    let forest = match (&a.forest, &data) {
        (Some(p), _) => Some(read_forest(p)?),
        (None, Some(ds)) => Some(init_forest(ds)?),
        (None, None) => None,
    };
    let estimate = |rate: f64, base: &TheoryConstants| -> Result<TheoryConstants, CliError> {
        let (ds, f) = (data.as_ref().expect("checked"), forest.as_ref().expect("checked"));
        let plan = SamplingPlan::uniform(rate).map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(theory::estimate_constants(ds, &plan, f, a.trials, a.seed, base)?)
    };
    if data.is_some() {
        k = estimate(a.rate, &k)?;
    }

    let mut sweep_csv: Option<Vec<u8>> = None;
    if let Some(range) = &a.tau_sweep {
        let plan_v = theory::step_length(&k, a.epsilon, a.theta)?;
        let rows = theory::tau_sweep(&k, a.v.unwrap_or(plan_v), a.epsilon, a.theta, a.d0, parse_range(range)?)?;
        let mut buf = Vec::new();
        theory::write_tau_sweep(&rows, &mut buf).expect("writing to a Vec cannot fail");
        sweep_csv = Some(buf);
    } else if !a.rate_sweep.is_empty() {
        if data.is_none() {
            return Err(CliError::Usage("--rate-sweep needs --data".into()));
        }
        let mut buf = Vec::new();
        writeln!(buf, "{RATE_SWEEP_HEADER}").expect("vec write");
        for &rate in &a.rate_sweep {
            let kr = estimate(rate, &base_constants(a))?;
            let p = theory::step_plan(&kr, a.epsilon, a.theta, a.d0)?;
            let c = theory::contraction(&kr, a.v.unwrap_or(p.v))?;
            writeln!(
                buf,
                "{rate},{},{},{},{},{},{},{},{},{}",
                kr.omega, kr.delta_cap, kr.rho, kr.m, kr.zeta, p.v, p.t, c.r, c.diameter
            )
            .expect("vec write");
        }
        sweep_csv = Some(buf);
    }
    if let Some(buf) = sweep_csv {
        return match &a.csv {
            Some(p) => fs::write(p, buf).map_err(write_err(p)),
            None => out.write_all(&buf).map_err(stdout_err),
        };
    }

    let plan = theory::step_plan(&k, a.epsilon, a.theta, a.d0)?;
    let v_used = a.v.unwrap_or(plan.v);
    let worker_bound = match (a.t_build, a.t_comm) {
        (Some(b), Some(c)) => Some(theory::max_workers_ratio(b, c)?),
        (None, None) => None,
        _ => return Err(CliError::Usage("--t-build and --t-comm go together".into())),
    };
    let report = TheoryReport { constants: k, plan, v_used, contraction: theory::contraction(&k, v_used)?, worker_bound };
    if !report.contraction.usable() {
        warn!("contraction rate r = {} is not in (0, 1)", report.contraction.r);
    }
    print(out, report)
}

pub fn cmd_sweep<W: Write>(a: &SweepArgs, out: &mut W) -> Result<(), CliError> {
    let axis: SweepAxis = a.axis.parse().map_err(CliError::Usage)?;
    let cfg = load_config(&a.run)?;
    let tc = cfg.train_config()?;
    let (train_ds, test_ds) = load_data(&cfg)?;
    let dir = cfg.output_dir(a.run.out.as_deref());
    let cells = sweep(&train_ds, test_ds.as_ref(), &tc, axis, &a.values, a.threshold)?;
    for c in &cells {
        write_run(&dir.join(format!("cell_{axis}_{}", c.value)), &c.forest, &c.history)?;
    }
    let mut buf = Vec::new();
    write_summary(&cells, &mut buf).expect("writing to a Vec cannot fail");
    let sp = dir.join(SUMMARY_FILE);
    fs::write(&sp, &buf).map_err(write_err(&sp))?;
    write_echo(&dir, &cfg)?;
    out.write_all(&buf).map_err(stdout_err)
}

pub fn cmd_gen_data<W: Write>(a: &GenDataArgs, out: &mut W) -> Result<(), CliError> {
    let kind: Synthetic = a.kind.parse().map_err(CliError::Usage)?;
    if kind == Synthetic::HighDiv && a.rows == 0 {
        return Err(CliError::Usage("--rows must be positive".into()));
    }
    let ds = kind.generate(a.rows, a.seed);
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(write_err(parent))?;
    }
    let file = fs::File::create(&a.out).map_err(write_err(&a.out))?;
    let mut w = std::io::BufWriter::new(file);
    write_libsvm(&ds, &mut w).and_then(|()| w.flush()).map_err(write_err(&a.out))?;
    print(out, format_args!("wrote {} rows ({} distinct) to {}", ds.n_raw(), ds.len(), a.out.display()))
}
