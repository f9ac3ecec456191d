//! Convergence constants for asynchronous stochastic boosting.
//!
//! Step length and iteration bound for a target suboptimality `ε`, the
//! contraction rate `r` and fixed-point diameter of the delayed recurrence,
//! the worker-count bound from build and communication times, and Monte
//! Carlo estimates of the data-dependent constants.
//!
//! The two delay coefficients differ: the step length uses `4ρτ²ΩΔ^½` and
//! the iteration bound `6ρτ²ΩΔ^½·log(L·D0/ε)`, with the log applied to that
//! term only. Both are kept as is and the report prints them side by side.

use std::fmt;
use std::io::Write;
use std::time::Duration;

use thiserror::Error;

use crate::dataset::SparseDataset;
use crate::loss::{ScoreVector, GRADIENT_BOUND};
use crate::sampler::{draw_raw, estimate_diversity, weighted_target, SamplerError, SamplingPlan};
use crate::trainer::{score_vector, Forest};
use crate::tree::{leaf_diameter, leaf_partition, project, zeta_estimate, RegressionTree, TreeError};

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("{name} = {value} is out of range ({expected})")]
    Range { name: &'static str, value: f64, expected: &'static str },
    #[error("communication time is zero")]
    ZeroDenominator,
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// Components above this are counted as tree-fit residuals.
pub const ZETA_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryConstants {
    /// Strong-convexity modulus.
    pub c: f64,
    /// Lipschitz constant of the loss.
    pub lambda: f64,
    /// Bound on the norm of the projected sampled gradient.
    pub m: f64,
    /// Largest number of distinct samples in one draw.
    pub omega: f64,
    /// Largest inclusion probability.
    pub delta_cap: f64,
    /// Probability that two draws share a sample.
    pub rho: f64,
    /// Number of components a tree fails to reproduce.
    pub zeta: f64,
    /// Staleness.
    pub tau: f64,
    /// Largest distance between two samples in one leaf.
    pub delta_leaf: f64,
    /// Largest sample weight.
    pub m_max: f64,
    /// Bound on the per-sample gradient.
    pub phi: f64,
    /// Numerator inside the iteration bound's log; `lambda` when unset.
    pub log_numerator_l: Option<f64>,
}

impl Default for TheoryConstants {
    /// `c = λ = 1` are placeholders; supply real values where known.
    fn default() -> Self {
        TheoryConstants {
            c: 1.0,
            lambda: 1.0,
            m: 1.0,
            omega: 1.0,
            delta_cap: 1.0,
            rho: 0.5,
            zeta: 0.0,
            tau: 0.0,
            delta_leaf: 0.0,
            m_max: 1.0,
            phi: GRADIENT_BOUND,
            log_numerator_l: None,
        }
    }
}

/// Step used by [`contraction`] sweeps when none is given.
pub const DEFAULT_STEP: f64 = 0.01;

fn positive(name: &'static str, value: f64) -> Result<(), TheoryError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(TheoryError::Range { name, value, expected: "> 0" })
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<(), TheoryError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(TheoryError::Range { name, value, expected: ">= 0" })
    }
}

fn unit(name: &'static str, value: f64) -> Result<(), TheoryError> {
    if value > 0.0 && value <= 1.0 {
        Ok(())
    } else {
        Err(TheoryError::Range { name, value, expected: "in (0, 1]" })
    }
}

impl TheoryConstants {
    pub fn validate(&self) -> Result<(), TheoryError> {
        positive("c", self.c)?;
        positive("lambda", self.lambda)?;
        positive("M", self.m)?;
        positive("omega", self.omega)?;
        positive("m_max", self.m_max)?;
        positive("phi", self.phi)?;
        unit("delta_cap", self.delta_cap)?;
        unit("rho", self.rho)?;
        non_negative("zeta", self.zeta)?;
        non_negative("tau", self.tau)?;
        non_negative("delta_leaf", self.delta_leaf)?;
        if let Some(l) = self.log_numerator_l {
            positive("log_numerator_l", l)?;
        }
        Ok(())
    }

    pub fn log_numerator(&self) -> f64 {
        self.log_numerator_l.unwrap_or(self.lambda)
    }

    /// `M² ≤ Ω m_max² φ²`.
    pub fn gradient_bound_holds(&self) -> bool {
        self.m * self.m <= self.omega * self.m_max * self.m_max * self.phi * self.phi
    }

    pub fn with_tau(self, tau: f64) -> Self {
        TheoryConstants { tau, ..self }
    }
}

impl fmt::Display for TheoryConstants {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "c={}", self.c)?;
        writeln!(f, "lambda={}", self.lambda)?;
        writeln!(f, "M={}", self.m)?;
        writeln!(f, "omega={}", self.omega)?;
        writeln!(f, "delta_cap={}", self.delta_cap)?;
        writeln!(f, "rho={}", self.rho)?;
        writeln!(f, "zeta={}", self.zeta)?;
        writeln!(f, "tau={}", self.tau)?;
        writeln!(f, "delta_leaf={}", self.delta_leaf)?;
        writeln!(f, "m_max={}", self.m_max)?;
        writeln!(f, "phi={}", self.phi)?;
        write!(f, "log_numerator_l={}", self.log_numerator())
    }
}

fn check_target(epsilon: f64, theta: f64) -> Result<(), TheoryError> {
    positive("epsilon", epsilon)?;
    if !(theta > 0.0 && theta < 1.0) {
        return Err(TheoryError::Range { name: "theta", value: theta, expected: "in (0, 1)" });
    }
    Ok(())
}

/// `v = cϑε / (2λM²Ω(1 + 6ρτ + 4ρτ²ΩΔ^½))`.
pub fn step_length(k: &TheoryConstants, epsilon: f64, theta: f64) -> Result<f64, TheoryError> {
    k.validate()?;
    check_target(epsilon, theta)?;
    let delay = 1.0 + 6.0 * k.rho * k.tau + 4.0 * k.rho * k.tau * k.tau * k.omega * k.delta_cap.sqrt();
    Ok(k.c * theta * epsilon / (2.0 * k.lambda * k.m * k.m * k.omega * delay))
}

/// The real-valued right-hand side of the iteration bound,
/// `2λM²Ω(1 + 6ρτ + 6ρτ²ΩΔ^½ log(L·D0/ε)) / (c²ϑε)`.
pub fn iteration_bound_value(k: &TheoryConstants, epsilon: f64, theta: f64, d0: f64) -> Result<f64, TheoryError> {
    k.validate()?;
    check_target(epsilon, theta)?;
    positive("D0", d0)?;
    let log = (k.log_numerator() * d0 / epsilon).ln();
    let delay = 1.0 + 6.0 * k.rho * k.tau + 6.0 * k.rho * k.tau * k.tau * k.omega * k.delta_cap.sqrt() * log;
    Ok(2.0 * k.lambda * k.m * k.m * k.omega * delay / (k.c * k.c * theta * epsilon))
}

/// Smallest integer `t ≥ 1` satisfying the iteration bound.
pub fn iteration_bound(k: &TheoryConstants, epsilon: f64, theta: f64, d0: f64) -> Result<u64, TheoryError> {
    let t = iteration_bound_value(k, epsilon, theta, d0)?;
    Ok(t.ceil().max(1.0) as u64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPlan {
    pub epsilon: f64,
    pub theta: f64,
    pub d0: f64,
    pub v: f64,
    pub t: u64,
}

pub fn step_plan(k: &TheoryConstants, epsilon: f64, theta: f64, d0: f64) -> Result<StepPlan, TheoryError> {
    Ok(StepPlan {
        epsilon,
        theta,
        d0,
        v: step_length(k, epsilon, theta)?,
        t: iteration_bound(k, epsilon, theta, d0)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionReport {
    pub c1: f64,
    pub c2: f64,
    pub r: f64,
    /// Squared distance to the optimum the recurrence settles at.
    pub diameter: f64,
}

impl ContractionReport {
    /// `0 < r < 1`.
    pub fn usable(&self) -> bool {
        self.r > 0.0 && self.r < 1.0
    }

    /// `(1 - vc)X + vC1√X + v²C2 - X` at `X = diameter`.
    pub fn fixed_point_residual(&self, c: f64, v: f64) -> f64 {
        let x = self.diameter;
        (1.0 - v * c) * x + v * self.c1 * x.sqrt() + v * v * self.c2 - x
    }
}

/// `C1`, `C2`, `r` and the fixed-point diameter at step `v`.
pub fn contraction(k: &TheoryConstants, v: f64) -> Result<ContractionReport, TheoryError> {
    k.validate()?;
    positive("v", v)?;
    let (c, m, tau) = (k.c, k.m, k.tau);
    let fit = k.delta_leaf * k.lambda * k.m_max * k.zeta.sqrt();
    let c1 = 2.0 * fit + c * v * tau * m;
    let c2 = (4.0 * fit + c * v * tau * m) * tau * m + 2.0 * m * m * (3.0 * k.rho * tau + 0.5);
    let root = (c1 * c1 + 4.0 * c * v * c2).sqrt();
    let r = 1.0 - v * c * (1.0 - c1 / (c1 + root));
    // ((C1 + root) / 2c)², expanded so that C1 = 0 gives vC2/c exactly
    let diameter = (c1 * c1 + c1 * root) / (2.0 * c * c) + v * c2 / c;
    Ok(ContractionReport { c1, c2, r, diameter })
}

/// Upper bound on useful workers: build time over communication plus
/// target time.
pub fn max_workers(t_build: Duration, t_comm_plus_target: Duration) -> Result<f64, TheoryError> {
    if t_comm_plus_target.is_zero() {
        return Err(TheoryError::ZeroDenominator);
    }
    Ok(t_build.as_secs_f64() / t_comm_plus_target.as_secs_f64())
}

/// [`max_workers`] on plain numbers in any common unit.
pub fn max_workers_ratio(t_build: f64, t_comm_plus_target: f64) -> Result<f64, TheoryError> {
    non_negative("t_build", t_build)?;
    if t_comm_plus_target.is_nan() || t_comm_plus_target <= 0.0 {
        return Err(TheoryError::ZeroDenominator);
    }
    Ok(t_build / t_comm_plus_target)
}

/// One row of a staleness sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauRow {
    pub tau: f64,
    pub plan: StepPlan,
    pub report: ContractionReport,
}

pub const TAU_SWEEP_HEADER: &str = "tau,v,t,c1,c2,r,diameter";

/// Evaluate step plan and contraction (at fixed `v`) for each `τ`.
pub fn tau_sweep(
    k: &TheoryConstants,
    v: f64,
    epsilon: f64,
    theta: f64,
    d0: f64,
    taus: impl IntoIterator<Item = u64>,
) -> Result<Vec<TauRow>, TheoryError> {
    taus.into_iter()
        .map(|tau| {
            let kt = k.with_tau(tau as f64);
            Ok(TauRow { tau: tau as f64, plan: step_plan(&kt, epsilon, theta, d0)?, report: contraction(&kt, v)? })
        })
        .collect()
}

pub fn write_tau_sweep<W: Write>(rows: &[TauRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{TAU_SWEEP_HEADER}")?;
    for row in rows {
        let (p, r) = (&row.plan, &row.report);
        writeln!(out, "{},{},{},{},{},{},{}", row.tau, p.v, p.t, r.c1, r.c2, r.r, r.diameter)?;
    }
    Ok(())
}

/// Full text report for one set of constants.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryReport {
    pub constants: TheoryConstants,
    pub plan: StepPlan,
    /// Step the contraction was evaluated at.
    pub v_used: f64,
    pub contraction: ContractionReport,
    pub worker_bound: Option<f64>,
}

impl fmt::Display for TheoryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.constants)?;
        writeln!(f, "epsilon={}", self.plan.epsilon)?;
        writeln!(f, "theta={}", self.plan.theta)?;
        writeln!(f, "D0={}", self.plan.d0)?;
        writeln!(f, "v={}", self.plan.v)?;
        writeln!(f, "t={}", self.plan.t)?;
        writeln!(f, "v_coefficient=4*rho*tau^2*omega*sqrt(delta_cap)")?;
        writeln!(f, "t_coefficient=6*rho*tau^2*omega*sqrt(delta_cap)*ln(L*D0/epsilon)")?;
        writeln!(f, "v_used={}", self.v_used)?;
        writeln!(f, "C1={}", self.contraction.c1)?;
        writeln!(f, "C2={}", self.contraction.c2)?;
        writeln!(f, "r={}", self.contraction.r)?;
        writeln!(f, "diameter={}", self.contraction.diameter)?;
        writeln!(f, "usable={}", self.contraction.usable())?;
        writeln!(f, "gradient_bound_holds={}", self.constants.gradient_bound_holds())?;
        match self.worker_bound {
            Some(b) => write!(f, "worker_bound={b}"),
            None => write!(f, "worker_bound=NA"),
        }
    }
}

/// Estimate the data-dependent constants from `trials` raw draws.
///
/// `Ω`, `Δ` and `ρ` come from the sampler. For draw `t`, the sampled
/// gradient at the forest's scores is projected through the leaf partition
/// of tree `t mod n_trees` over all samples (a single leaf when the forest
/// is empty); `M` is the largest projected norm and `ζ` the largest count of
/// components the projection changes. `δ` is the largest within-leaf
/// distance over the trees used. `m_max` is the largest sample weight seen
/// in any draw, so that `M² ≤ Ω m_max² φ²`. `c`, `λ` and `τ` keep their
/// values from `base`.
pub fn estimate_constants(
    ds: &SparseDataset,
    plan: &SamplingPlan,
    forest: &Forest,
    trials: usize,
    seed: u64,
    base: &TheoryConstants,
) -> Result<TheoryConstants, TheoryError> {
    let div = estimate_diversity(plan, ds, trials, seed)?;
    let scores: ScoreVector = score_vector(forest, ds);
    let single = RegressionTree::constant(0.0);
    let trees: Vec<&RegressionTree> = if forest.is_empty() {
        vec![&single]
    } else {
        forest.trees().iter().map(|(t, _)| t).take(trials).collect()
    };
    let partitions: Vec<_> = trees.iter().map(|t| leaf_partition(t, ds)).collect();
    let delta_leaf = partitions.iter().map(|p| leaf_diameter(p, ds)).fold(0.0, f64::max);
    let ones = vec![1.0; ds.len()];
    let (mut m, mut zeta, mut m_max) = (0.0f64, 0usize, 0.0f64);
    for t in 0..trials {
        let d = draw_raw(plan, ds, seed, t as u64);
        if d.support_size() == 0 {
            continue;
        }
        m_max = d.weights().iter().copied().fold(m_max, f64::max);
        let target = weighted_target(&d, ds, &scores)?;
        let g = &target.gradient.values;
        let p = &partitions[t % partitions.len()];
        let ag = project(p, g, &ones)?;
        m = m.max(ag.iter().map(|x| x * x).sum::<f64>().sqrt());
        zeta = zeta.max(zeta_estimate(p, g, &ones, ZETA_TOLERANCE)?);
    }
    Ok(TheoryConstants {
        m,
        omega: div.omega as f64,
        delta_cap: div.delta,
        rho: div.rho,
        zeta: zeta as f64,
        delta_leaf,
        m_max: if m_max > 0.0 { m_max } else { ds.max_frequency() as f64 },
        phi: GRADIENT_BOUND,
        ..*base
    })
}
