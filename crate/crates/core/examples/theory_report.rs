//! Step length, iteration bound and contraction for hand-picked and
//! estimated constants.

use asgbdt::sampler::SamplingPlan;
use asgbdt::synth;
use asgbdt::theory::{contraction, estimate_constants, max_workers_ratio, step_plan, tau_sweep, TheoryConstants, DEFAULT_STEP};
use asgbdt::trainer::{train_serial, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let k = TheoryConstants { omega: 10.0, ..TheoryConstants::default() };
    let plan = step_plan(&k, 0.1, 0.5, 1.0)?;
    println!("tau=0: v={} t={}", plan.v, plan.t);

    for row in tau_sweep(&TheoryConstants::default(), DEFAULT_STEP, 0.1, 0.5, 1.0, [0, 1, 2, 4, 8, 16, 32, 64])? {
        println!("tau={:2} v={:.3e} t={:8} r={:.6} diameter={:.4}", row.tau, row.plan.v, row.plan.t, row.report.r, row.report.diameter);
    }

    let ds = synth::highdiv(500, 4);
    let (forest, _) = train_serial(&ds, None, &TrainConfig { n_trees: 20, ..TrainConfig::default() })?;
    for rate in [1.0, 0.2] {
        let est = estimate_constants(&ds, &SamplingPlan::uniform(rate)?, &forest, 100, 0, &TheoryConstants::default())?;
        let rep = contraction(&est.with_tau(8.0), DEFAULT_STEP)?;
        println!(
            "R={rate}: M={:.3} omega={} rho={:.3} zeta={} delta={:.3} m_max={} bound_ok={} r(tau=8)={:.6}",
            est.m, est.omega, est.rho, est.zeta, est.delta_leaf, est.m_max, est.gradient_bound_holds(), rep.r
        );
    }
    println!("worker bound for 10 ms builds and 1 ms updates: {}", max_workers_ratio(10.0, 1.0)?);
    Ok(())
}
