//! Bernoulli draws with inverse-probability weights, and the diversity
//! statistics of the two bundled datasets.

use asgbdt::sampler::{draw, estimate_diversity, SamplingPlan};
use asgbdt::synth;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let low = synth::lowdiv();
    let high = synth::highdiv(2000, 0);

    let plan = SamplingPlan::uniform(0.6)?;
    let d = draw(&plan, &low, 1, 0);
    println!("lowdiv draw 0: m' = {:?} (m = {:?})", d.weights(), low.frequencies());

    let trials = 200;
    for rate in [0.6, 0.01] {
        let plan = SamplingPlan::uniform(rate)?;
        for (name, ds) in [("lowdiv", &low), ("highdiv", &high)] {
            let s = estimate_diversity(&plan, ds, trials, 3)?;
            println!(
                "{name:8} R={rate:<5} omega={:5} delta={:.4} rho={:.3} mean_support={:.1}",
                s.omega, s.delta, s.rho, s.mean_support
            );
        }
    }
    Ok(())
}
