//! Updates-to-threshold as the worker count grows, on the low- and
//! high-diversity datasets.

use asgbdt::experiment::{gap_threshold, optimal_loss, sweep, write_summary, SweepAxis};
use asgbdt::sampler::SamplingPlan;
use asgbdt::synth;
use asgbdt::trainer::{init_forest, evaluate, Mode, TrainConfig};
use asgbdt::tree::TreeParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = TrainConfig {
        n_trees: 300,
        step: 0.1,
        plan: SamplingPlan::uniform(0.6)?,
        tree: TreeParams { max_leaves: 16, ..TreeParams::default() },
        mode: Mode::Virtual,
        ..TrainConfig::default()
    };
    for (name, ds) in [("lowdiv", synth::lowdiv()), ("highdiv", synth::highdiv(2000, 0))] {
        let l0 = evaluate(&init_forest(&ds)?, &ds).loss;
        let threshold = gap_threshold(l0, optimal_loss(&ds), 0.1);
        println!("{name}: initial loss {l0:.4}, threshold {threshold:.4}");
        let cells = sweep(&ds, None, &base, SweepAxis::Workers, &[1.0, 4.0, 16.0], threshold)?;
        write_summary(&cells, std::io::stdout().lock())?;
    }
    Ok(())
}
