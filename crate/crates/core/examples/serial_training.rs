//! Serial boosting on the separable synthetic set, then save, reload and
//! evaluate the forest.

use asgbdt::sampler::SamplingPlan;
use asgbdt::synth;
use asgbdt::trainer::{evaluate, train_serial, Forest, TrainConfig};
use asgbdt::tree::TreeParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let train = synth::highdiv(2000, 0);
    let test = synth::highdiv(1000, 1);
    let cfg = TrainConfig {
        n_trees: 200,
        step: 0.1,
        plan: SamplingPlan::uniform(1.0)?,
        tree: TreeParams { max_leaves: 16, ..TreeParams::default() },
        ..TrainConfig::default()
    };
    let (forest, history) = train_serial(&train, Some(&test), &cfg)?;

    println!("initial train loss {:.4}", history.initial_train_loss);
    for r in history.records.iter().filter(|r| r.update % 25 == 0) {
        println!(
            "update {:3}: train {:.4} test {:.4} acc {:.3}",
            r.update,
            r.train_loss,
            r.test_loss.unwrap_or(f64::NAN),
            r.accuracy.unwrap_or(f64::NAN)
        );
    }

    let text = forest.to_text();
    let back = Forest::from_text(&text)?;
    assert_eq!(back, forest);
    println!("forest file: {} lines", text.lines().count());
    println!("{}", evaluate(&back, &test));
    Ok(())
}
