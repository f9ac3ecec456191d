//! Worker-count effect on the high-diversity set stays mild across
//! moderate sampling rates.

use asgbdt::experiment::{gap_threshold, optimal_loss};
use asgbdt::sampler::SamplingPlan;
use asgbdt::synth;
use asgbdt::trainer::{train, Mode, TrainConfig};
use asgbdt::tree::TreeParams;

/// updates(16 workers) / updates(1 worker) must lie in [1/BAND, BAND].
const BAND: f64 = 3.0;

#[test]
fn highdiv_curves_stay_in_band() {
    let ds = synth::highdiv(synth::HIGHDIV_ROWS, 0);
    for rate in [0.2, 0.5, 0.8] {
        let base = TrainConfig {
            n_trees: 120,
            step: 0.1,
            plan: SamplingPlan::uniform(rate).unwrap(),
            tree: TreeParams { max_leaves: 16, ..TreeParams::default() },
            mode: Mode::Virtual,
            ..TrainConfig::default()
        };
        let run = |w| train(&ds, None, &TrainConfig { n_workers: w, ..base.clone() }).unwrap().1;
        let (h1, h16) = (run(1), run(16));
        let threshold = gap_threshold(h1.initial_train_loss, optimal_loss(&ds), 0.1);
        let a = h1.updates_to_threshold(threshold).expect("1 worker reaches threshold") as f64;
        let b = h16.updates_to_threshold(threshold).expect("16 workers reach threshold") as f64;
        let ratio = b / a;
        assert!((1.0 / BAND..=BAND).contains(&ratio), "rate {rate}: {b}/{a}");
    }
}
