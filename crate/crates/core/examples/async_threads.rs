//! The same training loop on real OS threads.

use std::time::Instant;

use asgbdt::sampler::SamplingPlan;
use asgbdt::synth;
use asgbdt::trainer::{train_async, Mode, StalenessBound, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = synth::highdiv(2000, 3);
    for workers in [1, 2, 4, 8] {
        let cfg = TrainConfig {
            n_trees: 200,
            plan: SamplingPlan::uniform(0.6)?,
            n_workers: workers,
            mode: Mode::Threads,
            max_staleness: StalenessBound::Auto,
            ..TrainConfig::default()
        };
        let t0 = Instant::now();
        let (forest, h) = train_async(&ds, None, &cfg)?;
        let build: f64 = h.records.iter().map(|r| r.build_time).sum::<f64>() / h.len() as f64;
        let server: f64 = h.records.iter().map(|r| r.server_time).sum::<f64>() / h.len() as f64;
        println!(
            "workers={workers}: {} trees in {:.0?}, max staleness {}, loss {:.4}, build {build:.2} ms, server {server:.2} ms",
            forest.len(),
            t0.elapsed(),
            h.max_staleness(),
            h.final_train_loss(),
        );
    }
    Ok(())
}
