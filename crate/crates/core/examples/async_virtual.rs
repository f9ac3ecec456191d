//! Asynchronous training under the deterministic virtual scheduler:
//! staleness per update and throughput in ticks.

use std::collections::BTreeMap;

use asgbdt::sampler::SamplingPlan;
use asgbdt::synth;
use asgbdt::trainer::{train_async, train_serial, Mode, SimTiming, StalenessBound, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = synth::highdiv(1000, 2);
    let base = TrainConfig {
        n_trees: 120,
        plan: SamplingPlan::uniform(0.6)?,
        mode: Mode::Virtual,
        sim: SimTiming { build_ticks: 10, server_ticks: 1, jitter_ticks: 4 },
        ..TrainConfig::default()
    };

    let (serial, _) = train_serial(&ds, None, &base)?;
    let (one, _) = train_async(&ds, None, &TrainConfig { n_workers: 1, ..base.clone() })?;
    println!("1 worker equals serial: {}", one.to_text() == serial.to_text());

    for (workers, bound) in [(4, StalenessBound::Auto), (8, StalenessBound::Bounded(4)), (16, StalenessBound::Auto)] {
        let cfg = TrainConfig { n_workers: workers, max_staleness: bound, ..base.clone() };
        let (_, h) = train_async(&ds, None, &cfg)?;
        let mut taus: BTreeMap<u64, usize> = BTreeMap::new();
        for r in &h.records {
            *taus.entry(r.staleness).or_default() += 1;
        }
        println!(
            "workers={workers:2} bound={bound:9} final loss {:.4} trees/tick {:.3} staleness {:?}",
            h.final_train_loss(),
            h.throughput(),
            taus
        );
    }
    Ok(())
}
