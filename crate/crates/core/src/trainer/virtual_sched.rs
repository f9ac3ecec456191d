//! Discrete-event simulation of the worker pool.
//!
//! Each worker builds for `build_ticks` (+ seeded jitter) after pulling,
//! then pushes. The server handles pushes in arrival order, `server_ticks`
//! each; simultaneous arrivals are ordered by a seeded key. A push is
//! acknowledged once applied, and the worker pulls again at that instant,
//! so it always sees its own update. Trees are fitted lazily when their
//! push is processed, which gives the same result because a build depends
//! only on its snapshot and seed.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::sync::Arc;

use log::warn;

use super::forest::Forest;
use super::history::History;
use super::server::{make_job, run_job, Server, Snapshot, TreeBuilder};
use super::{may_pull, TrainConfig, TrainError};
use crate::dataset::SparseDataset;
use crate::rng;

struct Job {
    local: u64,
    snapshot: Arc<Snapshot>,
    build: u64,
}

struct Sim<'s, 'a> {
    server: &'s mut Server<'a>,
    cfg: &'s TrainConfig,
    bound: Option<u64>,
    queue: BinaryHeap<Reverse<(u64, u64, usize)>>,
    jobs: Vec<Option<Job>>,
    locals: Vec<u64>,
    in_flight: BTreeMap<u64, usize>,
    blocked: BTreeSet<usize>,
}

impl Sim<'_, '_> {
    fn try_pull(&mut self, worker: usize, now: u64) -> bool {
        if !may_pull(self.server.version(), &self.in_flight, self.bound) {
            return false;
        }
        self.locals[worker] += 1;
        let local = self.locals[worker];
        let snapshot = self.server.published();
        *self.in_flight.entry(snapshot.version).or_default() += 1;
        let sim = self.cfg.sim;
        let jitter = if sim.jitter_ticks > 0 {
            rng::mix(&[self.cfg.schedule_seed, rng::streams::SCHEDULE, 0, worker as u64, local]) % (sim.jitter_ticks + 1)
        } else {
            0
        };
        let build = sim.build_ticks + jitter;
        let tie = rng::mix(&[self.cfg.schedule_seed, rng::streams::SCHEDULE, 1, worker as u64, local]);
        self.queue.push(Reverse((now + build, tie, worker)));
        self.jobs[worker] = Some(Job { local, snapshot, build });
        true
    }

    fn release(&mut self, version: u64) {
        if let Some(c) = self.in_flight.get_mut(&version) {
            *c -= 1;
            if *c == 0 {
                self.in_flight.remove(&version);
            }
        }
    }

    fn wake_blocked(&mut self, now: u64) {
        let waiting: Vec<usize> = self.blocked.iter().copied().collect();
        for w in waiting {
            if self.try_pull(w, now) {
                self.blocked.remove(&w);
            }
        }
    }
}

pub(crate) fn run(
    ds: &SparseDataset,
    test: Option<&SparseDataset>,
    cfg: &TrainConfig,
    builder: &dyn TreeBuilder,
) -> Result<(Forest, History), TrainError> {
    let mut server = Server::new(ds, test, cfg)?;
    let n = cfg.n_workers;
    let mut sim = Sim {
        server: &mut server,
        cfg,
        bound: cfg.max_staleness.resolve(n),
        queue: BinaryHeap::new(),
        jobs: (0..n).map(|_| None).collect(),
        locals: vec![0; n],
        in_flight: BTreeMap::new(),
        blocked: BTreeSet::new(),
    };
    for w in 0..n {
        if !sim.try_pull(w, 0) {
            sim.blocked.insert(w);
        }
    }
    let mut alive = n;
    let mut server_free = 0u64;
    while (sim.server.version() as usize) < cfg.n_trees {
        let Some(Reverse((ready, _, w))) = sim.queue.pop() else {
            // only reachable if every live worker is blocked, which the
            // admission rule excludes
            return Err(TrainError::AllWorkersFailed(n));
        };
        let job = sim.jobs[w].take().expect("queued worker has a job");
        let tree = {
            let bins = &sim.server.bins;
            run_job(builder, &make_job(bins, &job.snapshot, cfg, w, job.local))
        };
        let tree = match tree {
            Ok(t) => t,
            Err(e) => {
                warn!("worker {w} failed: {e}; continuing with {} workers", alive - 1);
                alive -= 1;
                sim.release(job.snapshot.version);
                if alive == 0 {
                    return Err(TrainError::AllWorkersFailed(n));
                }
                sim.wake_blocked(ready.max(server_free));
                continue;
            }
        };
        let start = ready.max(server_free);
        let end = start + cfg.sim.server_ticks;
        sim.server.apply(tree, w, job.snapshot.version, end as f64, job.build as f64, cfg.sim.server_ticks as f64);
        server_free = end;
        sim.release(job.snapshot.version);
        sim.blocked.insert(w);
        sim.wake_blocked(end);
    }
    Ok(server.finish())
}
