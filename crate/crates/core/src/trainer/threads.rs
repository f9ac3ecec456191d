//! One OS thread per worker, with the server loop on the calling thread.
//!
//! Workers take snapshots under a mutex, build without holding it, and push
//! through a channel. The server applies pushes in arrival order and wakes
//! waiting workers after each one. A worker does not pull again until its
//! previous push has been applied.

use std::collections::BTreeMap;
use std::sync::mpsc;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Instant;

use log::warn;

use super::forest::Forest;
use super::history::History;
use super::server::{make_job, run_job, Server, Snapshot, TreeBuilder};
use super::{may_pull, TrainConfig, TrainError};
use crate::dataset::SparseDataset;
use crate::tree::{RegressionTree, TreeError};

struct Shared {
    version: u64,
    published: Arc<Snapshot>,
    in_flight: BTreeMap<u64, usize>,
    awaiting_ack: Vec<bool>,
    stop: bool,
}

struct Push {
    worker: usize,
    built_on: u64,
    tree: Result<RegressionTree, TreeError>,
    build_ms: f64,
}

fn release(in_flight: &mut BTreeMap<u64, usize>, version: u64) {
    if let Some(c) = in_flight.get_mut(&version) {
        *c -= 1;
        if *c == 0 {
            in_flight.remove(&version);
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
    if cfg.n_trees == 0 {
        return Ok(server.finish());
    }
    let bound = cfg.max_staleness.resolve(n);
    let bins = Arc::clone(&server.bins);
    let state = Mutex::new(Shared {
        version: 0,
        published: server.published(),
        in_flight: BTreeMap::new(),
        awaiting_ack: vec![false; n],
        stop: false,
    });
    let wake = Condvar::new();
    let (tx, rx) = mpsc::channel::<Push>();
    let start = Instant::now();

    let outcome = std::thread::scope(|scope| {
        for w in 0..n {
            let tx = tx.clone();
            let (state, wake, bins) = (&state, &wake, &bins);
            scope.spawn(move || {
                let mut local = 0u64;
                loop {
                    let snapshot = {
                        let mut s = state.lock().expect("state lock");
                        while !s.stop && (s.awaiting_ack[w] || !may_pull(s.version, &s.in_flight, bound)) {
                            s = wake.wait(s).expect("state lock");
                        }
                        if s.stop {
                            return;
                        }
                        local += 1;
                        s.awaiting_ack[w] = true;
                        let snap = Arc::clone(&s.published);
                        *s.in_flight.entry(snap.version).or_default() += 1;
                        snap
                    };
                    let t0 = Instant::now();
                    let tree = run_job(builder, &make_job(bins, &snapshot, cfg, w, local));
                    let failed = tree.is_err();
                    let push = Push { worker: w, built_on: snapshot.version, tree, build_ms: t0.elapsed().as_secs_f64() * 1e3 };
                    if tx.send(push).is_err() || failed {
                        return;
                    }
                }
            });
        }
        drop(tx);

        let mut alive = n;
        let result = loop {
            let Ok(push) = rx.recv() else {
                break Err(TrainError::AllWorkersFailed(n));
            };
            let t1 = Instant::now();
            let tree = match push.tree {
                Ok(t) => t,
                Err(e) => {
                    alive -= 1;
                    warn!("worker {} failed: {e}; continuing with {alive} workers", push.worker);
                    let mut s = state.lock().expect("state lock");
                    release(&mut s.in_flight, push.built_on);
                    if alive == 0 {
                        s.stop = true;
                        wake.notify_all();
                        break Err(TrainError::AllWorkersFailed(n));
                    }
                    wake.notify_all();
                    continue;
                }
            };
            server.apply(tree, push.worker, push.built_on, 0.0, push.build_ms, 0.0);
            let rec = server.history.records.last_mut().expect("just pushed");
            rec.server_time = t1.elapsed().as_secs_f64() * 1e3;
            rec.clock = start.elapsed().as_secs_f64() * 1e3;
            let done = server.version() as usize >= cfg.n_trees;
            let mut s = state.lock().expect("state lock");
            s.version = server.version();
            s.published = server.published();
            release(&mut s.in_flight, push.built_on);
            s.awaiting_ack[push.worker] = false;
            s.stop = done;
            wake.notify_all();
            if done {
                break Ok(());
            }
        };
        // unblock any worker still sending
        drop(rx);
        result
    });
    outcome.map(|()| server.finish())
}
