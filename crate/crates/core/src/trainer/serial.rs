use std::time::Instant;

use super::forest::Forest;
use super::history::History;
use super::server::{make_job, run_job, Server, TreeBuilder};
use super::{TrainConfig, TrainError};
use crate::dataset::SparseDataset;

pub(crate) fn run(
    ds: &SparseDataset,
    test: Option<&SparseDataset>,
    cfg: &TrainConfig,
    builder: &dyn TreeBuilder,
) -> Result<(Forest, History), TrainError> {
    let mut server = Server::new(ds, test, cfg)?;
    let start = Instant::now();
    for local in 1..=cfg.n_trees as u64 {
        let snap = server.published();
        let t0 = Instant::now();
        let tree = run_job(builder, &make_job(&server.bins, &snap, cfg, 0, local))?;
        let build = t0.elapsed().as_secs_f64() * 1e3;
        let t1 = Instant::now();
        server.apply(tree, 0, snap.version, 0.0, build, 0.0);
        let rec = server.history.records.last_mut().expect("just pushed");
        rec.server_time = t1.elapsed().as_secs_f64() * 1e3;
        rec.clock = start.elapsed().as_secs_f64() * 1e3;
    }
    Ok(server.finish())
}
