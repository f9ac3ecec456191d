use std::io::Write;

pub const HISTORY_HEADER: &str = "update,worker,staleness,train_loss,test_loss,accuracy,wall_ms";

/// One server update.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateRecord {
    /// `j`, starting at 1.
    pub update: u64,
    pub worker: usize,
    /// `τ_j = (j - 1) - k(j)`: updates applied between the pull and this one.
    pub staleness: u64,
    /// Training loss per raw row after the update.
    pub train_loss: f64,
    pub test_loss: Option<f64>,
    pub accuracy: Option<f64>,
    /// Milliseconds since start; virtual ticks in virtual mode.
    pub clock: f64,
    /// Time the worker spent fitting this tree (ms, or ticks).
    pub build_time: f64,
    /// Time the server spent applying this update (ms, or ticks).
    pub server_time: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct History {
    /// Training loss per raw row of the initial constant model.
    pub initial_train_loss: f64,
    pub records: Vec<UpdateRecord>,
}

impl History {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn max_staleness(&self) -> u64 {
        self.records.iter().map(|r| r.staleness).max().unwrap_or(0)
    }

    pub fn final_train_loss(&self) -> f64 {
        self.records.last().map_or(self.initial_train_loss, |r| r.train_loss)
    }

    /// First update index whose training loss is at or below `threshold`.
    pub fn updates_to_threshold(&self, threshold: f64) -> Option<u64> {
        if self.initial_train_loss <= threshold {
            return Some(0);
        }
        self.records.iter().find(|r| r.train_loss <= threshold).map(|r| r.update)
    }

    /// Updates per unit of clock over the whole run.
    pub fn throughput(&self) -> f64 {
        match self.records.last() {
            Some(r) if r.clock > 0.0 => self.records.len() as f64 / r.clock,
            _ => 0.0,
        }
    }

    /// Equal apart from timing columns.
    pub fn same_trajectory(&self, other: &History) -> bool {
        self.initial_train_loss.to_bits() == other.initial_train_loss.to_bits()
            && self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| {
                a.update == b.update
                    && a.worker == b.worker
                    && a.staleness == b.staleness
                    && a.train_loss.to_bits() == b.train_loss.to_bits()
                    && a.test_loss.map(f64::to_bits) == b.test_loss.map(f64::to_bits)
                    && a.accuracy.map(f64::to_bits) == b.accuracy.map(f64::to_bits)
            })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{HISTORY_HEADER}")?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.update,
                r.worker,
                r.staleness,
                r.train_loss,
                opt(r.test_loss),
                opt(r.accuracy),
                r.clock
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}
