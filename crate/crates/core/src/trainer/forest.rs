use std::collections::BTreeMap;

use super::TrainError;
use crate::dataset::{SparseDataset, SparseVec};
use crate::loss::ScoreVector;
use crate::tree::{RegressionTree, TreeError};

const MAGIC: &str = "asgbdt-forest 1";

/// Additive model `F(x) = f0 + Σ_k v_k tree_k(x)`, trees in server receive
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub f0: f64,
    trees: Vec<(RegressionTree, f64)>,
    pub n_features: usize,
    /// Fingerprint of the training set.
    pub fingerprint: String,
    /// Free-form `key = value` settings echoed into the file.
    pub manifest: BTreeMap<String, String>,
}

/// Constant model at the frequency-weighted mean label.
pub fn init_forest(ds: &SparseDataset) -> Result<Forest, TrainError> {
    if ds.is_empty() {
        return Err(TrainError::Config("cannot initialise a forest on an empty dataset".into()));
    }
    let (mut wy, mut w) = (0.0, 0.0);
    for (&y, &m) in ds.labels().iter().zip(ds.frequencies()) {
        wy += m as f64 * y as f64;
        w += m as f64;
    }
    Ok(Forest {
        f0: wy / w,
        trees: Vec::new(),
        n_features: ds.n_features(),
        fingerprint: ds.fingerprint(),
        manifest: BTreeMap::new(),
    })
}

/// `F_i = F(x_i)` for every distinct sample.
pub fn score_vector(forest: &Forest, ds: &SparseDataset) -> ScoreVector {
    ScoreVector(ds.samples().iter().map(|x| forest.predict(x)).collect())
}

impl Forest {
    pub fn trees(&self) -> &[(RegressionTree, f64)] {
        &self.trees
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn push(&mut self, tree: RegressionTree, step: f64) {
        self.trees.push((tree, step));
    }

    pub fn predict(&self, x: &SparseVec) -> f64 {
        let mut f = self.f0;
        for (t, v) in &self.trees {
            f += v * t.predict(x);
        }
        f
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(MAGIC);
        s.push('\n');
        s.push_str(&format!("f0 = {:?}\n", self.f0));
        s.push_str(&format!("n_features = {}\n", self.n_features));
        s.push_str(&format!("fingerprint = {}\n", self.fingerprint));
        for (k, v) in &self.manifest {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s.push_str(&format!("trees = {}\n", self.trees.len()));
        for (t, v) in &self.trees {
            s.push_str(&format!("step {v:?}\n"));
            t.write_text(&mut s);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, TreeError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty())
            .peekable();
        let err = |line: usize, msg: &str| TreeError::Parse { line, msg: msg.to_string() };
        match lines.next() {
            Some((_, l)) if l == MAGIC => {}
            Some((n, _)) => return Err(err(n, "not a forest file")),
            None => return Err(err(1, "empty forest file")),
        }
        let mut kv = BTreeMap::new();
        let mut n_trees = None;
        for (n, line) in lines.by_ref() {
            let (k, v) = line.split_once('=').ok_or_else(|| err(n, "expected key = value"))?;
            let (k, v) = (k.trim(), v.trim());
            if k == "trees" {
                n_trees = Some(v.parse::<usize>().map_err(|_| err(n, "invalid tree count"))?);
                break;
            }
            kv.insert(k.to_string(), v.to_string());
        }
        let n_trees = n_trees.ok_or_else(|| err(0, "missing trees = <count>"))?;
        let mut take = |key: &str| kv.remove(key).ok_or_else(|| err(0, &format!("missing {key}")));
        let f0: f64 = take("f0")?.parse().map_err(|_| err(0, "invalid f0"))?;
        let n_features: usize = take("n_features")?.parse().map_err(|_| err(0, "invalid n_features"))?;
        let fingerprint = take("fingerprint")?;

        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let (n, line) = lines.next().ok_or_else(|| err(0, "truncated forest"))?;
            let step: f64 = line
                .strip_prefix("step ")
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| err(n, "expected step <v>"))?;
            let first = lines.peek().map_or(n + 1, |(k, _)| *k);
            let mut tree_lines = std::iter::from_fn(|| lines.next().map(|(_, l)| l));
            let tree = RegressionTree::parse_lines(&mut tree_lines, first)?;
            trees.push((tree, step));
        }
        if let Some((n, _)) = lines.next() {
            return Err(err(n, "trailing content after last tree"));
        }
        Ok(Forest { f0, trees, n_features, fingerprint, manifest: kv })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::Node;

    fn ds(labels: &[u8], freqs: &[u32]) -> SparseDataset {
        let samples = (0..labels.len())
            .map(|i| SparseVec::from_pairs([(0, i as f64 + 1.0)]).unwrap())
            .collect();
        SparseDataset::new(samples, labels.to_vec(), freqs.to_vec(), 1).unwrap()
    }

    #[test]
    fn init_is_weighted_mean_label() {
        assert_eq!(init_forest(&ds(&[1, 0], &[1, 1])).unwrap().f0, 0.5);
        assert_eq!(init_forest(&ds(&[1, 0], &[3, 1])).unwrap().f0, 0.75);
        assert_eq!(init_forest(&ds(&[1, 1], &[2, 5])).unwrap().f0, 1.0);
    }

    #[test]
    fn scores_are_additive() {
        let d = ds(&[1, 0, 1], &[1, 1, 1]);
        let mut f = init_forest(&d).unwrap();
        assert_eq!(score_vector(&f, &d).0, vec![f.f0; 3]);
        let before = score_vector(&f, &d);
        let t = RegressionTree::from_nodes(
            vec![
                Node::Split { feature: 0, threshold: 1.5, left: 1, right: 2 },
                Node::Leaf { value: 2.0 },
                Node::Leaf { value: -1.0 },
            ],
            0,
        );
        f.push(t.clone(), 0.1);
        let after = score_vector(&f, &d);
        for i in 0..3 {
            assert_eq!(after.0[i], before.0[i] + 0.1 * t.predict(d.sample(i)));
        }
    }

    #[test]
    fn text_round_trip() {
        let d = ds(&[1, 0], &[1, 2]);
        let mut f = init_forest(&d).unwrap();
        f.manifest.insert("sample_seed".into(), "4".into());
        f.push(RegressionTree::constant(0.3), 0.1);
        f.push(RegressionTree::constant(-1.0 / 3.0), 0.05);
        let text = f.to_text();
        assert_eq!(Forest::from_text(&text).unwrap(), f);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(Forest::from_text("").is_err());
        assert!(Forest::from_text("something else\n").is_err());
        assert!(Forest::from_text("asgbdt-forest 1\nf0 = 0.5\n").is_err());
        let d = ds(&[1], &[1]);
        let mut f = init_forest(&d).unwrap();
        f.push(RegressionTree::constant(1.0), 0.1);
        let truncated: String = f.to_text().lines().take(6).map(|l| format!("{l}\n")).collect();
        assert!(Forest::from_text(&truncated).is_err());
    }
}
