//! Regression trees fit by weighted least squares, and the leaf-averaging
//! operator they induce on per-sample vectors.

mod grow;
mod partition;
mod text;

use thiserror::Error;

use crate::dataset::SparseVec;

pub use grow::{fit, fit_values};
pub use partition::{leaf_diameter, leaf_partition, leaf_partition_of, project, zeta_estimate, LeafPartition};

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("no included samples to fit")]
    EmptyView,
    #[error("non-finite target at sample {0}")]
    NonFinite(usize),
    #[error("invalid tree parameters: {0}")]
    Params(String),
    #[error("leaf block {0} has zero total weight")]
    ZeroWeightBlock(usize),
    #[error("vector length {got} does not match partition size {expected}")]
    Length { expected: usize, got: usize },
    #[error("tree text line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    pub max_leaves: usize,
    /// Minimum total weight (`Σ m'_i`) on each side of a split.
    pub min_samples_leaf: u32,
    pub feature_fraction: f64,
    pub feature_seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_leaves: 31, min_samples_leaf: 1, feature_fraction: 1.0, feature_seed: 0 }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<(), TreeError> {
        if self.max_leaves < 1 {
            return Err(TreeError::Params("max_leaves must be at least 1".into()));
        }
        if self.min_samples_leaf < 1 {
            return Err(TreeError::Params("min_samples_leaf must be at least 1".into()));
        }
        if !(self.feature_fraction > 0.0 && self.feature_fraction <= 1.0) {
            return Err(TreeError::Params(format!(
                "feature_fraction {} not in (0, 1]",
                self.feature_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// `x[feature] <= threshold` goes left.
    Split { feature: u32, threshold: f64, left: u32, right: u32 },
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    /// Index of the sample draw the tree was trained on.
    pub draw_index: u64,
}

impl RegressionTree {
    pub fn constant(value: f64) -> Self {
        RegressionTree { nodes: vec![Node::Leaf { value }], draw_index: 0 }
    }

    pub(crate) fn from_nodes(nodes: Vec<Node>, draw_index: u64) -> Self {
        RegressionTree { nodes, draw_index }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Node id of the leaf `x` routes to.
    pub fn leaf_of(&self, x: &SparseVec) -> usize {
        let mut id = 0usize;
        loop {
            match &self.nodes[id] {
                Node::Leaf { .. } => return id,
                Node::Split { feature, threshold, left, right } => {
                    id = if x.get(*feature) <= *threshold { *left } else { *right } as usize;
                }
            }
        }
    }

    pub fn predict(&self, x: &SparseVec) -> f64 {
        match self.nodes[self.leaf_of(x)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("leaf_of returns a leaf"),
        }
    }

    /// Scale every leaf value by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let nodes = self
            .nodes
            .iter()
            .map(|n| match n {
                Node::Leaf { value } => Node::Leaf { value: value * factor },
                s => s.clone(),
            })
            .collect();
        RegressionTree { nodes, draw_index: self.draw_index }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(v: f64) -> SparseVec {
        SparseVec::from_pairs([(0, v)]).unwrap()
    }

    fn stump() -> RegressionTree {
        RegressionTree::from_nodes(
            vec![
                Node::Split { feature: 0, threshold: 0.0, left: 1, right: 2 },
                Node::Leaf { value: 1.0 },
                Node::Leaf { value: -1.0 },
            ],
            0,
        )
    }

    #[test]
    fn constant_tree_predicts_everywhere() {
        let t = RegressionTree::constant(0.7);
        assert_eq!(t.predict(&x(3.0)), 0.7);
        assert_eq!(t.predict(&SparseVec::default()), 0.7);
    }

    #[test]
    fn routing_uses_threshold_and_missing_as_zero() {
        let t = stump();
        assert_eq!(t.predict(&x(0.0)), 1.0);
        assert_eq!(t.predict(&SparseVec::default()), 1.0);
        assert_eq!(t.predict(&x(1.0)), -1.0);
        assert_eq!(t.predict(&x(1e300)), -1.0);
        assert_eq!(t.n_leaves(), 2);
    }

    #[test]
    fn params_validation() {
        assert!(TreeParams::default().validate().is_ok());
        assert!(TreeParams { max_leaves: 0, ..Default::default() }.validate().is_err());
        assert!(TreeParams { feature_fraction: 0.0, ..Default::default() }.validate().is_err());
        assert!(TreeParams { feature_fraction: 1.2, ..Default::default() }.validate().is_err());
    }
}
