use super::{RegressionTree, TreeError};
use crate::dataset::SparseDataset;

/// Grouping of a set of samples by the leaf they reach.
///
/// Positions `0..len()` index the partitioned samples (`samples()[pos]` is
/// the dataset index). Vectors passed to [`project`] are indexed by
/// position.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafPartition {
    samples: Vec<u32>,
    block_of: Vec<usize>,
    blocks: Vec<Vec<usize>>,
    leaf_nodes: Vec<usize>,
}

impl LeafPartition {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[u32] {
        &self.samples
    }

    /// Block index of each position.
    pub fn block_of(&self) -> &[usize] {
        &self.block_of
    }

    /// Positions in each non-empty leaf, in leaf-node order.
    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Tree node id of each block.
    pub fn leaf_nodes(&self) -> &[usize] {
        &self.leaf_nodes
    }
}

/// Partition every sample of `ds`.
pub fn leaf_partition(tree: &RegressionTree, ds: &SparseDataset) -> LeafPartition {
    let all: Vec<u32> = (0..ds.len() as u32).collect();
    leaf_partition_of(tree, ds, &all)
}

/// Partition the given subset of `ds`.
pub fn leaf_partition_of(tree: &RegressionTree, ds: &SparseDataset, samples: &[u32]) -> LeafPartition {
    let leaves: Vec<usize> = samples.iter().map(|&i| tree.leaf_of(ds.sample(i as usize))).collect();
    let mut leaf_nodes = leaves.clone();
    leaf_nodes.sort_unstable();
    leaf_nodes.dedup();
    let block_of: Vec<usize> = leaves
        .iter()
        .map(|l| leaf_nodes.binary_search(l).expect("leaf present"))
        .collect();
    let mut blocks = vec![Vec::new(); leaf_nodes.len()];
    for (pos, &b) in block_of.iter().enumerate() {
        blocks[b].push(pos);
    }
    LeafPartition { samples: samples.to_vec(), block_of, blocks, leaf_nodes }
}

fn check_len(p: &LeafPartition, got: usize) -> Result<(), TreeError> {
    if got != p.len() {
        return Err(TreeError::Length { expected: p.len(), got });
    }
    Ok(())
}

/// Weighted leaf-mean broadcast: `out_i = Σ_{r∈leaf(i)} w_r g_r / Σ_{r∈leaf(i)} w_r`.
///
/// With unit weights this is `A g` for `A = V (VᵀV)⁻¹ Vᵀ`.
pub fn project(p: &LeafPartition, g: &[f64], w: &[f64]) -> Result<Vec<f64>, TreeError> {
    check_len(p, g.len())?;
    check_len(p, w.len())?;
    let mut means = Vec::with_capacity(p.blocks.len());
    for (b, block) in p.blocks.iter().enumerate() {
        let (sw, swg) = block.iter().fold((0.0, 0.0), |(a, c), &r| (a + w[r], c + w[r] * g[r]));
        if sw <= 0.0 {
            return Err(TreeError::ZeroWeightBlock(b));
        }
        means.push(swg / sw);
    }
    Ok(p.block_of.iter().map(|&b| means[b]).collect())
}

/// `ζ`: number of components where `|project(g) - g| > tol`.
pub fn zeta_estimate(p: &LeafPartition, g: &[f64], w: &[f64], tol: f64) -> Result<usize, TreeError> {
    let proj = project(p, g, w)?;
    Ok(proj.iter().zip(g).filter(|(a, b)| (*a - *b).abs() > tol).count())
}

/// `δ`: largest Euclidean distance between two samples sharing a leaf.
pub fn leaf_diameter(p: &LeafPartition, ds: &SparseDataset) -> f64 {
    let mut best = 0.0f64;
    for block in &p.blocks {
        for (a, &ra) in block.iter().enumerate() {
            let xa = ds.sample(p.samples[ra] as usize);
            for &rb in &block[a + 1..] {
                best = best.max(xa.distance(ds.sample(p.samples[rb] as usize)));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SparseVec;
    use crate::tree::Node;
    use proptest::prelude::*;

    fn line(n: usize) -> SparseDataset {
        let samples = (0..n).map(|i| SparseVec::from_pairs([(0, i as f64)]).unwrap()).collect();
        SparseDataset::new(samples, vec![0; n], vec![1; n], 1).unwrap()
    }

    fn stump(threshold: f64) -> RegressionTree {
        RegressionTree::from_nodes(
            vec![
                Node::Split { feature: 0, threshold, left: 1, right: 2 },
                Node::Leaf { value: 1.0 },
                Node::Leaf { value: -1.0 },
            ],
            0,
        )
    }

    #[test]
    fn single_leaf_is_one_block() {
        let p = leaf_partition(&RegressionTree::constant(0.0), &line(4));
        assert_eq!(p.blocks(), &[vec![0, 1, 2, 3]]);
    }

    #[test]
    fn stump_splits_two_points() {
        let p = leaf_partition(&stump(0.5), &line(2));
        assert_eq!(p.blocks(), &[vec![0], vec![1]]);
        assert_eq!(p.leaf_nodes(), &[1, 2]);
    }

    #[test]
    fn project_examples() {
        let p = leaf_partition(&RegressionTree::constant(0.0), &line(2));
        assert_eq!(project(&p, &[4.0, 0.0], &[1.0, 3.0]).unwrap(), vec![1.0, 1.0]);
        let p2 = leaf_partition(&stump(1.5), &line(4));
        let g = [2.0, 2.0, -1.0, -1.0];
        assert_eq!(project(&p2, &g, &[1.0, 5.0, 2.0, 1.0]).unwrap(), g.to_vec());
    }

    #[test]
    fn zero_weight_block_is_error() {
        let p = leaf_partition(&stump(0.5), &line(2));
        assert_eq!(project(&p, &[1.0, 2.0], &[1.0, 0.0]), Err(TreeError::ZeroWeightBlock(1)));
        assert!(project(&p, &[1.0], &[1.0]).is_err());
    }

    #[test]
    fn zeta_examples() {
        let single = leaf_partition(&RegressionTree::constant(0.0), &line(2));
        assert_eq!(zeta_estimate(&single, &[1.0, -1.0], &[1.0, 1.0], 1e-12).unwrap(), 2);
        let pure = leaf_partition(&stump(0.5), &line(2));
        assert_eq!(zeta_estimate(&pure, &[1.0, -1.0], &[1.0, 1.0], 1e-12).unwrap(), 0);
    }

    #[test]
    fn diameter_of_leaves() {
        let ds = line(4);
        assert_eq!(leaf_diameter(&leaf_partition(&RegressionTree::constant(0.0), &ds), &ds), 3.0);
        assert_eq!(leaf_diameter(&leaf_partition(&stump(1.5), &ds), &ds), 1.0);
        let two = line(2);
        assert_eq!(leaf_diameter(&leaf_partition(&stump(0.5), &two), &two), 0.0);
    }

    #[test]
    fn subset_partition_uses_positions() {
        let ds = line(5);
        let p = leaf_partition_of(&stump(1.5), &ds, &[4, 0, 3]);
        assert_eq!(p.samples(), &[4, 0, 3]);
        assert_eq!(p.blocks(), &[vec![1], vec![0, 2]]);
    }

    fn arb_case() -> impl Strategy<Value = (f64, f64, Vec<f64>, Vec<f64>, Vec<f64>)> {
        (2usize..30).prop_flat_map(|n| {
            (
                0.0..30.0f64,
                0.0..30.0f64,
                proptest::collection::vec(-5.0..5.0f64, n),
                proptest::collection::vec(-5.0..5.0f64, n),
                proptest::collection::vec(0.1..4.0f64, n),
            )
        })
    }

    fn tree3(a: f64, b: f64) -> RegressionTree {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        RegressionTree::from_nodes(
            vec![
                Node::Split { feature: 0, threshold: hi, left: 1, right: 2 },
                Node::Split { feature: 0, threshold: lo, left: 3, right: 4 },
                Node::Leaf { value: 0.0 },
                Node::Leaf { value: 0.0 },
                Node::Leaf { value: 0.0 },
            ],
            0,
        )
    }

    proptest! {
        #[test]
        fn partition_is_disjoint_and_covering((a, b, g, _h, _w) in arb_case()) {
            let ds = line(g.len());
            let t = tree3(a, b);
            let p = leaf_partition(&t, &ds);
            let mut seen = vec![0; ds.len()];
            for (k, block) in p.blocks().iter().enumerate() {
                for &pos in block {
                    seen[pos] += 1;
                    prop_assert_eq!(t.leaf_of(ds.sample(pos)), p.leaf_nodes()[k]);
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }

        #[test]
        fn project_is_idempotent_and_self_adjoint((a, b, g, h, w) in arb_case()) {
            let ds = line(g.len());
            let p = leaf_partition(&tree3(a, b), &ds);
            let pg = project(&p, &g, &w).unwrap();
            let ppg = project(&p, &pg, &w).unwrap();
            for (x, y) in pg.iter().zip(&ppg) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            let ph = project(&p, &h, &w).unwrap();
            let lhs: f64 = (0..g.len()).map(|i| w[i] * pg[i] * h[i]).sum();
            let rhs: f64 = (0..g.len()).map(|i| w[i] * g[i] * ph[i]).sum();
            prop_assert!((lhs - rhs).abs() < 1e-10);
            prop_assert!(zeta_estimate(&p, &g, &w, 1e-12).unwrap() <= g.len());
        }
    }
}
