use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Node, RegressionTree, TreeError, TreeParams};
use crate::dataset::FeatureBins;
use crate::sampler::SampledTarget;

// Splits whose gain is below this fraction of the leaf's Σ w y² are noise.
const GAIN_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
struct Split {
    feature: usize,
    bin: u8,
    gain: f64,
}

struct Leaf {
    node: usize,
    members: Vec<u32>,
    best: Option<Split>,
}

#[derive(Clone, Copy, Default)]
struct Acc {
    w: f64,
    wy: f64,
    n: u32,
}

impl Acc {
    fn add(&mut self, w: f64, y: f64) {
        self.w += w;
        self.wy += w * y;
        self.n += 1;
    }
}

/// Fit a tree to a sampled target: per-sample values `g_i / m'_i`,
/// weights `m'_i`, over the included samples only.
pub fn fit(bins: &FeatureBins, target: &SampledTarget, params: &TreeParams) -> Result<RegressionTree, TreeError> {
    let n = target.weights.len();
    let mut values = vec![0.0; n];
    for &i in &target.included {
        values[i as usize] = target.per_sample(i as usize);
    }
    fit_values(bins, &target.included, &values, &target.weights, params)
}

/// Leaf-wise weighted least-squares tree.
///
/// `values` and `weights` are indexed by sample id; only `included` samples
/// are used. The leaf with the largest available split gain is split next,
/// until `max_leaves` is reached or no split has positive gain. Each leaf
/// predicts the weighted mean of its members' values.
pub fn fit_values(
    bins: &FeatureBins,
    included: &[u32],
    values: &[f64],
    weights: &[f64],
    params: &TreeParams,
) -> Result<RegressionTree, TreeError> {
    params.validate()?;
    if included.is_empty() {
        return Err(TreeError::EmptyView);
    }
    for &i in included {
        let (y, w) = (values[i as usize], weights[i as usize]);
        if !y.is_finite() || !w.is_finite() || w <= 0.0 {
            return Err(TreeError::NonFinite(i as usize));
        }
    }
    let mask = feature_mask(bins.n_features(), params);
    let grower = Grower { bins, values, weights, mask: &mask, min_weight: params.min_samples_leaf as f64 };

    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut root = Leaf { node: 0, members: included.to_vec(), best: None };
    root.best = grower.best_split(&root.members);
    let mut leaves = vec![root];

    while leaves.len() < params.max_leaves {
        // max gain; ties go to the lowest node id
        let pick = leaves
            .iter()
            .enumerate()
            .filter_map(|(k, l)| l.best.map(|s| (k, l.node, s.gain)))
            .fold(None, |acc: Option<(usize, usize, f64)>, cur| match acc {
                Some(a) if a.2 > cur.2 || (a.2 == cur.2 && a.1 < cur.1) => Some(a),
                _ => Some(cur),
            });
        let Some((k, _, _)) = pick else { break };
        let leaf = leaves.swap_remove(k);
        let split = leaf.best.expect("picked leaf has a split");
        let (left, right): (Vec<u32>, Vec<u32>) = leaf
            .members
            .iter()
            .partition(|&&i| bins.bin_of(i as usize, split.feature) <= split.bin);
        let (l_id, r_id) = (nodes.len(), nodes.len() + 1);
        nodes[leaf.node] = Node::Split {
            feature: split.feature as u32,
            threshold: bins.uppers(split.feature)[split.bin as usize],
            left: l_id as u32,
            right: r_id as u32,
        };
        nodes.push(Node::Leaf { value: 0.0 });
        nodes.push(Node::Leaf { value: 0.0 });
        for (node, members) in [(l_id, left), (r_id, right)] {
            let best = grower.best_split(&members);
            leaves.push(Leaf { node, members, best });
        }
    }

    for leaf in &leaves {
        nodes[leaf.node] = Node::Leaf { value: grower.mean(&leaf.members) };
    }
    Ok(RegressionTree::from_nodes(nodes, 0))
}

fn feature_mask(n_features: usize, params: &TreeParams) -> Vec<bool> {
    if params.feature_fraction >= 1.0 {
        return vec![true; n_features];
    }
    let k = ((params.feature_fraction * n_features as f64).ceil() as usize).clamp(1, n_features.max(1));
    let mut mask = vec![false; n_features];
    if n_features == 0 {
        return mask;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.feature_seed);
    for f in rand::seq::index::sample(&mut rng, n_features, k) {
        mask[f] = true;
    }
    mask
}

struct Grower<'a> {
    bins: &'a FeatureBins,
    values: &'a [f64],
    weights: &'a [f64],
    mask: &'a [bool],
    min_weight: f64,
}

impl Grower<'_> {
    fn mean(&self, members: &[u32]) -> f64 {
        let (mut w, mut wy) = (0.0, 0.0);
        for &i in members {
            let wi = self.weights[i as usize];
            w += wi;
            wy += wi * self.values[i as usize];
        }
        wy / w
    }

    fn best_split(&self, members: &[u32]) -> Option<Split> {
        if members.len() < 2 {
            return None;
        }
        let offsets = self.bins.offsets();
        let mut hist = vec![Acc::default(); offsets[offsets.len() - 1]];
        let mut total = Acc::default();
        let mut wyy = 0.0;
        for &i in members {
            let (w, y) = (self.weights[i as usize], self.values[i as usize]);
            total.add(w, y);
            wyy += w * y * y;
            for &(f, b) in self.bins.row(i as usize) {
                if self.mask[f as usize] {
                    hist[offsets[f as usize] + b as usize].add(w, y);
                }
            }
        }
        let parent = total.wy * total.wy / total.w;
        let min_gain = GAIN_RTOL * wyy;
        let mut best: Option<Split> = None;
        for f in (0..self.mask.len()).filter(|&f| self.mask[f]) {
            let nb = self.bins.n_bins(f);
            if nb < 2 {
                continue;
            }
            let slots = &mut hist[offsets[f]..offsets[f] + nb];
            // entries stored as zero are implicit: give the zero bin the rest
            let present = slots.iter().fold(Acc::default(), |a, s| Acc { w: a.w + s.w, wy: a.wy + s.wy, n: a.n + s.n });
            let z = self.bins.zero_bin(f) as usize;
            let absent_n = total.n - present.n;
            if absent_n > 0 {
                slots[z].n += absent_n;
                slots[z].w += total.w - present.w;
                slots[z].wy += total.wy - present.wy;
            }
            let mut left = Acc::default();
            for (b, slot) in slots.iter().enumerate().take(nb - 1) {
                left.w += slot.w;
                left.wy += slot.wy;
                left.n += slot.n;
                let right_n = total.n - left.n;
                if left.n == 0 || right_n == 0 {
                    continue;
                }
                let right_w = total.w - left.w;
                if left.w < self.min_weight || right_w < self.min_weight {
                    continue;
                }
                let right_wy = total.wy - left.wy;
                let gain = left.wy * left.wy / left.w + right_wy * right_wy / right_w - parent;
                if gain > min_gain && best.is_none_or(|s| gain > s.gain) {
                    best = Some(Split { feature: f, bin: b as u8, gain });
                }
            }
        }
        best
    }
}
