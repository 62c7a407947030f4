//! Random forest of axis-aligned Gini trees over dense `f64` features.
//!
//! Class labels are plain indices `0..n_classes`; vote ties resolve to the
//! lowest index. Training canonicalises the example order first, so the
//! result depends only on the multiset of examples and the seed.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Candidate features per split; `None` means `⌊√d⌋` (3 for 14 features).
    pub feature_subsample: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: 12,
            min_leaf: 2,
            feature_subsample: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { counts: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
}

fn majority(counts: &[u32]) -> usize {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

impl DecisionTree {
    /// A depth-one tree.
    pub fn stump(feature: usize, threshold: f64, left: Vec<u32>, right: Vec<u32>) -> Self {
        DecisionTree {
            nodes: vec![
                Node::Split {
                    feature,
                    threshold,
                    left: 1,
                    right: 2,
                },
                Node::Leaf { counts: left },
                Node::Leaf { counts: right },
            ],
        }
    }

    pub fn leaf_counts(&self, x: &[f64]) -> &[u32] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { counts } => return counts,
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        majority(self.leaf_counts(x))
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub n_features: usize,
    pub n_classes: usize,
    pub params: ForestParams,
    /// Set when the training data held a single class.
    pub degenerate: bool,
}

/// Outcome of a forest vote.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vote {
    pub class: usize,
    /// Share of trees voting for `class`.
    pub fraction: f64,
}

impl ForestModel {
    /// Wraps hand-built trees, checking every split against the feature count.
    pub fn from_trees(
        trees: Vec<DecisionTree>,
        n_features: usize,
        n_classes: usize,
    ) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::validation("trees", "forest needs at least one tree"));
        }
        if let Some(f) = trees.iter().filter_map(DecisionTree::max_feature).max() {
            if f >= n_features {
                return Err(Error::validation("trees", format!("split on feature {f} ≥ {n_features}")));
            }
        }
        Ok(ForestModel {
            params: ForestParams {
                n_trees: trees.len(),
                ..ForestParams::default()
            },
            trees,
            n_features,
            n_classes,
            degenerate: false,
        })
    }

    pub fn vote(&self, x: &[f64]) -> Result<Vote> {
        if x.len() != self.n_features {
            return Err(Error::dimension("forest input", self.n_features, x.len()));
        }
        let mut votes = vec![0u32; self.n_classes];
        for t in &self.trees {
            votes[t.predict(x)] += 1;
        }
        let class = majority(&votes);
        Ok(Vote {
            class,
            fraction: votes[class] as f64 / self.trees.len() as f64,
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(self.vote(x)?.class)
    }
}

/// Trains a forest on `(x, label)` pairs with bootstrap resampling per tree.
pub fn train_forest(
    x: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    params: &ForestParams,
) -> Result<ForestModel> {
    if x.is_empty() || x.len() != labels.len() {
        return Err(Error::validation("training data", "need equal, non-zero numbers of rows and labels"));
    }
    if params.n_trees == 0 || params.min_leaf == 0 {
        return Err(Error::validation("forest params", "n_trees and min_leaf must be ≥ 1"));
    }
    let d = x[0].len();
    if d == 0 || x.iter().any(|r| r.len() != d) {
        return Err(Error::validation("training data", "rows must share a non-zero width"));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::validation("training data", "non-finite feature value"));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::validation("labels", format!("label {l} ≥ n_classes {n_classes}")));
    }

    // Canonical order: sort by (label, feature bits).
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| {
        labels[a].cmp(&labels[b]).then_with(|| {
            x[a].iter()
                .zip(&x[b])
                .map(|(p, q)| p.total_cmp(q))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let xs: Vec<&[f64]> = order.iter().map(|&i| x[i].as_slice()).collect();
    let ys: Vec<usize> = order.iter().map(|&i| labels[i]).collect();

    let mut present = vec![false; n_classes];
    ys.iter().for_each(|&l| present[l] = true);
    let degenerate = present.iter().filter(|&&p| p).count() < 2;
    if degenerate {
        log::warn!("training data holds a single class; the forest will be constant");
    }

    let mtry = params
        .feature_subsample
        .unwrap_or_else(|| ((d as f64).sqrt().floor() as usize).max(1))
        .clamp(1, d);
    let builder = TreeBuilder {
        xs: &xs,
        ys: &ys,
        n_classes,
        mtry,
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
    };
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(t as u64 + 1);
            let sample: Vec<usize> = (0..xs.len()).map(|_| rng.random_range(0..xs.len())).collect();
            builder.build(sample, &mut rng)
        })
        .collect();
    Ok(ForestModel {
        trees,
        n_features: d,
        n_classes,
        params: *params,
        degenerate,
    })
}

struct TreeBuilder<'a> {
    xs: &'a [&'a [f64]],
    ys: &'a [usize],
    n_classes: usize,
    mtry: usize,
    max_depth: usize,
    min_leaf: usize,
}

fn gini(counts: &[u32], n: u32) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

impl TreeBuilder<'_> {
    fn build(&self, sample: Vec<usize>, rng: &mut ChaCha8Rng) -> DecisionTree {
        let mut nodes = Vec::new();
        self.grow(sample, 0, rng, &mut nodes);
        DecisionTree { nodes }
    }

    fn counts(&self, idx: &[usize]) -> Vec<u32> {
        let mut c = vec![0u32; self.n_classes];
        idx.iter().for_each(|&i| c[self.ys[i]] += 1);
        c
    }

    fn grow(&self, idx: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng, nodes: &mut Vec<Node>) -> usize {
        let at = nodes.len();
        let counts = self.counts(&idx);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.max_depth || idx.len() < 2 * self.min_leaf {
            nodes.push(Node::Leaf { counts });
            return at;
        }
        let Some((feature, threshold)) = self.best_split(&idx, &counts, rng) else {
            nodes.push(Node::Leaf { counts });
            return at;
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| self.xs[i][feature] <= threshold);
        nodes.push(Node::Leaf { counts: Vec::new() });
        let left = self.grow(l, depth + 1, rng, nodes);
        let right = self.grow(r, depth + 1, rng, nodes);
        nodes[at] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        at
    }

    fn best_split(&self, idx: &[usize], counts: &[u32], rng: &mut ChaCha8Rng) -> Option<(usize, f64)> {
        let d = self.xs[0].len();
        let n = idx.len() as u32;
        let parent = gini(counts, n);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted = idx.to_vec();
        for feature in index::sample(rng, d, self.mtry) {
            sorted.sort_by(|&a, &b| self.xs[a][feature].total_cmp(&self.xs[b][feature]));
            let mut left = vec![0u32; self.n_classes];
            for k in 0..sorted.len() - 1 {
                left[self.ys[sorted[k]]] += 1;
                let nl = k as u32 + 1;
                let (v, next) = (self.xs[sorted[k]][feature], self.xs[sorted[k + 1]][feature]);
                if v == next || (nl as usize) < self.min_leaf || ((n - nl) as usize) < self.min_leaf {
                    continue;
                }
                let right: Vec<u32> = counts.iter().zip(&left).map(|(c, l)| c - l).collect();
                let impurity = (nl as f64 * gini(&left, nl) + (n - nl) as f64 * gini(&right, n - nl))
                    / n as f64;
                if impurity < parent - 1e-12 && best.is_none_or(|(b, _, _)| impurity < b) {
                    let mut threshold = 0.5 * (v + next);
                    // Midpoint can round up to `next` for adjacent floats.
                    if threshold >= next {
                        threshold = v;
                    }
                    best = Some((impurity, feature, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable(n: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let v = i as f64 / n as f64 * 2.0 - 1.0 + 0.5 / n as f64;
            let noise = ((i * 7919) % 13) as f64;
            x.push(vec![v, noise, -noise]);
            y.push(usize::from(v >= 0.0));
        }
        (x, y)
    }

    #[test]
    fn single_feature_separable_reaches_full_training_accuracy() {
        let (x, y) = separable(200);
        let params = ForestParams { n_trees: 25, seed: 3, ..Default::default() };
        let f = train_forest(&x, &y, 2, &params).unwrap();
        for (row, &label) in x.iter().zip(&y) {
            assert_eq!(f.predict(row).unwrap(), label);
        }
    }

    #[test]
    fn single_class_is_constant_and_flagged() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 1.0]).collect();
        let f = train_forest(&x, &[0; 20], 2, &ForestParams { n_trees: 5, ..Default::default() })
            .unwrap();
        assert!(f.degenerate);
        assert_eq!(f.predict(&[100.0, -4.0]).unwrap(), 0);
    }

    #[test]
    fn stump_votes() {
        let f = ForestModel::from_trees(vec![DecisionTree::stump(0, 0.5, vec![3, 0], vec![0, 3])], 14, 2)
            .unwrap();
        let mut v = vec![0.0; 14];
        v[0] = 0.9;
        assert_eq!(f.vote(&v).unwrap(), Vote { class: 1, fraction: 1.0 });
        assert!(f.vote(&[0.0; 3]).is_err());
        assert!(ForestModel::from_trees(vec![DecisionTree::stump(20, 0.0, vec![1], vec![1])], 14, 2)
            .is_err());
    }

    #[test]
    fn even_split_resolves_to_lowest_class() {
        let trees = vec![
            DecisionTree::stump(0, 0.0, vec![1, 0], vec![1, 0]),
            DecisionTree::stump(0, 0.0, vec![0, 1], vec![0, 1]),
        ];
        let f = ForestModel::from_trees(trees, 1, 2).unwrap();
        assert_eq!(f.vote(&[1.0]).unwrap(), Vote { class: 0, fraction: 0.5 });
    }

    #[test]
    fn order_of_examples_does_not_matter() {
        let (x, y) = separable(120);
        let params = ForestParams { n_trees: 10, seed: 9, ..Default::default() };
        let a = train_forest(&x, &y, 2, &params).unwrap();
        let mut pairs: Vec<_> = x.into_iter().zip(y).collect();
        pairs.reverse();
        pairs.swap(3, 70);
        let (xr, yr): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let b = train_forest(&xr, &yr, 2, &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn respects_depth_and_leaf_limits() {
        let (x, y) = separable(300);
        let params = ForestParams { n_trees: 4, max_depth: 2, min_leaf: 10, seed: 1, ..Default::default() };
        let f = train_forest(&x, &y, 2, &params).unwrap();
        for t in &f.trees {
            assert!(t.depth() <= 2);
            for n in &t.nodes {
                if let Node::Leaf { counts } = n {
                    assert!(counts.iter().sum::<u32>() >= 10);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(train_forest(&[], &[], 2, &ForestParams::default()).is_err());
        assert!(train_forest(&[vec![1.0]], &[2], 2, &ForestParams::default()).is_err());
        assert!(train_forest(&[vec![f64::NAN]], &[0], 2, &ForestParams::default()).is_err());
    }
}
