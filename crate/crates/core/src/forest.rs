//! Bagged binary decision trees with per-node feature subsampling, Gini
//! splits, probability averaging and impurity-based feature importance.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{row_contains, Fingerprint, LabeledDataset};
use crate::error::{Error, Result};
use crate::rng::{Rng, RngPlan};
use rand::{Rng as _, SeedableRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Candidate features per node; `None` means `ceil(sqrt(p))`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            max_features: None,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    /// Samples without `feature` go to `absent`, samples with it to `present`.
    Split {
        feature: u32,
        absent: u32,
        present: u32,
        /// Sample-weighted Gini decrease achieved by this split.
        decrease: f64,
    },
    Leaf { probability: f64, samples: u32 },
}

/// Nodes in preorder; the root is `nodes[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn predict_proba(&self, row: &[u32]) -> f64 {
        let mut at = 0usize;
        loop {
            match self.nodes[at] {
                TreeNode::Leaf { probability, .. } => return probability,
                TreeNode::Split {
                    feature,
                    absent,
                    present,
                    ..
                } => {
                    at = if row_contains(row, feature as usize) {
                        present as usize
                    } else {
                        absent as usize
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, at: usize) -> usize {
            match t.nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split {
                    absent, present, ..
                } => 1 + go(t, absent as usize).max(go(t, present as usize)),
            }
        }
        go(self, 0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = (f64, u32)> + '_ {
        self.nodes.iter().filter_map(|n| match *n {
            TreeNode::Leaf {
                probability,
                samples,
            } => Some((probability, samples)),
            TreeNode::Split { .. } => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<DecisionTree>,
    pub tree_seeds: Vec<u64>,
    pub n_features: usize,
    pub fingerprint: Fingerprint,
}

/// `n` draws with replacement from `[0, n)`.
pub fn bootstrap_indices(n: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::invalid("bootstrap of an empty dataset"));
    }
    Ok((0..n).map(|_| rng.random_range(0..n)).collect())
}

/// `ceil(sqrt(p))` without floating point.
pub fn sqrt_features(p: usize) -> usize {
    let mut m = (p as f64).sqrt() as usize;
    while m * m < p {
        m += 1;
    }
    while m > 0 && (m - 1) * (m - 1) >= p {
        m -= 1;
    }
    m.max(1)
}

/// `n * gini` for a node with `pos` positives out of `n`.
#[inline]
fn weighted_gini(n: f64, pos: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let neg = n - pos;
    n - (pos * pos + neg * neg) / n
}

/// Sample-weighted Gini decrease of splitting a node with `(n, pos)` into a
/// child holding `(n_in, pos_in)` and its complement.
pub fn gini_decrease(n: usize, pos: usize, n_in: usize, pos_in: usize) -> f64 {
    let (n, pos, n_in, pos_in) = (n as f64, pos as f64, n_in as f64, pos_in as f64);
    weighted_gini(n, pos) - weighted_gini(n_in, pos_in) - weighted_gini(n - n_in, pos - pos_in)
}

struct TreeBuilder<'a> {
    data: &'a LabeledDataset,
    params: &'a ForestParams,
    mtry: usize,
    rng: Rng,
    nodes: Vec<TreeNode>,
    // Scratch per-feature counters, reset after each node.
    count: Vec<u32>,
    pos_count: Vec<u32>,
}

impl TreeBuilder<'_> {
    fn leaf(&self, samples: &[u32]) -> TreeNode {
        let pos = samples
            .iter()
            .filter(|&&s| self.data.labels[s as usize] == 1)
            .count();
        TreeNode::Leaf {
            probability: pos as f64 / samples.len() as f64,
            samples: samples.len() as u32,
        }
    }

    /// Best `(feature, decrease)` among the sampled candidate features, or
    /// `None` when no feature varies within the node.
    fn best_split(&mut self, samples: &[u32], pos: usize) -> Option<(usize, f64)> {
        let n = samples.len();
        let mut touched: Vec<u32> = Vec::new();
        for &s in samples {
            let y = self.data.labels[s as usize];
            for &j in self.data.features.row(s as usize) {
                let ju = j as usize;
                if self.count[ju] == 0 {
                    touched.push(j);
                }
                self.count[ju] += 1;
                self.pos_count[ju] += u32::from(y);
            }
        }
        touched.sort_unstable();
        let varying: Vec<u32> = touched
            .iter()
            .copied()
            .filter(|&j| (self.count[j as usize] as usize) < n)
            .collect();

        let mut best: Option<(usize, f64)> = None;
        if !varying.is_empty() {
            let m = self.mtry.min(varying.len());
            let mut picks: Vec<usize> = index::sample(&mut self.rng, varying.len(), m).into_vec();
            picks.sort_unstable();
            for p in picks {
                let j = varying[p] as usize;
                let d = gini_decrease(
                    n,
                    pos,
                    self.count[j] as usize,
                    self.pos_count[j] as usize,
                );
                // Ascending feature order: strict comparison keeps the lowest
                // index among equal decreases.
                if best.is_none_or(|(_, bd)| d > bd) {
                    best = Some((j, d));
                }
            }
        }
        for &j in &touched {
            self.count[j as usize] = 0;
            self.pos_count[j as usize] = 0;
        }
        best
    }

    fn grow(&mut self, samples: Vec<u32>, depth: usize) -> u32 {
        let id = self.nodes.len() as u32;
        let n = samples.len();
        let pos = samples
            .iter()
            .filter(|&&s| self.data.labels[s as usize] == 1)
            .count();
        let depth_capped = self.params.max_depth.is_some_and(|d| depth >= d);
        if pos == 0 || pos == n || n < self.params.min_samples_split.max(2) || depth_capped {
            let leaf = self.leaf(&samples);
            self.nodes.push(leaf);
            return id;
        }
        let Some((feature, decrease)) = self.best_split(&samples, pos) else {
            let leaf = self.leaf(&samples);
            self.nodes.push(leaf);
            return id;
        };
        self.nodes.push(TreeNode::Split {
            feature: feature as u32,
            absent: 0,
            present: 0,
            decrease,
        });
        let (present, absent): (Vec<u32>, Vec<u32>) = samples
            .into_iter()
            .partition(|&s| row_contains(self.data.features.row(s as usize), feature));
        let a = self.grow(absent, depth + 1);
        let p = self.grow(present, depth + 1);
        if let TreeNode::Split {
            absent, present, ..
        } = &mut self.nodes[id as usize]
        {
            *absent = a;
            *present = p;
        }
        id
    }
}

fn fit_tree(data: &LabeledDataset, params: &ForestParams, mtry: usize, seed: u64) -> DecisionTree {
    let mut rng = Rng::seed_from_u64(seed);
    let n = data.len();
    let samples: Vec<u32> = if params.bootstrap {
        bootstrap_indices(n, &mut rng)
            .expect("dataset is non-empty")
            .into_iter()
            .map(|i| i as u32)
            .collect()
    } else {
        (0..n as u32).collect()
    };
    let p = data.n_features();
    let mut b = TreeBuilder {
        data,
        params,
        mtry,
        rng,
        nodes: Vec::new(),
        count: vec![0; p],
        pos_count: vec![0; p],
    };
    b.grow(samples, 0);
    DecisionTree { nodes: b.nodes }
}

/// Fits `params.n_trees` trees in parallel. Tree `t` draws all of its
/// randomness from `plan.child_seed("tree", t)`, so the forest does not depend
/// on the number of worker threads.
pub fn fit_forest(data: &LabeledDataset, params: &ForestParams, plan: &RngPlan) -> Result<Forest> {
    data.require_both_classes()?;
    if params.n_trees == 0 {
        return Err(Error::invalid("forest needs at least one tree"));
    }
    let p = data.n_features();
    if p == 0 {
        return Err(Error::invalid("forest needs at least one feature"));
    }
    let mtry = params.max_features.unwrap_or_else(|| sqrt_features(p)).clamp(1, p);
    let tree_seeds: Vec<u64> = (0..params.n_trees as u64)
        .map(|t| plan.child_seed("tree", t))
        .collect();
    let trees = tree_seeds
        .par_iter()
        .map(|&seed| fit_tree(data, params, mtry, seed))
        .collect();
    Ok(Forest {
        trees,
        tree_seeds,
        n_features: p,
        fingerprint: data.fingerprint.clone(),
    })
}

impl Forest {
    /// Mean of the per-tree leaf probabilities.
    pub fn predict_proba(&self, row: &[u32]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_proba(row)).sum();
        sum / self.trees.len() as f64
    }

    /// 1 iff the probability is at least 0.5; the boundary counts as positive.
    pub fn predict_label(&self, row: &[u32]) -> u8 {
        label_at_half(self.predict_proba(row))
    }

    pub fn predict_dataset(&self, data: &LabeledDataset) -> Vec<f64> {
        data.features
            .rows()
            .iter()
            .map(|r| self.predict_proba(r))
            .collect()
    }

    /// Total Gini decrease per feature over all trees, normalized to sum to 1.
    /// All zeros when no tree has a split.
    pub fn gini_importance(&self) -> Vec<f64> {
        let mut imp = vec![0.0; self.n_features];
        for tree in &self.trees {
            for node in &tree.nodes {
                if let TreeNode::Split {
                    feature, decrease, ..
                } = *node
                {
                    imp[feature as usize] += decrease;
                }
            }
        }
        let total: f64 = imp.iter().sum();
        if total > 0.0 {
            for v in &mut imp {
                *v /= total;
            }
        }
        imp
    }
}

pub fn label_at_half(p: f64) -> u8 {
    u8::from(p >= 0.5)
}

/// Feature indices sorted by descending importance; ties by ascending index.
pub fn rank_features(importance: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..importance.len()).collect();
    order.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]).then(a.cmp(&b)));
    order
}
