//! Histogram-based gradient boosting with leaf-wise tree growth on the binary
//! log-loss.
//!
//! Each round computes per-sample gradients `g = p - y` and Hessians
//! `h = p (1 - p)` at the current probabilities, aggregates them into per-bin
//! histograms, and grows a tree by repeatedly splitting the leaf whose best
//! split has the largest second-order gain
//!
//! ```text
//! gain = 1/2 [ GL^2/(HL+l) + GR^2/(HR+l) - (GL+GR)^2/(HL+HR+l) ]
//! ```
//!
//! with leaf values `-G/(H+l)`.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::data::{row_contains, Fingerprint, LabeledDataset};
use crate::error::{Error, Result};
use crate::rng::RngPlan;

/// Probabilities are clipped to `[PROB_EPS, 1 - PROB_EPS]`.
pub const PROB_EPS: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_leaves: usize,
    /// L2 regularization on leaf values.
    pub lambda: f64,
    pub min_samples_leaf: usize,
    /// Bin budget for numeric features; binary features always use 2.
    pub max_bins: usize,
    /// Fraction of rows drawn (without replacement) per round.
    pub row_subsample: f64,
    /// Fraction of features considered per round.
    pub feature_subsample: f64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            n_rounds: 100,
            learning_rate: 0.1,
            max_leaves: 31,
            lambda: 1.0,
            min_samples_leaf: 2,
            max_bins: 256,
            row_subsample: 1.0,
            feature_subsample: 1.0,
        }
    }
}

impl GbdtParams {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::invalid("learning rate must lie in (0, 1]"));
        }
        if self.lambda.is_nan() || self.lambda < 0.0 {
            return Err(Error::invalid("lambda must be non-negative"));
        }
        if self.max_leaves == 0 || self.n_rounds == 0 {
            return Err(Error::invalid("max_leaves and n_rounds must be positive"));
        }
        for (name, f) in [
            ("row_subsample", self.row_subsample),
            ("feature_subsample", self.feature_subsample),
        ] {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::invalid(format!("{name} must lie in (0, 1]")));
            }
        }
        Ok(())
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    let p = clip_prob(p);
    (p / (1.0 - p)).ln()
}

#[inline]
pub fn clip_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradHess {
    pub g: f64,
    pub h: f64,
}

/// Gradient and Hessian of the per-sample log-loss with respect to the raw
/// score, evaluated at probability `p`.
pub fn grad_hess(p: f64, y: u8) -> GradHess {
    let p = clip_prob(p);
    GradHess {
        g: p - f64::from(y),
        h: p * (1.0 - p),
    }
}

/// Mean binary cross-entropy.
pub fn logloss(labels: &[u8], probs: &[f64]) -> Result<f64> {
    if labels.len() != probs.len() {
        return Err(Error::invalid(format!(
            "{} labels but {} probabilities",
            labels.len(),
            probs.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::invalid("log-loss of an empty sample"));
    }
    let sum: f64 = labels
        .iter()
        .zip(probs)
        .map(|(&y, &p)| {
            let p = clip_prob(p);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(sum / labels.len() as f64)
}

pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64) -> f64 {
    let score = |g: f64, h: f64| {
        let d = h + lambda;
        if d > 0.0 {
            g * g / d
        } else {
            0.0
        }
    };
    0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr))
}

pub fn leaf_value(g: f64, h: f64, lambda: f64) -> f64 {
    let d = h + lambda;
    if d > 0.0 {
        -g / d
    } else {
        0.0
    }
}

/// How raw feature values map to bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BinMapper {
    /// Sparse 0/1 features: bin 0 = absent, bin 1 = present.
    Binary { n_features: usize },
    /// Numeric features: per-feature ascending upper bounds. A value `x` falls
    /// in bin `#{c in cuts : c < x}`.
    Numeric { cuts: Vec<Vec<f64>> },
}

impl BinMapper {
    pub fn n_features(&self) -> usize {
        match self {
            BinMapper::Binary { n_features } => *n_features,
            BinMapper::Numeric { cuts } => cuts.len(),
        }
    }

    pub fn n_bins(&self, feature: usize) -> usize {
        match self {
            BinMapper::Binary { .. } => 2,
            BinMapper::Numeric { cuts } => cuts[feature].len() + 1,
        }
    }

    /// Equal-frequency cut points, at most `max_bins` bins per feature.
    pub fn fit_numeric(columns: &[Vec<f64>], max_bins: usize) -> Self {
        let max_bins = max_bins.clamp(2, u16::MAX as usize);
        let cuts = columns
            .iter()
            .map(|col| {
                let mut v: Vec<f64> = col.iter().copied().filter(|x| !x.is_nan()).collect();
                v.sort_by(f64::total_cmp);
                let mut distinct = v.clone();
                distinct.dedup();
                if distinct.len() <= max_bins {
                    distinct.pop();
                    return distinct;
                }
                let n = v.len();
                let mut cuts: Vec<f64> = (1..max_bins).map(|k| v[k * n / max_bins - 1]).collect();
                cuts.dedup();
                let top = *v.last().expect("non-empty");
                cuts.retain(|&c| c < top);
                cuts
            })
            .collect();
        BinMapper::Numeric { cuts }
    }

    pub fn bin_numeric(&self, feature: usize, x: f64) -> u16 {
        match self {
            BinMapper::Binary { .. } => u16::from(x != 0.0),
            BinMapper::Numeric { cuts } => cuts[feature].partition_point(|&c| c < x) as u16,
        }
    }
}

#[derive(Debug, Clone)]
enum BinStorage {
    Sparse(Vec<Vec<u32>>),
    /// Column-major bin ids.
    Dense(Vec<Vec<u16>>),
}

/// Training rows in bin space.
#[derive(Debug, Clone)]
pub struct BinnedMatrix {
    n_rows: usize,
    mapper: BinMapper,
    storage: BinStorage,
}

impl BinnedMatrix {
    pub fn from_sparse(data: &LabeledDataset) -> Self {
        Self {
            n_rows: data.len(),
            mapper: BinMapper::Binary {
                n_features: data.n_features(),
            },
            storage: BinStorage::Sparse(data.features.rows().to_vec()),
        }
    }

    /// Bins row-major numeric data with equal-frequency cuts.
    pub fn from_numeric(rows: &[Vec<f64>], max_bins: usize) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::invalid("numeric rows have unequal lengths"));
        }
        let columns: Vec<Vec<f64>> = (0..p).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        let mapper = BinMapper::fit_numeric(&columns, max_bins);
        let bins = columns
            .iter()
            .enumerate()
            .map(|(j, col)| col.iter().map(|&x| mapper.bin_numeric(j, x)).collect())
            .collect();
        Ok(Self {
            n_rows: rows.len(),
            mapper,
            storage: BinStorage::Dense(bins),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.mapper.n_features()
    }

    pub fn mapper(&self) -> &BinMapper {
        &self.mapper
    }

    #[inline]
    pub fn bin(&self, row: usize, feature: usize) -> u16 {
        match &self.storage {
            BinStorage::Sparse(rows) => u16::from(row_contains(&rows[row], feature)),
            BinStorage::Dense(cols) => cols[feature][row],
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BinStat {
    pub g: f64,
    pub h: f64,
    pub count: usize,
}

impl BinStat {
    fn add(&mut self, gh: GradHess) {
        self.g += gh.g;
        self.h += gh.h;
        self.count += 1;
    }
}

/// Per-feature, per-bin gradient statistics of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureHistogram {
    pub totals: BinStat,
    pub bins: Vec<Vec<BinStat>>,
}

/// Sums `(g, h, count)` per feature and bin over `samples`. Every feature's
/// bins are summed in sample order, so the result does not depend on how the
/// work is scheduled.
pub fn accumulate_histograms(
    binned: &BinnedMatrix,
    samples: &[usize],
    gh: &[GradHess],
) -> FeatureHistogram {
    let mut totals = BinStat::default();
    for &s in samples {
        totals.add(gh[s]);
    }
    let p = binned.n_features();
    let bins = match &binned.storage {
        BinStorage::Sparse(rows) => {
            let mut present = vec![BinStat::default(); p];
            for &s in samples {
                for &j in &rows[s] {
                    present[j as usize].add(gh[s]);
                }
            }
            present
                .into_iter()
                .map(|b1| {
                    let b0 = BinStat {
                        g: totals.g - b1.g,
                        h: totals.h - b1.h,
                        count: totals.count - b1.count,
                    };
                    vec![b0, b1]
                })
                .collect()
        }
        BinStorage::Dense(cols) => cols
            .iter()
            .enumerate()
            .map(|(j, col)| {
                let mut hist = vec![BinStat::default(); binned.mapper.n_bins(j)];
                for &s in samples {
                    hist[col[s] as usize].add(gh[s]);
                }
                hist
            })
            .collect(),
    };
    FeatureHistogram { totals, bins }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GbdtNode {
    /// Samples with `bin <= threshold` go left.
    Split {
        feature: u32,
        threshold: u16,
        left: u32,
        right: u32,
        gain: f64,
    },
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<GbdtNode>,
}

impl RegressionTree {
    pub fn predict_with(&self, bin_of: impl Fn(usize) -> u16) -> f64 {
        let mut at = 0usize;
        loop {
            match self.nodes[at] {
                GbdtNode::Leaf { value } => return value,
                GbdtNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    at = if bin_of(feature as usize) <= threshold {
                        left as usize
                    } else {
                        right as usize
                    };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, GbdtNode::Leaf { .. }))
            .count()
    }

    fn scale_leaves(&mut self, factor: f64) {
        for n in &mut self.nodes {
            if let GbdtNode::Leaf { value } = n {
                *value *= factor;
            }
        }
    }
}

/// One accepted split, in the order the leaf-wise grower made them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRecord {
    pub node: u32,
    pub feature: usize,
    pub threshold: u16,
    pub gain: f64,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: u16,
    gain: f64,
}

struct OpenLeaf {
    node: u32,
    samples: Vec<usize>,
    g: f64,
    h: f64,
    best: Option<Candidate>,
}

#[derive(Debug, Clone, Copy)]
pub struct GrowParams {
    pub max_leaves: usize,
    pub lambda: f64,
    pub min_samples_leaf: usize,
}

fn best_candidate(
    hist: &FeatureHistogram,
    features: Option<&[usize]>,
    params: &GrowParams,
) -> Option<Candidate> {
    let t = hist.totals;
    let mut best: Option<Candidate> = None;
    let mut consider = |j: usize| {
        let bins = &hist.bins[j];
        let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0usize);
        for (b, stat) in bins.iter().enumerate().take(bins.len() - 1) {
            gl += stat.g;
            hl += stat.h;
            nl += stat.count;
            let nr = t.count - nl;
            if nl < params.min_samples_leaf || nr < params.min_samples_leaf {
                continue;
            }
            let gain = split_gain(gl, hl, t.g - gl, t.h - hl, params.lambda);
            if best.is_none_or(|c| gain > c.gain) {
                best = Some(Candidate {
                    feature: j,
                    threshold: b as u16,
                    gain,
                });
            }
        }
    };
    match features {
        Some(fs) => fs.iter().for_each(|&j| consider(j)),
        None => (0..hist.bins.len()).for_each(consider),
    }
    best.filter(|c| c.gain > 0.0)
}

/// Grows one tree leaf-wise: repeatedly splits the open leaf whose best split
/// has the highest gain (ties go to the earliest-created leaf, then the lowest
/// feature and threshold) until `max_leaves` leaves exist or no split has
/// positive gain.
pub fn grow_leafwise(
    binned: &BinnedMatrix,
    samples: &[usize],
    gh: &[GradHess],
    features: Option<&[usize]>,
    params: &GrowParams,
) -> (RegressionTree, Vec<SplitRecord>) {
    let open_leaf = |node: u32, samples: Vec<usize>| {
        let hist = accumulate_histograms(binned, &samples, gh);
        let best = if samples.len() >= 2 * params.min_samples_leaf.max(1) {
            best_candidate(&hist, features, params)
        } else {
            None
        };
        OpenLeaf {
            node,
            samples,
            g: hist.totals.g,
            h: hist.totals.h,
            best,
        }
    };

    let mut nodes = vec![GbdtNode::Leaf { value: 0.0 }];
    let mut leaves = vec![open_leaf(0, samples.to_vec())];
    let mut log = Vec::new();
    while leaves.len() < params.max_leaves {
        let mut pick: Option<(usize, f64)> = None;
        for (i, leaf) in leaves.iter().enumerate() {
            if let Some(c) = leaf.best {
                if pick.is_none_or(|(_, g)| c.gain > g) {
                    pick = Some((i, c.gain));
                }
            }
        }
        let Some((i, _)) = pick else { break };
        let leaf = leaves.remove(i);
        let c = leaf.best.expect("picked leaves have a split");
        let (left, right): (Vec<usize>, Vec<usize>) = leaf
            .samples
            .iter()
            .partition(|&&s| binned.bin(s, c.feature) <= c.threshold);
        let (l_id, r_id) = (nodes.len() as u32, nodes.len() as u32 + 1);
        nodes.push(GbdtNode::Leaf { value: 0.0 });
        nodes.push(GbdtNode::Leaf { value: 0.0 });
        nodes[leaf.node as usize] = GbdtNode::Split {
            feature: c.feature as u32,
            threshold: c.threshold,
            left: l_id,
            right: r_id,
            gain: c.gain,
        };
        log.push(SplitRecord {
            node: leaf.node,
            feature: c.feature,
            threshold: c.threshold,
            gain: c.gain,
        });
        // Children take the parent's slot so creation order stays the
        // tie-break order.
        leaves.insert(i, open_leaf(r_id, right));
        leaves.insert(i, open_leaf(l_id, left));
    }
    for leaf in &leaves {
        nodes[leaf.node as usize] = GbdtNode::Leaf {
            value: leaf_value(leaf.g, leaf.h, params.lambda),
        };
    }
    (RegressionTree { nodes }, log)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedEnsemble {
    pub trees: Vec<RegressionTree>,
    pub learning_rate: f64,
    pub base_score: f64,
    pub lambda: f64,
    pub max_leaves: usize,
    pub mapper: BinMapper,
    /// Training log-loss before the first round and after each round.
    pub loss_trace: Vec<f64>,
    pub fingerprint: Fingerprint,
}

/// Largest number of halvings applied to a tree whose full step would raise
/// the training loss.
const MAX_STEP_HALVINGS: usize = 40;

/// Boosts on pre-binned data. `base_score` starts at the logit of the positive
/// rate; each round adds `learning_rate * f_t` to the raw scores.
pub fn fit_boosted_binned(
    binned: &BinnedMatrix,
    labels: &[u8],
    params: &GbdtParams,
    plan: &RngPlan,
    fingerprint: Fingerprint,
) -> Result<BoostedEnsemble> {
    params.validate()?;
    let n = binned.n_rows();
    if labels.len() != n {
        return Err(Error::invalid("label count does not match rows"));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    if pos == 0 || pos == n {
        return Err(Error::SingleClass {
            label: u8::from(pos == n),
        });
    }
    let base_score = logit(pos as f64 / n as f64);
    let grow = GrowParams {
        max_leaves: params.max_leaves,
        lambda: params.lambda,
        min_samples_leaf: params.min_samples_leaf,
    };
    let p = binned.n_features();
    let mut raw = vec![base_score; n];
    let mut probs: Vec<f64> = raw.iter().map(|&r| sigmoid(r)).collect();
    let mut loss = logloss(labels, &probs)?;
    let mut loss_trace = vec![loss];
    let mut trees = Vec::with_capacity(params.n_rounds);
    let all_rows: Vec<usize> = (0..n).collect();

    for t in 0..params.n_rounds {
        let gh: Vec<GradHess> = probs
            .iter()
            .zip(labels)
            .map(|(&p, &y)| grad_hess(p, y))
            .collect();
        let mut rng = plan.rng("round", t as u64);
        let rows: Vec<usize> = if params.row_subsample < 1.0 {
            let k = ((n as f64 * params.row_subsample).ceil() as usize).max(1);
            let mut r = index::sample(&mut rng, n, k).into_vec();
            r.sort_unstable();
            r
        } else {
            all_rows.clone()
        };
        let features: Option<Vec<usize>> = (params.feature_subsample < 1.0).then(|| {
            let k = ((p as f64 * params.feature_subsample).ceil() as usize).max(1);
            let mut f = index::sample(&mut rng, p, k).into_vec();
            f.sort_unstable();
            f
        });
        let (mut tree, _) = grow_leafwise(binned, &rows, &gh, features.as_deref(), &grow);

        let step: Vec<f64> = (0..n)
            .map(|i| tree.predict_with(|j| binned.bin(i, j)))
            .collect();
        // A Newton step can overshoot on the logistic loss; halve the tree
        // until the training loss does not increase.
        let mut factor = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_STEP_HALVINGS {
            let cand: Vec<f64> = raw
                .iter()
                .zip(&step)
                .map(|(&r, &s)| r + params.learning_rate * factor * s)
                .collect();
            let cand_probs: Vec<f64> = cand.iter().map(|&r| sigmoid(r)).collect();
            let cand_loss = logloss(labels, &cand_probs)?;
            if cand_loss <= loss {
                accepted = Some((cand, cand_probs, cand_loss));
                break;
            }
            factor *= 0.5;
        }
        match accepted {
            Some((r, pr, l)) => {
                if factor != 1.0 {
                    tree.scale_leaves(factor);
                }
                raw = r;
                probs = pr;
                loss = l;
            }
            None => tree.scale_leaves(0.0),
        }
        loss_trace.push(loss);
        trees.push(tree);
    }
    Ok(BoostedEnsemble {
        trees,
        learning_rate: params.learning_rate,
        base_score,
        lambda: params.lambda,
        max_leaves: params.max_leaves,
        mapper: binned.mapper().clone(),
        loss_trace,
        fingerprint,
    })
}

pub fn fit_boosted(
    data: &LabeledDataset,
    params: &GbdtParams,
    plan: &RngPlan,
) -> Result<BoostedEnsemble> {
    data.require_both_classes()?;
    let binned = BinnedMatrix::from_sparse(data);
    fit_boosted_binned(&binned, &data.labels, params, plan, data.fingerprint.clone())
}

impl BoostedEnsemble {
    fn raw_with(&self, bin_of: impl Fn(usize) -> u16 + Copy) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_with(bin_of)).sum();
        self.base_score + self.learning_rate * sum
    }

    /// Raw log-odds score for a sparse binary row.
    pub fn raw_score(&self, row: &[u32]) -> f64 {
        self.raw_with(|j| u16::from(row_contains(row, j)))
    }

    pub fn predict_proba(&self, row: &[u32]) -> f64 {
        sigmoid(self.raw_score(row))
    }

    pub fn predict_proba_numeric(&self, row: &[f64]) -> f64 {
        sigmoid(self.raw_with(|j| self.mapper.bin_numeric(j, row[j])))
    }

    pub fn predict_dataset(&self, data: &LabeledDataset) -> Vec<f64> {
        data.features
            .rows()
            .iter()
            .map(|r| self.predict_proba(r))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grad_hess_examples() {
        assert_eq!(grad_hess(0.5, 1), GradHess { g: -0.5, h: 0.25 });
        assert_eq!(grad_hess(0.5, 0), GradHess { g: 0.5, h: 0.25 });
        let gh = grad_hess(0.9, 1);
        assert!((gh.g + 0.1).abs() < 1e-15 && (gh.h - 0.09).abs() < 1e-15);
        let clipped = grad_hess(1.0, 1);
        assert!(clipped.h > 0.0 && clipped.g < 0.0);
    }

    #[test]
    fn logloss_examples() {
        assert!(logloss(&[1], &[1.0 - 1e-15]).unwrap() < 1e-14);
        assert!((logloss(&[1, 0], &[0.5, 0.5]).unwrap() - 2f64.ln()).abs() < 1e-15);
        let v = logloss(&[1, 0, 1], &[0.8, 0.3, 0.6]).unwrap();
        assert!((v - 0.363_548_039_672_977_6).abs() < 1e-12, "{v}");
        assert!(logloss(&[1], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn split_gain_examples() {
        assert!((split_gain(2.0, 1.0, -2.0, 1.0, 0.0) - 4.0).abs() < 1e-15);
        assert!(split_gain(1.5, 2.0, 1.5, 2.0, 0.0).abs() < 1e-15);
    }

    #[test]
    fn sigmoid_examples() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(50.0) - 1.0).abs() < 1e-15);
        assert!((sigmoid(1.5) - 0.817_574_476_193_643_7).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }

    fn four_sample_binned() -> BinnedMatrix {
        let d = LabeledDataset::from_rows(2, vec![vec![0], vec![0], vec![], vec![]], vec![1, 1, 0, 0])
            .unwrap();
        BinnedMatrix::from_sparse(&d)
    }

    #[test]
    fn histogram_hand_aggregation() {
        let b = four_sample_binned();
        let gh: Vec<GradHess> = [1.0, 1.0, -1.0, -1.0]
            .iter()
            .map(|&g| GradHess { g, h: 0.25 })
            .collect();
        let hist = accumulate_histograms(&b, &[0, 1, 2, 3], &gh);
        assert_eq!(hist.bins[0][1].g, 2.0);
        assert_eq!(hist.bins[0][0].g, -2.0);
        assert_eq!(hist.bins[0][1].count, 2);
        // Feature 1 never set: its present bin is empty.
        assert_eq!(hist.bins[1][1], BinStat::default());
        assert_eq!(hist.bins[1][0].count, 4);
    }

    #[test]
    fn stump_when_max_leaves_is_one() {
        let b = four_sample_binned();
        let gh: Vec<GradHess> = [0.3, -0.2, 0.4, 0.1]
            .iter()
            .map(|&g| GradHess { g, h: 0.2 })
            .collect();
        let params = GrowParams {
            max_leaves: 1,
            lambda: 1.0,
            min_samples_leaf: 1,
        };
        let (tree, log) = grow_leafwise(&b, &[0, 1, 2, 3], &gh, None, &params);
        assert!(log.is_empty());
        let want = -(0.3 - 0.2 + 0.4 + 0.1) / (0.8 + 1.0);
        assert_eq!(tree.nodes, vec![GbdtNode::Leaf { value: want }]);
    }

    #[test]
    fn separating_feature_is_chosen_first() {
        let d = LabeledDataset::from_rows(
            3,
            vec![vec![0, 2], vec![0], vec![0, 1], vec![1], vec![2], vec![]],
            vec![1, 1, 1, 0, 0, 0],
        )
        .unwrap();
        let b = BinnedMatrix::from_sparse(&d);
        let gh: Vec<GradHess> = d.labels.iter().map(|&y| grad_hess(0.5, y)).collect();
        let params = GrowParams {
            max_leaves: 4,
            lambda: 1.0,
            min_samples_leaf: 1,
        };
        let (_, log) = grow_leafwise(&b, &(0..6).collect::<Vec<_>>(), &gh, None, &params);
        assert_eq!(log[0].feature, 0);
    }

    #[test]
    fn rejects_single_class_and_bad_params() {
        let d = LabeledDataset::from_rows(1, vec![vec![0], vec![]], vec![0, 0]).unwrap();
        assert!(fit_boosted(&d, &GbdtParams::default(), &RngPlan::new(0)).is_err());
        let d = LabeledDataset::from_rows(1, vec![vec![0], vec![]], vec![1, 0]).unwrap();
        let bad = GbdtParams {
            learning_rate: 0.0,
            ..Default::default()
        };
        assert!(fit_boosted(&d, &bad, &RngPlan::new(0)).is_err());
    }

    #[test]
    fn constant_features_keep_base_rate() {
        let rows = vec![vec![0]; 10];
        let labels = vec![1, 1, 1, 0, 0, 0, 0, 0, 0, 0];
        let d = LabeledDataset::from_rows(1, rows, labels).unwrap();
        let e = fit_boosted(&d, &GbdtParams::default(), &RngPlan::new(0)).unwrap();
        assert!((e.predict_proba(&[0]) - 0.3).abs() < 1e-12);
        let first = e.loss_trace[0];
        assert!(e.loss_trace.iter().all(|l| (l - first).abs() < 1e-12));
    }

    #[test]
    fn single_stump_round_predicts_base_rate() {
        let d = LabeledDataset::from_rows(2, vec![vec![0], vec![1], vec![], vec![0, 1]], vec![1, 0, 0, 0])
            .unwrap();
        let params = GbdtParams {
            n_rounds: 1,
            learning_rate: 1.0,
            max_leaves: 1,
            ..Default::default()
        };
        let e = fit_boosted(&d, &params, &RngPlan::new(0)).unwrap();
        for row in d.features.rows() {
            assert!((e.predict_proba(row) - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn separable_loss_decreases() {
        let rows: Vec<Vec<u32>> = (0..40).map(|i| if i % 2 == 0 { vec![0] } else { vec![] }).collect();
        let labels = (0..40).map(|i| u8::from(i % 2 == 0)).collect();
        let d = LabeledDataset::from_rows(1, rows, labels).unwrap();
        let e = fit_boosted(&d, &GbdtParams::default(), &RngPlan::new(0)).unwrap();
        for w in e.loss_trace[..10].windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn numeric_binning() {
        let mapper = BinMapper::fit_numeric(&[vec![3.0, 1.0, 2.0, 2.0]], 256);
        assert_eq!(mapper, BinMapper::Numeric { cuts: vec![vec![1.0, 2.0]] });
        assert_eq!(mapper.bin_numeric(0, 0.5), 0);
        assert_eq!(mapper.bin_numeric(0, 2.0), 1);
        assert_eq!(mapper.bin_numeric(0, 9.0), 2);
        let many: Vec<f64> = (0..1000).map(f64::from).collect();
        let mapper = BinMapper::fit_numeric(&[many], 16);
        assert_eq!(mapper.n_bins(0), 16);
    }
}
