//! ROC/AUC, thresholded confusion metrics and stratified percentile bootstrap
//! confidence intervals.

use std::io::Write;
use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngPlan;

/// Scores at or above this are predicted positive.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Scores `>= threshold` are called positive at this point. The first
    /// point uses `+inf`.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

fn check_inputs(labels: &[u8], scores: &[f64]) -> Result<(usize, usize)> {
    if labels.len() != scores.len() {
        return Err(Error::invalid(format!(
            "{} labels but {} scores",
            labels.len(),
            scores.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("scores must be finite"));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::invalid(format!("label {bad} is not binary")));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass {
            label: u8::from(pos > 0),
        });
    }
    Ok((pos, neg))
}

/// Cumulative (tp, fp, threshold) after each group of tied scores, highest
/// score first.
fn tie_groups(labels: &[u8], scores: &[f64]) -> Vec<(usize, usize, f64)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push((tp, fp, s));
    }
    out
}

/// ROC curve with one point per distinct score, descending.
pub fn roc_points(labels: &[u8], scores: &[f64]) -> Result<RocCurve> {
    let (pos, neg) = check_inputs(labels, scores)?;
    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    points.extend(tie_groups(labels, scores).into_iter().map(|(tp, fp, s)| RocPoint {
        fpr: fp as f64 / neg as f64,
        tpr: tp as f64 / pos as f64,
        threshold: s,
    }));
    Ok(RocCurve { points })
}

/// Trapezoidal area under the ROC curve. Tied scores contribute a diagonal
/// segment, which is the Mann–Whitney convention of counting ties as 1/2.
pub fn auc(labels: &[u8], scores: &[f64]) -> Result<f64> {
    let (pos, neg) = check_inputs(labels, scores)?;
    // Twice the area in units of (1/pos)(1/neg): integer until the final divide.
    let mut twice = 0u128;
    let (mut tp_prev, mut fp_prev) = (0u128, 0u128);
    for (tp, fp, _) in tie_groups(labels, scores) {
        let (tp, fp) = (tp as u128, fp as u128);
        twice += (fp - fp_prev) * (tp + tp_prev);
        tp_prev = tp;
        fp_prev = fp;
    }
    Ok(twice as f64 / (2.0 * pos as f64 * neg as f64))
}

/// Brute-force pair count `P(s+ > s-) + P(s+ = s-)/2`, `O(pos * neg)`.
pub fn auc_pairwise(labels: &[u8], scores: &[f64]) -> Result<f64> {
    let (pos, neg) = check_inputs(labels, scores)?;
    let mut twice = 0u64;
    let class = |c: u8| labels.iter().zip(scores).filter(move |(&y, _)| y == c).map(|(_, &s)| s);
    for si in class(1) {
        for sj in class(0) {
            twice += match si.partial_cmp(&sj).expect("finite scores") {
                std::cmp::Ordering::Greater => 2,
                std::cmp::Ordering::Equal => 1,
                std::cmp::Ordering::Less => 0,
            };
        }
    }
    Ok(twice as f64 / (2.0 * pos as f64 * neg as f64))
}

pub fn confusion_at(labels: &[u8], scores: &[f64], threshold: f64) -> Result<ConfusionCounts> {
    if labels.len() != scores.len() {
        return Err(Error::invalid("labels and scores differ in length"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("scores must be finite"));
    }
    let mut c = ConfusionCounts::default();
    for (&y, &s) in labels.iter().zip(scores) {
        match (y, s >= threshold) {
            (1, true) => c.tp += 1,
            (1, false) => c.fn_ += 1,
            (0, true) => c.fp += 1,
            (0, false) => c.tn += 1,
            (other, _) => return Err(Error::invalid(format!("label {other} is not binary"))),
        }
    }
    Ok(c)
}

/// Threshold metrics; `None` marks a 0/0 ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub ppv: Option<f64>,
    pub npv: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn compute_metrics(c: &ConfusionCounts) -> Result<ThresholdMetrics> {
    if c.total() == 0 {
        return Err(Error::invalid("confusion counts are all zero"));
    }
    let sensitivity = ratio(c.tp, c.tp + c.fn_);
    let ppv = ratio(c.tp, c.tp + c.fp);
    let f1 = match (ppv, sensitivity) {
        (Some(p), Some(s)) if p + s > 0.0 => Some(2.0 * p * s / (p + s)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    Ok(ThresholdMetrics {
        sensitivity,
        specificity: ratio(c.tn, c.tn + c.fp),
        ppv,
        npv: ratio(c.tn, c.tn + c.fn_),
        f1,
        accuracy: ratio(c.tp + c.tn, c.total()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Auc,
    Sensitivity,
    Specificity,
    Ppv,
    Npv,
    F1,
    Accuracy,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::Auc,
        Metric::Sensitivity,
        Metric::Specificity,
        Metric::Ppv,
        Metric::Npv,
        Metric::F1,
        Metric::Accuracy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Auc => "auc",
            Metric::Sensitivity => "sensitivity",
            Metric::Specificity => "specificity",
            Metric::Ppv => "ppv",
            Metric::Npv => "npv",
            Metric::F1 => "f1",
            Metric::Accuracy => "accuracy",
        }
    }

    /// Value on one sample; `Ok(None)` when undefined (0/0).
    pub fn evaluate(self, labels: &[u8], scores: &[f64], threshold: f64) -> Result<Option<f64>> {
        if self == Metric::Auc {
            return auc(labels, scores).map(Some);
        }
        let m = compute_metrics(&confusion_at(labels, scores, threshold)?)?;
        Ok(match self {
            Metric::Auc => unreachable!(),
            Metric::Sensitivity => m.sensitivity,
            Metric::Specificity => m.specificity,
            Metric::Ppv => m.ppv,
            Metric::Npv => m.npv,
            Metric::F1 => m.f1,
            Metric::Accuracy => m.accuracy,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapOptions {
    pub resamples: usize,
    pub level: f64,
    pub threshold: f64,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            resamples: 1000,
            level: 0.95,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapInterval {
    pub lower: f64,
    pub upper: f64,
    /// Mean of the resampled statistics.
    pub mean: f64,
    /// Resamples discarded because the metric was undefined on them.
    pub redrawn: usize,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Stratified percentile bootstrap: each resample draws the positives and the
/// negatives with replacement from their own class, so class counts match the
/// original sample. Resamples on which the metric is undefined are redrawn, up
/// to `10 * resamples` attempts in total.
pub fn bootstrap_ci(
    labels: &[u8],
    scores: &[f64],
    metric: Metric,
    opts: &BootstrapOptions,
    rng: &mut crate::rng::Rng,
) -> Result<BootstrapInterval> {
    check_inputs(labels, scores)?;
    if labels.len() < 2 || opts.resamples == 0 {
        return Err(Error::invalid("bootstrap needs n >= 2 and at least one resample"));
    }
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(Error::invalid("confidence level must lie in (0, 1)"));
    }
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0).collect();
    let cap = 10 * opts.resamples;
    let mut values = Vec::with_capacity(opts.resamples);
    let mut attempts = 0;
    let mut ys = Vec::with_capacity(labels.len());
    let mut ss = Vec::with_capacity(labels.len());
    while values.len() < opts.resamples {
        if attempts == cap {
            return Err(Error::NotEnough(format!(
                "{} undefined after {attempts} bootstrap draws ({} usable)",
                metric.name(),
                values.len()
            )));
        }
        attempts += 1;
        ys.clear();
        ss.clear();
        for class in [&pos, &neg] {
            for _ in 0..class.len() {
                let i = class[rng.random_range(0..class.len())];
                ys.push(labels[i]);
                ss.push(scores[i]);
            }
        }
        if let Some(v) = metric.evaluate(&ys, &ss, opts.threshold)? {
            values.push(v);
        }
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.sort_by(f64::total_cmp);
    let alpha = (1.0 - opts.level) / 2.0;
    Ok(BootstrapInterval {
        lower: quantile(&values, alpha),
        upper: quantile(&values, 1.0 - alpha),
        mean,
        redrawn: attempts - values.len(),
    })
}

/// Point estimate with its interval. The interval is widened if needed so
/// that `lower <= point <= upper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub point: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub bootstrap_mean: Option<f64>,
}

impl Estimate {
    const UNDEFINED: Estimate = Estimate {
        point: None,
        lower: None,
        upper: None,
        bootstrap_mean: None,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n: usize,
    pub positives: usize,
    pub threshold: f64,
    pub confusion: ConfusionCounts,
    pub auc: Estimate,
    pub sensitivity: Estimate,
    pub specificity: Estimate,
    pub ppv: Estimate,
    pub npv: Estimate,
    pub f1: Estimate,
    pub accuracy: Estimate,
}

impl MetricReport {
    pub fn get(&self, m: Metric) -> &Estimate {
        match m {
            Metric::Auc => &self.auc,
            Metric::Sensitivity => &self.sensitivity,
            Metric::Specificity => &self.specificity,
            Metric::Ppv => &self.ppv,
            Metric::Npv => &self.npv,
            Metric::F1 => &self.f1,
            Metric::Accuracy => &self.accuracy,
        }
    }
}

/// All seven metrics with bootstrap intervals. Metric `k` draws its resamples
/// from `plan.rng("bootstrap", k)`, so the report does not depend on how the
/// metrics are scheduled across threads.
pub fn metric_report(
    labels: &[u8],
    scores: &[f64],
    opts: &BootstrapOptions,
    plan: &RngPlan,
) -> Result<MetricReport> {
    check_inputs(labels, scores)?;
    let confusion = confusion_at(labels, scores, opts.threshold)?;
    let estimates = Metric::ALL
        .par_iter()
        .enumerate()
        .map(|(k, &m)| {
            let Some(point) = m.evaluate(labels, scores, opts.threshold)? else {
                return Ok(Estimate::UNDEFINED);
            };
            let ci = bootstrap_ci(labels, scores, m, opts, &mut plan.rng("bootstrap", k as u64))?;
            Ok(Estimate {
                point: Some(point),
                lower: Some(ci.lower.min(point)),
                upper: Some(ci.upper.max(point)),
                bootstrap_mean: Some(ci.mean),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let [auc, sensitivity, specificity, ppv, npv, f1, accuracy] = estimates[..] else {
        unreachable!("seven metrics")
    };
    Ok(MetricReport {
        n: labels.len(),
        positives: labels.iter().filter(|&&y| y == 1).count(),
        threshold: opts.threshold,
        confusion,
        auc,
        sensitivity,
        specificity,
        ppv,
        npv,
        f1,
        accuracy,
    })
}

/// Writes `fpr,tpr,threshold` rows.
pub fn write_roc_csv(curve: &RocCurve, path: &Path) -> Result<()> {
    let mut out = String::from("fpr,tpr,threshold\n");
    for p in &curve.points {
        out.push_str(&format!("{},{},{}\n", p.fpr, p.tpr, p.threshold));
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}
