//! Out-of-fold stacking: base-model probabilities from K-fold cross-fitting
//! become a three-column meta-feature matrix, on which an L2-penalized
//! logistic regression is fitted by Newton's method.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Fingerprint, LabeledDataset};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, Forest, ForestParams};
use crate::gbdt::{fit_boosted, sigmoid, BoostedEnsemble, GbdtParams};
use crate::mlp::{fit_mlp, Mlp, MlpParams};
use crate::rng::RngPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseModelKind {
    RandomForest,
    Gbdt,
    Mlp,
}

impl BaseModelKind {
    /// Column order of the meta-feature matrix.
    pub const ALL: [BaseModelKind; 3] = [
        BaseModelKind::RandomForest,
        BaseModelKind::Gbdt,
        BaseModelKind::Mlp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaseModelKind::RandomForest => "rf",
            BaseModelKind::Gbdt => "lgbm",
            BaseModelKind::Mlp => "dnn",
        }
    }
}

/// Hyperparameters of the three base learners.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpecs {
    pub forest: ForestParams,
    pub gbdt: GbdtParams,
    pub mlp: MlpParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FittedBase {
    RandomForest(Forest),
    Gbdt(BoostedEnsemble),
    Mlp(Mlp),
}

impl FittedBase {
    pub fn kind(&self) -> BaseModelKind {
        match self {
            FittedBase::RandomForest(_) => BaseModelKind::RandomForest,
            FittedBase::Gbdt(_) => BaseModelKind::Gbdt,
            FittedBase::Mlp(_) => BaseModelKind::Mlp,
        }
    }

    pub fn fingerprint(&self) -> &Fingerprint {
        match self {
            FittedBase::RandomForest(m) => &m.fingerprint,
            FittedBase::Gbdt(m) => &m.fingerprint,
            FittedBase::Mlp(m) => &m.fingerprint,
        }
    }

    pub fn predict(&self, data: &LabeledDataset) -> Result<Vec<f64>> {
        match self {
            FittedBase::RandomForest(m) => Ok(m.predict_dataset(data)),
            FittedBase::Gbdt(m) => Ok(m.predict_dataset(data)),
            FittedBase::Mlp(m) => m.predict_dataset(data),
        }
    }
}

pub fn fit_base(
    kind: BaseModelKind,
    specs: &ModelSpecs,
    data: &LabeledDataset,
    plan: &RngPlan,
) -> Result<FittedBase> {
    Ok(match kind {
        BaseModelKind::RandomForest => FittedBase::RandomForest(fit_forest(data, &specs.forest, plan)?),
        BaseModelKind::Gbdt => FittedBase::Gbdt(fit_boosted(data, &specs.gbdt, plan)?),
        BaseModelKind::Mlp => FittedBase::Mlp(fit_mlp(data, &specs.mlp, plan)?.net),
    })
}

/// Anything that can be trained on one dataset and score another.
pub trait Learner: Sync {
    fn name(&self) -> &str;
    fn fit_predict(&self, train: &LabeledDataset, eval: &LabeledDataset, plan: &RngPlan) -> Result<Vec<f64>>;
}

pub struct BaseLearner<'a> {
    pub kind: BaseModelKind,
    pub specs: &'a ModelSpecs,
}

impl Learner for BaseLearner<'_> {
    fn name(&self) -> &str {
        self.kind.name()
    }

    fn fit_predict(&self, train: &LabeledDataset, eval: &LabeledDataset, plan: &RngPlan) -> Result<Vec<f64>> {
        fit_base(self.kind, self.specs, train, plan)?.predict(eval)
    }
}

fn oof_plan(plan: &RngPlan, learner: &str, fold: usize) -> RngPlan {
    plan.child(&format!("oof/{learner}"), fold as u64)
}

fn fold_split(folds: &[usize], fold: usize) -> (Vec<usize>, Vec<usize>) {
    (0..folds.len()).partition(|&i| folds[i] != fold)
}

/// Out-of-fold predictions, one column per learner. The `(learner, fold)` jobs
/// run in parallel; each draws its randomness from a plan derived from the
/// learner name and fold id, and the columns are assembled by job key, so the
/// result does not depend on scheduling.
pub fn oof_predictions(
    train: &LabeledDataset,
    folds: &[usize],
    k: usize,
    learners: &[&dyn Learner],
    plan: &RngPlan,
) -> Result<Vec<Vec<f64>>> {
    if folds.len() != train.len() {
        return Err(Error::invalid("one fold id per training sample required"));
    }
    let mut sizes = vec![0usize; k];
    for &f in folds {
        *sizes.get_mut(f).ok_or_else(|| Error::invalid(format!("fold id {f} outside [0, {k})")))? += 1;
    }
    if sizes.contains(&0) {
        return Err(Error::invalid("every fold needs at least one sample"));
    }
    let jobs: Vec<(usize, usize)> = (0..learners.len())
        .flat_map(|m| (0..k).map(move |f| (m, f)))
        .collect();
    let preds = jobs
        .par_iter()
        .map(|&(m, f)| {
            let (fit_idx, eval_idx) = fold_split(folds, f);
            let fit = train.subset(&fit_idx)?;
            let eval = train.subset(&eval_idx)?;
            let learner = learners[m];
            let p = learner.fit_predict(&fit, &eval, &oof_plan(plan, learner.name(), f))?;
            if p.len() != eval_idx.len() {
                return Err(Error::invalid(format!(
                    "{} returned {} predictions for {} samples",
                    learner.name(),
                    p.len(),
                    eval_idx.len()
                )));
            }
            Ok((eval_idx, p))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut columns = vec![vec![f64::NAN; train.len()]; learners.len()];
    for (&(m, _), (idx, p)) in jobs.iter().zip(preds) {
        for (i, v) in idx.into_iter().zip(p) {
            columns[m][i] = v;
        }
    }
    Ok(columns)
}

/// One row `[p_rf, p_lgbm, p_dnn]` of out-of-fold probabilities per training
/// sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaFeatureMatrix {
    pub rows: Vec<[f64; 3]>,
    pub labels: Vec<u8>,
    pub sample_ids: Vec<String>,
}

impl MetaFeatureMatrix {
    pub fn from_columns(columns: &[Vec<f64>], labels: Vec<u8>, sample_ids: Vec<String>) -> Result<Self> {
        let [a, b, c] = columns else {
            return Err(Error::invalid(format!(
                "meta features need exactly 3 columns, got {}",
                columns.len()
            )));
        };
        let n = labels.len();
        if [a, b, c].iter().any(|col| col.len() != n) || sample_ids.len() != n {
            return Err(Error::invalid("meta columns, labels and ids differ in length"));
        }
        let rows: Vec<[f64; 3]> = (0..n).map(|i| [a[i], b[i], c[i]]).collect();
        if rows.iter().flatten().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("meta features must lie in [0, 1]"));
        }
        Ok(Self {
            rows,
            labels,
            sample_ids,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// CSV with columns `sample_id,p_rf,p_lgbm,p_dnn,label`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("sample_id,p_rf,p_lgbm,p_dnn,label\n");
        for ((id, r), y) in self.sample_ids.iter().zip(&self.rows).zip(&self.labels) {
            out.push_str(&format!("{id},{},{},{},{y}\n", r[0], r[1], r[2]));
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }
}

pub fn build_oof_matrix(
    train: &LabeledDataset,
    folds: &[usize],
    k: usize,
    specs: &ModelSpecs,
    plan: &RngPlan,
) -> Result<MetaFeatureMatrix> {
    let learners: Vec<BaseLearner> = BaseModelKind::ALL
        .iter()
        .map(|&kind| BaseLearner { kind, specs })
        .collect();
    let dyns: Vec<&dyn Learner> = learners.iter().map(|l| l as &dyn Learner).collect();
    let columns = oof_predictions(train, folds, k, &dyns, plan)?;
    MetaFeatureMatrix::from_columns(&columns, train.labels.clone(), train.sample_ids.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Stop once the gradient sup-norm is at most this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 1000,
        }
    }
}

/// `P(y = 1 | x) = sigmoid(intercept + coefficients . x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    pub iterations: usize,
    /// Sup-norm of the penalized log-likelihood gradient at the solution.
    pub gradient_norm: f64,
    /// False when the iteration cap was hit first.
    pub converged: bool,
}

impl LogisticModel {
    pub fn zero(dim: usize, lambda: f64) -> Self {
        Self {
            intercept: 0.0,
            coefficients: vec![0.0; dim],
            lambda,
            iterations: 0,
            gradient_norm: f64::NAN,
            converged: false,
        }
    }

    pub fn linear(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.linear(x))
    }
}

/// `sigmoid(b0 + b1 p_rf + b2 p_lgbm + b3 p_dnn)`.
pub fn predict_meta(model: &LogisticModel, p_rf: f64, p_lgbm: f64, p_dnn: f64) -> f64 {
    model.predict(&[p_rf, p_lgbm, p_dnn])
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Penalized log-likelihood `l(b) - lambda * sum_{j>=1} b_j^2`, with `b[0]`
/// the unpenalized intercept.
pub fn penalized_loglik(x: &[Vec<f64>], labels: &[u8], beta: &[f64], lambda: f64) -> f64 {
    let ll: f64 = x
        .iter()
        .zip(labels)
        .map(|(row, &y)| {
            let z = beta[0] + beta[1..].iter().zip(row).map(|(b, v)| b * v).sum::<f64>();
            f64::from(y) * z - softplus(z)
        })
        .sum();
    ll - lambda * beta[1..].iter().map(|b| b * b).sum::<f64>()
}

/// Gradient of [`penalized_loglik`].
pub fn penalized_gradient(x: &[Vec<f64>], labels: &[u8], beta: &[f64], lambda: f64) -> Vec<f64> {
    let mut g = vec![0.0; beta.len()];
    for (row, &y) in x.iter().zip(labels) {
        let z = beta[0] + beta[1..].iter().zip(row).map(|(b, v)| b * v).sum::<f64>();
        let r = f64::from(y) - sigmoid(z);
        g[0] += r;
        for (gj, v) in g[1..].iter_mut().zip(row) {
            *gj += r * v;
        }
    }
    for (gj, b) in g[1..].iter_mut().zip(&beta[1..]) {
        *gj -= 2.0 * lambda * b;
    }
    g
}

/// Negative Hessian (positive semi-definite) of [`penalized_loglik`].
fn neg_hessian(x: &[Vec<f64>], beta: &[f64], lambda: f64) -> Vec<Vec<f64>> {
    let d = beta.len();
    let mut h = vec![vec![0.0; d]; d];
    let mut xi = vec![1.0; d];
    for row in x {
        xi[1..].copy_from_slice(row);
        let z: f64 = beta.iter().zip(&xi).map(|(b, v)| b * v).sum();
        let p = sigmoid(z);
        let w = p * (1.0 - p);
        for a in 0..d {
            for b in 0..d {
                h[a][b] += w * xi[a] * xi[b];
            }
        }
    }
    for (j, row) in h.iter_mut().enumerate().skip(1) {
        row[j] += 2.0 * lambda;
    }
    h
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting; `None` if
/// `a` is numerically singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let d = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for col in 0..d {
        let piv = (col..d).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let (top, rest) = a.split_at_mut(col + 1);
        let pivot = &top[col];
        for (r, row) in rest.iter_mut().enumerate() {
            let f = row[col] / pivot[col];
            for (x, p) in row[col..].iter_mut().zip(&pivot[col..]) {
                *x -= f * p;
            }
            b[col + 1 + r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; d];
    for r in (0..d).rev() {
        let s: f64 = (r + 1..d).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Maximizes the ridge-penalized log-likelihood from `beta = 0` with Newton
/// steps, halving a step while it lowers the objective. A singular Hessian
/// falls back to a gradient step.
pub fn fit_logistic(x: &[Vec<f64>], labels: &[u8], lambda: f64, opts: &NewtonOptions) -> Result<LogisticModel> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("lambda must be finite and non-negative"));
    }
    if x.len() != labels.len() {
        return Err(Error::invalid("rows and labels differ in length"));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::SingleClass {
            label: u8::from(pos > 0),
        });
    }
    let dim = x[0].len();
    if x.iter().any(|r| r.len() != dim || r.iter().any(|v| !v.is_finite())) {
        return Err(Error::invalid("meta rows must be finite and equally long"));
    }
    let mut beta = vec![0.0; dim + 1];
    let mut obj = penalized_loglik(x, labels, &beta, lambda);
    let mut grad = penalized_gradient(x, labels, &beta, lambda);
    let mut iterations = 0;
    while sup_norm(&grad) > opts.tolerance && iterations < opts.max_iterations {
        iterations += 1;
        let dir = solve(neg_hessian(x, &beta, lambda), grad.clone()).unwrap_or_else(|| grad.clone());
        let slack = 1e-12 * obj.abs().max(1.0);
        let mut t = 1.0;
        let mut next = None;
        for _ in 0..60 {
            let cand: Vec<f64> = beta.iter().zip(&dir).map(|(b, d)| b + t * d).collect();
            let cand_obj = penalized_loglik(x, labels, &cand, lambda);
            if cand_obj >= obj - slack {
                next = Some((cand, cand_obj));
                break;
            }
            t *= 0.5;
        }
        let Some((b, o)) = next else { break };
        beta = b;
        obj = o;
        grad = penalized_gradient(x, labels, &beta, lambda);
    }
    let gradient_norm = sup_norm(&grad);
    let converged = gradient_norm <= opts.tolerance;
    if !converged {
        log::warn!("logistic fit stopped after {iterations} iterations with gradient norm {gradient_norm:e}");
    }
    Ok(LogisticModel {
        intercept: beta[0],
        coefficients: beta[1..].to_vec(),
        lambda,
        iterations,
        gradient_norm,
        converged,
    })
}

pub fn fit_meta(meta: &MetaFeatureMatrix, lambda: f64, opts: &NewtonOptions) -> Result<LogisticModel> {
    let x: Vec<Vec<f64>> = meta.rows.iter().map(|r| r.to_vec()).collect();
    fit_logistic(&x, &meta.labels, lambda, opts)
}

/// How the stacked model scores data it was not trained on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestScoring {
    /// Base models refitted on the whole training set.
    #[default]
    Refit,
    /// Average of the K per-fold base models used for the OOF matrix.
    FoldAverage,
}

/// One fitted model of each kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseModels {
    pub forest: Forest,
    pub gbdt: BoostedEnsemble,
    pub mlp: Mlp,
}

impl BaseModels {
    pub fn predict(&self, data: &LabeledDataset) -> Result<[Vec<f64>; 3]> {
        Ok([
            self.forest.predict_dataset(data),
            self.gbdt.predict_dataset(data),
            self.mlp.predict_dataset(data)?,
        ])
    }
}

fn fit_all(data: &LabeledDataset, specs: &ModelSpecs, plan_for: impl Fn(BaseModelKind) -> RngPlan + Sync) -> Result<BaseModels> {
    let (forest, (gbdt, mlp)) = rayon::join(
        || fit_forest(data, &specs.forest, &plan_for(BaseModelKind::RandomForest)),
        || {
            rayon::join(
                || fit_boosted(data, &specs.gbdt, &plan_for(BaseModelKind::Gbdt)),
                || fit_mlp(data, &specs.mlp, &plan_for(BaseModelKind::Mlp)),
            )
        },
    );
    Ok(BaseModels {
        forest: forest?,
        gbdt: gbdt?,
        mlp: mlp?.net,
    })
}

/// Base models plus the meta-learner, ready to score new rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedEnsemble {
    pub scoring: TestScoring,
    /// One entry for [`TestScoring::Refit`], K for [`TestScoring::FoldAverage`].
    pub members: Vec<BaseModels>,
    pub meta: LogisticModel,
    pub fingerprint: Fingerprint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedScores {
    /// Base probabilities in [`BaseModelKind::ALL`] order.
    pub base: [Vec<f64>; 3],
    pub meta: Vec<f64>,
}

impl StackedEnsemble {
    pub fn predict(&self, data: &LabeledDataset) -> Result<StackedScores> {
        if data.fingerprint != self.fingerprint {
            return Err(Error::FingerprintMismatch {
                expected: self.fingerprint.to_string(),
                found: data.fingerprint.to_string(),
            });
        }
        let n = data.len();
        let mut base = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for m in &self.members {
            for (acc, p) in base.iter_mut().zip(m.predict(data)?) {
                acc.iter_mut().zip(p).for_each(|(a, v)| *a += v);
            }
        }
        let k = self.members.len() as f64;
        base.iter_mut().flatten().for_each(|v| *v /= k);
        let meta = (0..n)
            .map(|i| predict_meta(&self.meta, base[0][i], base[1][i], base[2][i]))
            .collect();
        Ok(StackedScores { base, meta })
    }
}

/// Fits the base models used for scoring: one full refit, or the K per-fold
/// models with the same seeds as their out-of-fold jobs.
pub fn fit_stacked(
    train: &LabeledDataset,
    folds: &[usize],
    specs: &ModelSpecs,
    meta: &LogisticModel,
    scoring: TestScoring,
    plan: &RngPlan,
) -> Result<StackedEnsemble> {
    let members = match scoring {
        TestScoring::Refit => vec![fit_all(train, specs, |kind| plan.child(&format!("refit/{}", kind.name()), 0))?],
        TestScoring::FoldAverage => {
            let k = folds.iter().max().map_or(0, |m| m + 1);
            if folds.len() != train.len() || k < 2 {
                return Err(Error::invalid("fold averaging needs a fold id per training sample"));
            }
            (0..k)
                .into_par_iter()
                .map(|f| {
                    let sub = train.subset(&fold_split(folds, f).0)?;
                    fit_all(&sub, specs, |kind| oof_plan(plan, kind.name(), f))
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(StackedEnsemble {
        scoring,
        members,
        meta: meta.clone(),
        fingerprint: train.fingerprint.clone(),
    })
}

/// [`fit_stacked`] followed by scoring `test`.
pub fn refit_and_predict(
    train: &LabeledDataset,
    folds: &[usize],
    test: &LabeledDataset,
    specs: &ModelSpecs,
    meta: &LogisticModel,
    scoring: TestScoring,
    plan: &RngPlan,
) -> Result<(StackedEnsemble, StackedScores)> {
    if test.fingerprint != train.fingerprint {
        return Err(Error::FingerprintMismatch {
            expected: train.fingerprint.to_string(),
            found: test.fingerprint.to_string(),
        });
    }
    let ensemble = fit_stacked(train, folds, specs, meta, scoring, plan)?;
    let scores = ensemble.predict(test)?;
    Ok((ensemble, scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::AdamConfig;

    fn quick_specs() -> ModelSpecs {
        ModelSpecs {
            forest: ForestParams { n_trees: 10, ..Default::default() },
            gbdt: GbdtParams { n_rounds: 10, ..Default::default() },
            mlp: MlpParams {
                hidden: vec![4],
                epochs: 5,
                batch_size: 4,
                dropout: 0.0,
                adam: AdamConfig::default(),
            },
        }
    }

    fn toy(n: usize) -> LabeledDataset {
        let rows = (0..n).map(|i| if i % 2 == 0 { vec![0, 2] } else { vec![1] }).collect();
        let labels = (0..n).map(|i| u8::from(i % 2 == 0)).collect();
        LabeledDataset::from_rows(3, rows, labels).unwrap()
    }

    #[test]
    fn predict_meta_examples() {
        let zero = LogisticModel::zero(3, 1.0);
        assert_eq!(predict_meta(&zero, 0.3, 0.9, 0.1), 0.5);
        let ones = LogisticModel { coefficients: vec![1.0; 3], ..zero };
        let p = predict_meta(&ones, 0.5, 0.5, 0.5);
        assert!((p - 0.817_574_476_193_643_7).abs() < 1e-15);
    }

    #[test]
    fn minimal_stacking_shape() {
        let d = toy(4);
        let folds = vec![0, 0, 1, 1];
        let m = build_oof_matrix(&d, &folds, 2, &quick_specs(), &RngPlan::new(1)).unwrap();
        assert_eq!(m.len(), 4);
        assert!(m.rows.iter().flatten().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn newton_solves_balanced_null_problem() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![(i / 2 % 5) as f64 / 4.0]).collect();
        let y: Vec<u8> = (0..40).map(|i| (i % 2) as u8).collect();
        let m = fit_logistic(&x, &y, 1.0, &NewtonOptions::default()).unwrap();
        assert!(m.converged && m.gradient_norm <= 1e-8);
        assert!(m.intercept.abs() < 1e-9 && m.coefficients[0].abs() < 1e-9);
    }

    #[test]
    fn huge_penalty_leaves_intercept_at_base_rate() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 3) as f64, (i % 7) as f64 / 7.0, 0.5]).collect();
        let y: Vec<u8> = (0..30).map(|i| u8::from(i % 3 == 0)).collect();
        let m = fit_logistic(&x, &y, 1e6, &NewtonOptions::default()).unwrap();
        assert!(m.coefficients.iter().all(|b| b.abs() < 1e-4));
        assert!((m.intercept - (10.0f64 / 20.0).ln()).abs() < 1e-3);
    }

    #[test]
    fn separable_direction_grows_as_penalty_shrinks() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![f64::from(u8::from(i % 2 == 0)), 0.5, 0.5]).collect();
        let y: Vec<u8> = (0..20).map(|i| u8::from(i % 2 == 0)).collect();
        let opts = NewtonOptions::default();
        let b1: Vec<f64> = [1.0, 0.1, 0.01]
            .iter()
            .map(|&l| fit_logistic(&x, &y, l, &opts).unwrap().coefficients[0])
            .collect();
        assert!(b1[0] < b1[1] && b1[1] < b1[2]);
        let m = fit_logistic(&x, &y, 0.01, &opts).unwrap();
        let acc = x.iter().zip(&y).filter(|(r, &yi)| u8::from(m.predict(r) >= 0.5) == yi).count();
        assert_eq!(acc, 20);
    }

    #[test]
    fn fingerprint_mismatch_is_rejected() {
        let train = toy(8);
        let mut test = toy(4);
        test.fingerprint = Fingerprint("other".into());
        let err = refit_and_predict(
            &train,
            &[0, 1, 0, 1, 0, 1, 0, 1],
            &test,
            &quick_specs(),
            &LogisticModel::zero(3, 1.0),
            TestScoring::Refit,
            &RngPlan::new(0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::FingerprintMismatch { .. }));
    }

    #[test]
    fn empty_test_set_scores_nothing() {
        let train = toy(8);
        let test = train.subset(&[]).unwrap();
        let (_, s) = refit_and_predict(
            &train,
            &[0, 0, 1, 1, 0, 0, 1, 1],
            &test,
            &quick_specs(),
            &LogisticModel::zero(3, 1.0),
            TestScoring::FoldAverage,
            &RngPlan::new(0),
        )
        .unwrap();
        assert!(s.meta.is_empty() && s.base.iter().all(Vec::is_empty));
    }

    #[test]
    fn solve_matches_known_system() {
        let x = solve(vec![vec![2.0, 1.0], vec![1.0, 3.0]], vec![3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-15 && (x[1] - 1.4).abs() < 1e-15);
        assert!(solve(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 2.0]).is_none());
    }
}
