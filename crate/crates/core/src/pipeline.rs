//! End-to-end workflow: ingest, split, stack, evaluate and report.
//!
//! Every output lands in `<output_dir>/run-<config hash>`, and every random
//! draw derives from the config's root seed, so a run directory can be
//! reproduced byte for byte from its manifest.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{DatasetFile, FeatureVocabulary, LabeledDataset, GENDER};
use crate::error::{Error, Result, StageExt};
use crate::forest::rank_features;
use crate::ingest::{ingest_tables, load_tables, EncodeOptions, IngestReport, TablePaths};
use crate::metrics::{metric_report, roc_points, write_roc_csv, BootstrapOptions, MetricReport};
use crate::rng::RngPlan;
use crate::sampling::{
    build_testing_set_hard, build_testing_set_regular, reserve_holdout, stratified_kfold, undersample_balanced,
    TestSet,
};
use crate::stacking::{
    build_oof_matrix, fit_meta, fit_stacked, BaseModelKind, MetaFeatureMatrix, ModelSpecs, NewtonOptions,
    StackedEnsemble, TestScoring,
};
use crate::synth::{emit_csvs, generate_cohort, SyntheticSpec};

pub const INGEST_REPORT: &str = "ingest_report.json";
pub const DATASET: &str = "dataset.json";
pub const SPLIT_MANIFEST: &str = "split_manifest.json";
pub const CV_METRICS: &str = "cv_metrics.json";
pub const OOF_MATRIX: &str = "oof_matrix.csv";
pub const BUNDLE: &str = "bundle.json";
pub const IMPORTANCE: &str = "importance.csv";
pub const TEST_SETS: &str = "test_sets.json";
pub const TEST_METRICS: &str = "test_metrics.json";
pub const RUN_MANIFEST: &str = "manifest.json";

const BUNDLE_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Directory holding the four MIMIC-III CSV tables.
    pub input_dir: Option<PathBuf>,
    /// Generate the input instead of reading `input_dir`.
    pub synthetic: Option<SyntheticSpec>,
    pub output_dir: PathBuf,
    /// Thread budget; `None` uses all cores.
    pub workers: Option<usize>,
    /// Cases held out for testing.
    pub holdout: usize,
    pub folds: usize,
    /// Size of the importance prefix that defines risk features.
    pub top_n: usize,
    /// Risk features a control needs to enter Testing Set 2.
    pub min_risk_features: usize,
    pub include_procedures: bool,
    /// Ridge strength of the meta-learner.
    pub lambda: f64,
    pub test_scoring: TestScoring,
    pub bootstrap: BootstrapOptions,
    pub models: ModelSpecs,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            input_dir: None,
            synthetic: None,
            output_dir: PathBuf::from("runs"),
            workers: None,
            holdout: 34,
            folds: 5,
            top_n: 100,
            min_risk_features: 2,
            include_procedures: false,
            lambda: 1.0,
            test_scoring: TestScoring::Refit,
            bootstrap: BootstrapOptions::default(),
            models: ModelSpecs::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.folds < 2 {
            return bad(format!("folds must be at least 2, got {}", self.folds));
        }
        if self.holdout < 1 {
            return bad("holdout must be at least 1".into());
        }
        if self.top_n < 2 {
            return bad(format!("top_n must be at least 2, got {}", self.top_n));
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be finite and non-negative".into());
        }
        if self.bootstrap.resamples == 0 || !(self.bootstrap.level > 0.0 && self.bootstrap.level < 1.0) {
            return bad("bootstrap needs resamples >= 1 and a level in (0, 1)".into());
        }
        match (&self.input_dir, &self.synthetic) {
            (Some(_), Some(_)) => bad("set either input_dir or synthetic, not both".into()),
            (None, None) => bad("no input: set input_dir or synthetic".into()),
            (None, Some(spec)) => spec.validate().map_err(|e| Error::Config(e.to_string())),
            (Some(_), None) => Ok(()),
        }
    }

    /// SHA-256 over the canonical JSON form, ignoring where outputs go and
    /// how many threads run.
    pub fn hash(&self) -> String {
        let canonical = PipelineConfig {
            output_dir: PathBuf::new(),
            workers: None,
            ..self.clone()
        };
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join(format!("run-{}", &self.hash()[..16]))
    }
}

/// Git-style content hash: SHA-256 of `blob <len>\0` followed by the bytes.
pub fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

fn file_hash(path: &Path) -> Result<String> {
    std::fs::read(path).map(|b| blob_hash(&b)).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Byte offset of a 1-based (line, column) position.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let start: usize = text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    (start + column.saturating_sub(1)).min(text.len())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        offset: byte_offset(&text, e.line(), e.column()),
        message: e.to_string(),
    })
}

/// Runs `f` on a pool of `workers` threads (all cores when `None`).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match workers {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?
            .install(f),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Debug, Clone)]
pub struct IngestOutput {
    pub vocabulary: FeatureVocabulary,
    pub dataset: LabeledDataset,
    pub report: IngestReport,
    /// Content hash per input table file.
    pub inputs: BTreeMap<String, String>,
}

/// Reads (or generates and writes) the four tables and encodes the cohort.
/// Writes `ingest_report.json` and `dataset.json`.
pub fn stage_ingest(cfg: &PipelineConfig, run_dir: &Path) -> Result<IngestOutput> {
    cfg.validate()?;
    ensure_dir(run_dir)?;
    let paths = match (&cfg.input_dir, &cfg.synthetic) {
        (Some(dir), _) => TablePaths::in_dir(dir),
        (None, Some(spec)) => {
            let cohort = generate_cohort(spec)?;
            emit_csvs(&cohort.tables, &run_dir.join("synthetic"))?
        }
        (None, None) => unreachable!("validated"),
    };
    let mut inputs = BTreeMap::new();
    for p in [&paths.patients, &paths.admissions, &paths.diagnoses, &paths.procedures] {
        let name = p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned());
        inputs.insert(name, file_hash(p)?);
    }
    let (tables, report) = load_tables(&paths)?;
    let opts = EncodeOptions {
        include_procedures: cfg.include_procedures,
    };
    let ingested = ingest_tables(&tables, report, opts);
    write_json(&run_dir.join(INGEST_REPORT), &ingested.report)?;
    write_json(&run_dir.join(DATASET), &DatasetFile::new(ingested.vocabulary.clone(), &ingested.dataset))?;
    log::info!(
        "ingested {} cases and {} controls over {} features",
        ingested.report.n_cases,
        ingested.report.n_controls,
        ingested.vocabulary.len()
    );
    Ok(IngestOutput {
        vocabulary: ingested.vocabulary,
        dataset: ingested.dataset,
        report: ingested.report,
        inputs,
    })
}

pub fn load_dataset(run_dir: &Path) -> Result<(FeatureVocabulary, LabeledDataset)> {
    read_json::<DatasetFile>(&run_dir.join(DATASET))?.into_dataset()
}

/// Which dataset rows train the models and which cases are held out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub folds: usize,
    pub holdout_cases: Vec<usize>,
    pub train_indices: Vec<usize>,
    /// Fold id per entry of `train_indices`.
    pub fold_assignments: Vec<usize>,
    pub train_ids: Vec<String>,
    pub holdout_ids: Vec<String>,
}

impl SplitManifest {
    /// Controls never used for training, in dataset order.
    pub fn control_pool(&self, data: &LabeledDataset) -> Vec<usize> {
        let mut used = vec![false; data.len()];
        for &i in &self.train_indices {
            used[i] = true;
        }
        (0..data.len()).filter(|&i| data.labels[i] == 0 && !used[i]).collect()
    }
}

pub fn plan_split(data: &LabeledDataset, cfg: &PipelineConfig) -> Result<SplitManifest> {
    let plan = RngPlan::new(cfg.seed);
    let cases: Vec<usize> = (0..data.len()).filter(|&i| data.labels[i] == 1).collect();
    let controls: Vec<usize> = (0..data.len()).filter(|&i| data.labels[i] == 0).collect();
    let (holdout_cases, train_cases) = reserve_holdout(&cases, cfg.holdout, &mut plan.rng("holdout", 0))?;
    let train_indices = undersample_balanced(&train_cases, &controls, &mut plan.rng("undersample", 0))?;
    let labels: Vec<u8> = train_indices.iter().map(|&i| data.labels[i]).collect();
    let fold_assignments = stratified_kfold(&labels, cfg.folds, &mut plan.rng("folds", 0))?;
    let ids = |idx: &[usize]| idx.iter().map(|&i| data.sample_ids[i].clone()).collect();
    Ok(SplitManifest {
        seed: cfg.seed,
        folds: cfg.folds,
        train_ids: ids(&train_indices),
        holdout_ids: ids(&holdout_cases),
        holdout_cases,
        train_indices,
        fold_assignments,
    })
}

/// Serialized stacked model with the vocabulary it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format: u32,
    pub seed: u64,
    pub config_hash: String,
    pub vocabulary: FeatureVocabulary,
    pub ensemble: StackedEnsemble,
    /// Gini importance per feature, averaged over the ensemble's forests.
    pub importance: Vec<f64>,
}

impl ModelBundle {
    /// Checks that every model was trained on this bundle's vocabulary.
    pub fn verify(&self) -> Result<()> {
        if self.format != BUNDLE_FORMAT {
            return Err(Error::invalid(format!("unsupported bundle format {}", self.format)));
        }
        let expected = self.vocabulary.fingerprint();
        let p = self.vocabulary.len();
        let mut found = vec![&self.ensemble.fingerprint];
        for m in &self.ensemble.members {
            found.extend([&m.forest.fingerprint, &m.gbdt.fingerprint, &m.mlp.fingerprint]);
            if m.forest.n_features != p || m.mlp.arch.input_dim != p {
                return Err(Error::invalid("model input width differs from the vocabulary"));
            }
        }
        if let Some(bad) = found.into_iter().find(|f| **f != expected) {
            return Err(Error::FingerprintMismatch {
                expected: expected.to_string(),
                found: bad.to_string(),
            });
        }
        if self.importance.len() != p {
            return Err(Error::invalid("importance vector differs from the vocabulary"));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bundle: ModelBundle = read_json(path)?;
        bundle.verify()?;
        Ok(bundle)
    }

    /// `(feature name, importance)` in descending order.
    pub fn ranking(&self) -> Vec<(String, f64)> {
        rank_features(&self.importance)
            .into_iter()
            .map(|j| (self.vocabulary.name(j).unwrap_or("?").to_string(), self.importance[j]))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub split: SplitManifest,
    pub oof: MetaFeatureMatrix,
    /// Cross-validated report per base model, keyed by model name.
    pub cv_metrics: BTreeMap<String, MetricReport>,
    pub bundle: ModelBundle,
}

fn write_importance(path: &Path, bundle: &ModelBundle) -> Result<()> {
    let mut out = String::from("rank,feature,importance\n");
    for (r, (name, v)) in bundle.ranking().into_iter().enumerate() {
        out.push_str(&format!("{},{name},{v}\n", r + 1));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Splits, builds the OOF matrix, fits the meta-learner and the scoring base
/// models. Writes the split manifest, CV metrics, OOF matrix, bundle and
/// importance ranking.
pub fn stage_train(
    cfg: &PipelineConfig,
    run_dir: &Path,
    vocabulary: &FeatureVocabulary,
    data: &LabeledDataset,
) -> Result<TrainOutput> {
    cfg.validate()?;
    ensure_dir(run_dir)?;
    let plan = RngPlan::new(cfg.seed);
    let split = plan_split(data, cfg)?;
    write_json(&run_dir.join(SPLIT_MANIFEST), &split)?;
    let train = data.subset(&split.train_indices)?;

    let oof = build_oof_matrix(&train, &split.fold_assignments, cfg.folds, &cfg.models, &plan.child("stack", 0))?;
    oof.write_csv(&run_dir.join(OOF_MATRIX))?;
    let mut cv_metrics = BTreeMap::new();
    for (j, kind) in BaseModelKind::ALL.iter().enumerate() {
        let report = metric_report(&oof.labels, &oof.column(j), &cfg.bootstrap, &plan.child("cv", j as u64))?;
        cv_metrics.insert(kind.name().to_string(), report);
    }
    write_json(&run_dir.join(CV_METRICS), &cv_metrics)?;

    let meta = fit_meta(&oof, cfg.lambda, &NewtonOptions::default())?;
    let ensemble = fit_stacked(
        &train,
        &split.fold_assignments,
        &cfg.models,
        &meta,
        cfg.test_scoring,
        &plan.child("stack", 0),
    )?;
    let mut importance = vec![0.0; vocabulary.len()];
    for m in &ensemble.members {
        for (acc, v) in importance.iter_mut().zip(m.forest.gini_importance()) {
            *acc += v / ensemble.members.len() as f64;
        }
    }
    let bundle = ModelBundle {
        format: BUNDLE_FORMAT,
        seed: cfg.seed,
        config_hash: cfg.hash(),
        vocabulary: vocabulary.clone(),
        ensemble,
        importance,
    };
    bundle.verify()?;
    write_json(&run_dir.join(BUNDLE), &bundle)?;
    write_importance(&run_dir.join(IMPORTANCE), &bundle)?;
    Ok(TrainOutput {
        split,
        oof,
        cv_metrics,
        bundle,
    })
}

/// The two held-out evaluation sets, as dataset row indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSets {
    pub top_features: Vec<String>,
    pub testing_set_1: Vec<usize>,
    pub testing_set_2: Vec<usize>,
}

/// Reports for the meta model and each base model on one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetMetrics {
    pub n: usize,
    pub positives: usize,
    pub models: BTreeMap<String, MetricReport>,
}

impl SetMetrics {
    pub fn meta(&self) -> &MetricReport {
        &self.models["meta"]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestMetrics {
    pub testing_set_1: SetMetrics,
    pub testing_set_2: SetMetrics,
}

/// Importance-ranked features with GENDER left out; demographic columns are
/// not risk codes.
pub fn top_risk_features(bundle: &ModelBundle, n: usize) -> Vec<usize> {
    let gender = bundle.vocabulary.lookup(GENDER);
    rank_features(&bundle.importance)
        .into_iter()
        .filter(|&j| Some(j) != gender)
        .take(n)
        .collect()
}

fn score_set(
    name: &str,
    set: &TestSet,
    bundle: &ModelBundle,
    cfg: &PipelineConfig,
    run_dir: &Path,
    plan: &RngPlan,
) -> Result<SetMetrics> {
    let scores = bundle.ensemble.predict(&set.data)?;
    let labels = &set.data.labels;
    let mut columns: Vec<(&str, &[f64])> = vec![("meta", &scores.meta)];
    for (kind, col) in BaseModelKind::ALL.iter().zip(&scores.base) {
        columns.push((kind.name(), col));
    }
    let mut models = BTreeMap::new();
    for (k, (model, col)) in columns.into_iter().enumerate() {
        write_roc_csv(&roc_points(labels, col)?, &run_dir.join(format!("roc_{name}_{model}.csv")))?;
        let report = metric_report(labels, col, &cfg.bootstrap, &plan.child(name, k as u64))?;
        models.insert(model.to_string(), report);
    }
    Ok(SetMetrics {
        n: labels.len(),
        positives: set.data.positives(),
        models,
    })
}

/// Builds Testing Sets 1 and 2 and scores them. Writes the test-set indices,
/// metric reports and ROC curves.
pub fn stage_evaluate(
    cfg: &PipelineConfig,
    run_dir: &Path,
    data: &LabeledDataset,
    split: &SplitManifest,
    bundle: &ModelBundle,
) -> Result<TestMetrics> {
    cfg.validate()?;
    ensure_dir(run_dir)?;
    let plan = RngPlan::new(cfg.seed);
    let pool = split.control_pool(data);
    let top = top_risk_features(bundle, cfg.top_n);
    let set1 = build_testing_set_regular(data, &split.holdout_cases, &pool, &split.train_indices, &mut plan.rng("test1", 0))?;
    let set2 = build_testing_set_hard(
        data,
        &split.holdout_cases,
        &pool,
        &split.train_indices,
        &top,
        cfg.min_risk_features,
        &mut plan.rng("test2", 0),
    )?;
    let sets = TestSets {
        top_features: top.iter().map(|&j| bundle.vocabulary.name(j).unwrap_or("?").to_string()).collect(),
        testing_set_1: set1.indices.clone(),
        testing_set_2: set2.indices.clone(),
    };
    write_json(&run_dir.join(TEST_SETS), &sets)?;
    let eval_plan = plan.child("evaluate", 0);
    let metrics = TestMetrics {
        testing_set_1: score_set("test1", &set1, bundle, cfg, run_dir, &eval_plan)?,
        testing_set_2: score_set("test2", &set2, bundle, cfg, run_dir, &eval_plan)?,
    };
    write_json(&run_dir.join(TEST_METRICS), &metrics)?;
    Ok(metrics)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub seed: u64,
    pub config_hash: String,
    pub config: PipelineConfig,
    /// Content hash per input table.
    pub inputs: BTreeMap<String, String>,
    /// Content hash per output file, relative to the run directory.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub run_dir: PathBuf,
    pub ingest: IngestReport,
    pub cv_metrics: BTreeMap<String, MetricReport>,
    pub test_metrics: TestMetrics,
    pub bundle: ModelBundle,
}

fn output_hashes(run_dir: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![run_dir.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let path = entry.map_err(|e| Error::io(&dir, e))?.path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let rel = path.strip_prefix(run_dir).expect("inside run dir").to_string_lossy().replace('\\', "/");
            if rel != RUN_MANIFEST {
                out.insert(rel, file_hash(&path)?);
            }
        }
    }
    Ok(out)
}

/// Runs all stages on the configured worker pool and writes the manifest.
/// Stage failures carry the stage name.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunSummary> {
    cfg.validate().stage("config")?;
    let run_dir = cfg.run_dir();
    with_workers(cfg.workers, || {
        let ingest = stage_ingest(cfg, &run_dir).stage("ingest")?;
        let train = stage_train(cfg, &run_dir, &ingest.vocabulary, &ingest.dataset).stage("train")?;
        let test_metrics = stage_evaluate(cfg, &run_dir, &ingest.dataset, &train.split, &train.bundle).stage("evaluate")?;
        let manifest = RunManifest {
            seed: cfg.seed,
            config_hash: cfg.hash(),
            config: cfg.clone(),
            inputs: ingest.inputs,
            outputs: output_hashes(&run_dir).stage("manifest")?,
        };
        write_json(&run_dir.join(RUN_MANIFEST), &manifest).stage("manifest")?;
        Ok(RunSummary {
            run_dir: run_dir.clone(),
            ingest: ingest.report,
            cv_metrics: train.cv_metrics,
            test_metrics,
            bundle: train.bundle,
        })
    })
}

/// Human-readable description of a bundle.
#[derive(Debug, Clone)]
pub struct BundleSummary {
    pub bundle: ModelBundle,
}

pub fn inspect(path: &Path) -> Result<BundleSummary> {
    Ok(BundleSummary {
        bundle: ModelBundle::load(path)?,
    })
}

impl fmt::Display for BundleSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = &self.bundle;
        let e = &b.ensemble;
        writeln!(f, "vocabulary size: {}", b.vocabulary.len())?;
        writeln!(f, "fingerprint: {}", e.fingerprint)?;
        writeln!(f, "seed: {}", b.seed)?;
        writeln!(f, "config hash: {}", b.config_hash)?;
        writeln!(f, "test scoring: {:?} ({} member(s))", e.scoring, e.members.len())?;
        for (i, m) in e.members.iter().enumerate() {
            let seeds = &m.forest.tree_seeds;
            writeln!(
                f,
                "member {i}: rf {} trees (first seed {}), lgbm {} trees (eta {}, {} leaves max), dnn {:?} (seed {}, {} params)",
                m.forest.trees.len(),
                seeds.first().copied().unwrap_or_default(),
                m.gbdt.trees.len(),
                m.gbdt.learning_rate,
                m.gbdt.max_leaves,
                std::iter::once(m.mlp.arch.input_dim)
                    .chain(m.mlp.arch.hidden.iter().copied())
                    .chain([m.mlp.arch.n_classes])
                    .collect::<Vec<_>>(),
                m.mlp.seed,
                m.mlp.n_params(),
            )?;
        }
        let meta = &e.meta;
        write!(f, "meta: beta0 = {}", meta.intercept)?;
        for (j, b) in meta.coefficients.iter().enumerate() {
            write!(f, ", beta{} = {b}", j + 1)?;
        }
        writeln!(f)?;
        writeln!(
            f,
            "meta fit: lambda {}, {} iterations, gradient norm {:e}, converged {}",
            meta.lambda, meta.iterations, meta.gradient_norm, meta.converged
        )
    }
}
