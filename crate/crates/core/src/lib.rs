//! Stacked-ensemble classification of EHR cohorts.
//!
//! Diagnosis tables are turned into a sparse one-hot dataset
//! ([`ingest`]), balanced and split ([`sampling`]), fitted by three base
//! learners ([`forest`], [`gbdt`], [`mlp`]) whose out-of-fold probabilities
//! train a ridge-penalized logistic meta-learner ([`stacking`]), and scored
//! with [`metrics`]. [`synth`] generates MIMIC-schema cohorts with planted
//! risk codes and [`pipeline`] wires the stages together.

pub mod data;
pub mod error;
pub mod forest;
pub mod gbdt;
pub mod ingest;
pub mod metrics;
pub mod mlp;
pub mod pipeline;
pub mod rng;
pub mod sampling;
pub mod stacking;
pub mod synth;

pub use data::{DatasetFile, FeatureVocabulary, Fingerprint, LabeledDataset, SparseBinaryMatrix};
pub use error::{Error, Result};
pub use metrics::{MetricReport, RocCurve};
pub use pipeline::{ModelBundle, PipelineConfig};
pub use rng::RngPlan;
pub use stacking::{LogisticModel, MetaFeatureMatrix, ModelSpecs};
pub use synth::SyntheticSpec;
