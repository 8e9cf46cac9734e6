//! Sparse binary feature matrices, labeled datasets and the feature vocabulary
//! that fixes column order for every model.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Name of the single non-ICD feature column.
pub const GENDER: &str = "GENDER";

/// Ordered feature names with reverse lookup. Column `j` of every matrix built
/// against this vocabulary is `entries()[j]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct FeatureVocabulary {
    entries: Vec<String>,
    index: HashMap<String, usize>,
}

impl FeatureVocabulary {
    /// Builds a vocabulary; fails on duplicate names or if `GENDER` is not
    /// present exactly once.
    pub fn new(entries: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        for (j, name) in entries.iter().enumerate() {
            if index.insert(name.clone(), j).is_some() {
                return Err(Error::invalid(format!("duplicate vocabulary entry {name:?}")));
            }
        }
        if !index.contains_key(GENDER) {
            return Err(Error::invalid("vocabulary must contain GENDER"));
        }
        Ok(Self { entries, index })
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, j: usize) -> Option<&str> {
        self.entries.get(j).map(String::as_str)
    }

    pub fn fingerprint(&self) -> Fingerprint {
        let mut h = Sha256::new();
        for e in &self.entries {
            h.update(e.as_bytes());
            h.update([0u8]);
        }
        Fingerprint(hex::encode(&h.finalize()[..12]))
    }
}

impl TryFrom<Vec<String>> for FeatureVocabulary {
    type Error = Error;

    fn try_from(entries: Vec<String>) -> Result<Self> {
        Self::new(entries)
    }
}

impl From<FeatureVocabulary> for Vec<String> {
    fn from(v: FeatureVocabulary) -> Self {
        v.entries
    }
}

/// Identifies the feature space a dataset or model was built against.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Fingerprint(pub String);

impl Fingerprint {
    /// Fingerprint for matrices that were not built from a named vocabulary.
    pub fn anonymous(n_cols: usize) -> Self {
        Fingerprint(format!("anonymous-{n_cols}"))
    }
}

impl std::fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Row-sparse 0/1 matrix: each row stores the strictly increasing column
/// indices that are set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct SparseBinaryMatrix {
    n_cols: usize,
    rows: Vec<Vec<u32>>,
}

#[derive(Deserialize)]
struct RawMatrix {
    n_cols: usize,
    rows: Vec<Vec<u32>>,
}

impl TryFrom<RawMatrix> for SparseBinaryMatrix {
    type Error = Error;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        Self::from_rows(raw.n_cols, raw.rows)
    }
}

impl SparseBinaryMatrix {
    pub fn empty(n_cols: usize) -> Self {
        Self {
            n_cols,
            rows: Vec::new(),
        }
    }

    /// Validates that every row is strictly increasing and in range.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<u32>>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            if let Some(&last) = row.last() {
                if last as usize >= n_cols {
                    return Err(Error::invalid(format!(
                        "row {i}: column {last} out of range for {n_cols} columns"
                    )));
                }
            }
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid(format!(
                    "row {i}: column indices must be strictly increasing"
                )));
            }
        }
        Ok(Self { n_cols, rows })
    }

    /// Sorts and deduplicates each row before validating.
    pub fn from_unsorted_rows(n_cols: usize, mut rows: Vec<Vec<u32>>) -> Result<Self> {
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
        }
        Self::from_rows(n_cols, rows)
    }

    pub fn from_dense(dense: &[Vec<u8>], n_cols: usize) -> Result<Self> {
        let mut rows = Vec::with_capacity(dense.len());
        for (i, d) in dense.iter().enumerate() {
            if d.len() != n_cols {
                return Err(Error::invalid(format!(
                    "dense row {i} has {} entries, expected {n_cols}",
                    d.len()
                )));
            }
            let mut row = Vec::new();
            for (j, &v) in d.iter().enumerate() {
                match v {
                    0 => {}
                    1 => row.push(j as u32),
                    other => {
                        return Err(Error::invalid(format!(
                            "dense entry ({i},{j}) = {other} is not binary"
                        )))
                    }
                }
            }
            rows.push(row);
        }
        Ok(Self { n_cols, rows })
    }

    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        self.rows
            .iter()
            .map(|row| {
                let mut d = vec![0u8; self.n_cols];
                for &j in row {
                    d[j as usize] = 1;
                }
                d
            })
            .collect()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        row_contains(&self.rows[i], j)
    }

    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        let rows = idx
            .iter()
            .map(|&i| {
                self.rows.get(i).cloned().ok_or(Error::IndexOutOfRange {
                    index: i,
                    len: self.rows.len(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n_cols: self.n_cols,
            rows,
        })
    }

    /// Number of rows with column `j` set.
    pub fn column_support(&self, j: usize) -> Result<usize> {
        if j >= self.n_cols {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.n_cols,
            });
        }
        Ok(self.rows.iter().filter(|r| row_contains(r, j)).count())
    }
}

/// Membership test on a sorted sparse row.
#[inline]
pub fn row_contains(row: &[u32], j: usize) -> bool {
    row.binary_search(&(j as u32)).is_ok()
}

/// Feature matrix with binary labels (1 = case) and unique sample identifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub features: SparseBinaryMatrix,
    pub labels: Vec<u8>,
    pub sample_ids: Vec<String>,
    pub fingerprint: Fingerprint,
}

impl LabeledDataset {
    pub fn new(features: SparseBinaryMatrix, labels: Vec<u8>, sample_ids: Vec<String>) -> Result<Self> {
        let fingerprint = Fingerprint::anonymous(features.n_cols());
        Self::with_fingerprint(features, labels, sample_ids, fingerprint)
    }

    pub fn with_fingerprint(
        features: SparseBinaryMatrix,
        labels: Vec<u8>,
        sample_ids: Vec<String>,
        fingerprint: Fingerprint,
    ) -> Result<Self> {
        let n = features.n_rows();
        if labels.len() != n || sample_ids.len() != n {
            return Err(Error::invalid(format!(
                "dataset shape mismatch: {n} rows, {} labels, {} ids",
                labels.len(),
                sample_ids.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y > 1) {
            return Err(Error::invalid(format!("label {bad} is not binary")));
        }
        let mut seen = std::collections::HashSet::with_capacity(n);
        for id in &sample_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::invalid(format!("duplicate sample id {id:?}")));
            }
        }
        Ok(Self {
            features,
            labels,
            sample_ids,
            fingerprint,
        })
    }

    /// Convenience constructor for tests and synthetic data: ids are the row
    /// numbers.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<u32>>, labels: Vec<u8>) -> Result<Self> {
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::new(SparseBinaryMatrix::from_unsorted_rows(n_cols, rows)?, labels, ids)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.n_cols()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        Ok(Self {
            features: self.features.select_rows(idx)?,
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            sample_ids: idx.iter().map(|&i| self.sample_ids[i].clone()).collect(),
            fingerprint: self.fingerprint.clone(),
        })
    }

    /// Fails with [`Error::SingleClass`] unless both labels occur.
    pub fn require_both_classes(&self) -> Result<()> {
        let pos = self.positives();
        if pos == 0 {
            Err(Error::SingleClass { label: 0 })
        } else if pos == self.len() {
            Err(Error::SingleClass { label: 1 })
        } else {
            Ok(())
        }
    }
}

/// Dataset bundled with the vocabulary that names its columns; this is the
/// on-disk dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFile {
    pub vocabulary: FeatureVocabulary,
    pub rows: Vec<Vec<u32>>,
    pub labels: Vec<u8>,
    pub sample_ids: Vec<String>,
}

impl DatasetFile {
    pub fn new(vocabulary: FeatureVocabulary, data: &LabeledDataset) -> Self {
        Self {
            vocabulary,
            rows: data.features.rows().to_vec(),
            labels: data.labels.clone(),
            sample_ids: data.sample_ids.clone(),
        }
    }

    pub fn into_dataset(self) -> Result<(FeatureVocabulary, LabeledDataset)> {
        let features = SparseBinaryMatrix::from_rows(self.vocabulary.len(), self.rows)?;
        let data = LabeledDataset::with_fingerprint(
            features,
            self.labels,
            self.sample_ids,
            self.vocabulary.fingerprint(),
        )?;
        Ok((self.vocabulary, data))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: Vec<Vec<u32>>, n_cols: usize) -> SparseBinaryMatrix {
        SparseBinaryMatrix::from_rows(n_cols, rows).unwrap()
    }

    #[test]
    fn select_rows_examples() {
        let a = m(vec![vec![1], vec![2], vec![0, 3]], 4);
        assert_eq!(a.select_rows(&[0, 1, 2]).unwrap(), a);
        let e = a.select_rows(&[]).unwrap();
        assert_eq!((e.n_rows(), e.n_cols()), (0, 4));
        assert_eq!(a.select_rows(&[2, 0]).unwrap(), m(vec![vec![0, 3], vec![1]], 4));
        match a.select_rows(&[0, 7]) {
            Err(Error::IndexOutOfRange { index: 7, len: 3 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn column_support_examples() {
        let zero = m(vec![vec![], vec![], vec![]], 3);
        assert_eq!(zero.column_support(1).unwrap(), 0);
        let eye = m(vec![vec![0], vec![1], vec![2]], 3);
        for j in 0..3 {
            assert_eq!(eye.column_support(j).unwrap(), 1);
        }
        let a = m(vec![vec![0], vec![0, 1], vec![1]], 2);
        assert_eq!(a.column_support(1).unwrap(), 2);
        assert!(a.column_support(2).is_err());
    }

    #[test]
    fn rejects_malformed_rows() {
        assert!(SparseBinaryMatrix::from_rows(3, vec![vec![1, 1]]).is_err());
        assert!(SparseBinaryMatrix::from_rows(3, vec![vec![2, 1]]).is_err());
        assert!(SparseBinaryMatrix::from_rows(3, vec![vec![3]]).is_err());
        assert!(SparseBinaryMatrix::from_dense(&[vec![0, 2]], 2).is_err());
        let json = r#"{"n_cols":2,"rows":[[1,0]]}"#;
        assert!(serde_json::from_str::<SparseBinaryMatrix>(json).is_err());
    }

    #[test]
    fn vocabulary_lookup_and_invariants() {
        let v = FeatureVocabulary::new(vec!["GENDER".into(), "430".into(), "431".into()]).unwrap();
        for (j, e) in v.entries().iter().enumerate() {
            assert_eq!(v.lookup(e), Some(j));
        }
        assert!(FeatureVocabulary::new(vec!["430".into()]).is_err());
        assert!(FeatureVocabulary::new(vec!["GENDER".into(), "GENDER".into()]).is_err());
        let w = FeatureVocabulary::new(vec!["GENDER".into(), "431".into(), "430".into()]).unwrap();
        assert_ne!(v.fingerprint(), w.fingerprint());
    }

    #[test]
    fn dataset_invariants() {
        let f = m(vec![vec![0], vec![1]], 2);
        assert!(LabeledDataset::new(f.clone(), vec![0], vec!["a".into(), "b".into()]).is_err());
        assert!(LabeledDataset::new(f.clone(), vec![0, 1], vec!["a".into(), "a".into()]).is_err());
        assert!(LabeledDataset::new(f.clone(), vec![0, 2], vec!["a".into(), "b".into()]).is_err());
        let d = LabeledDataset::new(f, vec![0, 1], vec!["a".into(), "b".into()]).unwrap();
        assert!(d.require_both_classes().is_ok());
        assert!(d.subset(&[0]).unwrap().require_both_classes().is_err());
    }

    fn dense_strategy() -> impl Strategy<Value = (usize, Vec<Vec<u8>>)> {
        (1usize..12).prop_flat_map(|c| {
            (Just(c), prop::collection::vec(prop::collection::vec(0u8..2, c), 0..10))
        })
    }

    proptest! {
        #[test]
        fn dense_round_trip((c, dense) in dense_strategy()) {
            let s = SparseBinaryMatrix::from_dense(&dense, c).unwrap();
            prop_assert_eq!(s.to_dense(), dense);
        }

        #[test]
        fn select_rows_composes(
            (c, dense) in dense_strategy(),
            a in prop::collection::vec(any::<prop::sample::Index>(), 0..8),
            b in prop::collection::vec(any::<prop::sample::Index>(), 0..8),
        ) {
            prop_assume!(!dense.is_empty());
            let s = SparseBinaryMatrix::from_dense(&dense, c).unwrap();
            let a: Vec<usize> = a.iter().map(|i| i.index(dense.len())).collect();
            prop_assume!(!a.is_empty());
            let b: Vec<usize> = b.iter().map(|i| i.index(a.len())).collect();
            let twice = s.select_rows(&a).unwrap().select_rows(&b).unwrap();
            let composed: Vec<usize> = b.iter().map(|&k| a[k]).collect();
            prop_assert_eq!(twice, s.select_rows(&composed).unwrap());
        }
    }
}
