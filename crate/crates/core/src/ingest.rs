//! MIMIC-style CSV ingestion, meningitis cohort construction and one-hot
//! encoding with temporal leakage exclusion.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::hash::Hash;
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureVocabulary, LabeledDataset, SparseBinaryMatrix, GENDER};
use crate::error::{Error, Result};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

/// ICD-9 prefix shared by all meningitis diagnoses.
pub const MENINGITIS_PREFIX: &str = "322";

/// Prefix applied to procedure codes when they are included as features.
pub const PROCEDURE_PREFIX: &str = "P:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gender {
    F,
    M,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PatientRecord {
    pub subject_id: u64,
    pub gender: Gender,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AdmissionRecord {
    pub subject_id: u64,
    pub hadm_id: u64,
    pub admit_time: NaiveDateTime,
    pub discharge_time: Option<NaiveDateTime>,
}

/// A diagnosis (DIAGNOSES_ICD) or procedure (PROCEDURES_ICD) row.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CodeRecord {
    pub subject_id: u64,
    pub hadm_id: u64,
    pub icd9_code: String,
}

pub type DiagnosisRecord = CodeRecord;
pub type ProcedureRecord = CodeRecord;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tables {
    pub patients: Vec<PatientRecord>,
    pub admissions: Vec<AdmissionRecord>,
    pub diagnoses: Vec<DiagnosisRecord>,
    pub procedures: Vec<ProcedureRecord>,
}

#[derive(Debug, Clone)]
pub struct TablePaths {
    pub patients: PathBuf,
    pub admissions: PathBuf,
    pub diagnoses: PathBuf,
    pub procedures: PathBuf,
}

impl TablePaths {
    /// The four MIMIC-III file names inside `dir`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            patients: dir.join("PATIENTS.csv"),
            admissions: dir.join("ADMISSIONS.csv"),
            diagnoses: dir.join("DIAGNOSES_ICD.csv"),
            procedures: dir.join("PROCEDURES_ICD.csv"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableReport {
    pub rows_read: usize,
    pub dropped_missing_key: usize,
    pub dropped_bad_timestamp: usize,
    pub dropped_invalid: usize,
    pub duplicates_removed: usize,
    pub kept: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub patients: TableReport,
    pub admissions: TableReport,
    pub diagnoses: TableReport,
    pub procedures: TableReport,
    /// Diagnoses whose HADM_ID matches no admission (or a different patient).
    pub diagnoses_unknown_admission: usize,
    /// Patient-code pairs whose code was not in the vocabulary.
    pub codes_skipped: usize,
    /// Cohort members with no PATIENTS row; their GENDER bit is 0.
    pub missing_patient_record: usize,
    pub n_cases: usize,
    pub n_controls: usize,
    pub vocabulary_size: usize,
}

pub fn normalize_icd9(raw: &str) -> Result<String> {
    let code: String = raw
        .trim()
        .chars()
        .filter(|&c| c != '.')
        .map(|c| c.to_ascii_uppercase())
        .collect();
    if code.is_empty() {
        return Err(Error::invalid(format!("empty ICD-9 code {raw:?}")));
    }
    Ok(code)
}

pub fn is_meningitis_code(code: &str) -> bool {
    code.starts_with(MENINGITIS_PREFIX)
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    NaiveDateTime::parse_from_str(s.trim(), TIMESTAMP_FORMAT).ok()
}

pub fn format_timestamp(t: &NaiveDateTime) -> String {
    t.format(TIMESTAMP_FORMAT).to_string()
}

/// Column positions for the required headers, matched case-insensitively.
struct Columns {
    path: PathBuf,
    positions: HashMap<String, usize>,
}

impl Columns {
    fn new(path: &Path, headers: &csv::StringRecord, required: &[&str]) -> Result<Self> {
        let upper: HashMap<String, usize> = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().to_ascii_uppercase(), i))
            .collect();
        let mut positions = HashMap::new();
        for &col in required {
            let i = *upper.get(col).ok_or_else(|| Error::MissingColumn {
                path: path.to_path_buf(),
                column: col.to_string(),
            })?;
            positions.insert(col.to_string(), i);
        }
        Ok(Self {
            path: path.to_path_buf(),
            positions,
        })
    }

    fn get<'r>(&self, rec: &'r csv::StringRecord, col: &str) -> &'r str {
        rec.get(self.positions[col]).unwrap_or("").trim()
    }
}

enum RowOutcome<T> {
    Keep(T),
    MissingKey,
    BadTimestamp,
    Invalid,
}

fn read_table<T, F>(path: &Path, required: &[&str], parse: F) -> Result<(Vec<T>, TableReport)>
where
    T: Clone + Eq + Hash,
    F: Fn(&Columns, &csv::StringRecord) -> RowOutcome<T>,
{
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(std::io::BufReader::new(file));
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let headers = reader.headers().map_err(csv_err)?.clone();
    let cols = Columns::new(path, &headers, required)?;

    let mut report = TableReport::default();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|source| Error::Csv {
            path: cols.path.clone(),
            source,
        })?;
        report.rows_read += 1;
        match parse(&cols, &rec) {
            RowOutcome::Keep(t) => {
                if seen.insert(t.clone()) {
                    out.push(t);
                } else {
                    report.duplicates_removed += 1;
                }
            }
            RowOutcome::MissingKey => report.dropped_missing_key += 1,
            RowOutcome::BadTimestamp => report.dropped_bad_timestamp += 1,
            RowOutcome::Invalid => report.dropped_invalid += 1,
        }
    }
    report.kept = out.len();
    Ok((out, report))
}

fn parse_id(s: &str) -> Option<u64> {
    if s.is_empty() {
        None
    } else {
        s.parse().ok()
    }
}

fn parse_patient(cols: &Columns, rec: &csv::StringRecord) -> RowOutcome<PatientRecord> {
    let Some(subject_id) = parse_id(cols.get(rec, "SUBJECT_ID")) else {
        return RowOutcome::MissingKey;
    };
    let gender = match cols.get(rec, "GENDER").to_ascii_uppercase().as_str() {
        "M" => Gender::M,
        "F" => Gender::F,
        _ => return RowOutcome::Invalid,
    };
    RowOutcome::Keep(PatientRecord { subject_id, gender })
}

fn parse_admission(cols: &Columns, rec: &csv::StringRecord) -> RowOutcome<AdmissionRecord> {
    let (Some(subject_id), Some(hadm_id)) = (
        parse_id(cols.get(rec, "SUBJECT_ID")),
        parse_id(cols.get(rec, "HADM_ID")),
    ) else {
        return RowOutcome::MissingKey;
    };
    let Some(admit_time) = parse_timestamp(cols.get(rec, "ADMITTIME")) else {
        return RowOutcome::BadTimestamp;
    };
    let disch = cols.get(rec, "DISCHTIME");
    let discharge_time = if disch.is_empty() {
        None
    } else {
        match parse_timestamp(disch) {
            Some(t) => Some(t),
            None => return RowOutcome::BadTimestamp,
        }
    };
    if discharge_time.is_some_and(|d| d < admit_time) {
        return RowOutcome::Invalid;
    }
    RowOutcome::Keep(AdmissionRecord {
        subject_id,
        hadm_id,
        admit_time,
        discharge_time,
    })
}

fn parse_code(cols: &Columns, rec: &csv::StringRecord) -> RowOutcome<CodeRecord> {
    let (Some(subject_id), Some(hadm_id)) = (
        parse_id(cols.get(rec, "SUBJECT_ID")),
        parse_id(cols.get(rec, "HADM_ID")),
    ) else {
        return RowOutcome::MissingKey;
    };
    match normalize_icd9(cols.get(rec, "ICD9_CODE")) {
        Ok(icd9_code) => RowOutcome::Keep(CodeRecord {
            subject_id,
            hadm_id,
            icd9_code,
        }),
        Err(_) => RowOutcome::Invalid,
    }
}

const PATIENT_COLUMNS: &[&str] = &["SUBJECT_ID", "GENDER"];
const ADMISSION_COLUMNS: &[&str] = &["SUBJECT_ID", "HADM_ID", "ADMITTIME", "DISCHTIME"];
const CODE_COLUMNS: &[&str] = &["SUBJECT_ID", "HADM_ID", "ICD9_CODE"];

/// Reads the four tables in parallel. Rows without keys, with unparsable
/// timestamps or with invalid values are dropped and counted; exact duplicate
/// records are removed and counted.
pub fn load_tables(paths: &TablePaths) -> Result<(Tables, IngestReport)> {
    let ((patients, admissions), (diagnoses, procedures)) = rayon::join(
        || {
            rayon::join(
                || read_table(&paths.patients, PATIENT_COLUMNS, parse_patient),
                || read_table(&paths.admissions, ADMISSION_COLUMNS, parse_admission),
            )
        },
        || {
            rayon::join(
                || read_table(&paths.diagnoses, CODE_COLUMNS, parse_code),
                || read_table(&paths.procedures, CODE_COLUMNS, parse_code),
            )
        },
    );
    let (mut patients, mut p_rep) = patients?;
    let (admissions, a_rep) = admissions?;
    let (diagnoses, d_rep) = diagnoses?;
    let (procedures, pr_rep) = procedures?;

    // SUBJECT_ID must be unique in PATIENTS; conflicting rows keep the first.
    let mut ids = HashSet::new();
    patients.retain(|p| {
        let fresh = ids.insert(p.subject_id);
        if !fresh {
            p_rep.dropped_invalid += 1;
        }
        fresh
    });
    p_rep.kept = patients.len();

    let report = IngestReport {
        patients: p_rep,
        admissions: a_rep,
        diagnoses: d_rep,
        procedures: pr_rep,
        ..Default::default()
    };
    Ok((
        Tables {
            patients,
            admissions,
            diagnoses,
            procedures,
        },
        report,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FirstDiagnosis {
    pub hadm_id: u64,
    pub admit_time: NaiveDateTime,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CohortAssignment {
    pub case_ids: BTreeSet<u64>,
    pub control_ids: BTreeSet<u64>,
    pub first_dx_admission: BTreeMap<u64, FirstDiagnosis>,
    pub diagnoses_unknown_admission: usize,
}

impl CohortAssignment {
    pub fn is_case(&self, subject_id: u64) -> bool {
        self.case_ids.contains(&subject_id)
    }

    /// Whether features recorded in `adm` may be used for its patient:
    /// controls use every admission, cases only admissions that began strictly
    /// before their first meningitis-coded admission.
    pub fn is_eligible(&self, adm: &AdmissionRecord) -> bool {
        match self.first_dx_admission.get(&adm.subject_id) {
            Some(first) => adm.admit_time < first.admit_time,
            None => true,
        }
    }

    /// All cohort subject ids in ascending order.
    pub fn subjects(&self) -> impl Iterator<Item = u64> + '_ {
        let mut all: Vec<u64> = self.case_ids.iter().chain(&self.control_ids).copied().collect();
        all.sort_unstable();
        all.into_iter()
    }
}

fn admission_index(tables: &Tables) -> HashMap<u64, &AdmissionRecord> {
    tables.admissions.iter().map(|a| (a.hadm_id, a)).collect()
}

/// Resolves the admission a code row belongs to, if it exists and belongs to
/// the same patient.
fn resolve<'a>(
    index: &HashMap<u64, &'a AdmissionRecord>,
    rec: &CodeRecord,
) -> Option<&'a AdmissionRecord> {
    index
        .get(&rec.hadm_id)
        .copied()
        .filter(|a| a.subject_id == rec.subject_id)
}

pub fn build_cohorts(tables: &Tables) -> CohortAssignment {
    let index = admission_index(tables);
    let mut first: BTreeMap<u64, FirstDiagnosis> = BTreeMap::new();
    let mut unknown = 0;
    for dx in &tables.diagnoses {
        let Some(adm) = resolve(&index, dx) else {
            unknown += 1;
            continue;
        };
        if !is_meningitis_code(&dx.icd9_code) {
            continue;
        }
        let cand = FirstDiagnosis {
            hadm_id: adm.hadm_id,
            admit_time: adm.admit_time,
        };
        first
            .entry(adm.subject_id)
            .and_modify(|cur| {
                if (cand.admit_time, cand.hadm_id) < (cur.admit_time, cur.hadm_id) {
                    *cur = cand;
                }
            })
            .or_insert(cand);
    }
    if unknown > 0 {
        log::warn!("{unknown} diagnoses reference unknown admissions and were ignored");
    }
    let with_admission: BTreeSet<u64> = tables.admissions.iter().map(|a| a.subject_id).collect();
    let case_ids: BTreeSet<u64> = first.keys().copied().collect();
    let control_ids = with_admission.difference(&case_ids).copied().collect();
    CohortAssignment {
        case_ids,
        control_ids,
        first_dx_admission: first,
        diagnoses_unknown_admission: unknown,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodeOptions {
    /// Add procedure codes (prefixed `P:`) to the feature space.
    pub include_procedures: bool,
}

/// Yields `(subject_id, feature name)` for every eligible code occurrence,
/// excluding meningitis codes.
fn eligible_codes<'a>(
    tables: &'a Tables,
    cohorts: &'a CohortAssignment,
    options: EncodeOptions,
) -> impl Iterator<Item = (u64, String)> + 'a {
    let index = admission_index(tables);
    let dx = tables.diagnoses.iter().map(|r| (r, false));
    let pr = tables
        .procedures
        .iter()
        .filter(move |_| options.include_procedures)
        .map(|r| (r, true));
    dx.chain(pr).filter_map(move |(rec, is_proc)| {
        let adm = resolve(&index, rec)?;
        if !cohorts.is_eligible(adm) {
            return None;
        }
        if is_proc {
            Some((adm.subject_id, format!("{PROCEDURE_PREFIX}{}", rec.icd9_code)))
        } else if is_meningitis_code(&rec.icd9_code) {
            None
        } else {
            Some((adm.subject_id, rec.icd9_code.clone()))
        }
    })
}

/// `GENDER` followed by every eligible non-meningitis code in lexicographic
/// order.
pub fn build_vocabulary(
    tables: &Tables,
    cohorts: &CohortAssignment,
    options: EncodeOptions,
) -> FeatureVocabulary {
    let codes: BTreeSet<String> = eligible_codes(tables, cohorts, options)
        .map(|(_, c)| c)
        .collect();
    let entries = std::iter::once(GENDER.to_string()).chain(codes).collect();
    FeatureVocabulary::new(entries).expect("codes are distinct and never equal GENDER")
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EncodeReport {
    pub codes_skipped: usize,
    pub missing_patient_record: usize,
}

/// One row per cohort patient in ascending SUBJECT_ID order.
pub fn encode_features(
    tables: &Tables,
    cohorts: &CohortAssignment,
    vocab: &FeatureVocabulary,
    options: EncodeOptions,
) -> (LabeledDataset, EncodeReport) {
    let subjects: Vec<u64> = cohorts.subjects().collect();
    let row_of: HashMap<u64, usize> = subjects.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let gender: HashMap<u64, Gender> = tables
        .patients
        .iter()
        .map(|p| (p.subject_id, p.gender))
        .collect();
    let gender_col = vocab.lookup(GENDER).expect("vocabulary invariant") as u32;

    let mut report = EncodeReport::default();
    let mut rows: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); subjects.len()];
    for (i, s) in subjects.iter().enumerate() {
        match gender.get(s) {
            Some(Gender::M) => {
                rows[i].insert(gender_col);
            }
            Some(Gender::F) => {}
            None => report.missing_patient_record += 1,
        }
    }
    let mut skipped = HashSet::new();
    for (subject, code) in eligible_codes(tables, cohorts, options) {
        let i = row_of[&subject];
        match vocab.lookup(&code) {
            Some(j) => {
                rows[i].insert(j as u32);
            }
            None => {
                skipped.insert((subject, code));
            }
        }
    }
    report.codes_skipped = skipped.len();

    let rows = rows.into_iter().map(|r| r.into_iter().collect()).collect();
    let features = SparseBinaryMatrix::from_rows(vocab.len(), rows).expect("sorted, in range");
    let labels = subjects.iter().map(|s| u8::from(cohorts.is_case(*s))).collect();
    let ids = subjects.iter().map(u64::to_string).collect();
    let data = LabeledDataset::with_fingerprint(features, labels, ids, vocab.fingerprint())
        .expect("subject ids are unique");
    (data, report)
}

/// Result of running cohort construction and encoding over loaded tables.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub vocabulary: FeatureVocabulary,
    pub dataset: LabeledDataset,
    pub cohorts: CohortAssignment,
    pub report: IngestReport,
}

pub fn ingest_tables(tables: &Tables, mut report: IngestReport, options: EncodeOptions) -> Ingested {
    let cohorts = build_cohorts(tables);
    let vocabulary = build_vocabulary(tables, &cohorts, options);
    let (dataset, enc) = encode_features(tables, &cohorts, &vocabulary, options);
    report.diagnoses_unknown_admission = cohorts.diagnoses_unknown_admission;
    report.codes_skipped = enc.codes_skipped;
    report.missing_patient_record = enc.missing_patient_record;
    report.n_cases = cohorts.case_ids.len();
    report.n_controls = cohorts.control_ids.len();
    report.vocabulary_size = vocabulary.len();
    Ingested {
        vocabulary,
        dataset,
        cohorts,
        report,
    }
}
