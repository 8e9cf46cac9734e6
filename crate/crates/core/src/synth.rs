//! Synthetic MIMIC-schema cohorts with planted risk codes.
//!
//! Every diagnosis code is an independent Bernoulli draw per patient. Noise
//! codes share one background rate for cases and controls; a risk code with
//! odds ratio `r` appears in controls at `q0 = risk_base_rate` and in cases at
//! the tilted rate `q1 = r q0 / (1 - q0 + r q0)`. Case codes are placed in
//! admissions before the diagnosing admission, which carries `3220` plus
//! codes that the temporal filter must drop.

use std::collections::BTreeSet;
use std::path::Path;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{
    format_timestamp, is_meningitis_code, AdmissionRecord, CodeRecord, Gender, PatientRecord, TablePaths, Tables,
};
use crate::rng::{Rng, RngPlan};

/// Code recorded in every case's diagnosing admission.
pub const CASE_CODE: &str = "3220";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskCode {
    pub code: String,
    pub odds_ratio: f64,
}

impl RiskCode {
    pub fn new(code: &str, odds_ratio: f64) -> Self {
        Self {
            code: code.to_string(),
            odds_ratio,
        }
    }
}

/// Default planted codes: obstructive hydrocephalus, subarachnoid hemorrhage,
/// shunt complication, convulsions, intracerebral hemorrhage and secondary
/// brain neoplasm.
pub fn default_risk_codes() -> Vec<RiskCode> {
    vec![
        RiskCode::new("3314", 20.0),
        RiskCode::new("430", 15.0),
        RiskCode::new("99663", 12.0),
        RiskCode::new("78039", 10.0),
        RiskCode::new("431", 8.0),
        RiskCode::new("1983", 5.0),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_patients: usize,
    /// Probability that a patient is a case; ignored when `case_count` is set.
    pub prevalence: f64,
    /// Exact number of cases, drawn uniformly among the patients.
    pub case_count: Option<usize>,
    /// Distinct diagnosis codes, risk codes included.
    pub vocab_size: usize,
    /// Per-patient probability of each noise code.
    pub background_rate: f64,
    pub risk_codes: Vec<RiskCode>,
    /// Per-patient probability of each risk code among controls.
    pub risk_base_rate: f64,
    pub min_admissions: usize,
    pub max_admissions: usize,
    pub procedure_vocab_size: usize,
    pub procedure_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_patients: 5060,
            prevalence: 0.0046,
            case_count: Some(60),
            vocab_size: 1000,
            background_rate: 0.003,
            risk_codes: default_risk_codes(),
            risk_base_rate: 0.2,
            min_admissions: 1,
            max_admissions: 4,
            procedure_vocab_size: 40,
            procedure_rate: 0.01,
            seed: 7,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.prevalence > 0.0 && self.prevalence < 1.0) {
            return Err(Error::invalid("prevalence must lie in (0, 1)"));
        }
        for (name, r) in [
            ("background_rate", self.background_rate),
            ("risk_base_rate", self.risk_base_rate),
            ("procedure_rate", self.procedure_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.vocab_size < self.risk_codes.len() {
            return Err(Error::invalid(format!(
                "vocabulary of {} cannot hold {} risk codes",
                self.vocab_size,
                self.risk_codes.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for rc in &self.risk_codes {
            if !(rc.odds_ratio > 0.0 && rc.odds_ratio.is_finite()) {
                return Err(Error::invalid(format!("odds ratio of {} must be positive", rc.code)));
            }
            if is_meningitis_code(&rc.code) || !seen.insert(rc.code.as_str()) {
                return Err(Error::invalid(format!("risk code {} is reserved or repeated", rc.code)));
            }
        }
        if self.min_admissions == 0 || self.min_admissions > self.max_admissions {
            return Err(Error::invalid("admission range must satisfy 1 <= min <= max"));
        }
        if self.case_count.is_some_and(|c| c > self.n_patients) {
            return Err(Error::invalid("case_count exceeds n_patients"));
        }
        Ok(())
    }

    /// Case-side probability of a risk code with odds ratio `r`.
    pub fn case_rate(&self, r: f64) -> f64 {
        let q = self.risk_base_rate;
        r * q / (1.0 - q + r * q)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCohort {
    pub tables: Tables,
    pub cases: BTreeSet<u64>,
    /// Noise diagnosis codes in vocabulary order.
    pub noise_codes: Vec<String>,
}

fn noise_codes(spec: &SyntheticSpec) -> Vec<String> {
    let taken: BTreeSet<&str> = spec.risk_codes.iter().map(|r| r.code.as_str()).collect();
    (0u32..)
        .map(|i| format!("{:05}", 50_000 + i))
        .filter(|c| !taken.contains(c.as_str()) && !is_meningitis_code(c))
        .take(spec.vocab_size - spec.risk_codes.len())
        .collect()
}

fn draw_subset(rng: &mut Rng, n: usize, p: f64) -> Vec<usize> {
    if n == 0 || p == 0.0 {
        return Vec::new();
    }
    let k = Binomial::new(n as u64, p).expect("rate in [0, 1]").sample(rng) as usize;
    let mut picked = index::sample(rng, n, k).into_vec();
    picked.sort_unstable();
    picked
}

fn epoch() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2100, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid date")
}

/// Draws a cohort. Patient `i` (subject id `i + 1`) uses the stream
/// `plan.rng("patient", i)`, so each patient is independent of the others.
pub fn generate_cohort(spec: &SyntheticSpec) -> Result<SyntheticCohort> {
    spec.validate()?;
    let plan = RngPlan::new(spec.seed);
    let n = spec.n_patients;
    let is_case: Vec<bool> = match spec.case_count {
        Some(c) => {
            let mut flags = vec![false; n];
            for i in index::sample(&mut plan.rng("cases", 0), n, c) {
                flags[i] = true;
            }
            flags
        }
        None => {
            let mut rng = plan.rng("cases", 0);
            (0..n).map(|_| rng.random_bool(spec.prevalence)).collect()
        }
    };
    let noise = noise_codes(spec);
    let procedures: Vec<String> = (0..spec.procedure_vocab_size).map(|i| format!("{:04}", 9000 + i)).collect();
    let mut tables = Tables::default();
    let mut cases = BTreeSet::new();
    let mut next_hadm = 100_001u64;

    for (i, &case) in is_case.iter().enumerate() {
        let mut rng = plan.rng("patient", i as u64);
        let subject_id = i as u64 + 1;
        if case {
            cases.insert(subject_id);
        }
        let gender = if rng.random_bool(0.5) { Gender::M } else { Gender::F };
        tables.patients.push(PatientRecord { subject_id, gender });

        let mut n_adm = rng.random_range(spec.min_admissions..=spec.max_admissions);
        if case {
            n_adm = n_adm.max(2);
        }
        let mut t = epoch() + Duration::days(rng.random_range(0..3650)) + Duration::seconds(rng.random_range(0..86_400));
        let mut hadms = Vec::with_capacity(n_adm);
        for _ in 0..n_adm {
            let admit = t;
            let discharge = admit + Duration::days(rng.random_range(1..=20)) + Duration::seconds(rng.random_range(0..86_400));
            tables.admissions.push(AdmissionRecord {
                subject_id,
                hadm_id: next_hadm,
                admit_time: admit,
                discharge_time: Some(discharge),
            });
            hadms.push(next_hadm);
            next_hadm += 1;
            t = discharge + Duration::days(rng.random_range(1..=365));
        }
        // Cases: the last admission diagnoses; earlier ones carry the history.
        let history = if case { &hadms[..n_adm - 1] } else { &hadms[..] };
        let mut per_adm: Vec<Vec<String>> = vec![Vec::new(); n_adm];
        if case {
            per_adm[n_adm - 1].push(CASE_CODE.to_string());
        }
        for rc in &spec.risk_codes {
            let p = if case { spec.case_rate(rc.odds_ratio) } else { spec.risk_base_rate };
            if rng.random_bool(p) {
                per_adm[rng.random_range(0..history.len())].push(rc.code.clone());
            }
        }
        for j in draw_subset(&mut rng, noise.len(), spec.background_rate) {
            per_adm[rng.random_range(0..history.len())].push(noise[j].clone());
        }
        if case {
            for j in draw_subset(&mut rng, noise.len(), spec.background_rate) {
                if !per_adm[n_adm - 1].contains(&noise[j]) {
                    per_adm[n_adm - 1].push(noise[j].clone());
                }
            }
        }
        for (a, codes) in per_adm.into_iter().enumerate() {
            tables.diagnoses.extend(codes.into_iter().map(|icd9_code| CodeRecord {
                subject_id,
                hadm_id: hadms[a],
                icd9_code,
            }));
        }
        for j in draw_subset(&mut rng, procedures.len(), spec.procedure_rate) {
            tables.procedures.push(CodeRecord {
                subject_id,
                hadm_id: hadms[rng.random_range(0..n_adm)],
                icd9_code: procedures[j].clone(),
            });
        }
    }
    Ok(SyntheticCohort {
        tables,
        cases,
        noise_codes: noise,
    })
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn code_rows<'a>(codes: &'a [CodeRecord]) -> impl Iterator<Item = Vec<String>> + 'a {
    let mut seq = 0u32;
    let mut last = None;
    codes.iter().enumerate().map(move |(k, c)| {
        seq = if last == Some(c.hadm_id) { seq + 1 } else { 1 };
        last = Some(c.hadm_id);
        vec![
            (k + 1).to_string(),
            c.subject_id.to_string(),
            c.hadm_id.to_string(),
            seq.to_string(),
            c.icd9_code.clone(),
        ]
    })
}

/// Writes `PATIENTS.csv`, `ADMISSIONS.csv`, `DIAGNOSES_ICD.csv` and
/// `PROCEDURES_ICD.csv` with MIMIC-III column names, creating `dir` if needed.
pub fn emit_csvs(tables: &Tables, dir: &Path) -> Result<TablePaths> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = TablePaths::in_dir(dir);
    let dob = "2060-01-01 00:00:00";
    write_csv(
        &paths.patients,
        &["ROW_ID", "SUBJECT_ID", "GENDER", "DOB", "EXPIRE_FLAG"],
        tables.patients.iter().enumerate().map(|(k, p)| {
            let g = match p.gender {
                Gender::F => "F",
                Gender::M => "M",
            };
            vec![(k + 1).to_string(), p.subject_id.to_string(), g.into(), dob.into(), "0".into()]
        }),
    )?;
    write_csv(
        &paths.admissions,
        &["ROW_ID", "SUBJECT_ID", "HADM_ID", "ADMITTIME", "DISCHTIME", "ADMISSION_TYPE"],
        tables.admissions.iter().enumerate().map(|(k, a)| {
            vec![
                (k + 1).to_string(),
                a.subject_id.to_string(),
                a.hadm_id.to_string(),
                format_timestamp(&a.admit_time),
                a.discharge_time.as_ref().map(format_timestamp).unwrap_or_default(),
                "EMERGENCY".into(),
            ]
        }),
    )?;
    let code_header = ["ROW_ID", "SUBJECT_ID", "HADM_ID", "SEQ_NUM", "ICD9_CODE"];
    write_csv(&paths.diagnoses, &code_header, code_rows(&tables.diagnoses))?;
    write_csv(&paths.procedures, &code_header, code_rows(&tables.procedures))?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{build_cohorts, load_tables};

    fn small() -> SyntheticSpec {
        SyntheticSpec {
            n_patients: 300,
            case_count: Some(20),
            vocab_size: 60,
            background_rate: 0.05,
            ..Default::default()
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let bad = SyntheticSpec { vocab_size: 3, ..small() };
        assert!(bad.validate().is_err());
        let bad = SyntheticSpec { prevalence: 0.0, ..small() };
        assert!(bad.validate().is_err());
        let bad = SyntheticSpec { risk_codes: vec![RiskCode::new("430", 0.0)], ..small() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn case_rate_applies_odds_ratio() {
        let s = SyntheticSpec { risk_base_rate: 0.2, ..small() };
        let q1 = s.case_rate(4.0);
        let odds = |p: f64| p / (1.0 - p);
        assert!((odds(q1) / odds(0.2) - 4.0).abs() < 1e-12);
        assert_eq!(s.case_rate(1.0), 0.2);
    }

    #[test]
    fn cases_diagnosed_only_in_last_admission() {
        let c = generate_cohort(&small()).unwrap();
        assert_eq!(c.cases.len(), 20);
        let cohorts = build_cohorts(&c.tables);
        assert_eq!(cohorts.case_ids, c.cases);
        for d in &c.tables.diagnoses {
            if d.icd9_code == CASE_CODE {
                let last = c.tables.admissions.iter().filter(|a| a.subject_id == d.subject_id).map(|a| a.hadm_id).max();
                assert_eq!(Some(d.hadm_id), last);
            }
        }
        let mut times: Vec<_> = c.tables.admissions.iter().map(|a| (a.subject_id, a.admit_time)).collect();
        let sorted = times.clone();
        times.sort();
        assert_eq!(times, sorted, "admissions strictly ordered per patient");
    }

    #[test]
    fn emit_then_load_round_trips() {
        let c = generate_cohort(&small()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_csvs(&c.tables, dir.path()).unwrap();
        let (loaded, report) = load_tables(&paths).unwrap();
        assert_eq!(report.diagnoses.kept, c.tables.diagnoses.len());
        let sorted = |mut v: Vec<CodeRecord>| {
            v.sort_by(|a, b| (a.subject_id, a.hadm_id, &a.icd9_code).cmp(&(b.subject_id, b.hadm_id, &b.icd9_code)));
            v
        };
        assert_eq!(sorted(loaded.diagnoses), sorted(c.tables.diagnoses.clone()));
        assert_eq!(sorted(loaded.procedures), sorted(c.tables.procedures.clone()));
        assert_eq!(loaded.patients, c.tables.patients);
        assert_eq!(loaded.admissions, c.tables.admissions);
        let header = std::fs::read_to_string(&paths.diagnoses).unwrap();
        assert!(header.starts_with("ROW_ID,SUBJECT_ID,HADM_ID,SEQ_NUM,ICD9_CODE\n"));
    }

    #[test]
    fn empty_cohort_writes_headers_only() {
        let spec = SyntheticSpec { n_patients: 0, case_count: Some(0), ..small() };
        let c = generate_cohort(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_csvs(&c.tables, dir.path()).unwrap();
        let text = std::fs::read_to_string(paths.patients).unwrap();
        assert_eq!(text, "ROW_ID,SUBJECT_ID,GENDER,DOB,EXPIRE_FLAG\n");
    }
}
