use std::collections::{BTreeMap, BTreeSet};

use stackdx::ingest::{is_meningitis_code, load_tables, Tables};
use stackdx::synth::{emit_csvs, generate_cohort, RiskCode, SyntheticSpec, CASE_CODE};

fn carriers(tables: &Tables, code: &str) -> BTreeSet<u64> {
    tables
        .diagnoses
        .iter()
        .filter(|d| d.icd9_code == code)
        .map(|d| d.subject_id)
        .collect()
}

#[test]
fn case_count_is_binomial() {
    let spec = SyntheticSpec {
        n_patients: 50_000,
        case_count: None,
        vocab_size: 20,
        ..SyntheticSpec::default()
    };
    let cohort = generate_cohort(&spec).unwrap();
    let (n, p) = (spec.n_patients as f64, spec.prevalence);
    let sd = (n * p * (1.0 - p)).sqrt();
    let got = cohort.cases.len() as f64;
    assert!((got - n * p).abs() <= 4.0 * sd, "{got} cases, expected {} +- {}", n * p, 4.0 * sd);
}

#[test]
fn planted_odds_ratios_show_up_in_rates() {
    let spec = SyntheticSpec {
        n_patients: 20_000,
        case_count: Some(4_000),
        vocab_size: 20,
        risk_codes: vec![RiskCode::new("7000", 1.0), RiskCode::new("7001", 10.0)],
        ..SyntheticSpec::default()
    };
    let cohort = generate_cohort(&spec).unwrap();
    let n_cases = cohort.cases.len() as f64;
    let n_controls = spec.n_patients as f64 - n_cases;
    let rates = |code: &str| {
        let c = carriers(&cohort.tables, code);
        let in_cases = c.iter().filter(|s| cohort.cases.contains(s)).count() as f64;
        (in_cases / n_cases, (c.len() as f64 - in_cases) / n_controls)
    };
    let q = spec.risk_base_rate;
    let control_sd = (q * (1.0 - q) / n_controls).sqrt();

    let (case_rate, control_rate) = rates("7000");
    assert!((case_rate / control_rate - 1.0).abs() <= 0.10, "{case_rate} vs {control_rate}");
    assert!((control_rate - q).abs() <= 3.0 * control_sd);

    let (case_rate, control_rate) = rates("7001");
    let expected = spec.case_rate(10.0);
    assert!((case_rate - expected).abs() <= 4.0 * (expected * (1.0 - expected) / n_cases).sqrt());
    assert!((control_rate - q).abs() <= 3.0 * control_sd);
}

#[test]
fn cases_are_diagnosed_on_their_last_admission() {
    let cohort = generate_cohort(&SyntheticSpec::default()).unwrap();
    assert_eq!(cohort.cases.len(), 60);
    let mut last: BTreeMap<u64, (chrono::NaiveDateTime, u64)> = BTreeMap::new();
    let mut count: BTreeMap<u64, usize> = BTreeMap::new();
    for a in &cohort.tables.admissions {
        *count.entry(a.subject_id).or_default() += 1;
        let e = last.entry(a.subject_id).or_insert((a.admit_time, a.hadm_id));
        if a.admit_time > e.0 {
            *e = (a.admit_time, a.hadm_id);
        }
    }
    for d in cohort.tables.diagnoses.iter().filter(|d| is_meningitis_code(&d.icd9_code)) {
        assert_eq!(d.icd9_code, CASE_CODE);
        assert!(cohort.cases.contains(&d.subject_id));
        assert_eq!(last[&d.subject_id].1, d.hadm_id);
    }
    assert!(cohort.cases.iter().all(|s| count[s] >= 2));
}

#[test]
fn emitted_csvs_are_reproducible_and_reload() {
    let spec = SyntheticSpec {
        n_patients: 800,
        case_count: Some(20),
        ..SyntheticSpec::default()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let pa = emit_csvs(&generate_cohort(&spec).unwrap().tables, a.path()).unwrap();
    let pb = emit_csvs(&generate_cohort(&spec).unwrap().tables, b.path()).unwrap();
    for (x, y) in [
        (&pa.patients, &pb.patients),
        (&pa.admissions, &pb.admissions),
        (&pa.diagnoses, &pb.diagnoses),
        (&pa.procedures, &pb.procedures),
    ] {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap(), "{}", x.display());
    }
    let (loaded, report) = load_tables(&pa).unwrap();
    assert_eq!(loaded, generate_cohort(&spec).unwrap().tables);
    for t in [&report.patients, &report.admissions, &report.diagnoses, &report.procedures] {
        assert_eq!(t.kept, t.rows_read);
    }

    let other = SyntheticSpec { seed: spec.seed + 1, ..spec };
    let c = tempfile::tempdir().unwrap();
    let pc = emit_csvs(&generate_cohort(&other).unwrap().tables, c.path()).unwrap();
    assert_ne!(std::fs::read(&pa.diagnoses).unwrap(), std::fs::read(&pc.diagnoses).unwrap());
}
