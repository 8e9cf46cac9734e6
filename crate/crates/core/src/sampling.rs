//! Balanced undersampling, stratified allocation and K-fold assignment, and
//! construction of the regular and risk-enriched test sets.

use std::collections::HashSet;

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::data::{row_contains, LabeledDataset};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Proportional allocation `n_h = n * N_h / N` rounded by largest remainder so
/// that the allocations sum to `n`. Remainder ties go to the lower stratum.
pub fn stratified_allocation(n: usize, strata: &[usize]) -> Result<Vec<usize>> {
    let total: usize = strata.iter().sum();
    if n > total {
        return Err(Error::invalid(format!(
            "cannot draw {n} samples from a population of {total}"
        )));
    }
    if total == 0 {
        return Ok(vec![0; strata.len()]);
    }
    // Exact integer arithmetic: floor and remainder of n * N_h / N.
    let (n128, t128) = (n as u128, total as u128);
    let mut alloc: Vec<usize> = strata
        .iter()
        .map(|&nh| (n128 * nh as u128 / t128) as usize)
        .collect();
    let mut order: Vec<(u128, usize)> = strata
        .iter()
        .enumerate()
        .map(|(h, &nh)| (n128 * nh as u128 % t128, h))
        .collect();
    order.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let short = n - alloc.iter().sum::<usize>();
    let mut given = 0;
    for &(_, h) in &order {
        if given == short {
            break;
        }
        if alloc[h] < strata[h] {
            alloc[h] += 1;
            given += 1;
        }
    }
    debug_assert_eq!(alloc.iter().sum::<usize>(), n);
    Ok(alloc)
}

/// Draws `k` items uniformly without replacement. Returns `(drawn, rest)`;
/// `rest` keeps the input order.
pub fn reserve_holdout(
    items: &[usize],
    k: usize,
    rng: &mut Rng,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if k > items.len() {
        return Err(Error::NotEnough(format!(
            "holdout of {k} requested from {} cases",
            items.len()
        )));
    }
    let picked = index::sample(rng, items.len(), k).into_vec();
    let mut taken = vec![false; items.len()];
    for &p in &picked {
        taken[p] = true;
    }
    let drawn = picked.iter().map(|&p| items[p]).collect();
    let rest = items
        .iter()
        .zip(&taken)
        .filter(|(_, &t)| !t)
        .map(|(&i, _)| i)
        .collect();
    Ok((drawn, rest))
}

/// All cases plus an equal number of uniformly drawn controls, shuffled.
pub fn undersample_balanced(
    cases: &[usize],
    controls: &[usize],
    rng: &mut Rng,
) -> Result<Vec<usize>> {
    if controls.len() < cases.len() {
        return Err(Error::NotEnough(format!(
            "{} controls cannot balance {} cases",
            controls.len(),
            cases.len()
        )));
    }
    let mut out = cases.to_vec();
    out.extend(
        index::sample(rng, controls.len(), cases.len())
            .into_iter()
            .map(|p| controls[p]),
    );
    out.shuffle(rng);
    Ok(out)
}

/// Assigns each sample a fold in `[0, k)`. Each class is shuffled and dealt
/// round-robin, the positives continuing where the negatives stopped, so every
/// fold holds `floor` or `ceil` of `class_count / k` of each class and fold
/// sizes differ by at most one.
pub fn stratified_kfold(labels: &[u8], k: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::invalid(format!(
            "fold count must be at least 2, got {k}"
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::invalid(format!("label {bad} is not binary")));
    }
    let mut folds = vec![0usize; labels.len()];
    let mut slot = 0usize;
    for class in [0u8, 1u8] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < k {
            return Err(Error::ClassTooSmall {
                label: class,
                count: members.len(),
                folds: k,
            });
        }
        members.shuffle(rng);
        for i in members {
            folds[i] = slot % k;
            slot += 1;
        }
    }
    Ok(folds)
}

/// Sample indices grouped by fold id.
pub fn fold_members(folds: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); k];
    for (i, &f) in folds.iter().enumerate() {
        out[f].push(i);
    }
    out
}

/// Train/test partition of a dataset plus fold ids for the training part.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    /// Fold id per entry of `train_indices`.
    pub fold_assignments: Vec<usize>,
}

impl SplitPlan {
    pub fn validate(&self, k: usize) -> Result<()> {
        if self.fold_assignments.len() != self.train_indices.len() {
            return Err(Error::invalid(
                "fold assignments do not match training size",
            ));
        }
        if self.fold_assignments.iter().any(|&f| f >= k) {
            return Err(Error::invalid(format!("fold id outside [0, {k})")));
        }
        let train: HashSet<_> = self.train_indices.iter().collect();
        if self.test_indices.iter().any(|i| train.contains(i)) {
            return Err(Error::invalid("train and test indices overlap"));
        }
        Ok(())
    }
}

/// A balanced evaluation set and the dataset rows it was drawn from.
#[derive(Debug, Clone)]
pub struct TestSet {
    pub indices: Vec<usize>,
    pub data: LabeledDataset,
}

fn guard_leakage(pool: &[usize], cases: &[usize], training: &[usize]) -> Result<()> {
    let train: HashSet<usize> = training.iter().copied().collect();
    if let Some(i) = pool.iter().chain(cases).find(|i| train.contains(i)) {
        return Err(Error::invalid(format!(
            "test candidate {i} is also a training sample"
        )));
    }
    Ok(())
}

fn assemble(data: &LabeledDataset, cases: &[usize], controls: Vec<usize>) -> Result<TestSet> {
    let mut indices = cases.to_vec();
    indices.extend(controls);
    let subset = data.subset(&indices)?;
    Ok(TestSet {
        indices,
        data: subset,
    })
}

/// Testing Set 1: the held-out cases and as many controls drawn uniformly
/// from `controls_pool`.
pub fn build_testing_set_regular(
    data: &LabeledDataset,
    test_cases: &[usize],
    controls_pool: &[usize],
    training: &[usize],
    rng: &mut Rng,
) -> Result<TestSet> {
    guard_leakage(controls_pool, test_cases, training)?;
    if controls_pool.len() < test_cases.len() {
        return Err(Error::NotEnough(format!(
            "control pool of {} cannot balance {} test cases",
            controls_pool.len(),
            test_cases.len()
        )));
    }
    let controls = index::sample(rng, controls_pool.len(), test_cases.len())
        .into_iter()
        .map(|p| controls_pool[p])
        .collect();
    assemble(data, test_cases, controls)
}

/// Number of distinct `top_features` set in a sparse row.
pub fn risk_feature_count(row: &[u32], top_features: &[usize]) -> usize {
    top_features
        .iter()
        .filter(|&&j| row_contains(row, j))
        .count()
}

/// Testing Set 2: controls restricted to those carrying at least
/// `min_risk_features` distinct members of `top_features`.
pub fn build_testing_set_hard(
    data: &LabeledDataset,
    test_cases: &[usize],
    controls_pool: &[usize],
    training: &[usize],
    top_features: &[usize],
    min_risk_features: usize,
    rng: &mut Rng,
) -> Result<TestSet> {
    guard_leakage(controls_pool, test_cases, training)?;
    let mut top: Vec<usize> = top_features.to_vec();
    top.sort_unstable();
    top.dedup();
    let qualifying: Vec<usize> = controls_pool
        .iter()
        .copied()
        .filter(|&i| risk_feature_count(data.features.row(i), &top) >= min_risk_features)
        .collect();
    if qualifying.len() < test_cases.len() {
        return Err(Error::NotEnough(format!(
            "only {} controls carry >= {min_risk_features} top features; {} needed",
            qualifying.len(),
            test_cases.len()
        )));
    }
    let controls = index::sample(rng, qualifying.len(), test_cases.len())
        .into_iter()
        .map(|p| qualifying[p])
        .collect();
    assemble(data, test_cases, controls)
}
