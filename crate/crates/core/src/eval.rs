//! APFD scoring, multi-run experiments and nonparametric comparisons.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::coverage::BinaryMatrix;
use crate::error::{Error, Result};
use crate::prioritize::{run_seed, Prioritizer, Technique};

/// Significance level for pairwise comparisons.
pub const ALPHA: f64 = 0.05;

/// Default number of runs per technique.
pub const DEFAULT_RUNS: usize = 100;

/// APFD of one ordering plus the mutant bookkeeping behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApfdScore {
    pub value: f64,
    /// Mutants killed by at least one test (the `m` of the formula).
    pub detected: usize,
    /// Mutants no test kills; excluded from the score.
    pub undetected: usize,
}

/// Average percentage of faults detected for `sequence` against `kills`.
///
/// With `n` tests and `m` detected mutants, `TF_i` is the 1-based position
/// of the first test killing mutant `i`, and the score is
/// `1 - ΣTF_i / (n·m) + 1 / (2n)`.
pub fn apfd(sequence: &[String], kills: &BinaryMatrix) -> Result<ApfdScore> {
    let n = kills.row_len();
    if sequence.len() != n {
        return Err(Error::NotAPermutation(format!(
            "ordering has {} tests, matrix has {n} rows",
            sequence.len()
        )));
    }
    let mut seen = vec![false; n];
    let mut rows = Vec::with_capacity(n);
    for id in sequence {
        let r = kills
            .row_index(id)
            .map_err(|_| Error::NotAPermutation(format!("`{id}` is not a matrix row")))?;
        if std::mem::replace(&mut seen[r], true) {
            return Err(Error::NotAPermutation(format!("`{id}` appears twice")));
        }
        rows.push(r);
    }

    let mutants = kills.column_len();
    let mut first_kill = vec![0usize; mutants];
    for (pos, &r) in rows.iter().enumerate() {
        for (c, tf) in first_kill.iter_mut().enumerate() {
            if *tf == 0 && kills.get(r, c) {
                *tf = pos + 1;
            }
        }
    }
    let detected: Vec<usize> = first_kill.into_iter().filter(|&tf| tf > 0).collect();
    let m = detected.len();
    if m == 0 {
        return Err(Error::UndefinedApfd);
    }
    let sum: usize = detected.iter().sum();
    let nf = n as f64;
    Ok(ApfdScore {
        value: 1.0 - sum as f64 / (nf * m as f64) + 1.0 / (2.0 * nf),
        detected: m,
        undetected: mutants - m,
    })
}

/// APFD values of repeated runs of one technique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApfdSamples {
    pub technique: Technique,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl ApfdSamples {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Runs every technique `runs` times with seeds from [`run_seed`] and scores
/// each ordering against the prioritizer's kill matrix. Runs execute in
/// parallel; results keep technique and run-index order.
pub fn run_experiment(
    prioritizer: &Prioritizer<'_>,
    techniques: &[Technique],
    runs: usize,
    base_seed: u64,
) -> Result<Vec<ApfdSamples>> {
    let kills = prioritizer.kills().ok_or(Error::MissingData {
        technique: "APFD evaluation",
        required: "a kill matrix",
    })?;
    if runs == 0 {
        return Err(Error::Config("runs must be positive".into()));
    }
    techniques
        .iter()
        .map(|&technique| {
            prioritizer.prepare(technique)?;
            let tag = |run: usize| {
                move |e: Error| Error::Run {
                    technique: technique.acronym().to_owned(),
                    run,
                    source: Box::new(e),
                }
            };
            let results: Vec<(u64, f64)> = (0..runs)
                .into_par_iter()
                .map(|run| {
                    let seed = run_seed(base_seed, technique, run);
                    let ordering = prioritizer.run(technique, seed).map_err(tag(run))?;
                    let score = apfd(&ordering.sequence, kills).map_err(tag(run))?;
                    Ok((seed, score.value))
                })
                .collect::<Result<_>>()?;
            let (seeds, values) = results.into_iter().unzip();
            Ok(ApfdSamples {
                technique,
                values,
                seeds,
            })
        })
        .collect()
}

/// Ranks with ties averaged, 1-based, in input order.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Mann–Whitney U statistic of `x` (number of pairs with `x > y`, ties
/// counting one half) from rank sums.
fn u_statistic(x: &[f64], y: &[f64]) -> f64 {
    let joined: Vec<f64> = x.iter().chain(y).copied().collect();
    let ranks = average_ranks(&joined);
    let rank_sum: f64 = ranks[..x.len()].iter().sum();
    let m = x.len() as f64;
    rank_sum - m * (m + 1.0) / 2.0
}

/// Vargha–Delaney effect size: probability that a draw from `x` exceeds a
/// draw from `y`, ties counting one half.
pub fn a12(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::EmptySample("x"));
    }
    if y.is_empty() {
        return Err(Error::EmptySample("y"));
    }
    Ok(u_statistic(x, y) / (x.len() as f64 * y.len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MwuMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitney {
    pub u: f64,
    pub p_value: f64,
    pub method: MwuMethod,
}

/// Largest sample size for which the exact null distribution is used.
pub const EXACT_LIMIT: usize = 8;

/// Two-sided Mann–Whitney U test. Uses the exact null distribution when
/// both samples have at most [`EXACT_LIMIT`] values and there are no ties,
/// the normal approximation otherwise.
pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> Result<MannWhitney> {
    let has_ties = {
        let mut all: Vec<f64> = x.iter().chain(y).copied().collect();
        all.sort_by(f64::total_cmp);
        all.windows(2).any(|w| w[0] == w[1])
    };
    let method = if x.len() <= EXACT_LIMIT && y.len() <= EXACT_LIMIT && !has_ties {
        MwuMethod::Exact
    } else {
        MwuMethod::Normal
    };
    mann_whitney_u_with(x, y, method)
}

/// Two-sided Mann–Whitney U test with an explicit method. The exact method
/// assumes tie-free samples.
pub fn mann_whitney_u_with(x: &[f64], y: &[f64], method: MwuMethod) -> Result<MannWhitney> {
    if x.is_empty() {
        return Err(Error::EmptySample("x"));
    }
    if y.is_empty() {
        return Err(Error::EmptySample("y"));
    }
    let u = u_statistic(x, y);
    let p_value = match method {
        MwuMethod::Exact => exact_p_value(u, x.len(), y.len()),
        MwuMethod::Normal => normal_p_value(u, x, y),
    };
    Ok(MannWhitney { u, p_value, method })
}

/// Number of arrangements giving each U value for sizes `m` and `n`,
/// via the recurrence `f(m, n, u) = f(m-1, n, u-n) + f(m, n-1, u)`.
fn u_distribution(m: usize, n: usize) -> Vec<u64> {
    // table[j][u] holds f(i, j, u) for the current i.
    let max_u = m * n;
    let mut table: Vec<Vec<u64>> = (0..=n)
        .map(|_| {
            let mut row = vec![0u64; max_u + 1];
            row[0] = 1;
            row
        })
        .collect();
    for _i in 1..=m {
        let mut next: Vec<Vec<u64>> = vec![vec![0u64; max_u + 1]; n + 1];
        next[0][0] = 1;
        for j in 1..=n {
            for u in 0..=max_u {
                let from_x = if u >= j { table[j][u - j] } else { 0 };
                next[j][u] = from_x + next[j - 1][u];
            }
        }
        table = next;
    }
    table.swap_remove(n)
}

fn exact_p_value(u: f64, m: usize, n: usize) -> f64 {
    let counts = u_distribution(m, n);
    let total: u64 = counts.iter().sum();
    let u = u.round() as usize;
    let lower: u64 = counts[..=u].iter().sum();
    let upper: u64 = counts[u..].iter().sum();
    (2.0 * lower.min(upper) as f64 / total as f64).min(1.0)
}

fn normal_p_value(u: f64, x: &[f64], y: &[f64]) -> f64 {
    let m = x.len() as f64;
    let n = y.len() as f64;
    let total = m + n;

    let mut counts: HashMap<u64, usize> = HashMap::new();
    for v in x.iter().chain(y) {
        // Normalize -0.0 so it ties with 0.0.
        *counts.entry((v + 0.0).to_bits()).or_default() += 1;
    }
    let tie_term: f64 = counts
        .values()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let variance = m * n / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)));
    if variance <= 0.0 || !variance.is_finite() {
        return 1.0;
    }
    let mean = m * n / 2.0;
    let z = ((u - mean).abs() - 0.5).max(0.0) / variance.sqrt();
    let normal = Normal::standard();
    (2.0 * normal.sf(z)).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub technique_1: Technique,
    pub technique_2: Technique,
    pub a12: f64,
    pub p_value: f64,
    pub significant: bool,
}

pub fn compare_pair(x: &ApfdSamples, y: &ApfdSamples) -> Result<PairwiseComparison> {
    let a12 = a12(&x.values, &y.values)?;
    let p_value = mann_whitney_u(&x.values, &y.values)?.p_value;
    Ok(PairwiseComparison {
        technique_1: x.technique,
        technique_2: y.technique,
        a12,
        p_value,
        significant: p_value < ALPHA,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechniqueSummary {
    pub technique: Technique,
    pub runs: usize,
    pub mean: f64,
    pub median: f64,
    pub std_dev: f64,
}

impl TechniqueSummary {
    fn of(samples: &ApfdSamples) -> Self {
        let mut v = samples.values.clone();
        v.sort_by(f64::total_cmp);
        let k = v.len();
        let mean = samples.mean();
        let median = if k % 2 == 1 {
            v[k / 2]
        } else {
            0.5 * (v[k / 2 - 1] + v[k / 2])
        };
        let var = if k > 1 {
            v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1) as f64
        } else {
            0.0
        };
        TechniqueSummary {
            technique: samples.technique,
            runs: k,
            mean,
            median,
            std_dev: var.sqrt(),
        }
    }
}

/// Per-technique summaries plus every unordered pairwise comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub alpha: f64,
    pub techniques: Vec<TechniqueSummary>,
    pub comparisons: Vec<PairwiseComparison>,
}

pub fn compare(samples: &[ApfdSamples]) -> Result<ComparisonReport> {
    for s in samples {
        if s.values.is_empty() {
            return Err(Error::EmptySample("values"));
        }
    }
    let mut comparisons = Vec::new();
    for (i, x) in samples.iter().enumerate() {
        for y in &samples[i + 1..] {
            comparisons.push(compare_pair(x, y)?);
        }
    }
    Ok(ComparisonReport {
        alpha: ALPHA,
        techniques: samples.iter().map(TechniqueSummary::of).collect(),
        comparisons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::MatrixKind;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("t{i}")).collect()
    }

    #[test]
    fn apfd_rejects_non_permutations() {
        let m = BinaryMatrix::from_sets(MatrixKind::Kill, "k", ids(2), 1, &[vec![0], vec![]]).unwrap();
        let dup = vec!["t0".to_string(), "t0".to_string()];
        assert!(matches!(apfd(&dup, &m), Err(Error::NotAPermutation(_))));
        assert!(apfd(&ids(1), &m).is_err());
        let stranger = vec!["t0".to_string(), "zz".to_string()];
        assert!(apfd(&stranger, &m).is_err());
    }

    #[test]
    fn apfd_excludes_undetected_mutants() {
        let m = BinaryMatrix::from_sets(MatrixKind::Kill, "k", ids(2), 3, &[vec![0], vec![]]).unwrap();
        let s = apfd(&ids(2), &m).unwrap();
        assert_eq!(s.detected, 1);
        assert_eq!(s.undetected, 2);
        assert!((s.value - 0.75).abs() < 1e-12);
    }

    #[test]
    fn apfd_undefined_without_kills() {
        let m = BinaryMatrix::from_sets(MatrixKind::Kill, "k", ids(2), 2, &[vec![], vec![]]).unwrap();
        assert!(matches!(apfd(&ids(2), &m), Err(Error::UndefinedApfd)));
    }

    #[test]
    fn empty_samples_are_errors() {
        assert!(a12(&[], &[1.0]).is_err());
        assert!(a12(&[1.0], &[]).is_err());
        assert!(mann_whitney_u(&[], &[1.0]).is_err());
    }

    #[test]
    fn all_identical_values_give_p_one() {
        let x = vec![0.5; 20];
        let r = mann_whitney_u(&x, &x).unwrap();
        assert_eq!(r.method, MwuMethod::Normal);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn distribution_counts_sum_to_binomial() {
        let counts = u_distribution(3, 4);
        assert_eq!(counts.iter().sum::<u64>(), 35);
        assert_eq!(counts.len(), 13);
        // Symmetric about m·n/2.
        let rev: Vec<u64> = counts.iter().rev().copied().collect();
        assert_eq!(counts, rev);
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn summary_statistics() {
        let s = ApfdSamples {
            technique: Technique::ApIns,
            values: vec![0.2, 0.4, 0.6, 0.8],
            seeds: vec![0, 1, 2, 3],
        };
        let t = TechniqueSummary::of(&s);
        assert!((t.mean - 0.5).abs() < 1e-12);
        assert!((t.median - 0.5).abs() < 1e-12);
        assert!((t.std_dev - (0.2f64 / 3.0).sqrt()).abs() < 1e-12);
    }
}
