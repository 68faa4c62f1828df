//! Anti-pattern metrics over output signals and their suite-normalized
//! per-test scores.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{Signal, TestSuite};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AntiPatternKind {
    Instability,
    Discontinuity,
    GrowthToInfinity,
}

impl AntiPatternKind {
    pub const ALL: [AntiPatternKind; 3] = [
        AntiPatternKind::Instability,
        AntiPatternKind::Discontinuity,
        AntiPatternKind::GrowthToInfinity,
    ];
}

impl fmt::Display for AntiPatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AntiPatternKind::Instability => "instability",
            AntiPatternKind::Discontinuity => "discontinuity",
            AntiPatternKind::GrowthToInfinity => "growth_to_infinity",
        })
    }
}

/// Denominator used for the change rates of [`discontinuity`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateDenominator {
    /// Divide every change by the sample time, whatever the step offset.
    #[default]
    Literal,
    /// Divide a change over `dt` steps by `dt` times the sample time.
    DtScaled,
}

/// Sum of absolute first differences. Zero for single-sample signals.
pub fn instability(sig: &Signal) -> f64 {
    sig.samples().windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Largest short pulse in the signal: for step offsets 1 to 3, the maximum
/// over interior steps of the smaller of the left and right change rates.
/// Signals with fewer than three samples have no interior step and score 0.
pub fn discontinuity(sig: &Signal, denominator: RateDenominator) -> f64 {
    let s = sig.samples();
    let n = s.len();
    let mut best = 0.0f64;
    for dt in 1..=3usize {
        if n < 2 * dt + 1 {
            break;
        }
        let denom = match denominator {
            RateDenominator::Literal => sig.sample_time(),
            RateDenominator::DtScaled => dt as f64 * sig.sample_time(),
        };
        for i in dt..n - dt {
            let left = (s[i] - s[i - dt]).abs() / denom;
            let right = (s[i + dt] - s[i]).abs() / denom;
            best = best.max(left.min(right));
        }
    }
    best
}

/// Maximum absolute sample value.
pub fn growth_to_infinity(sig: &Signal) -> f64 {
    sig.samples().iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Evaluates one anti-pattern metric on a signal.
pub fn metric(kind: AntiPatternKind, sig: &Signal, denominator: RateDenominator) -> f64 {
    match kind {
        AntiPatternKind::Instability => instability(sig),
        AntiPatternKind::Discontinuity => discontinuity(sig, denominator),
        AntiPatternKind::GrowthToInfinity => growth_to_infinity(sig),
    }
}

/// Per-test normalized anti-pattern scores, in suite order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub kind: AntiPatternKind,
    ids: Vec<String>,
    scores: Vec<f64>,
}

impl ScoreVector {
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.ids.iter().position(|t| t == id).map(|i| self.scores[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.ids.iter().map(String::as_str).zip(self.scores.iter().copied())
    }
}

/// Normalizes a tests × outputs table of raw metric values: each test's
/// score is its row sum divided by the sum of the per-output column maxima.
/// An all-zero table yields all-zero scores.
pub fn normalize_scores(raw: &[Vec<f64>]) -> Vec<f64> {
    let outputs = raw.first().map_or(0, Vec::len);
    let denominator: f64 = (0..outputs)
        .map(|o| raw.iter().fold(0.0f64, |acc, row| acc.max(row[o])))
        .sum();
    if denominator == 0.0 {
        return vec![0.0; raw.len()];
    }
    raw.iter()
        .map(|row| (row.iter().sum::<f64>() / denominator).min(1.0))
        .collect()
}

/// Scores every test of `suite` on the given anti-pattern, over output
/// signals only.
pub fn suite_scores(
    suite: &TestSuite,
    kind: AntiPatternKind,
    denominator: RateDenominator,
) -> Result<ScoreVector> {
    let outputs: Vec<_> = suite.output_specs().collect();
    if outputs.is_empty() {
        return Err(Error::NoOutputs);
    }
    let raw: Vec<Vec<f64>> = suite
        .tests()
        .iter()
        .map(|test| {
            outputs
                .iter()
                .map(|spec| {
                    test.signal(spec)
                        .map_or(0.0, |sig| metric(kind, sig, denominator))
                })
                .collect()
        })
        .collect();
    Ok(ScoreVector {
        kind,
        ids: suite.test_ids(),
        scores: normalize_scores(&raw),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::fixtures::simple_suite;
    use proptest::prelude::*;

    fn sig(v: &[f64]) -> Signal {
        Signal::new(v.to_vec(), 0.1)
    }

    #[test]
    fn short_signals_score_zero_on_differences() {
        assert_eq!(instability(&sig(&[3.0])), 0.0);
        assert_eq!(discontinuity(&sig(&[3.0]), RateDenominator::Literal), 0.0);
        assert_eq!(discontinuity(&sig(&[0.0, 9.0]), RateDenominator::Literal), 0.0);
    }

    #[test]
    fn discontinuity_needs_both_sides() {
        // A step has a large left rate but a zero right rate everywhere.
        let step = sig(&[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(discontinuity(&step, RateDenominator::Literal), 0.0);
    }

    #[test]
    fn dt_scaled_ramp() {
        let ramp: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let d = discontinuity(&sig(&ramp), RateDenominator::DtScaled);
        assert!((d - 1.0).abs() < 1e-9);
    }

    #[test]
    fn no_outputs_is_an_error() {
        let suite = simple_suite(&[("a", vec![0.0], vec![0.0]), ("b", vec![0.0], vec![0.0])]);
        let stripped = TestSuite::new(
            "x",
            suite.sample_time(),
            suite.input_specs().cloned().collect(),
            suite.tests().to_vec(),
        );
        assert!(matches!(
            suite_scores(&stripped, AntiPatternKind::Instability, RateDenominator::Literal),
            Err(Error::NoOutputs)
        ));
    }

    prop_compose! {
        fn table()(tests in 1usize..8, outputs in 1usize..4)
            (rows in prop::collection::vec(prop::collection::vec(0.0f64..100.0, outputs), tests))
            -> Vec<Vec<f64>> { rows }
    }

    proptest! {
        #[test]
        fn normalized_scores_in_unit_interval(raw in table()) {
            for s in normalize_scores(&raw) {
                prop_assert!((0.0..=1.0).contains(&s));
            }
        }

        #[test]
        fn scores_permute_with_tests(raw in table(), seed in any::<u64>()) {
            let mut order: Vec<usize> = (0..raw.len()).collect();
            let mut rng = crate::prioritize::RandomSource::new(seed);
            rng.shuffle(&mut order);
            let permuted: Vec<_> = order.iter().map(|&i| raw[i].clone()).collect();
            let base = normalize_scores(&raw);
            let moved = normalize_scores(&permuted);
            for (k, &i) in order.iter().enumerate() {
                prop_assert_eq!(moved[k], base[i]);
            }
        }
    }
}
