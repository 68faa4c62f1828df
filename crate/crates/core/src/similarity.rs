//! Normalized Euclidean distances between signals and between test cases.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::trace::{Signal, SignalRole, SignalSpec, TestCase, TestSuite};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Inputs,
    Outputs,
}

impl Basis {
    fn role(self) -> SignalRole {
        match self {
            Basis::Inputs => SignalRole::Input,
            Basis::Outputs => SignalRole::Output,
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::Inputs => "inputs",
            Basis::Outputs => "outputs",
        })
    }
}

/// Euclidean distance over the common prefix of two signals, normalized by
/// the longest test in the suite and by the declared range of the signal.
///
/// Shorter signals are penalized: the numerator only covers the overlap but
/// the denominator always uses `max_sample_count`. A zero-width range gives 0.
pub fn signal_distance(
    sig: &Signal,
    other: &Signal,
    spec: &SignalSpec,
    max_sample_count: usize,
) -> f64 {
    let width = spec.range_width();
    if width == 0.0 || max_sample_count == 0 {
        return 0.0;
    }
    let squared: f64 = sig
        .samples()
        .iter()
        .zip(other.samples())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    squared.sqrt() / ((max_sample_count as f64).sqrt() * width)
}

fn test_distance(a: &TestCase, b: &TestCase, suite: &TestSuite, role: SignalRole) -> f64 {
    suite
        .specs()
        .iter()
        .filter(|spec| spec.role == role)
        .map(|spec| match (a.signal(spec), b.signal(spec)) {
            (Some(x), Some(y)) => signal_distance(x, y, spec, suite.max_sample_count()),
            _ => 0.0,
        })
        .sum()
}

/// Sum of per-signal distances over the input signals.
pub fn input_distance(a: &TestCase, b: &TestCase, suite: &TestSuite) -> f64 {
    test_distance(a, b, suite, SignalRole::Input)
}

/// Sum of per-signal distances over the output signals.
pub fn output_distance(a: &TestCase, b: &TestCase, suite: &TestSuite) -> f64 {
    test_distance(a, b, suite, SignalRole::Output)
}

/// Symmetric all-pairs test distance matrix with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub basis: Basis,
    ids: Vec<String>,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    /// Builds a matrix from a full `n × n` row-major table. The table is
    /// symmetrized by averaging each mirrored pair, and the diagonal zeroed.
    pub fn from_entries(basis: Basis, ids: Vec<String>, mut entries: Vec<f64>) -> Self {
        let n = ids.len();
        assert_eq!(entries.len(), n * n, "distance table must be n × n");
        for i in 0..n {
            entries[i * n + i] = 0.0;
            for j in i + 1..n {
                let v = 0.5 * (entries[i * n + j] + entries[j * n + i]);
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        DistanceMatrix {
            basis,
            ids,
            entries,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.ids.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.ids.len();
        &self.entries[i * n..(i + 1) * n]
    }

    pub fn by_id(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.ids.iter().position(|t| t == a)?;
        let j = self.ids.iter().position(|t| t == b)?;
        Some(self.get(i, j))
    }

    /// Total distance from test `i` to every other test.
    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).iter().sum()
    }
}

/// All-pairs distances over the chosen basis. Each unordered pair is
/// computed once and mirrored.
pub fn distance_matrix(suite: &TestSuite, basis: Basis) -> DistanceMatrix {
    let tests = suite.tests();
    let n = tests.len();
    let role = basis.role();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = test_distance(&tests[i], &tests[j], suite, role);
            entries[i * n + j] = d;
            entries[j * n + i] = d;
        }
    }
    DistanceMatrix {
        basis,
        ids: suite.test_ids(),
        entries,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::fixtures::simple_suite;

    fn spec(min: f64, max: f64) -> SignalSpec {
        SignalSpec::new("s", SignalRole::Input, min, max)
    }

    #[test]
    fn zero_width_range_gives_zero() {
        let a = Signal::new(vec![0.0, 1.0], 0.1);
        let b = Signal::new(vec![5.0, 7.0], 0.1);
        assert_eq!(signal_distance(&a, &b, &spec(2.0, 2.0), 2), 0.0);
    }

    #[test]
    fn translation_invariance() {
        let a = Signal::new(vec![0.1, 0.4, 0.9], 0.1);
        let b = Signal::new(vec![0.3, 0.2, 0.7], 0.1);
        let base = signal_distance(&a, &b, &spec(0.0, 1.0), 3);
        let shift = |s: &Signal| Signal::new(s.samples().iter().map(|v| v + 10.0).collect(), 0.1);
        let moved = signal_distance(&shift(&a), &shift(&b), &spec(10.0, 11.0), 3);
        assert!((base - moved).abs() < 1e-12);
    }

    #[test]
    fn matrix_rows_follow_suite_order() {
        let suite = simple_suite(&[
            ("a", vec![0.0, 0.0], vec![0.0, 0.0]),
            ("b", vec![1.0, 1.0], vec![0.5, 0.5]),
            ("c", vec![0.5, 0.0], vec![1.0, 1.0]),
        ]);
        let d = distance_matrix(&suite, Basis::Outputs);
        assert_eq!(d.ids(), ["a", "b", "c"]);
        assert!((d.by_id("a", "c").unwrap() - 1.0).abs() < 1e-12);
        assert!((d.row_sum(0) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn from_entries_symmetrizes() {
        let d = DistanceMatrix::from_entries(
            Basis::Inputs,
            vec!["a".into(), "b".into()],
            vec![3.0, 0.2, 0.4, 3.0],
        );
        assert_eq!(d.get(0, 0), 0.0);
        assert!((d.get(0, 1) - 0.3).abs() < 1e-12);
        assert_eq!(d.get(0, 1), d.get(1, 0));
    }
}
