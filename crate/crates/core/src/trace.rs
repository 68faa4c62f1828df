//! Domain types for suites of signal-based test cases.
//!
//! A [`TestSuite`] is built from raw data without checks; [`validate_suite`]
//! then reports every broken invariant as data. Downstream modules assume a
//! suite that produced no [`Severity::Error`] violations.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// A uniformly sampled real-valued time series.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    sample_time: f64,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_time: f64) -> Self {
        Signal {
            samples,
            sample_time,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Time between consecutive samples, in seconds.
    pub fn sample_time(&self) -> f64 {
        self.sample_time
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Signal with every sample multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Signal {
        Signal::new(
            self.samples.iter().map(|v| v * factor).collect(),
            self.sample_time,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalRole {
    Input,
    Output,
}

impl fmt::Display for SignalRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignalRole::Input => f.write_str("input"),
            SignalRole::Output => f.write_str("output"),
        }
    }
}

/// Declared metadata for one signal of the model under test.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    pub name: String,
    pub role: SignalRole,
    pub range_min: f64,
    pub range_max: f64,
}

impl SignalSpec {
    pub fn new(name: impl Into<String>, role: SignalRole, range_min: f64, range_max: f64) -> Self {
        SignalSpec {
            name: name.into(),
            role,
            range_min,
            range_max,
        }
    }

    pub fn range_width(&self) -> f64 {
        self.range_max - self.range_min
    }
}

/// One test case: the stimuli applied and the outputs the simulation produced.
#[derive(Debug, Clone, PartialEq)]
pub struct TestCase {
    pub id: String,
    pub inputs: BTreeMap<String, Signal>,
    pub outputs: BTreeMap<String, Signal>,
    pub sample_count: usize,
}

impl TestCase {
    pub fn signal(&self, spec: &SignalSpec) -> Option<&Signal> {
        match spec.role {
            SignalRole::Input => self.inputs.get(&spec.name),
            SignalRole::Output => self.outputs.get(&spec.name),
        }
    }

    fn signals_for(&self, role: SignalRole) -> &BTreeMap<String, Signal> {
        match role {
            SignalRole::Input => &self.inputs,
            SignalRole::Output => &self.outputs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestSuite {
    name: String,
    sample_time: f64,
    specs: Vec<SignalSpec>,
    tests: Vec<TestCase>,
    max_sample_count: usize,
}

impl TestSuite {
    pub fn new(
        name: impl Into<String>,
        sample_time: f64,
        specs: Vec<SignalSpec>,
        tests: Vec<TestCase>,
    ) -> Self {
        let max_sample_count = tests.iter().map(|t| t.sample_count).max().unwrap_or(0);
        TestSuite {
            name: name.into(),
            sample_time,
            specs,
            tests,
            max_sample_count,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sample_time(&self) -> f64 {
        self.sample_time
    }

    pub fn specs(&self) -> &[SignalSpec] {
        &self.specs
    }

    pub fn tests(&self) -> &[TestCase] {
        &self.tests
    }

    pub fn len(&self) -> usize {
        self.tests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tests.is_empty()
    }

    /// Sample count of the longest test in the suite.
    pub fn max_sample_count(&self) -> usize {
        self.max_sample_count
    }

    pub fn input_specs(&self) -> impl Iterator<Item = &SignalSpec> {
        self.specs.iter().filter(|s| s.role == SignalRole::Input)
    }

    pub fn output_specs(&self) -> impl Iterator<Item = &SignalSpec> {
        self.specs.iter().filter(|s| s.role == SignalRole::Output)
    }

    pub fn test_ids(&self) -> Vec<String> {
        self.tests.iter().map(|t| t.id.clone()).collect()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.tests.iter().position(|t| t.id == id)
    }

    /// Same suite with tests rearranged so that position `i` holds the old
    /// test `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> TestSuite {
        let tests = order.iter().map(|&i| self.tests[i].clone()).collect();
        TestSuite::new(self.name.clone(), self.sample_time, self.specs.clone(), tests)
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate_suite(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    NonPositiveSampleTime(f64),
    TooFewTests(usize),
    DuplicateSignalName,
    InvalidRange { min: f64, max: f64 },
    DuplicateTestId,
    ZeroSampleCount,
    MissingSignal,
    UnexpectedSignal,
    EmptySignal,
    LengthMismatch { expected: usize, actual: usize },
    SampleTimeMismatch { expected: f64, actual: f64 },
    NonFiniteSample { step: usize },
    OutOfRange { count: usize, min: f64, max: f64 },
}

/// One broken invariant, located by test id and signal name where relevant.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub severity: Severity,
    pub test_id: Option<String>,
    pub signal: Option<String>,
    pub kind: ViolationKind,
}

impl Violation {
    fn error(test_id: Option<&str>, signal: Option<&str>, kind: ViolationKind) -> Self {
        Violation {
            severity: Severity::Error,
            test_id: test_id.map(str::to_owned),
            signal: signal.map(str::to_owned),
            kind,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::NonPositiveSampleTime(t) => write!(f, "sample time {t} is not positive"),
            ViolationKind::TooFewTests(n) => write!(f, "suite has {n} test(s), at least 2 required"),
            ViolationKind::DuplicateSignalName => f.write_str("duplicate signal name"),
            ViolationKind::InvalidRange { min, max } => write!(f, "invalid range [{min}, {max}]"),
            ViolationKind::DuplicateTestId => f.write_str("duplicate test id"),
            ViolationKind::ZeroSampleCount => f.write_str("sample count is zero"),
            ViolationKind::MissingSignal => f.write_str("signal declared by the suite is missing"),
            ViolationKind::UnexpectedSignal => f.write_str("signal not declared by the suite"),
            ViolationKind::EmptySignal => f.write_str("signal has no samples"),
            ViolationKind::LengthMismatch { expected, actual } => {
                write!(f, "expected {expected} samples, found {actual}")
            }
            ViolationKind::SampleTimeMismatch { expected, actual } => {
                write!(f, "sample time {actual} differs from suite sample time {expected}")
            }
            ViolationKind::NonFiniteSample { step } => write!(f, "non-finite sample at step {step}"),
            ViolationKind::OutOfRange { count, min, max } => {
                write!(f, "{count} sample(s) outside declared range [{min}, {max}]")
            }
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.severity == Severity::Warning {
            f.write_str("warning: ")?;
        }
        if let Some(test) = &self.test_id {
            write!(f, "test `{test}`: ")?;
        }
        if let Some(signal) = &self.signal {
            write!(f, "signal `{signal}`: ")?;
        }
        write!(f, "{}", self.kind)
    }
}

/// Reports every invariant violation in `suite`. A well-formed suite yields
/// an empty list; samples outside their declared range yield warnings.
pub fn validate_suite(suite: &TestSuite) -> Vec<Violation> {
    let mut out = Vec::new();

    if !(suite.sample_time.is_finite() && suite.sample_time > 0.0) {
        out.push(Violation::error(
            None,
            None,
            ViolationKind::NonPositiveSampleTime(suite.sample_time),
        ));
    }
    if suite.tests.len() < 2 {
        out.push(Violation::error(
            None,
            None,
            ViolationKind::TooFewTests(suite.tests.len()),
        ));
    }

    let mut names = HashSet::new();
    for spec in &suite.specs {
        if !names.insert(spec.name.as_str()) {
            out.push(Violation::error(
                None,
                Some(&spec.name),
                ViolationKind::DuplicateSignalName,
            ));
        }
        let finite = spec.range_min.is_finite() && spec.range_max.is_finite();
        if !finite || spec.range_min > spec.range_max {
            out.push(Violation::error(
                None,
                Some(&spec.name),
                ViolationKind::InvalidRange {
                    min: spec.range_min,
                    max: spec.range_max,
                },
            ));
        }
    }

    let mut ids = HashSet::new();
    for test in &suite.tests {
        let id = Some(test.id.as_str());
        if !ids.insert(test.id.as_str()) {
            out.push(Violation::error(id, None, ViolationKind::DuplicateTestId));
        }
        if test.sample_count == 0 {
            out.push(Violation::error(id, None, ViolationKind::ZeroSampleCount));
        }

        for role in [SignalRole::Input, SignalRole::Output] {
            let present = test.signals_for(role);
            for name in present.keys() {
                let declared = suite
                    .specs
                    .iter()
                    .any(|s| s.role == role && &s.name == name);
                if !declared {
                    out.push(Violation::error(id, Some(name), ViolationKind::UnexpectedSignal));
                }
            }
        }

        for spec in &suite.specs {
            let name = Some(spec.name.as_str());
            let Some(signal) = test.signal(spec) else {
                out.push(Violation::error(id, name, ViolationKind::MissingSignal));
                continue;
            };
            check_signal(suite, test, spec, signal, &mut out);
        }
    }

    out
}

fn check_signal(
    suite: &TestSuite,
    test: &TestCase,
    spec: &SignalSpec,
    signal: &Signal,
    out: &mut Vec<Violation>,
) {
    let id = Some(test.id.as_str());
    let name = Some(spec.name.as_str());

    if signal.is_empty() {
        out.push(Violation::error(id, name, ViolationKind::EmptySignal));
    } else if signal.len() != test.sample_count {
        out.push(Violation::error(
            id,
            name,
            ViolationKind::LengthMismatch {
                expected: test.sample_count,
                actual: signal.len(),
            },
        ));
    }
    if signal.sample_time != suite.sample_time {
        out.push(Violation::error(
            id,
            name,
            ViolationKind::SampleTimeMismatch {
                expected: suite.sample_time,
                actual: signal.sample_time,
            },
        ));
    }
    if let Some(step) = signal.samples.iter().position(|v| !v.is_finite()) {
        out.push(Violation::error(id, name, ViolationKind::NonFiniteSample { step }));
    }

    let outside = signal
        .samples
        .iter()
        .filter(|v| v.is_finite() && (**v < spec.range_min || **v > spec.range_max))
        .count();
    if outside > 0 {
        out.push(Violation {
            severity: Severity::Warning,
            test_id: id.map(str::to_owned),
            signal: name.map(str::to_owned),
            kind: ViolationKind::OutOfRange {
                count: outside,
                min: spec.range_min,
                max: spec.range_max,
            },
        });
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Builds a suite with one input `u` in [0, 1] and one output `y` in
    /// [0, 1]; each entry is `(id, input samples, output samples)`.
    pub fn simple_suite(tests: &[(&str, Vec<f64>, Vec<f64>)]) -> TestSuite {
        let dt = 0.1;
        let specs = vec![
            SignalSpec::new("u", SignalRole::Input, 0.0, 1.0),
            SignalSpec::new("y", SignalRole::Output, 0.0, 1.0),
        ];
        let tests = tests
            .iter()
            .map(|(id, u, y)| TestCase {
                id: id.to_string(),
                sample_count: u.len(),
                inputs: BTreeMap::from([("u".to_string(), Signal::new(u.clone(), dt))]),
                outputs: BTreeMap::from([("y".to_string(), Signal::new(y.clone(), dt))]),
            })
            .collect();
        TestSuite::new("fixture", dt, specs, tests)
    }
}
