//! Seeded synthetic suites, kill matrices and coverage matrices.
//!
//! Inputs are drawn from a small set of signal families on the range
//! [-1, 1]. Each output is a first-order lag of a nonlinear map of a convex
//! mix of the inputs, so it stays in [-1, 1] as well. A mutant is killed by a
//! test with a probability that is logistic in the test's output-diversity
//! rank, scaled by the fault-correlation weight.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::coverage::{BinaryMatrix, MatrixKind};
use crate::error::{Error, Result};
use crate::io::{write_matrix, write_suite};
use crate::prioritize::{CoverageMetric, RandomSource};
use crate::similarity::{distance_matrix, Basis};
use crate::trace::{Signal, SignalRole, SignalSpec, TestCase, TestSuite};

/// Slope of the kill logistic per unit of fault-correlation weight.
pub const KILL_SLOPE: f64 = 8.0;

/// Range of the per-mutant logit offset; lower is harder to kill.
const DIFFICULTY: (f64, f64) = (-4.0, -1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SignalFamily {
    Constant,
    Square,
    Ramp,
    Spike,
    Walk,
}

impl SignalFamily {
    pub const ALL: [SignalFamily; 5] = [
        SignalFamily::Constant,
        SignalFamily::Square,
        SignalFamily::Ramp,
        SignalFamily::Spike,
        SignalFamily::Walk,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SignalFamily::Constant => "constant",
            SignalFamily::Square => "square",
            SignalFamily::Ramp => "ramp",
            SignalFamily::Spike => "spike",
            SignalFamily::Walk => "walk",
        }
    }
}

impl fmt::Display for SignalFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SignalFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SignalFamily::ALL
            .iter()
            .copied()
            .find(|f| f.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown signal family `{s}` (expected constant, square, ramp, spike or walk)"
                ))
            })
    }
}

/// Square wave alternating between `low` and `low + amplitude`, holding
/// each level for `half_period` steps. `phase` shifts the first flip.
pub fn square_wave(low: f64, amplitude: f64, half_period: usize, phase: usize, steps: usize) -> Vec<f64> {
    let half_period = half_period.max(1);
    (0..steps)
        .map(|i| {
            if ((i + phase) / half_period).is_multiple_of(2) {
                low
            } else {
                low + amplitude
            }
        })
        .collect()
}

pub fn ramp(start: f64, end: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![start];
    }
    (0..steps)
        .map(|i| start + (end - start) * i as f64 / (steps - 1) as f64)
        .collect()
}

/// Constant `base` with a rectangular pulse to `base + height` covering
/// steps `at..at + width`.
pub fn spike(base: f64, height: f64, at: usize, width: usize, steps: usize) -> Vec<f64> {
    (0..steps)
        .map(|i| if i >= at && i < at + width { base + height } else { base })
        .collect()
}

/// Random walk with uniform increments in `[-step, step]`, clamped to
/// `[-1, 1]`.
pub fn bounded_walk(start: f64, step: f64, steps: usize, rng: &mut RandomSource) -> Vec<f64> {
    let mut v = start.clamp(-1.0, 1.0);
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        out.push(v);
        v = (v + step * (2.0 * rng.unit() - 1.0)).clamp(-1.0, 1.0);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub name: String,
    pub tests: usize,
    /// Longest test length, in samples.
    pub steps: usize,
    /// Shortest test length; lengths are uniform in `min_steps..=steps`.
    pub min_steps: usize,
    pub sample_time: f64,
    pub inputs: usize,
    pub outputs: usize,
    pub mutants: usize,
    /// Columns per coverage matrix.
    pub objectives: usize,
    pub families: Vec<SignalFamily>,
    pub fault_weight: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            name: "synthetic".into(),
            tests: 150,
            steps: 100,
            min_steps: 100,
            sample_time: 0.05,
            inputs: 3,
            outputs: 2,
            mutants: 20,
            objectives: 300,
            families: SignalFamily::ALL.to_vec(),
            fault_weight: 1.0,
        }
    }
}

impl SyntheticConfig {
    fn check(&self) -> Result<()> {
        let positive = [
            ("tests", self.tests),
            ("steps", self.steps),
            ("min_steps", self.min_steps),
            ("inputs", self.inputs),
            ("outputs", self.outputs),
            ("mutants", self.mutants),
            ("objectives", self.objectives),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.tests < 2 {
            return Err(Error::Config("tests must be at least 2".into()));
        }
        if self.min_steps > self.steps {
            return Err(Error::Config("min_steps must not exceed steps".into()));
        }
        if self.families.is_empty() {
            return Err(Error::Config("at least one signal family is required".into()));
        }
        if !(self.sample_time.is_finite() && self.sample_time > 0.0) {
            return Err(Error::Config("sample_time must be positive".into()));
        }
        if !self.fault_weight.is_finite() {
            return Err(Error::Config("fault_weight must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub suite: TestSuite,
    pub kills: BinaryMatrix,
    pub coverage: BTreeMap<CoverageMetric, BinaryMatrix>,
}

fn uniform(rng: &mut RandomSource, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.unit()
}

fn draw_signal(family: SignalFamily, steps: usize, rng: &mut RandomSource) -> Vec<f64> {
    match family {
        SignalFamily::Constant => vec![uniform(rng, -1.0, 1.0); steps],
        SignalFamily::Square => {
            let amplitude = uniform(rng, 0.1, 2.0);
            let low = uniform(rng, -1.0, 1.0 - amplitude);
            let half_period = 1 + rng.below((steps / 2).max(1));
            let phase = rng.below(half_period);
            square_wave(low, amplitude, half_period, phase, steps)
        }
        SignalFamily::Ramp => {
            let start = uniform(rng, -1.0, 1.0);
            let end = uniform(rng, -1.0, 1.0);
            ramp(start, end, steps)
        }
        SignalFamily::Spike => {
            let base = uniform(rng, -0.5, 0.5);
            let sign = if rng.below(2) == 0 { 1.0 } else { -1.0 };
            let height = sign * uniform(rng, 0.2, 0.5);
            let at = rng.below(steps);
            let width = 1 + rng.below(3);
            spike(base, height, at, width, steps)
        }
        SignalFamily::Walk => {
            let start = uniform(rng, -1.0, 1.0);
            let step = uniform(rng, 0.02, 0.3);
            bounded_walk(start, step, steps, rng)
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    Linear,
    Saturating,
    SignedSquare,
}

impl Shape {
    fn apply(self, u: f64) -> f64 {
        match self {
            Shape::Linear => u,
            Shape::Saturating => (2.0 * u).tanh() / 2f64.tanh(),
            Shape::SignedSquare => u * u.abs(),
        }
    }
}

struct OutputModel {
    weights: Vec<f64>,
    shape: Shape,
    gain: f64,
}

impl OutputModel {
    fn draw(inputs: usize, rng: &mut RandomSource) -> Self {
        let raw: Vec<f64> = (0..inputs).map(|_| uniform(rng, 0.1, 1.0)).collect();
        let total: f64 = raw.iter().sum();
        let weights = raw
            .iter()
            .map(|w| {
                let sign = if rng.below(4) == 0 { -1.0 } else { 1.0 };
                sign * w / total
            })
            .collect();
        let shape = match rng.below(3) {
            0 => Shape::Linear,
            1 => Shape::Saturating,
            _ => Shape::SignedSquare,
        };
        OutputModel {
            weights,
            shape,
            gain: uniform(rng, 0.2, 0.9),
        }
    }

    fn simulate(&self, inputs: &[Vec<f64>]) -> Vec<f64> {
        let steps = inputs[0].len();
        let mut out = Vec::with_capacity(steps);
        let mut y = 0.0f64;
        for t in 0..steps {
            let u: f64 = self.weights.iter().zip(inputs).map(|(w, x)| w * x[t]).sum();
            let target = self.shape.apply(u.clamp(-1.0, 1.0));
            y = if t == 0 { target } else { y + self.gain * (target - y) };
            out.push(y.clamp(-1.0, 1.0));
        }
        out
    }
}

fn test_ids(n: usize) -> Vec<String> {
    let width = n.saturating_sub(1).to_string().len().max(3);
    (0..n).map(|i| format!("t{i:0width$}")).collect()
}

/// Average-tie ranks mapped to [0, 1].
fn normalized_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        let rank = (start + end - 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = if n > 1 { rank / (n - 1) as f64 } else { 0.5 };
        }
        start = end;
    }
    ranks
}

/// Normalized rank of each test's total output distance to all others.
pub fn output_diversity_ranks(suite: &TestSuite) -> Vec<f64> {
    let d = distance_matrix(suite, Basis::Outputs);
    let sums: Vec<f64> = (0..d.len()).map(|i| d.row_sum(i)).collect();
    normalized_ranks(&sums)
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn draw_kills(
    ranks: &[f64],
    config: &SyntheticConfig,
    ids: &[String],
    rng: &mut RandomSource,
) -> Result<BinaryMatrix> {
    let n = ranks.len();
    let mut cells = vec![vec![0u8; config.mutants]; n];
    for m in 0..config.mutants {
        let difficulty = uniform(rng, DIFFICULTY.0, DIFFICULTY.1);
        let probs: Vec<f64> = ranks
            .iter()
            .map(|r| logistic(difficulty + config.fault_weight * KILL_SLOPE * (r - 0.5)))
            .collect();
        let mut killed = false;
        for (j, p) in probs.iter().enumerate() {
            if rng.unit() < *p {
                cells[j][m] = 1;
                killed = true;
            }
        }
        if !killed {
            // Every mutant is detectable by at least one test; pick the killer
            // with probability proportional to its kill probability.
            let total: f64 = probs.iter().sum();
            let mut target = rng.unit() * total;
            let mut chosen = n - 1;
            for (j, p) in probs.iter().enumerate() {
                if target < *p {
                    chosen = j;
                    break;
                }
                target -= p;
            }
            cells[chosen][m] = 1;
        }
    }
    let columns = (0..config.mutants).map(|m| format!("m{m}")).collect();
    BinaryMatrix::new(MatrixKind::Kill, "kills", ids.to_vec(), columns, &cells)
}

fn threshold(rng: &mut RandomSource) -> f64 {
    let magnitude = uniform(rng, 0.0, 0.95);
    if rng.below(2) == 0 {
        magnitude
    } else {
        -magnitude
    }
}

/// Decision-style objectives: column `2k` is covered when decision `k`'s
/// signal ever exceeds its threshold, column `2k + 1` when it is ever at or
/// below it.
fn threshold_coverage(
    suite: &TestSuite,
    signals: &[&SignalSpec],
    objectives: usize,
    rng: &mut RandomSource,
) -> Vec<Vec<u8>> {
    let decisions: Vec<(usize, f64)> = (0..objectives.div_ceil(2))
        .map(|_| (rng.below(signals.len()), threshold(rng)))
        .collect();
    suite
        .tests()
        .iter()
        .map(|test| {
            (0..objectives)
                .map(|c| {
                    let (s, theta) = decisions[c / 2];
                    let samples = test.signal(signals[s]).expect("generated").samples();
                    let hit = if c % 2 == 0 {
                        samples.iter().any(|&v| v > theta)
                    } else {
                        samples.iter().any(|&v| v <= theta)
                    };
                    u8::from(hit)
                })
                .collect()
        })
        .collect()
}

/// MC/DC-style objectives: an input condition toggling between consecutive
/// steps while an output condition holds (even column) or fails (odd column).
fn toggle_coverage(
    suite: &TestSuite,
    inputs: &[&SignalSpec],
    outputs: &[&SignalSpec],
    objectives: usize,
    rng: &mut RandomSource,
) -> Vec<Vec<u8>> {
    let pairs: Vec<(usize, f64, usize, f64)> = (0..objectives.div_ceil(2))
        .map(|_| {
            (
                rng.below(inputs.len()),
                threshold(rng),
                rng.below(outputs.len()),
                threshold(rng),
            )
        })
        .collect();
    suite
        .tests()
        .iter()
        .map(|test| {
            (0..objectives)
                .map(|c| {
                    let (i, theta, o, phi) = pairs[c / 2];
                    let x = test.signal(inputs[i]).expect("generated").samples();
                    let y = test.signal(outputs[o]).expect("generated").samples();
                    let want = c % 2 == 0;
                    let hit = (1..x.len())
                        .any(|t| ((x[t] > theta) != (x[t - 1] > theta)) && ((y[t] > phi) == want));
                    u8::from(hit)
                })
                .collect()
        })
        .collect()
}

/// Generates a complete dataset. Equal `(config, seed)` give equal output.
pub fn generate(config: &SyntheticConfig, seed: u64) -> Result<SyntheticDataset> {
    config.check()?;
    let mut rng = RandomSource::new(seed);
    let dt = config.sample_time;

    let mut specs = Vec::with_capacity(config.inputs + config.outputs);
    for i in 0..config.inputs {
        specs.push(SignalSpec::new(format!("in{i}"), SignalRole::Input, -1.0, 1.0));
    }
    for o in 0..config.outputs {
        specs.push(SignalSpec::new(format!("out{o}"), SignalRole::Output, -1.0, 1.0));
    }
    let models: Vec<OutputModel> = (0..config.outputs)
        .map(|_| OutputModel::draw(config.inputs, &mut rng))
        .collect();

    let ids = test_ids(config.tests);
    let mut tests = Vec::with_capacity(config.tests);
    for id in &ids {
        let steps = config.min_steps + rng.below(config.steps - config.min_steps + 1);
        let inputs: Vec<Vec<f64>> = (0..config.inputs)
            .map(|_| {
                let family = config.families[rng.below(config.families.len())];
                draw_signal(family, steps, &mut rng)
            })
            .collect();
        let outputs: Vec<Vec<f64>> = models.iter().map(|m| m.simulate(&inputs)).collect();
        tests.push(TestCase {
            id: id.clone(),
            sample_count: steps,
            inputs: inputs
                .into_iter()
                .enumerate()
                .map(|(i, s)| (format!("in{i}"), Signal::new(s, dt)))
                .collect(),
            outputs: outputs
                .into_iter()
                .enumerate()
                .map(|(o, s)| (format!("out{o}"), Signal::new(s, dt)))
                .collect(),
        });
    }
    let suite = TestSuite::new(config.name.clone(), dt, specs, tests);

    let ranks = output_diversity_ranks(&suite);
    let kills = draw_kills(&ranks, config, &ids, &mut rng)?;

    let input_specs: Vec<&SignalSpec> = suite.input_specs().collect();
    let output_specs: Vec<&SignalSpec> = suite.output_specs().collect();
    let mut coverage = BTreeMap::new();
    for metric in CoverageMetric::ALL {
        let cells = match metric {
            CoverageMetric::Dc => threshold_coverage(&suite, &input_specs, config.objectives, &mut rng),
            CoverageMetric::Cc => threshold_coverage(&suite, &output_specs, config.objectives, &mut rng),
            CoverageMetric::Mcdc => {
                toggle_coverage(&suite, &input_specs, &output_specs, config.objectives, &mut rng)
            }
        };
        let prefix = metric.label().to_ascii_lowercase();
        let columns = (0..config.objectives).map(|c| format!("{prefix}{c}")).collect();
        let m = BinaryMatrix::new(MatrixKind::Coverage, metric.label(), ids.clone(), columns, &cells)?;
        coverage.insert(metric, m);
    }

    Ok(SyntheticDataset {
        suite,
        kills,
        coverage,
    })
}

/// File locations of a dataset written by [`write_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetPaths {
    pub manifest: PathBuf,
    pub kills: PathBuf,
    pub coverage: BTreeMap<CoverageMetric, PathBuf>,
}

pub fn coverage_file_name(metric: CoverageMetric) -> String {
    format!("coverage_{}.csv", metric.label().to_ascii_lowercase())
}

pub fn write_dataset(dataset: &SyntheticDataset, dir: &Path) -> Result<DatasetPaths> {
    let manifest = write_suite(&dataset.suite, dir)?;
    let kills = dir.join("kills.csv");
    write_matrix(&dataset.kills, &kills)?;
    let mut coverage = BTreeMap::new();
    for (metric, m) in &dataset.coverage {
        let path = dir.join(coverage_file_name(*metric));
        write_matrix(m, &path)?;
        coverage.insert(*metric, path);
    }
    Ok(DatasetPaths {
        manifest,
        kills,
        coverage,
    })
}
