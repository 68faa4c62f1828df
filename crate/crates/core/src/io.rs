//! On-disk formats: suite manifests, trace CSVs, binary matrix CSVs and
//! the reports written by the command line tool.
//!
//! A manifest is a JSON document listing the signals and the tests; each
//! test points at a trace CSV whose header is `step` followed by the input
//! signal names and then the output signal names, in manifest order. Rows
//! hold steps `0..s`. Matrices are CSVs with a `test_id` column followed by
//! one 0/1 column per objective.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::coverage::{BinaryMatrix, MatrixKind};
use crate::error::{Error, Result};
use crate::eval::{apfd, ApfdSamples, ComparisonReport};
use crate::prioritize::{Ordering, Prioritizer, Technique};
use crate::trace::{Signal, SignalRole, SignalSpec, TestCase, TestSuite, Violation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSignal {
    pub name: String,
    pub role: SignalRole,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestTest {
    pub id: String,
    pub trace_file: String,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteManifest {
    pub name: String,
    pub sample_time: f64,
    pub signals: Vec<ManifestSignal>,
    pub tests: Vec<ManifestTest>,
}

pub const MANIFEST_FILE: &str = "suite.json";

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line() as u64, e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::parse(path, line, e.to_string())
}

/// Trace header names in file order: inputs, then outputs.
fn trace_columns(specs: &[SignalSpec]) -> Vec<&SignalSpec> {
    let inputs = specs.iter().filter(|s| s.role == SignalRole::Input);
    let outputs = specs.iter().filter(|s| s.role == SignalRole::Output);
    inputs.chain(outputs).collect()
}

/// Reads one trace CSV into per-signal sample vectors, keyed like `columns`.
pub fn read_trace(path: &Path, columns: &[&SignalSpec]) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv_reader(path)?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let expected: Vec<&str> = std::iter::once("step")
        .chain(columns.iter().map(|s| s.name.as_str()))
        .collect();
    let found: Vec<&str> = header.iter().collect();
    if found != expected {
        return Err(Error::parse(
            path,
            1,
            format!(
                "trace header `{}` does not match manifest signals `{}`",
                found.join(","),
                expected.join(",")
            ),
        ));
    }

    let mut samples = vec![Vec::new(); columns.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let step: usize = record[0]
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad step `{}`", &record[0])))?;
        if step != row {
            return Err(Error::parse(
                path,
                line,
                format!("expected step {row}, found {step}"),
            ));
        }
        for (k, cell) in record.iter().skip(1).enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                Error::parse(
                    path,
                    line,
                    format!("column `{}`: `{cell}` is not a number", columns[k].name),
                )
            })?;
            samples[k].push(v);
        }
    }
    Ok(samples)
}

/// Parses a manifest and its traces into a suite without validating it.
pub fn read_suite(manifest_path: &Path) -> Result<TestSuite> {
    let manifest: SuiteManifest = read_json(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let specs: Vec<SignalSpec> = manifest
        .signals
        .iter()
        .map(|s| SignalSpec::new(s.name.clone(), s.role, s.min, s.max))
        .collect();
    let columns = trace_columns(&specs);

    let mut tests = Vec::with_capacity(manifest.tests.len());
    for entry in &manifest.tests {
        let data = read_trace(&base.join(&entry.trace_file), &columns)?;
        let mut inputs = BTreeMap::new();
        let mut outputs = BTreeMap::new();
        for (spec, samples) in columns.iter().zip(data) {
            let sig = Signal::new(samples, manifest.sample_time);
            match spec.role {
                SignalRole::Input => inputs.insert(spec.name.clone(), sig),
                SignalRole::Output => outputs.insert(spec.name.clone(), sig),
            };
        }
        tests.push(TestCase {
            id: entry.id.clone(),
            inputs,
            outputs,
            sample_count: entry.steps,
        });
    }
    Ok(TestSuite::new(manifest.name, manifest.sample_time, specs, tests))
}

/// Loads and validates a suite. Warnings are logged and returned; any
/// error-level violation fails the load.
pub fn load_suite(manifest_path: &Path) -> Result<(TestSuite, Vec<Violation>)> {
    let suite = read_suite(manifest_path)?;
    let (errors, warnings): (Vec<_>, Vec<_>) =
        suite.validate().into_iter().partition(Violation::is_error);
    if !errors.is_empty() {
        return Err(Error::InvalidSuite(errors));
    }
    for w in &warnings {
        log::warn!("{}: {w}", manifest_path.display());
    }
    Ok((suite, warnings))
}

fn format_trace(suite: &TestSuite, test: &TestCase) -> String {
    let columns = trace_columns(suite.specs());
    let mut out = String::from("step");
    for spec in &columns {
        out.push(',');
        out.push_str(&spec.name);
    }
    out.push('\n');
    let signals: Vec<&Signal> = columns
        .iter()
        .map(|spec| test.signal(spec).expect("suite is consistent"))
        .collect();
    for step in 0..test.sample_count {
        out.push_str(&step.to_string());
        for sig in &signals {
            out.push(',');
            out.push_str(&sig.samples()[step].to_string());
        }
        out.push('\n');
    }
    out
}

/// Writes `suite.json` and one trace per test under `traces/` in `dir`.
/// Returns the manifest path.
pub fn write_suite(suite: &TestSuite, dir: &Path) -> Result<PathBuf> {
    let mut tests = Vec::with_capacity(suite.len());
    for test in suite.tests() {
        let rel = format!("traces/{}.csv", test.id);
        write_file(&dir.join(&rel), format_trace(suite, test).as_bytes())?;
        tests.push(ManifestTest {
            id: test.id.clone(),
            trace_file: rel,
            steps: test.sample_count,
        });
    }
    let manifest = SuiteManifest {
        name: suite.name().to_owned(),
        sample_time: suite.sample_time(),
        signals: suite
            .specs()
            .iter()
            .map(|s| ManifestSignal {
                name: s.name.clone(),
                role: s.role,
                min: s.range_min,
                max: s.range_max,
            })
            .collect(),
        tests,
    };
    let path = dir.join(MANIFEST_FILE);
    write_json(&path, &manifest)?;
    Ok(path)
}

/// Reads a 0/1 matrix CSV keyed by a leading `test_id` column.
pub fn load_matrix(path: &Path, kind: MatrixKind, label: &str) -> Result<BinaryMatrix> {
    let mut reader = csv_reader(path)?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.get(0) != Some("test_id") {
        return Err(Error::parse(path, 1, "first column must be `test_id`"));
    }
    let columns: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    if columns.is_empty() {
        return Err(Error::parse(path, 1, "matrix has no objective columns"));
    }

    let mut rows = Vec::new();
    let mut cells = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record[0].to_owned();
        if !seen.insert(id.clone()) {
            return Err(Error::parse(path, line, format!("duplicate test_id `{id}`")));
        }
        let row: Vec<u8> = record
            .iter()
            .skip(1)
            .enumerate()
            .map(|(c, cell)| match cell {
                "0" => Ok(0),
                "1" => Ok(1),
                other => Err(Error::parse(
                    path,
                    line,
                    format!(
                        "row `{id}`, column `{}`: cell `{other}` is not 0 or 1",
                        columns[c]
                    ),
                )),
            })
            .collect::<Result<_>>()?;
        rows.push(id);
        cells.push(row);
    }
    BinaryMatrix::new(kind, label, rows, columns, &cells)
}

pub fn format_matrix(m: &BinaryMatrix) -> String {
    let mut out = String::from("test_id");
    for c in m.columns() {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for (r, id) in m.rows().iter().enumerate() {
        out.push_str(id);
        for cell in m.cells(r) {
            out.push(',');
            out.push(if cell == 1 { '1' } else { '0' });
        }
        out.push('\n');
    }
    out
}

pub fn write_matrix(m: &BinaryMatrix, path: &Path) -> Result<()> {
    write_file(path, format_matrix(m).as_bytes())
}

/// One prioritization run as recorded by the `prioritize` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub technique: Technique,
    pub seed: u64,
    pub sequence: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub apfd: Option<f64>,
    pub wall_time_seconds: f64,
}

impl RunReport {
    /// Runs `technique` once and records the ordering, its APFD when the
    /// prioritizer has a kill matrix, and the wall time of the ordering step.
    pub fn measure(prioritizer: &Prioritizer<'_>, technique: Technique, seed: u64) -> Result<Self> {
        let (ordering, secs) = prioritizer.run_timed(technique, seed)?;
        let apfd = prioritizer
            .kills()
            .map(|k| apfd(&ordering.sequence, k).map(|s| s.value))
            .transpose()?;
        Ok(RunReport {
            technique,
            seed,
            sequence: ordering.sequence,
            apfd,
            wall_time_seconds: secs,
        })
    }

    pub fn ordering(&self) -> Ordering {
        Ordering {
            technique: self.technique,
            seed: self.seed,
            sequence: self.sequence.clone(),
        }
    }
}

/// All runs of one technique over one suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingsFile {
    pub suite: String,
    pub technique: Technique,
    pub base_seed: u64,
    pub runs: Vec<RunReport>,
}

pub fn orderings_path(dir: &Path, technique: Technique) -> PathBuf {
    dir.join(format!("{}.orderings.json", technique.acronym()))
}

pub fn samples_path(dir: &Path, technique: Technique) -> PathBuf {
    dir.join(format!("{}.samples.json", technique.acronym()))
}

pub fn apfd_csv_path(dir: &Path, technique: Technique) -> PathBuf {
    dir.join(format!("{}.apfd.csv", technique.acronym()))
}

/// Flat `technique,run,seed,apfd` table of a sample set.
pub fn format_samples_csv(samples: &ApfdSamples) -> String {
    let mut out = String::from("technique,run,seed,apfd\n");
    for (run, (seed, v)) in samples.seeds.iter().zip(&samples.values).enumerate() {
        out.push_str(&format!("{},{run},{seed},{v}\n", samples.technique));
    }
    out
}

pub fn write_samples(samples: &ApfdSamples, json_path: &Path, csv_path: &Path) -> Result<()> {
    write_json(json_path, samples)?;
    write_file(csv_path, format_samples_csv(samples).as_bytes())
}

pub fn format_comparison_csv(report: &ComparisonReport) -> String {
    let mut out = String::from("technique_1,technique_2,a12,p_value,significant\n");
    for c in &report.comparisons {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            c.technique_1, c.technique_2, c.a12, c.p_value, c.significant
        ));
    }
    out
}

pub fn write_comparison(report: &ComparisonReport, json_path: &Path) -> Result<PathBuf> {
    write_json(json_path, report)?;
    let csv_path = json_path.with_extension("csv");
    write_file(&csv_path, format_comparison_csv(report).as_bytes())?;
    Ok(csv_path)
}
