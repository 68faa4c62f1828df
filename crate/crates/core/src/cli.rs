//! Command line front end.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for data or validation
//! errors. Diagnostics go to stderr; reports are only written to files.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::antipattern::RateDenominator;
use crate::coverage::MatrixKind;
use crate::error::{Error, Result};
use crate::eval::{apfd, compare, ApfdSamples};
use crate::io::{
    apfd_csv_path, load_matrix, load_suite, orderings_path, read_json, read_suite, samples_path,
    write_comparison, write_json, write_samples, OrderingsFile, RunReport,
};
use crate::prioritize::{run_seed, CoverageMetric, Prioritizer, Technique, TechniqueData};
use crate::synth::{generate, write_dataset, SignalFamily, SyntheticConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

/// Environment variable capping the number of parallel runs.
pub const THREADS_ENV: &str = "SIGPRIO_THREADS";

#[derive(Debug, Parser)]
#[command(name = "sigprio", version, about = "Prioritize signal-based simulation test suites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Order a suite with one or more techniques.
    Prioritize(PrioritizeArgs),
    /// Score recorded orderings against a kill matrix.
    Evaluate(EvaluateArgs),
    /// Pairwise A12 and Mann-Whitney U comparison of APFD samples.
    Compare(CompareArgs),
    /// Write a seeded synthetic suite with kill and coverage matrices.
    GenSynthetic(GenArgs),
    /// Check a suite manifest and its traces.
    Validate(ValidateArgs),
}

fn parse_techniques(s: &str) -> std::result::Result<Vec<Technique>, String> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(Technique::ALL.to_vec());
    }
    s.split(',')
        .map(|t| t.parse::<Technique>().map_err(|e| e.to_string()))
        .collect()
}

fn parse_coverage(s: &str) -> std::result::Result<(CoverageMetric, PathBuf), String> {
    let (metric, path) = s
        .split_once('=')
        .ok_or_else(|| format!("expected METRIC=PATH, got `{s}`"))?;
    let metric = metric.parse::<CoverageMetric>().map_err(|e| e.to_string())?;
    Ok((metric, PathBuf::from(path)))
}

fn parse_denominator(s: &str) -> std::result::Result<RateDenominator, String> {
    match s {
        "literal" => Ok(RateDenominator::Literal),
        "dt-scaled" => Ok(RateDenominator::DtScaled),
        _ => Err(format!("expected `literal` or `dt-scaled`, got `{s}`")),
    }
}

fn parse_families(s: &str) -> std::result::Result<Vec<SignalFamily>, String> {
    s.split(',')
        .map(|f| f.parse::<SignalFamily>().map_err(|e| e.to_string()))
        .collect()
}

#[derive(Debug, Args)]
struct PrioritizeArgs {
    #[arg(long)]
    suite: PathBuf,
    /// Technique acronym, a comma-separated list, or `all`.
    #[arg(long)]
    technique: Vec<String>,
    /// Coverage matrices as METRIC=PATH with METRIC one of dc, cc, mcdc.
    #[arg(long, num_args = 1.., value_parser = parse_coverage)]
    coverage: Vec<(CoverageMetric, PathBuf)>,
    #[arg(long)]
    kills: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = crate::eval::DEFAULT_RUNS)]
    runs: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "literal", value_parser = parse_denominator)]
    rate_denominator: RateDenominator,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    order: PathBuf,
    #[arg(long)]
    kills: PathBuf,
    /// Samples file to write; defaults to `<technique>.samples.json` next to
    /// the orderings file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long, num_args = 2.., required = true)]
    samples: Vec<PathBuf>,
    #[arg(long, default_value = "comparison.json")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "synthetic")]
    name: String,
    #[arg(long, default_value_t = 150)]
    tests: usize,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    /// Shortest test length; defaults to `steps`.
    #[arg(long)]
    min_steps: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    sample_time: f64,
    #[arg(long, default_value_t = 3)]
    inputs: usize,
    #[arg(long, default_value_t = 2)]
    outputs: usize,
    #[arg(long, default_value_t = 20)]
    mutants: usize,
    #[arg(long, default_value_t = 300)]
    objectives: usize,
    #[arg(long, default_value = "constant,square,ramp,spike,walk")]
    families: String,
    #[arg(long, default_value_t = 1.0)]
    fault_weight: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    suite: PathBuf,
}

fn report(e: &Error) {
    let mut msg = format!("error: {e}");
    let mut source = std::error::Error::source(e);
    while let Some(s) = source {
        msg.push_str(&format!("\n  caused by: {s}"));
        source = s.source();
    }
    eprintln!("{msg}");
}

/// Parses `args` (including the program name) and runs the command.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Prioritize(a) => prioritize(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Compare(a) => compare_cmd(a),
        Command::GenSynthetic(a) => gen_synthetic(a),
        Command::Validate(a) => return validate(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Data(e)) => {
            report(&e);
            EXIT_DATA
        }
    }
}

enum Failure {
    Usage(String),
    Data(Error),
}
use Failure::{Data, Usage};

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Data(e)
    }
}

fn thread_pool() -> std::result::Result<rayon::ThreadPool, Failure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Usage(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Usage(format!("cannot start worker threads: {e}")))
}

fn prioritize(args: PrioritizeArgs) -> std::result::Result<(), Failure> {
    let mut techniques = Vec::new();
    for t in &args.technique {
        techniques.extend(parse_techniques(t).map_err(Usage)?);
    }
    if techniques.is_empty() {
        return Err(Usage(format!(
            "--technique is required; expected one of: {}",
            Technique::acronym_list()
        )));
    }
    if args.runs == 0 {
        return Err(Usage("--runs must be positive".into()));
    }

    let (suite, _warnings) = load_suite(&args.suite)?;
    let mut data = TechniqueData {
        rate_denominator: args.rate_denominator,
        ..TechniqueData::default()
    };
    for (metric, path) in &args.coverage {
        let m = load_matrix(path, MatrixKind::Coverage, metric.label())?;
        data.coverage.insert(*metric, m);
    }
    if let Some(path) = &args.kills {
        data.kills = Some(load_matrix(path, MatrixKind::Kill, "kills")?);
    }
    let prioritizer = Prioritizer::new(&suite, data)?;
    for &t in &techniques {
        prioritizer.prepare(t)?;
    }

    let pool = thread_pool()?;
    for technique in techniques {
        let runs: Vec<RunReport> = pool.install(|| {
            (0..args.runs)
                .into_par_iter()
                .map(|run| RunReport::measure(&prioritizer, technique, run_seed(args.seed, technique, run)))
                .collect::<Result<_>>()
        })?;

        if runs.iter().all(|r| r.apfd.is_some()) {
            let samples = ApfdSamples {
                technique,
                values: runs.iter().filter_map(|r| r.apfd).collect(),
                seeds: runs.iter().map(|r| r.seed).collect(),
            };
            write_samples(
                &samples,
                &samples_path(&args.out, technique),
                &apfd_csv_path(&args.out, technique),
            )?;
        }
        let file = OrderingsFile {
            suite: suite.name().to_owned(),
            technique,
            base_seed: args.seed,
            runs,
        };
        write_json(&orderings_path(&args.out, technique), &file)?;
        log::info!("{technique}: {} run(s) written", args.runs);
    }
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> std::result::Result<(), Failure> {
    let file: OrderingsFile = read_json(&args.order)?;
    let kills = load_matrix(&args.kills, MatrixKind::Kill, "kills")?;
    let mut values = Vec::with_capacity(file.runs.len());
    for (run, r) in file.runs.iter().enumerate() {
        let score = apfd(&r.sequence, &kills).map_err(|e| Error::Run {
            technique: file.technique.acronym().to_owned(),
            run,
            source: Box::new(e),
        })?;
        values.push(score.value);
    }
    let samples = ApfdSamples {
        technique: file.technique,
        values,
        seeds: file.runs.iter().map(|r| r.seed).collect(),
    };
    let dir = args.order.parent().unwrap_or(Path::new("."));
    let json = args
        .out
        .unwrap_or_else(|| samples_path(dir, file.technique));
    let csv = json.with_extension("csv");
    write_samples(&samples, &json, &csv)?;
    Ok(())
}

fn compare_cmd(args: CompareArgs) -> std::result::Result<(), Failure> {
    let samples: Vec<ApfdSamples> = args
        .samples
        .iter()
        .map(|p| read_json(p))
        .collect::<Result<_>>()?;
    let report = compare(&samples)?;
    write_comparison(&report, &args.out)?;
    Ok(())
}

fn gen_synthetic(args: GenArgs) -> std::result::Result<(), Failure> {
    let families = parse_families(&args.families).map_err(Usage)?;
    let config = SyntheticConfig {
        name: args.name,
        tests: args.tests,
        steps: args.steps,
        min_steps: args.min_steps.unwrap_or(args.steps),
        sample_time: args.sample_time,
        inputs: args.inputs,
        outputs: args.outputs,
        mutants: args.mutants,
        objectives: args.objectives,
        families,
        fault_weight: args.fault_weight,
    };
    let dataset = generate(&config, args.seed).map_err(|e| match e {
        Error::Config(msg) => Usage(msg),
        other => Data(other),
    })?;
    write_dataset(&dataset, &args.out)?;
    Ok(())
}

fn validate(args: ValidateArgs) -> i32 {
    let suite = match read_suite(&args.suite) {
        Ok(s) => s,
        Err(e) => {
            report(&e);
            return EXIT_DATA;
        }
    };
    let violations = suite.validate();
    for v in &violations {
        eprintln!("{v}");
    }
    if violations.iter().any(|v| v.is_error()) {
        EXIT_DATA
    } else {
        EXIT_OK
    }
}
