//! Command implementations behind the `sigchain` binary. Each command
//! returns its rendered output and exit code so it can be driven from tests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use sigchain::checker::{check_all, CheckOptions, CheckReport, Status};
use sigchain::metrics::{
    data_age, event_distance, latency, pair_by_index, sampling_rate_runs, synchronicity, PropertyKind, PropertySeries,
};
use sigchain::requirements::{load_requirements, subject_paths, transform_all, RequirementKind, Severity, TransformReport};
use sigchain::tracegen::{generate_trace, inject_violation, GenSpec};
use sigchain::{extract_causal_chains, Bounds, PortRef, SystemModel, TimeNs, Trace};

#[derive(Debug, Parser)]
#[command(name = "sigchain", version, about = "Signal-property measurement, requirement transformation and trace checking")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Text,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write to this file instead of standard output.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute latency, event distance, data age, synchronicity and logical sampling rate.
    Measure {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        /// Interface under analysis, as component:port.
        #[arg(long)]
        subject: PortRef,
        /// Second interface for synchronicity.
        #[arg(long)]
        pair: Option<PortRef>,
        #[arg(long, default_value_t = 0)]
        epsilon_ns: i64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Turn signal requirements into timing constraints.
    Transform {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        requirements: PathBuf,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Check a trace against requirements and their derived constraints.
    Check {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        requirements: PathBuf,
        /// Previously derived constraints; derived from the requirements when absent.
        #[arg(long)]
        constraints: Option<PathBuf>,
        /// Treat INCONCLUSIVE verdicts as failures (exit 2).
        #[arg(long)]
        strict_inconclusive: bool,
        #[arg(long, default_value_t = 0)]
        epsilon_ns: i64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Generate a synthetic trace and its ground-truth sidecar.
    Generate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        genspec: PathBuf,
        /// Overrides the genspec seed; drawn at random when neither is given.
        #[arg(long)]
        seed: Option<u64>,
        /// Trace destination; standard output when absent.
        #[arg(long)]
        trace_out: Option<PathBuf>,
        #[arg(long)]
        sidecar_out: Option<PathBuf>,
        /// Perturb one instance of this requirement kind after generation.
        #[arg(long, value_parser = parse_kind, requires_all = ["inject_subject", "inject_magnitude_ns"])]
        inject: Option<RequirementKind>,
        /// Subject of the perturbed property; give twice for synchronicity.
        #[arg(long)]
        inject_subject: Vec<PortRef>,
        #[arg(long)]
        inject_magnitude_ns: Option<i64>,
        #[arg(long, requires = "inject")]
        injection_out: Option<PathBuf>,
    },
}

fn parse_kind(s: &str) -> std::result::Result<RequirementKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase()))
        .map_err(|_| format!("unknown requirement kind {s:?}"))
}

/// Rendered result of one command.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

/// Input problems: unreadable or unparsable files, bad arguments.
#[derive(Debug)]
pub struct InputError(pub String);

type Result<T> = std::result::Result<T, InputError>;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| InputError(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| InputError(format!("cannot write {}: {e}", path.display())))
}

fn with_path<E: std::fmt::Display>(path: &Path) -> impl FnOnce(E) -> InputError + '_ {
    move |e| InputError(format!("{}: {e}", path.display()))
}

fn load_model_file(path: &Path) -> Result<SystemModel> {
    SystemModel::from_json(&read(path)?).map_err(with_path(path))
}

fn load_trace_file(path: &Path, model: &SystemModel) -> Result<Trace> {
    Trace::from_json(&read(path)?, model).map_err(with_path(path))
}

fn emit(out: &OutputArgs, json: String, text: String, code: i32) -> Result<Outcome> {
    let mut body = match out.format {
        Format::Json => json,
        Format::Text => text,
    };
    if !body.ends_with('\n') {
        body.push('\n');
    }
    match &out.output {
        Some(path) => {
            write(path, &body)?;
            Ok(Outcome { code, ..Outcome::default() })
        }
        None => Ok(Outcome { stdout: body, code, ..Outcome::default() }),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.to_string();
            if code == 0 {
                Outcome { stdout: rendered, ..Outcome::default() }
            } else {
                Outcome { stderr: rendered, code, ..Outcome::default() }
            }
        }
    }
}

pub fn run(cli: Cli) -> Outcome {
    let result = match cli.command {
        Command::Measure { model, trace, subject, pair, epsilon_ns, out } => {
            cmd_measure(&model, &trace, &subject, pair.as_ref(), TimeNs(epsilon_ns), &out)
        }
        Command::Transform { model, requirements, out } => cmd_transform(&model, &requirements, &out),
        Command::Check { model, trace, requirements, constraints, strict_inconclusive, epsilon_ns, out } => cmd_check(
            &model,
            &trace,
            &requirements,
            constraints.as_deref(),
            strict_inconclusive,
            CheckOptions { epsilon: TimeNs(epsilon_ns) },
            &out,
        ),
        Command::Generate {
            model,
            genspec,
            seed,
            trace_out,
            sidecar_out,
            inject,
            inject_subject,
            inject_magnitude_ns,
            injection_out,
        } => cmd_generate(
            &model,
            &genspec,
            seed,
            trace_out.as_deref(),
            sidecar_out.as_deref(),
            inject.map(|kind| InjectArgs {
                kind,
                subjects: inject_subject,
                magnitude: TimeNs(inject_magnitude_ns.unwrap_or(0)),
                record: injection_out,
            }),
        ),
    };
    result.unwrap_or_else(|InputError(message)| Outcome { stderr: format!("error: {message}\n"), code: 2, ..Outcome::default() })
}

#[derive(Debug, Serialize)]
pub struct SeriesEntry {
    pub k: u64,
    pub value_ns: TimeNs,
}

#[derive(Debug, Serialize)]
pub struct SeriesReport {
    pub property: PropertyKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Bounds>,
    pub values: Vec<SeriesEntry>,
}

impl From<&PropertySeries> for SeriesReport {
    fn from(s: &PropertySeries) -> Self {
        SeriesReport {
            property: s.kind,
            bounds: s.bounds(),
            values: s.values.iter().map(|(&k, &value_ns)| SeriesEntry { k, value_ns }).collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct PathMeasures {
    pub path: String,
    pub delay_ns: TimeNs,
    pub chains: usize,
    pub skipped: usize,
    pub latency: SeriesReport,
    pub data_age: SeriesReport,
    pub sampling_rate: SeriesReport,
}

#[derive(Debug, Serialize)]
pub struct PairMeasures {
    pub paths: [String; 2],
    pub synchronicity: SeriesReport,
}

#[derive(Debug, Serialize)]
pub struct MeasureReport {
    pub subject: PortRef,
    pub event_distance: SeriesReport,
    pub paths: Vec<PathMeasures>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub pairs: Vec<PairMeasures>,
}

fn series_of(kind: PropertyKind, values: impl IntoIterator<Item = (u64, TimeNs)>) -> PropertySeries {
    let mut s = PropertySeries::new(kind);
    s.values.extend(values);
    s
}

/// Computes every property observable at `subject` (and, with `pair`,
/// the synchronicity between the two).
pub fn measure(
    model: &SystemModel,
    trace: &Trace,
    subject: &PortRef,
    pair: Option<&PortRef>,
    epsilon: TimeNs,
) -> std::result::Result<MeasureReport, String> {
    let paths = subject_paths(model, subject).map_err(|e| e.to_string())?;
    let mut report = MeasureReport {
        subject: subject.clone(),
        event_distance: SeriesReport::from(&event_distance(trace.signal(subject))),
        paths: Vec::new(),
        pairs: Vec::new(),
    };
    for path in &paths {
        let extraction = extract_causal_chains(trace, path);
        let chains = &extraction.chains;
        report.paths.push(PathMeasures {
            path: path.id.clone(),
            delay_ns: path.total_delay(),
            chains: chains.len(),
            skipped: extraction.skipped.len(),
            latency: (&series_of(PropertyKind::Latency, chains.iter().map(|c| (c.k(), latency(c))))).into(),
            data_age: (&series_of(PropertyKind::Age, chains.iter().map(|c| (c.k(), data_age(c, model))))).into(),
            sampling_rate: (&sampling_rate_runs(chains, model)).into(),
        });
    }
    if let Some(other) = pair {
        for pb in subject_paths(model, other).map_err(|e| e.to_string())? {
            for pa in &paths {
                let ca = extract_causal_chains(trace, pa).chains;
                let cb = extract_causal_chains(trace, pb).chains;
                let zeta = pair_by_index(&ca, &cb, epsilon)
                    .into_iter()
                    .map(|(a, b)| (a.k(), synchronicity(a, b, model, epsilon).expect("pairs are matched")));
                report.pairs.push(PairMeasures {
                    paths: [pa.id.clone(), pb.id.clone()],
                    synchronicity: (&series_of(PropertyKind::Synchronicity, zeta)).into(),
                });
            }
        }
    }
    Ok(report)
}

fn bound_cells(b: &Option<Bounds>) -> (String, String) {
    match b {
        Some(b) => (
            b.lower.map_or("-".into(), |v| v.ns().to_string()),
            b.upper.map_or("-".into(), |v| v.ns().to_string()),
        ),
        None => ("-".into(), "-".into()),
    }
}

impl MeasureReport {
    /// One row per property and path.
    pub fn to_text(&self) -> String {
        let mut out = format!("{:<16} {:<24} {:>7} {:>14} {:>14}\n", "property", "path", "count", "min_ns", "max_ns");
        let mut row = |name: String, path: &str, s: &SeriesReport| {
            let (lo, hi) = bound_cells(&s.bounds);
            let _ = writeln!(out, "{name:<16} {path:<24} {:>7} {lo:>14} {hi:>14}", s.values.len());
        };
        row(PropertyKind::EventDistance.to_string(), "-", &self.event_distance);
        for p in &self.paths {
            for s in [&p.latency, &p.data_age, &p.sampling_rate] {
                row(s.property.to_string(), &p.path, s);
            }
        }
        for pair in &self.pairs {
            row(PropertyKind::Synchronicity.to_string(), &format!("{}+{}", pair.paths[0], pair.paths[1]), &pair.synchronicity);
        }
        out
    }
}

pub fn cmd_measure(
    model_path: &Path,
    trace_path: &Path,
    subject: &PortRef,
    pair: Option<&PortRef>,
    epsilon: TimeNs,
    out: &OutputArgs,
) -> Result<Outcome> {
    let model = load_model_file(model_path)?;
    let trace = load_trace_file(trace_path, &model)?;
    let report = measure(&model, &trace, subject, pair, epsilon).map_err(InputError)?;
    let json = serde_json::to_string_pretty(&report).expect("measure reports always serialize");
    emit(out, json, report.to_text(), 0)
}

fn transform_text(report: &TransformReport) -> String {
    let mut out = String::new();
    for c in &report.constraints {
        let _ = writeln!(out, "{} {} {} in {} (from {})", c.id, c.kind, c.target, c.bounds, c.provenance.requirement);
    }
    for d in &report.diagnostics {
        let severity = match d.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        let _ = writeln!(out, "{severity}: {}{}", d.requirement.as_deref().map(|r| format!("{r}: ")).unwrap_or_default(), d.message);
    }
    out
}

pub fn cmd_transform(model_path: &Path, requirements_path: &Path, out: &OutputArgs) -> Result<Outcome> {
    let model = load_model_file(model_path)?;
    let reqs = load_requirements(&read(requirements_path)?).map_err(with_path(requirements_path))?;
    let report = transform_all(&reqs, &model);
    let code = if report.has_errors() { 1 } else { 0 };
    emit(out, report.to_json(), transform_text(&report), code)
}

/// 1 on any FAIL; otherwise 2 on check errors, or on INCONCLUSIVE when
/// `strict`; otherwise 0.
pub fn check_exit_code(report: &CheckReport, strict: bool) -> i32 {
    if report.any(Status::Fail) {
        1
    } else if !report.errors.is_empty() || (strict && report.any(Status::Inconclusive)) {
        2
    } else {
        0
    }
}

pub fn cmd_check(
    model_path: &Path,
    trace_path: &Path,
    requirements_path: &Path,
    constraints_path: Option<&Path>,
    strict_inconclusive: bool,
    options: CheckOptions,
    out: &OutputArgs,
) -> Result<Outcome> {
    let model = load_model_file(model_path)?;
    let trace = load_trace_file(trace_path, &model)?;
    let reqs = load_requirements(&read(requirements_path)?).map_err(with_path(requirements_path))?;
    let constraints = match constraints_path {
        Some(path) => TransformReport::from_json(&read(path)?).map_err(with_path(path))?,
        None => transform_all(&reqs, &model),
    };
    let mut report = check_all(&trace, &reqs, &constraints, &model, options);
    report.errors.extend(
        constraints
            .diagnostics
            .iter()
            .filter(|d| d.severity == Severity::Error)
            .map(|d| d.message.clone()),
    );
    let code = check_exit_code(&report, strict_inconclusive);
    emit(out, report.to_json(), report.to_text(), code)
}

pub struct InjectArgs {
    pub kind: RequirementKind,
    pub subjects: Vec<PortRef>,
    pub magnitude: TimeNs,
    pub record: Option<PathBuf>,
}

pub fn cmd_generate(
    model_path: &Path,
    genspec_path: &Path,
    seed: Option<u64>,
    trace_out: Option<&Path>,
    sidecar_out: Option<&Path>,
    inject: Option<InjectArgs>,
) -> Result<Outcome> {
    let model = load_model_file(model_path)?;
    let mut spec = GenSpec::from_json(&read(genspec_path)?).map_err(with_path(genspec_path))?;
    let mut stderr = String::new();
    if let Some(seed) = seed {
        spec.seed = Some(seed);
    }
    let seed = *spec.seed.get_or_insert_with(|| {
        let drawn = rand::random::<u64>();
        stderr.push_str(&format!("seed: {drawn}\n"));
        drawn
    });
    let (mut trace, sidecar) = generate_trace(&model, &spec).map_err(with_path(genspec_path))?;
    if let Some(args) = inject {
        let (perturbed, injection) = inject_violation(&trace, &model, args.kind, &args.subjects, args.magnitude, seed)
            .map_err(|e| InputError(format!("injection failed: {e}")))?;
        trace = perturbed;
        let record = serde_json::to_string_pretty(&injection).expect("injections always serialize") + "\n";
        match &args.record {
            Some(path) => write(path, &record)?,
            None => stderr.push_str(&record),
        }
    }
    if let Some(path) = sidecar_out {
        write(path, &(sidecar.to_json() + "\n"))?;
    }
    let trace_json = trace.to_json() + "\n";
    let stdout = match trace_out {
        Some(path) => {
            write(path, &trace_json)?;
            String::new()
        }
        None => trace_json,
    };
    Ok(Outcome { stdout, stderr, code: 0 })
}
