//! Trace verification, two ways: directly against signal requirements
//! through logical timestamps and band-limit propagation, and against the
//! timing constraints derived from them. Comparing the two verdicts is the
//! operational test of each transformation.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{
    band_limit_propagate, data_age, interface_sampling_rates, latency, pair_by_index, sampling_rate_runs,
    synchronicity, worst_case_periods, PropertySeries,
};
use crate::model::{PortRef, SignalPath, SystemModel};
use crate::requirements::{
    subject_paths, ConstraintKind, Relation, RequirementKind, SignalRequirement, Target,
    TimingConstraint, TransformError, TransformReport,
};
use crate::time::{Bounds, Duration, TimeNs};
use crate::trace::{extract_causal_chains, CausalChain, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Inconclusive => "INCONCLUSIVE",
        })
    }
}

/// One evaluated instance outside its bound.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    /// Requirement or constraint id.
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interface: Option<PortRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u64>,
    #[serde(rename = "measured_ns")]
    pub measured: TimeNs,
    pub bound: Bounds,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id)?;
        if let Some(path) = &self.path {
            write!(f, " path={path}")?;
        }
        if let Some(iface) = &self.interface {
            write!(f, " at={iface}")?;
        }
        if let Some(k) = self.k {
            write!(f, " k={k}")?;
        }
        write!(f, " measured={} outside {}", self.measured, self.bound)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub status: Status,
    pub evaluated_count: usize,
    pub violations: Vec<Violation>,
}

impl Verdict {
    /// FAIL iff there are violations; INCONCLUSIVE iff nothing was evaluated.
    pub fn from_parts(evaluated_count: usize, mut violations: Vec<Violation>) -> Self {
        violations.sort();
        let status = if !violations.is_empty() {
            Status::Fail
        } else if evaluated_count == 0 {
            Status::Inconclusive
        } else {
            Status::Pass
        };
        Verdict { status, evaluated_count, violations }
    }

    pub fn inconclusive() -> Self {
        Verdict::from_parts(0, Vec::new())
    }

    /// Conjunction of several verdicts.
    pub fn merge(verdicts: impl IntoIterator<Item = Verdict>) -> Self {
        let mut count = 0;
        let mut violations = Vec::new();
        for v in verdicts {
            count += v.evaluated_count;
            violations.extend(v.violations);
        }
        Verdict::from_parts(count, violations)
    }

    /// Distinct event indices named by the violations.
    pub fn violating_indices(&self) -> Vec<u64> {
        let mut ks: Vec<u64> = self.violations.iter().filter_map(|v| v.k).collect();
        ks.sort_unstable();
        ks.dedup();
        ks
    }
}

#[derive(Debug, Error)]
pub enum CheckError {
    #[error(transparent)]
    Subject(#[from] TransformError),
    #[error("constraint {id}: unknown signal path {path:?}")]
    UnknownPath { id: String, path: String },
    #[error("constraint {id}: {kind} cannot target {target}")]
    TargetMismatch { id: String, kind: ConstraintKind, target: String },
    #[error("constraint {id}: interface {interface} is not on path {path}")]
    NotOnPath { id: String, interface: PortRef, path: String },
    #[error("constraint {constraint} was derived from {found:?}, not {expected:?}")]
    Provenance { constraint: String, expected: String, found: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckOptions {
    /// Largest tag difference at which two terminal events still count as
    /// produced together.
    pub epsilon: TimeNs,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { epsilon: TimeNs::ZERO }
    }
}

/// Accumulates evaluations for one verdict.
struct Tally<'a> {
    id: &'a str,
    evaluated: usize,
    violations: Vec<Violation>,
}

impl<'a> Tally<'a> {
    fn new(id: &'a str) -> Self {
        Tally { id, evaluated: 0, violations: Vec::new() }
    }

    fn test(&mut self, value: TimeNs, bound: Bounds, path: &str, interface: Option<&PortRef>, k: Option<u64>) {
        self.evaluated += 1;
        if !bound.contains(value) {
            self.violations.push(Violation {
                id: self.id.to_string(),
                path: Some(path.to_string()),
                interface: interface.cloned(),
                k,
                measured: value,
                bound,
            });
        }
    }

    fn finish(self) -> Verdict {
        Verdict::from_parts(self.evaluated, self.violations)
    }
}

fn chains<'t>(trace: &'t Trace, path: &SignalPath) -> Vec<CausalChain<'t>> {
    extract_causal_chains(trace, path).chains
}

/// Evaluates `req` on `trace` from the signal-property definitions.
pub fn check_requirement_direct(
    trace: &Trace,
    req: &SignalRequirement,
    model: &SystemModel,
    options: CheckOptions,
) -> Result<Verdict, CheckError> {
    if let Some(problem) = req.problems().into_iter().next() {
        return Err(TransformError::Invalid(problem).into());
    }
    let mut tally = Tally::new(&req.id);
    match req.kind {
        RequirementKind::DataAge => {
            for path in subject_paths(model, req.subject())? {
                for chain in chains(trace, path) {
                    tally.test(data_age(&chain, model), req.bounds, &path.id, None, Some(chain.k()));
                }
            }
        }
        RequirementKind::Synchronicity => {
            for pa in subject_paths(model, &req.subjects[0])? {
                for pb in subject_paths(model, &req.subjects[1])? {
                    let (ca, cb) = (chains(trace, pa), chains(trace, pb));
                    for (a, b) in pair_by_index(&ca, &cb, options.epsilon) {
                        let zeta = synchronicity(a, b, model, options.epsilon).expect("pairs are matched");
                        tally.test(zeta, req.bounds, &format!("{}+{}", pa.id, pb.id), None, Some(a.k()));
                    }
                }
            }
        }
        RequirementKind::SamplingRate => {
            for path in subject_paths(model, req.subject())? {
                let series = sampling_rate_runs(&chains(trace, path), model);
                for (&k, &dt) in &series.values {
                    tally.test(dt, req.bounds, &path.id, None, Some(k));
                }
            }
        }
        RequirementKind::BandLimit => {
            let mut verdicts = Vec::new();
            for path in subject_paths(model, req.subject())? {
                let rates = interface_sampling_rates(trace, model, path);
                verdicts.push(band_limit_direct(model, path, req, &rates));
            }
            return Ok(Verdict::merge(verdicts));
        }
        RequirementKind::NoAliasing => {
            let mut verdicts = Vec::new();
            for path in subject_paths(model, req.subject())? {
                let rates = interface_sampling_rates(trace, model, path);
                verdicts.push(no_aliasing_direct(model, path, &req.id, &rates)?);
            }
            return Ok(Verdict::merge(verdicts));
        }
    }
    Ok(tally.finish())
}

fn filled_periods(path: &SignalPath, rates: &[(PortRef, PropertySeries)]) -> BTreeMap<PortRef, Duration> {
    let mut periods = worst_case_periods(rates);
    for iface in &path.interfaces {
        periods.entry(iface.clone()).or_insert(Duration::ZERO);
    }
    periods
}

fn saturate(d: Duration) -> TimeNs {
    d.finite().unwrap_or(TimeNs(i64::MAX))
}

/// Direct band-limit evaluation on one path from per-interface logical
/// sampling rates (aligned with `path.interfaces`).
///
/// Lower bound: content at band limit `l-` survives only if no interface
/// up to the subject samples slower than `l-`, so every observed
/// `Δt_k` on the path is tested against `[.., l-]`. Upper bound: the band
/// limit propagated from the declared sampling band limit (zero when not
/// declared), filters and worst-case periods must not exceed `l+`.
/// A path without any measured period at the subject is not evaluated.
pub fn band_limit_direct(
    model: &SystemModel,
    path: &SignalPath,
    req: &SignalRequirement,
    rates: &[(PortRef, PropertySeries)],
) -> Verdict {
    let mut tally = Tally::new(&req.id);
    if rates.last().is_none_or(|(_, s)| s.is_empty()) {
        return tally.finish();
    }
    if let Some(lower) = req.bounds.lower {
        let floor = Bounds::at_most(lower);
        for (iface, series) in rates {
            for (&k, &dt) in &series.values {
                tally.test(dt, floor, &path.id, Some(iface), Some(k));
            }
        }
    }
    if let Some(upper) = req.bounds.upper {
        let band_limit = model.sampling_band_limit(path.sampling()).unwrap_or(Duration::ZERO);
        let limits = band_limit_propagate(model, path, band_limit, &filled_periods(path, rates))
            .expect("every interface has a period");
        let delivered = *limits.last().expect("paths are non-empty");
        tally.test(saturate(delivered), Bounds::at_most(upper), &path.id, Some(path.subject()), None);
    }
    tally.finish()
}

/// Direct aliasing evaluation on one path: every adjacent pair `(y, u)`
/// and every observed period `Δt_u,k` is tested against `l_y`, with band
/// limits propagated from the declared sampling band limit.
pub fn no_aliasing_direct(
    model: &SystemModel,
    path: &SignalPath,
    id: &str,
    rates: &[(PortRef, PropertySeries)],
) -> Result<Verdict, CheckError> {
    let band_limit = model.sampling_band_limit(path.sampling()).ok_or_else(|| TransformError::MissingBandLimit {
        path: path.id.clone(),
        port: path.sampling().clone(),
    })?;
    let limits = band_limit_propagate(model, path, band_limit, &filled_periods(path, rates))
        .expect("every interface has a period");
    let mut tally = Tally::new(id);
    for (pos, (iface, series)) in rates.iter().enumerate().skip(1) {
        let bound = Bounds { lower: None, upper: limits[pos - 1].finite() };
        for (&k, &dt) in &series.values {
            tally.test(dt, bound, &path.id, Some(iface), Some(k));
        }
    }
    Ok(tally.finish())
}

fn lookup_path<'m>(model: &'m SystemModel, c: &TimingConstraint, id: &str) -> Result<&'m SignalPath, CheckError> {
    model.path(id).ok_or_else(|| CheckError::UnknownPath { id: c.id.clone(), path: id.to_string() })
}

/// Evaluates one derived timing constraint on `trace`.
pub fn check_constraint(
    trace: &Trace,
    constraint: &TimingConstraint,
    model: &SystemModel,
    options: CheckOptions,
) -> Result<Verdict, CheckError> {
    let mismatch = || CheckError::TargetMismatch {
        id: constraint.id.clone(),
        kind: constraint.kind,
        target: constraint.target.to_string(),
    };
    let mut tally = Tally::new(&constraint.id);
    let bound = constraint.bounds;
    match (constraint.kind, &constraint.target) {
        (ConstraintKind::LatencyBound, Target::Path { path }) => {
            let path = lookup_path(model, constraint, path)?;
            for chain in chains(trace, path) {
                tally.test(latency(&chain), bound, &path.id, None, Some(chain.k()));
            }
        }
        (ConstraintKind::RelativeLatencyBound, Target::PathPair { paths: [a, b] }) => {
            let (pa, pb) = (lookup_path(model, constraint, a)?, lookup_path(model, constraint, b)?);
            let (ca, cb) = (chains(trace, pa), chains(trace, pb));
            let label = format!("{}+{}", pa.id, pb.id);
            for (a, b) in pair_by_index(&ca, &cb, options.epsilon) {
                tally.test(latency(b) - latency(a), bound, &label, None, Some(a.k()));
            }
        }
        (ConstraintKind::ConsecutiveLatencyBound, Target::Path { path }) => {
            let path = lookup_path(model, constraint, path)?;
            let chains = chains(trace, path);
            for pair in chains.windows(2) {
                let (prev, next) = (&pair[0], &pair[1]);
                if next.k() != prev.k() + 1 {
                    continue;
                }
                let tag_distance = next.terminal().tag - prev.terminal().tag;
                let value = tag_distance - (latency(next) - latency(prev));
                tally.test(value, bound, &path.id, None, Some(next.k()));
            }
        }
        (
            ConstraintKind::SamplingPeriodBound,
            Target::Interface { path, interface: consumer } | Target::InterfacePair { path, consumer, .. },
        ) => {
            let path = lookup_path(model, constraint, path)?;
            let pos = path.position(consumer).ok_or_else(|| CheckError::NotOnPath {
                id: constraint.id.clone(),
                interface: consumer.clone(),
                path: path.id.clone(),
            })?;
            let series = sampling_rate_runs(&chains(trace, &path.prefix(pos)), model);
            for (&k, &dt) in &series.values {
                tally.test(dt, bound, &path.id, Some(consumer), Some(k));
            }
        }
        _ => return Err(mismatch()),
    }
    Ok(tally.finish())
}

/// Period-bound evaluation from precomputed per-interface rates.
pub fn period_bound_from_rates(
    constraint: &TimingConstraint,
    path: &SignalPath,
    rates: &[(PortRef, PropertySeries)],
) -> Verdict {
    let consumer = match &constraint.target {
        Target::Interface { interface, .. } => interface,
        Target::InterfacePair { consumer, .. } => consumer,
        _ => return Verdict::inconclusive(),
    };
    let mut tally = Tally::new(&constraint.id);
    if let Some((iface, series)) = rates.iter().find(|(p, _)| p == consumer) {
        for (&k, &dt) in &series.values {
            tally.test(dt, constraint.bounds, &path.id, Some(iface), Some(k));
        }
    }
    tally.finish()
}

/// Direct and transformed verdicts for one requirement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Agreement {
    pub requirement: String,
    pub kind: RequirementKind,
    pub relation: Relation,
    pub direct: Verdict,
    pub transformed: Verdict,
    /// Equal statuses for equivalent transformations; for necessary ones,
    /// only "transformed FAIL implies direct FAIL" is required.
    pub agree: bool,
}

/// Runs both checks for `req`. `report` must hold only constraints
/// derived from `req`.
pub fn check_agreement(
    trace: &Trace,
    req: &SignalRequirement,
    report: &TransformReport,
    model: &SystemModel,
    options: CheckOptions,
) -> Result<Agreement, CheckError> {
    if let Some(c) = report.constraints.iter().find(|c| c.provenance.requirement != req.id) {
        return Err(CheckError::Provenance {
            constraint: c.id.clone(),
            expected: req.id.clone(),
            found: c.provenance.requirement.clone(),
        });
    }
    let direct = check_requirement_direct(trace, req, model, options)?;
    let transformed = Verdict::merge(
        report
            .constraints
            .iter()
            .map(|c| check_constraint(trace, c, model, options))
            .collect::<Result<Vec<_>, _>>()?,
    );
    let relation = req.kind.relation();
    let agree = match relation {
        Relation::EquivalentUnderConstantDelay => direct.status == transformed.status,
        Relation::Necessary => transformed.status != Status::Fail || direct.status == Status::Fail,
    };
    Ok(Agreement { requirement: req.id.clone(), kind: req.kind, relation, direct, transformed, agree })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subject {
    Requirement,
    Constraint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledVerdict {
    pub id: String,
    pub subject: Subject,
    #[serde(flatten)]
    pub verdict: Verdict,
}

/// Full check output.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CheckReport {
    pub verdicts: Vec<LabeledVerdict>,
    pub agreements: Vec<Agreement>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

impl CheckReport {
    pub fn any(&self, status: Status) -> bool {
        self.verdicts.iter().any(|v| v.verdict.status == status)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("check reports always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Summary line per verdict followed by one line per violation.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in &self.verdicts {
            let label = match v.subject {
                Subject::Requirement => "requirement",
                Subject::Constraint => "constraint",
            };
            out.push_str(&format!(
                "{} {label} {} ({} evaluated)\n",
                v.verdict.status, v.id, v.verdict.evaluated_count
            ));
            for violation in &v.verdict.violations {
                out.push_str(&format!("  violation: {violation}\n"));
            }
        }
        for a in &self.agreements {
            out.push_str(&format!(
                "agreement {}: direct {} / transformed {} -> {}\n",
                a.requirement,
                a.direct.status,
                a.transformed.status,
                if a.agree { "agree" } else { "DISAGREE" }
            ));
        }
        for e in &self.errors {
            out.push_str(&format!("error: {e}\n"));
        }
        out
    }
}

/// Checks every requirement directly, every constraint of `report`, and
/// the agreement between them.
pub fn check_all(
    trace: &Trace,
    requirements: &[SignalRequirement],
    report: &TransformReport,
    model: &SystemModel,
    options: CheckOptions,
) -> CheckReport {
    let mut out = CheckReport::default();
    for req in requirements {
        match check_requirement_direct(trace, req, model, options) {
            Ok(verdict) => out.verdicts.push(LabeledVerdict {
                id: req.id.clone(),
                subject: Subject::Requirement,
                verdict,
            }),
            Err(e) => out.errors.push(format!("{}: {e}", req.id)),
        }
    }
    for c in &report.constraints {
        match check_constraint(trace, c, model, options) {
            Ok(verdict) => out.verdicts.push(LabeledVerdict {
                id: c.id.clone(),
                subject: Subject::Constraint,
                verdict,
            }),
            Err(e) => out.errors.push(e.to_string()),
        }
    }
    for req in requirements {
        let own = TransformReport {
            constraints: report.constraints_for(&req.id).cloned().collect(),
            diagnostics: Vec::new(),
        };
        if let Ok(a) = check_agreement(trace, req, &own, model, options) {
            out.agreements.push(a);
        }
    }
    out
}
