//! Signal-level requirements and their translation into timing
//! constraints on cause-effect chains.
//!
//! | requirement     | constraint                    | relation                     |
//! |-----------------|-------------------------------|------------------------------|
//! | data age        | latency bound                 | equivalent (constant delays) |
//! | synchronicity   | relative latency bound        | equivalent (constant delays) |
//! | sampling rate   | consecutive latency bound     | equivalent (constant delays) |
//! | band limit      | sampling period bound         | necessary                    |
//! | no aliasing     | sampling period bound per hop | necessary                    |
//!
//! A requirement on a port with several signal paths yields one constraint
//! per path; all of them have to hold.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::band_limit_propagate;
use crate::model::{resolve_signal_paths, ModelError, PortKind, PortRef, SignalPath, SystemModel};
use crate::time::{Bounds, Duration, TimeNs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequirementKind {
    DataAge,
    Synchronicity,
    SamplingRate,
    BandLimit,
    NoAliasing,
}

impl RequirementKind {
    pub const ALL: [RequirementKind; 5] = [
        RequirementKind::DataAge,
        RequirementKind::Synchronicity,
        RequirementKind::SamplingRate,
        RequirementKind::BandLimit,
        RequirementKind::NoAliasing,
    ];

    /// Proposition number of the transformation for this kind.
    pub fn proposition(self) -> u8 {
        match self {
            RequirementKind::DataAge => 1,
            RequirementKind::Synchronicity => 2,
            RequirementKind::SamplingRate => 3,
            RequirementKind::BandLimit => 4,
            RequirementKind::NoAliasing => 5,
        }
    }

    pub fn relation(self) -> Relation {
        match self {
            RequirementKind::DataAge | RequirementKind::Synchronicity | RequirementKind::SamplingRate => {
                Relation::EquivalentUnderConstantDelay
            }
            RequirementKind::BandLimit | RequirementKind::NoAliasing => Relation::Necessary,
        }
    }
}

impl fmt::Display for RequirementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RequirementKind::DataAge => "data_age",
            RequirementKind::Synchronicity => "synchronicity",
            RequirementKind::SamplingRate => "sampling_rate",
            RequirementKind::BandLimit => "band_limit",
            RequirementKind::NoAliasing => "no_aliasing",
        })
    }
}

/// How a derived constraint relates to its requirement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// Satisfied iff the requirement is, given constant declared delays.
    EquivalentUnderConstantDelay,
    /// Violating the constraint implies violating the requirement.
    Necessary,
}

/// A bounded constraint on one signal property.
///
/// `subjects` holds one port, or two for synchronicity where
/// `ζ = t(subjects[0]) - t(subjects[1])`. For band limits the lower bound
/// is the finest band limit the subject must be able to carry and the
/// upper bound caps the band limit it delivers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalRequirement {
    pub id: String,
    pub kind: RequirementKind,
    pub subjects: Vec<PortRef>,
    pub bounds: Bounds,
}

impl SignalRequirement {
    pub fn new(id: impl Into<String>, kind: RequirementKind, subject: PortRef, bounds: Bounds) -> Self {
        SignalRequirement { id: id.into(), kind, subjects: vec![subject], bounds }
    }

    pub fn synchronicity(id: impl Into<String>, a: PortRef, b: PortRef, bounds: Bounds) -> Self {
        SignalRequirement {
            id: id.into(),
            kind: RequirementKind::Synchronicity,
            subjects: vec![a, b],
            bounds,
        }
    }

    pub fn subject(&self) -> &PortRef {
        &self.subjects[0]
    }

    /// Problems with the requirement itself, independent of any model.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let want = if self.kind == RequirementKind::Synchronicity { 2 } else { 1 };
        if self.subjects.len() != want {
            out.push(format!("{} requirement needs {want} subject(s), got {}", self.kind, self.subjects.len()));
        }
        if !self.bounds.is_well_formed() {
            out.push(format!("bounds {} are not ordered", self.bounds));
        }
        if self.kind == RequirementKind::BandLimit
            && [self.bounds.lower, self.bounds.upper].iter().flatten().any(|v| v.ns() < 0)
        {
            out.push("band limit bounds must be non-negative".into());
        }
        if self.kind == RequirementKind::NoAliasing && self.bounds != Bounds::UNBOUNDED {
            out.push("no_aliasing requirements take no bounds".into());
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum RequirementError {
    #[error("requirement parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("requirement {id:?}: {message}")]
    Invalid { id: String, message: String },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RequirementDoc {
    id: String,
    kind: RequirementKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    subject: Option<PortRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    subjects: Option<Vec<PortRef>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lower_ns: Option<TimeNs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    upper_ns: Option<TimeNs>,
}

/// Parses a JSON list of requirements.
pub fn load_requirements(document: &str) -> Result<Vec<SignalRequirement>, RequirementError> {
    let docs: Vec<RequirementDoc> = serde_json::from_str(document).map_err(|e| RequirementError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    docs.into_iter()
        .map(|d| {
            let subjects = match (d.subject, d.subjects) {
                (Some(s), None) => vec![s],
                (None, Some(v)) => v,
                (Some(_), Some(_)) => {
                    return Err(RequirementError::Invalid {
                        id: d.id,
                        message: "give either subject or subjects, not both".into(),
                    })
                }
                (None, None) => {
                    return Err(RequirementError::Invalid { id: d.id, message: "missing subject".into() })
                }
            };
            Ok(SignalRequirement {
                id: d.id,
                kind: d.kind,
                subjects,
                bounds: Bounds { lower: d.lower_ns, upper: d.upper_ns },
            })
        })
        .collect()
}

pub fn requirements_to_json(reqs: &[SignalRequirement]) -> String {
    let docs: Vec<RequirementDoc> = reqs
        .iter()
        .map(|r| {
            let (subject, subjects) = if r.subjects.len() == 1 {
                (Some(r.subjects[0].clone()), None)
            } else {
                (None, Some(r.subjects.clone()))
            };
            RequirementDoc {
                id: r.id.clone(),
                kind: r.kind,
                subject,
                subjects,
                lower_ns: r.bounds.lower,
                upper_ns: r.bounds.upper,
            }
        })
        .collect();
    serde_json::to_string_pretty(&docs).expect("requirements always serialize")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    /// `h` of every chain on a path.
    LatencyBound,
    /// `h(paths[1]) - h(paths[0])` for every paired index.
    RelativeLatencyBound,
    /// `(t̂_k - t̂_{k-1}) - (h_k - h_{k-1})` for consecutive chains.
    ConsecutiveLatencyBound,
    /// Worst-case logical sampling period at an interface.
    SamplingPeriodBound,
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstraintKind::LatencyBound => "latency_bound",
            ConstraintKind::RelativeLatencyBound => "relative_latency_bound",
            ConstraintKind::ConsecutiveLatencyBound => "consecutive_latency_bound",
            ConstraintKind::SamplingPeriodBound => "sampling_period_bound",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Target {
    InterfacePair { path: String, producer: PortRef, consumer: PortRef },
    Interface { path: String, interface: PortRef },
    PathPair { paths: [String; 2] },
    Path { path: String },
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::InterfacePair { path, producer, consumer } => write!(f, "{path}:({producer} -> {consumer})"),
            Target::Interface { path, interface } => write!(f, "{path}:{interface}"),
            Target::PathPair { paths } => write!(f, "{} vs {}", paths[0], paths[1]),
            Target::Path { path } => f.write_str(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub requirement: String,
    pub proposition: u8,
    pub relation: Relation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingConstraint {
    pub id: String,
    pub kind: ConstraintKind,
    pub target: Target,
    #[serde(flatten)]
    pub bounds: Bounds,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportDiagnostic {
    pub severity: Severity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requirement: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TransformReport {
    pub constraints: Vec<TimingConstraint>,
    pub diagnostics: Vec<ReportDiagnostic>,
}

impl TransformReport {
    pub fn has_errors(&self) -> bool {
        self.diagnostics.iter().any(|d| d.severity == Severity::Error)
    }

    pub fn constraints_for<'a>(&'a self, requirement: &'a str) -> impl Iterator<Item = &'a TimingConstraint> + 'a {
        self.constraints.iter().filter(move |c| c.provenance.requirement == requirement)
    }

    fn extend(&mut self, other: TransformReport) {
        self.constraints.extend(other.constraints);
        self.diagnostics.extend(other.diagnostics);
    }

    fn warn(&mut self, req: &SignalRequirement, message: String) {
        self.diagnostics.push(ReportDiagnostic {
            severity: Severity::Warning,
            requirement: Some(req.id.clone()),
            message,
        });
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TransformError {
    #[error("unknown subject {0}")]
    UnknownSubject(PortRef),
    #[error("no signal path ends at {0}")]
    NoSignalPath(PortRef),
    #[error("missing sampling band limit on {port} (path {path})")]
    MissingBandLimit { path: String, port: PortRef },
    #[error("{kind} transformation applied to a {found} requirement")]
    WrongKind { kind: RequirementKind, found: RequirementKind },
    #[error("invalid requirement: {0}")]
    Invalid(String),
}

fn expect_kind(req: &SignalRequirement, kind: RequirementKind) -> Result<(), TransformError> {
    if req.kind != kind {
        return Err(TransformError::WrongKind { kind, found: req.kind });
    }
    if let Some(problem) = req.problems().into_iter().next() {
        return Err(TransformError::Invalid(problem));
    }
    Ok(())
}

/// Paths of `subject`, failing when there are none.
pub fn subject_paths<'m>(model: &'m SystemModel, subject: &PortRef) -> Result<Vec<&'m SignalPath>, TransformError> {
    let paths = resolve_signal_paths(model, subject).map_err(|e| match e {
        ModelError::UnknownPort(p) => TransformError::UnknownSubject(p),
        other => TransformError::Invalid(other.to_string()),
    })?;
    if paths.is_empty() {
        return Err(TransformError::NoSignalPath(subject.clone()));
    }
    Ok(paths)
}

fn provenance(req: &SignalRequirement) -> Provenance {
    Provenance { requirement: req.id.clone(), proposition: req.kind.proposition(), relation: req.kind.relation() }
}

/// Data age `a ∈ [a-, a+]` becomes latency `h ∈ [a- - d, a+ - d]` per path.
pub fn transform_data_age(req: &SignalRequirement, model: &SystemModel) -> Result<TransformReport, TransformError> {
    expect_kind(req, RequirementKind::DataAge)?;
    let mut report = TransformReport::default();
    for path in subject_paths(model, req.subject())? {
        let d = path.total_delay();
        let bounds = req.bounds.shifted_down(d);
        if bounds.upper.is_some_and(|hi| hi.ns() < 0) {
            report.warn(
                req,
                format!(
                    "unsatisfiable on path {}: upper latency bound {} is negative (delay {d} exceeds the age bound)",
                    path.id,
                    bounds.upper.unwrap()
                ),
            );
        }
        report.constraints.push(TimingConstraint {
            id: format!("{}/{}", req.id, path.id),
            kind: ConstraintKind::LatencyBound,
            target: Target::Path { path: path.id.clone() },
            bounds,
            provenance: provenance(req),
        });
    }
    Ok(report)
}

/// Synchronicity `ζ = t_a - t_b ∈ [ζ-, ζ+]` becomes
/// `h_b - h_a ∈ [ζ- - (d_b - d_a), ζ+ - (d_b - d_a)]` for every pair of
/// paths, assuming both terminal events carry the same tag.
pub fn transform_synchronicity(
    req: &SignalRequirement,
    model: &SystemModel,
) -> Result<TransformReport, TransformError> {
    expect_kind(req, RequirementKind::Synchronicity)?;
    let paths_a = subject_paths(model, &req.subjects[0])?;
    let paths_b = subject_paths(model, &req.subjects[1])?;
    let mut report = TransformReport::default();
    for pa in &paths_a {
        for pb in &paths_b {
            let offset = pb.total_delay() - pa.total_delay();
            report.constraints.push(TimingConstraint {
                id: format!("{}/{}+{}", req.id, pa.id, pb.id),
                kind: ConstraintKind::RelativeLatencyBound,
                target: Target::PathPair { paths: [pa.id.clone(), pb.id.clone()] },
                bounds: req.bounds.shifted_down(offset),
                provenance: provenance(req),
            });
        }
    }
    Ok(report)
}

/// Sampling rate `Δt ∈ [Δt-, Δt+]` becomes a bound on
/// `(t̂_k - t̂_{k-1}) - (h_k - h_{k-1})` per path.
pub fn transform_sampling_rate(
    req: &SignalRequirement,
    model: &SystemModel,
) -> Result<TransformReport, TransformError> {
    expect_kind(req, RequirementKind::SamplingRate)?;
    let mut report = TransformReport::default();
    for path in subject_paths(model, req.subject())? {
        report.constraints.push(TimingConstraint {
            id: format!("{}/{}", req.id, path.id),
            kind: ConstraintKind::ConsecutiveLatencyBound,
            target: Target::Path { path: path.id.clone() },
            bounds: req.bounds,
            provenance: provenance(req),
        });
    }
    Ok(report)
}

/// Band limit `l ∈ [l-, l+]` requires the subject to sample at least as
/// fast as `l-`: worst-case `Δt <= l-`. An upper bound additionally needs
/// a filter with cut-off at most `l+` somewhere on each path; its absence
/// is reported as a warning.
pub fn transform_band_limit(req: &SignalRequirement, model: &SystemModel) -> Result<TransformReport, TransformError> {
    expect_kind(req, RequirementKind::BandLimit)?;
    let mut report = TransformReport::default();
    for path in subject_paths(model, req.subject())? {
        report.constraints.push(TimingConstraint {
            id: format!("{}/{}", req.id, path.id),
            kind: ConstraintKind::SamplingPeriodBound,
            target: Target::Interface { path: path.id.clone(), interface: req.subject().clone() },
            bounds: Bounds { lower: None, upper: req.bounds.lower },
            provenance: provenance(req),
        });
        if let Some(upper) = req.bounds.upper {
            let has_filter = path.interfaces.iter().any(|iface| {
                model.kind(iface) == Some(PortKind::Output)
                    && model.component(&iface.component).is_some_and(|c| {
                        c.filters.get(&iface.port).is_some_and(|&g| g <= Duration::Finite(upper))
                    })
            });
            if !has_filter {
                report.warn(
                    req,
                    format!("upper band limit cannot be enforced: no filter in path {} with cutoff <= {upper}", path.id),
                );
            }
        }
    }
    Ok(report)
}

/// Positions of the resampling subsequence `B_x` of `path`: the sampling
/// interface, every interface marked resampling, and the subject.
pub fn resampling_positions(model: &SystemModel, path: &SignalPath) -> Vec<usize> {
    let last = path.len() - 1;
    let mut out = vec![0];
    out.extend((1..last).filter(|&i| model.is_resampling(&path.interfaces[i])));
    if last > 0 {
        out.push(last);
    }
    out
}

/// Band limits along `path` from declared quantities only: the sampling
/// band limit and filter cut-offs, with every period taken as zero.
pub fn declared_band_limits(model: &SystemModel, path: &SignalPath) -> Result<Vec<Duration>, TransformError> {
    let band_limit = model.sampling_band_limit(path.sampling()).ok_or_else(|| TransformError::MissingBandLimit {
        path: path.id.clone(),
        port: path.sampling().clone(),
    })?;
    let zero: BTreeMap<PortRef, Duration> = path.interfaces.iter().map(|p| (p.clone(), Duration::ZERO)).collect();
    Ok(band_limit_propagate(model, path, band_limit, &zero).expect("all periods supplied"))
}

/// No aliasing on the subject: for each adjacent pair `(y, u)` of the
/// resampling subsequence, `u` must sample at least as fast as the band
/// limit of the signal delivered to it, i.e. the declared band limit at
/// the interface feeding `u`. That value includes every filter between
/// `y` and `u`.
pub fn transform_no_aliasing(req: &SignalRequirement, model: &SystemModel) -> Result<TransformReport, TransformError> {
    expect_kind(req, RequirementKind::NoAliasing)?;
    let mut report = TransformReport::default();
    for path in subject_paths(model, req.subject())? {
        let limits = declared_band_limits(model, path)?;
        let positions = resampling_positions(model, path);
        for pair in positions.windows(2) {
            let (y, u) = (pair[0], pair[1]);
            let consumer = &path.interfaces[u];
            report.constraints.push(TimingConstraint {
                id: format!("{}/{}/{}", req.id, path.id, consumer),
                kind: ConstraintKind::SamplingPeriodBound,
                target: Target::InterfacePair {
                    path: path.id.clone(),
                    producer: path.interfaces[y].clone(),
                    consumer: consumer.clone(),
                },
                bounds: Bounds { lower: None, upper: limits[u - 1].finite() },
                provenance: provenance(req),
            });
        }
    }
    Ok(report)
}

/// Transforms one requirement according to its kind.
pub fn transform(req: &SignalRequirement, model: &SystemModel) -> Result<TransformReport, TransformError> {
    match req.kind {
        RequirementKind::DataAge => transform_data_age(req, model),
        RequirementKind::Synchronicity => transform_synchronicity(req, model),
        RequirementKind::SamplingRate => transform_sampling_rate(req, model),
        RequirementKind::BandLimit => transform_band_limit(req, model),
        RequirementKind::NoAliasing => transform_no_aliasing(req, model),
    }
}

/// Transforms every requirement, in order. Failures become error
/// diagnostics so that a full report is always produced.
pub fn transform_all(requirements: &[SignalRequirement], model: &SystemModel) -> TransformReport {
    let mut report = TransformReport::default();
    let mut seen = HashSet::new();
    for req in requirements {
        if !seen.insert(req.id.as_str()) {
            report.diagnostics.push(ReportDiagnostic {
                severity: Severity::Error,
                requirement: Some(req.id.clone()),
                message: format!("duplicate id {:?}", req.id),
            });
            continue;
        }
        match transform(req, model) {
            Ok(r) => report.extend(r),
            Err(e) => report.diagnostics.push(ReportDiagnostic {
                severity: Severity::Error,
                requirement: Some(req.id.clone()),
                message: e.to_string(),
            }),
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Component, Port};

    fn ms(v: i64) -> TimeNs {
        TimeNs::from_ms(v)
    }

    fn p(c: &str, i: u32) -> PortRef {
        PortRef::new(c, i)
    }

    /// Two independent sensor -> reader paths with delays `d1`, `d2`.
    fn two_paths(d1: i64, d2: i64) -> SystemModel {
        SystemModel::new(
            vec![
                Component::new("s1", vec![Port::new(0, PortKind::Sampling).with_band_limit(Duration::ms(20))]),
                Component::new("s2", vec![Port::new(0, PortKind::Sampling)]),
                Component::new("x", vec![Port::new(0, PortKind::Input), Port::new(1, PortKind::Input)]),
            ],
            vec![
                SignalPath::new("p1", vec![p("s1", 0), p("x", 0)], vec![Duration::ZERO, Duration::ms(d1)]),
                SignalPath::new("p2", vec![p("s2", 0), p("x", 1)], vec![Duration::ZERO, Duration::ms(d2)]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn data_age_shifts_by_delay() {
        let model = two_paths(1, 0);
        let req = SignalRequirement::new("age", RequirementKind::DataAge, p("x", 0), Bounds::new(ms(2), ms(5)));
        let report = transform_data_age(&req, &model).unwrap();
        assert_eq!(report.constraints.len(), 1);
        let c = &report.constraints[0];
        assert_eq!(c.kind, ConstraintKind::LatencyBound);
        assert_eq!(c.bounds, Bounds::new(ms(1), ms(4)));
        assert_eq!(c.provenance.proposition, 1);
        assert!(report.diagnostics.is_empty());
    }

    #[test]
    fn data_age_identity_at_zero_delay() {
        let model = two_paths(0, 0);
        let req = SignalRequirement::new("age", RequirementKind::DataAge, p("x", 0), Bounds::new(ms(0), ms(5)));
        let report = transform_data_age(&req, &model).unwrap();
        assert_eq!(report.constraints[0].bounds, req.bounds);
    }

    #[test]
    fn data_age_unsatisfiable_is_a_warning() {
        let model = two_paths(3, 0);
        let req = SignalRequirement::new("age", RequirementKind::DataAge, p("x", 0), Bounds::new(ms(0), ms(2)));
        let report = transform_data_age(&req, &model).unwrap();
        assert_eq!(report.constraints[0].bounds.upper, Some(ms(-1)));
        assert_eq!(report.diagnostics.len(), 1);
        assert!(report.diagnostics[0].message.contains("unsatisfiable"));
        assert!(!report.has_errors());
    }

    #[test]
    fn synchronicity_offsets() {
        let sync = |d1, d2, lo, hi| {
            let model = two_paths(d1, d2);
            let req = SignalRequirement::synchronicity("z", p("x", 0), p("x", 1), Bounds::new(ms(lo), ms(hi)));
            transform_synchronicity(&req, &model).unwrap().constraints[0].bounds
        };
        assert_eq!(sync(2, 2, -1, 1), Bounds::new(ms(-1), ms(1)));
        assert_eq!(sync(2, 3, -1, 1), Bounds::new(ms(-2), ms(0)));
        assert_eq!(sync(0, 0, 0, 0), Bounds::exactly(ms(0)));
    }

    #[test]
    fn sampling_rate_keeps_bounds() {
        let model = two_paths(4, 0);
        let req = SignalRequirement::new("r", RequirementKind::SamplingRate, p("x", 0), Bounds::new(ms(9), ms(11)));
        let c = &transform_sampling_rate(&req, &model).unwrap().constraints[0];
        assert_eq!(c.kind, ConstraintKind::ConsecutiveLatencyBound);
        assert_eq!(c.bounds, req.bounds);
    }

    fn filtered(cutoff: Option<i64>) -> SystemModel {
        let mut sensor = Component::new(
            "sensor",
            vec![Port::new(0, PortKind::Sampling).with_band_limit(Duration::ms(10)), Port::new(1, PortKind::Output)],
        );
        if let Some(g) = cutoff {
            sensor = sensor.with_filter(1, Duration::ms(g));
        }
        SystemModel::new(
            vec![sensor, Component::new("reader", vec![Port::new(0, PortKind::Input).resampling()])],
            vec![SignalPath::undelayed("p", vec![p("sensor", 0), p("sensor", 1), p("reader", 0)])],
        )
        .unwrap()
    }

    #[test]
    fn band_limit_emits_period_bound() {
        let req = SignalRequirement::new("bl", RequirementKind::BandLimit, p("reader", 0), Bounds::at_least(ms(20)));
        let report = transform_band_limit(&req, &filtered(None)).unwrap();
        assert_eq!(report.constraints[0].bounds, Bounds::at_most(ms(20)));
        assert!(report.diagnostics.is_empty());

        let req = SignalRequirement::new("bl", RequirementKind::BandLimit, p("reader", 0), Bounds::new(ms(20), ms(50)));
        let report = transform_band_limit(&req, &filtered(Some(40))).unwrap();
        assert_eq!(report.constraints.len(), 1);
        assert!(report.diagnostics.is_empty());

        let report = transform_band_limit(&req, &filtered(None)).unwrap();
        assert_eq!(report.diagnostics.len(), 1);
        assert!(report.diagnostics[0].message.contains("no filter"));
    }

    #[test]
    fn no_aliasing_pairs() {
        let req = SignalRequirement::new("na", RequirementKind::NoAliasing, p("reader", 0), Bounds::UNBOUNDED);
        let report = transform_no_aliasing(&req, &filtered(Some(40))).unwrap();
        assert_eq!(report.constraints.len(), 1);
        let c = &report.constraints[0];
        assert_eq!(c.bounds, Bounds::at_most(ms(40)));
        assert_eq!(
            c.target,
            Target::InterfacePair { path: "p".into(), producer: p("sensor", 0), consumer: p("reader", 0) }
        );

        let report = transform_no_aliasing(&req, &filtered(None)).unwrap();
        assert_eq!(report.constraints[0].bounds, Bounds::at_most(ms(10)));
    }

    #[test]
    fn no_aliasing_without_resampling_marks() {
        let model = two_paths(0, 0);
        let req = SignalRequirement::new("na", RequirementKind::NoAliasing, p("x", 0), Bounds::UNBOUNDED);
        let report = transform_no_aliasing(&req, &model).unwrap();
        assert_eq!(report.constraints.len(), 1);
        assert_eq!(report.constraints[0].bounds, Bounds::at_most(ms(20)));

        let req = SignalRequirement::new("na", RequirementKind::NoAliasing, p("x", 1), Bounds::UNBOUNDED);
        assert!(matches!(transform_no_aliasing(&req, &model), Err(TransformError::MissingBandLimit { .. })));
    }

    #[test]
    fn resampling_subsequence() {
        let model = filtered(Some(40));
        let path = &model.paths()[0];
        assert_eq!(resampling_positions(&model, path), [0, 2]);
    }

    #[test]
    fn transform_all_collects_errors() {
        let model = two_paths(1, 0);
        assert_eq!(transform_all(&[], &model), TransformReport::default());

        let reqs = vec![
            SignalRequirement::new("a", RequirementKind::DataAge, p("x", 0), Bounds::at_most(ms(5))),
            SignalRequirement::new("a", RequirementKind::DataAge, p("x", 1), Bounds::at_most(ms(5))),
            SignalRequirement::new("b", RequirementKind::DataAge, p("ghost", 0), Bounds::at_most(ms(5))),
            SignalRequirement::new("c", RequirementKind::DataAge, p("s1", 0), Bounds::new(ms(5), ms(1))),
        ];
        let report = transform_all(&reqs, &model);
        assert_eq!(report.constraints.len(), 1);
        let messages: Vec<_> = report.diagnostics.iter().map(|d| d.message.as_str()).collect();
        assert!(messages[0].contains("duplicate id"));
        assert!(messages[1].contains("unknown subject"));
        assert!(messages[2].contains("not ordered"));
        assert!(report.has_errors());
    }

    #[test]
    fn fan_out_per_path() {
        let model = SystemModel::new(
            vec![
                Component::new("s", vec![Port::new(0, PortKind::Sampling), Port::new(1, PortKind::Output)]),
                Component::new("x", vec![Port::new(0, PortKind::Input)]),
            ],
            vec![
                SignalPath::new("b", vec![p("s", 0), p("x", 0)], vec![Duration::ZERO, Duration::ms(2)]),
                SignalPath::undelayed("a", vec![p("s", 0), p("s", 1), p("x", 0)]),
            ],
        )
        .unwrap();
        let req = SignalRequirement::new("age", RequirementKind::DataAge, p("x", 0), Bounds::at_most(ms(5)));
        let report = transform_data_age(&req, &model).unwrap();
        let got: Vec<_> = report.constraints.iter().map(|c| (c.id.as_str(), c.bounds.upper)).collect();
        assert_eq!(got, [("age/a", Some(ms(5))), ("age/b", Some(ms(3)))]);
    }

    #[test]
    fn requirement_json_round_trip() {
        let doc = r#"[
            {"id": "age", "kind": "data_age", "subject": {"component": "x", "port": 0},
             "lower_ns": 2000000, "upper_ns": 5000000},
            {"id": "z", "kind": "synchronicity",
             "subjects": [{"component": "x", "port": 0}, {"component": "x", "port": 1}],
             "lower_ns": -1000000, "upper_ns": 1000000},
            {"id": "bl", "kind": "band_limit", "subject": {"component": "x", "port": 0}, "lower_ns": 20000000}
        ]"#;
        let reqs = load_requirements(doc).unwrap();
        assert_eq!(reqs.len(), 3);
        assert_eq!(reqs[1].subjects.len(), 2);
        assert_eq!(reqs[2].bounds.upper, None);
        assert_eq!(load_requirements(&requirements_to_json(&reqs)).unwrap(), reqs);
        assert!(load_requirements(r#"[{"id": "q", "kind": "data_age"}]"#).is_err());
    }

    #[test]
    fn report_json_round_trip() {
        let model = filtered(Some(40));
        let reqs = vec![
            SignalRequirement::new("na", RequirementKind::NoAliasing, p("reader", 0), Bounds::UNBOUNDED),
            SignalRequirement::new("bl", RequirementKind::BandLimit, p("reader", 0), Bounds::new(ms(20), ms(30))),
            SignalRequirement::new("age", RequirementKind::DataAge, p("reader", 0), Bounds::at_most(ms(3))),
        ];
        let report = transform_all(&reqs, &model);
        assert_eq!(TransformReport::from_json(&report.to_json()).unwrap(), report);
    }
}
