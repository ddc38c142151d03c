//! System description: components, their ports, and the signal paths that
//! carry information from sampling ports to the interfaces under analysis.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::{Duration, TimeNs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PortKind {
    Input,
    Output,
    Sampling,
    Actuation,
}

impl fmt::Display for PortKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PortKind::Input => "input",
            PortKind::Output => "output",
            PortKind::Sampling => "sampling",
            PortKind::Actuation => "actuation",
        })
    }
}

/// Structural address of an interface: the owning component and the
/// port index within it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PortRef {
    pub component: String,
    pub port: u32,
}

impl PortRef {
    pub fn new(component: impl Into<String>, port: u32) -> Self {
        PortRef { component: component.into(), port }
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.component, self.port)
    }
}

impl FromStr for PortRef {
    type Err = String;

    /// Parses `component:port`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (component, port) =
            s.rsplit_once(':').ok_or_else(|| format!("expected component:port, got {s:?}"))?;
        if component.is_empty() {
            return Err(format!("empty component id in {s:?}"));
        }
        let port = port.parse().map_err(|_| format!("invalid port index in {s:?}"))?;
        Ok(PortRef::new(component, port))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Port {
    pub index: u32,
    pub kind: PortKind,
    /// Whether the interface re-discretizes its input. Sampling ports always do.
    pub resampling: bool,
    /// Band limit of the physical quantity observed by a sampling port.
    pub band_limit: Option<Duration>,
}

impl Port {
    pub fn new(index: u32, kind: PortKind) -> Self {
        Port { index, kind, resampling: kind == PortKind::Sampling, band_limit: None }
    }

    pub fn resampling(mut self) -> Self {
        self.resampling = true;
        self
    }

    pub fn with_band_limit(mut self, band_limit: Duration) -> Self {
        self.band_limit = Some(band_limit);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub id: String,
    pub ports: Vec<Port>,
    /// Task names, kept as metadata only.
    pub tasks: Vec<String>,
    /// Filter cut-off `g` per output port index.
    pub filters: BTreeMap<u32, Duration>,
}

impl Component {
    pub fn new(id: impl Into<String>, ports: Vec<Port>) -> Self {
        Component { id: id.into(), ports, tasks: Vec::new(), filters: BTreeMap::new() }
    }

    pub fn with_filter(mut self, port: u32, cutoff: Duration) -> Self {
        self.filters.insert(port, cutoff);
        self
    }

    pub fn port(&self, index: u32) -> Option<&Port> {
        self.ports.iter().find(|p| p.index == index)
    }
}

/// An ordered interface sequence from a sampling port to a subject
/// interface, with the algorithmic delay contributed at each interface.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalPath {
    pub id: String,
    pub interfaces: Vec<PortRef>,
    pub delays: Vec<Duration>,
}

impl SignalPath {
    pub fn new(id: impl Into<String>, interfaces: Vec<PortRef>, delays: Vec<Duration>) -> Self {
        SignalPath { id: id.into(), interfaces, delays }
    }

    /// Path with zero delay everywhere.
    pub fn undelayed(id: impl Into<String>, interfaces: Vec<PortRef>) -> Self {
        let delays = vec![Duration::ZERO; interfaces.len()];
        SignalPath::new(id, interfaces, delays)
    }

    pub fn sampling(&self) -> &PortRef {
        &self.interfaces[0]
    }

    pub fn subject(&self) -> &PortRef {
        self.interfaces.last().expect("signal paths are non-empty")
    }

    pub fn len(&self) -> usize {
        self.interfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interfaces.is_empty()
    }

    pub fn position(&self, port: &PortRef) -> Option<usize> {
        self.interfaces.iter().position(|p| p == port)
    }

    /// Total algorithmic delay `d` of the path. Unbounded entries are
    /// rejected by validation, so they are treated as zero here.
    pub fn total_delay(&self) -> TimeNs {
        self.delay_through(self.interfaces.len().saturating_sub(1))
    }

    /// Accumulated delay of the prefix ending at interface `position`.
    pub fn delay_through(&self, position: usize) -> TimeNs {
        self.delays.iter().take(position + 1).filter_map(|d| d.finite()).sum()
    }

    /// The path truncated after interface `position`.
    pub fn prefix(&self, position: usize) -> SignalPath {
        SignalPath {
            id: self.id.clone(),
            interfaces: self.interfaces[..=position].to_vec(),
            delays: self.delays[..=position].to_vec(),
        }
    }
}

/// A violated model invariant and the element that violates it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub invariant: &'static str,
    pub element: String,
    pub message: String,
}

impl Diagnostic {
    fn new(invariant: &'static str, element: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic { invariant, element: element.into(), message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.element, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid model: {}", join_diagnostics(.0))]
    Invalid(Vec<Diagnostic>),
    #[error("unknown port {0}")]
    UnknownPort(PortRef),
    #[error("unknown signal path {0:?}")]
    UnknownPath(String),
}

fn join_diagnostics(diags: &[Diagnostic]) -> String {
    diags.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl From<serde_json::Error> for ModelError {
    fn from(e: serde_json::Error) -> Self {
        ModelError::Parse { line: e.line(), column: e.column(), message: e.to_string() }
    }
}

/// Components and signal paths. Immutable once built.
#[derive(Debug, Clone)]
pub struct SystemModel {
    components: Vec<Component>,
    paths: Vec<SignalPath>,
    component_index: HashMap<String, usize>,
    path_index: HashMap<String, usize>,
}

impl PartialEq for SystemModel {
    fn eq(&self, other: &Self) -> bool {
        self.components == other.components && self.paths == other.paths
    }
}

impl SystemModel {
    /// Builds a model and rejects it unless [`validate_model`] is clean.
    pub fn new(components: Vec<Component>, paths: Vec<SignalPath>) -> Result<Self, ModelError> {
        let model = SystemModel::unchecked(components, paths);
        let diags = validate_model(&model);
        if diags.is_empty() {
            Ok(model)
        } else {
            Err(ModelError::Invalid(diags))
        }
    }

    /// Builds a model without validating it.
    pub fn unchecked(components: Vec<Component>, paths: Vec<SignalPath>) -> Self {
        let mut component_index = HashMap::new();
        for (i, c) in components.iter().enumerate() {
            component_index.entry(c.id.clone()).or_insert(i);
        }
        let mut path_index = HashMap::new();
        for (i, p) in paths.iter().enumerate() {
            path_index.entry(p.id.clone()).or_insert(i);
        }
        SystemModel { components, paths, component_index, path_index }
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn paths(&self) -> &[SignalPath] {
        &self.paths
    }

    pub fn component(&self, id: &str) -> Option<&Component> {
        self.component_index.get(id).map(|&i| &self.components[i])
    }

    pub fn path(&self, id: &str) -> Option<&SignalPath> {
        self.path_index.get(id).map(|&i| &self.paths[i])
    }

    pub fn port(&self, port: &PortRef) -> Option<&Port> {
        self.component(&port.component)?.port(port.port)
    }

    pub fn kind(&self, port: &PortRef) -> Option<PortKind> {
        self.port(port).map(|p| p.kind)
    }

    /// Declared filter cut-off `g` at `port`; zero when it does not filter.
    pub fn filter_cutoff(&self, port: &PortRef) -> Duration {
        self.component(&port.component)
            .and_then(|c| c.filters.get(&port.port).copied())
            .unwrap_or(Duration::ZERO)
    }

    pub fn is_resampling(&self, port: &PortRef) -> bool {
        self.port(port).is_some_and(|p| p.resampling || p.kind == PortKind::Sampling)
    }

    /// Declared band limit of the physical quantity behind a sampling port.
    pub fn sampling_band_limit(&self, port: &PortRef) -> Option<Duration> {
        self.port(port).and_then(|p| p.band_limit)
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        load_model(text)
    }

    pub fn to_json(&self) -> String {
        let doc = ModelDoc {
            components: self
                .components
                .iter()
                .map(|c| ComponentDoc {
                    id: c.id.clone(),
                    ports: c
                        .ports
                        .iter()
                        .map(|p| PortDoc {
                            index: p.index,
                            kind: p.kind,
                            resampling: p.resampling,
                            band_limit_ns: p.band_limit,
                        })
                        .collect(),
                    filters: c
                        .filters
                        .iter()
                        .map(|(&port, &cutoff_ns)| FilterDoc { port, cutoff_ns })
                        .collect(),
                    tasks: c.tasks.clone(),
                })
                .collect(),
            paths: self
                .paths
                .iter()
                .map(|p| PathDoc {
                    id: p.id.clone(),
                    interfaces: p.interfaces.clone(),
                    delays_ns: p.delays.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("model documents always serialize")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    components: Vec<ComponentDoc>,
    paths: Vec<PathDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentDoc {
    id: String,
    ports: Vec<PortDoc>,
    #[serde(default)]
    filters: Vec<FilterDoc>,
    #[serde(default)]
    tasks: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PortDoc {
    index: u32,
    kind: PortKind,
    #[serde(default)]
    resampling: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    band_limit_ns: Option<Duration>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FilterDoc {
    port: u32,
    cutoff_ns: Duration,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathDoc {
    id: String,
    interfaces: Vec<PortRef>,
    delays_ns: Vec<Duration>,
}

/// Parses and validates a JSON model document.
pub fn load_model(document: &str) -> Result<SystemModel, ModelError> {
    let doc: ModelDoc = serde_json::from_str(document)?;
    let mut diags = Vec::new();
    let components = doc
        .components
        .into_iter()
        .map(|c| {
            let ports = c
                .ports
                .into_iter()
                .map(|p| Port {
                    index: p.index,
                    kind: p.kind,
                    resampling: p.resampling || p.kind == PortKind::Sampling,
                    band_limit: p.band_limit_ns,
                })
                .collect();
            let mut filters = BTreeMap::new();
            for f in c.filters {
                if filters.insert(f.port, f.cutoff_ns).is_some() {
                    diags.push(Diagnostic::new(
                        "unique filter per output",
                        format!("{}:{}", c.id, f.port),
                        "duplicate id: filter declared twice",
                    ));
                }
            }
            Component { id: c.id, ports, tasks: c.tasks, filters }
        })
        .collect();
    let paths = doc
        .paths
        .into_iter()
        .map(|p| SignalPath { id: p.id, interfaces: p.interfaces, delays: p.delays_ns })
        .collect();
    let model = SystemModel::unchecked(components, paths);
    diags.extend(validate_model(&model));
    if diags.is_empty() {
        Ok(model)
    } else {
        Err(ModelError::Invalid(diags))
    }
}

/// Checks every structural invariant of the model. The result is empty
/// iff the model is valid.
pub fn validate_model(model: &SystemModel) -> Vec<Diagnostic> {
    let mut diags = Vec::new();

    let mut seen = HashSet::new();
    for c in &model.components {
        if !seen.insert(c.id.as_str()) {
            diags.push(Diagnostic::new("unique component id", &c.id, "duplicate id: component"));
        }
        let mut ports = HashSet::new();
        for p in &c.ports {
            let name = format!("{}:{}", c.id, p.index);
            if !ports.insert(p.index) {
                diags.push(Diagnostic::new("unique port", &name, "duplicate id: port index"));
            }
            if p.kind == PortKind::Sampling && !p.resampling {
                diags.push(Diagnostic::new(
                    "sampling port is resampling",
                    &name,
                    "sampling port must be marked resampling",
                ));
            }
            if p.band_limit.is_some_and(Duration::is_negative) {
                diags.push(Diagnostic::new(
                    "non-negative duration",
                    &name,
                    "band limit must be non-negative",
                ));
            }
        }
        for (&port, &cutoff) in &c.filters {
            let name = format!("{}:{}", c.id, port);
            match c.port(port) {
                Some(p) if p.kind == PortKind::Output => {}
                Some(p) => diags.push(Diagnostic::new(
                    "filter on output port",
                    &name,
                    format!("filter declared on {} port; filters belong to output ports", p.kind),
                )),
                None => diags.push(Diagnostic::new(
                    "filter on output port",
                    &name,
                    "filter declared on unknown port",
                )),
            }
            if cutoff.is_negative() {
                diags.push(Diagnostic::new(
                    "non-negative duration",
                    &name,
                    "filter cutoff must be non-negative",
                ));
            }
        }
    }

    let mut seen = HashSet::new();
    for path in &model.paths {
        let id = path.id.as_str();
        if !seen.insert(id) {
            diags.push(Diagnostic::new("unique path id", id, "duplicate id: signal path"));
        }
        if path.interfaces.is_empty() {
            diags.push(Diagnostic::new("non-empty path", id, "path has no interfaces"));
            continue;
        }
        if path.delays.len() != path.interfaces.len() {
            diags.push(Diagnostic::new(
                "one delay per interface",
                id,
                format!(
                    "path lists {} interfaces but {} delays",
                    path.interfaces.len(),
                    path.delays.len()
                ),
            ));
        }
        for iface in &path.interfaces {
            if model.component(&iface.component).is_none() {
                diags.push(Diagnostic::new(
                    "resolvable interface",
                    format!("{id}/{iface}"),
                    format!("unknown component {:?}", iface.component),
                ));
            } else if model.port(iface).is_none() {
                diags.push(Diagnostic::new(
                    "resolvable interface",
                    format!("{id}/{iface}"),
                    format!("unknown port {iface}"),
                ));
            }
        }
        if let Some(kind) = model.kind(&path.interfaces[0]) {
            if kind != PortKind::Sampling {
                diags.push(Diagnostic::new(
                    "path starts at sampling port",
                    id,
                    format!("path must start at sampling port, found {kind} port {}", path.interfaces[0]),
                ));
            }
        }
        let mut visited = HashSet::new();
        for iface in &path.interfaces {
            if !visited.insert(iface) {
                diags.push(Diagnostic::new(
                    "acyclic path",
                    id,
                    format!("path contains a cycle through {iface}"),
                ));
                break;
            }
        }
        for (iface, delay) in path.interfaces.iter().zip(&path.delays) {
            if delay.is_negative() {
                diags.push(Diagnostic::new(
                    "non-negative duration",
                    format!("{id}/{iface}"),
                    "delay must be non-negative",
                ));
            }
            if !delay.is_finite() {
                diags.push(Diagnostic::new(
                    "finite path delay",
                    format!("{id}/{iface}"),
                    "delay must be finite",
                ));
            }
        }
    }
    diags
}

/// Every declared path whose last interface is `subject`, sorted by id.
pub fn resolve_signal_paths<'m>(
    model: &'m SystemModel,
    subject: &PortRef,
) -> Result<Vec<&'m SignalPath>, ModelError> {
    if model.port(subject).is_none() {
        return Err(ModelError::UnknownPort(subject.clone()));
    }
    let mut paths: Vec<_> =
        model.paths.iter().filter(|p| p.interfaces.last() == Some(subject)).collect();
    paths.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(paths)
}
