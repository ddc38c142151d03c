//! Event traces and the causal chains correlated from them.
//!
//! Causality is explicit: an event names its predecessor on a signal path
//! through a chain link. Nothing is inferred from timing.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{PortRef, SignalPath, SystemModel};
use crate::time::TimeNs;

/// Reference from an event to the causally preceding event on a path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChainLink {
    pub path: String,
    #[serde(flatten)]
    pub upstream: PortRef,
    pub k: u64,
}

/// One occurrence at an interface. The logical timestamp is derived from
/// the causal chain, never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub signal: PortRef,
    pub k: u64,
    pub value: Option<f64>,
    pub tag: TimeNs,
    pub links: Vec<ChainLink>,
}

impl Event {
    pub fn new(signal: PortRef, k: u64, tag: TimeNs) -> Self {
        Event { signal, k, value: None, tag, links: Vec::new() }
    }

    pub fn linked(mut self, path: &str, upstream: PortRef, k: u64) -> Self {
        self.links.push(ChainLink { path: path.to_string(), upstream, k });
        self
    }

    pub fn link_on(&self, path: &str) -> Option<&ChainLink> {
        self.links.iter().find(|l| l.path == path)
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("event on unknown port {0}")]
    UnknownPort(PortRef),
    #[error("signal {signal}: event indices must be consecutive from 1 (expected {expected}, found {found})")]
    NonConsecutive { signal: PortRef, expected: u64, found: u64 },
    #[error("signal {signal}: tag of event {k} precedes the tag of event {}", .k - 1)]
    TagOrder { signal: PortRef, k: u64 },
    #[error("event {signal}#{k}: link names unknown path {path:?}")]
    UnknownPath { signal: PortRef, k: u64, path: String },
    #[error("event {signal}#{k}: link on path {path:?} must reference upstream interface {expected}, not {found}")]
    WrongUpstream { signal: PortRef, k: u64, path: String, expected: String, found: PortRef },
    #[error("event {signal}#{k}: link references missing event {target}#{target_k}")]
    DanglingLink { signal: PortRef, k: u64, target: PortRef, target_k: u64 },
    #[error("event {signal}#{k}: tag precedes the tag of its causal predecessor")]
    CausalOrder { signal: PortRef, k: u64 },
    #[error("chain links form a cycle through {signal}#{k}")]
    LinkCycle { signal: PortRef, k: u64 },
}

impl From<serde_json::Error> for TraceError {
    fn from(e: serde_json::Error) -> Self {
        TraceError::Parse { line: e.line(), column: e.column(), message: e.to_string() }
    }
}

/// A validated set of signals. Events of each signal are stored by index,
/// `events[k - 1]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    signals: BTreeMap<PortRef, Vec<Event>>,
}

impl Trace {
    /// Groups events per signal and checks them against `model`.
    pub fn new(events: Vec<Event>, model: &SystemModel) -> Result<Self, TraceError> {
        let mut signals: BTreeMap<PortRef, Vec<Event>> = BTreeMap::new();
        for e in events {
            if model.port(&e.signal).is_none() {
                return Err(TraceError::UnknownPort(e.signal));
            }
            signals.entry(e.signal.clone()).or_default().push(e);
        }
        for (signal, events) in &mut signals {
            events.sort_by_key(|e| e.k);
            for (i, e) in events.iter().enumerate() {
                let expected = i as u64 + 1;
                if e.k != expected {
                    return Err(TraceError::NonConsecutive { signal: signal.clone(), expected, found: e.k });
                }
                if i > 0 && e.tag < events[i - 1].tag {
                    return Err(TraceError::TagOrder { signal: signal.clone(), k: e.k });
                }
            }
        }
        let trace = Trace { signals };
        trace.check_links(model)?;
        trace.check_acyclic()?;
        Ok(trace)
    }

    fn check_links(&self, model: &SystemModel) -> Result<(), TraceError> {
        for e in self.events() {
            for link in &e.links {
                let path = model.path(&link.path).ok_or_else(|| TraceError::UnknownPath {
                    signal: e.signal.clone(),
                    k: e.k,
                    path: link.path.clone(),
                })?;
                let expected = match path.position(&e.signal) {
                    Some(pos) if pos > 0 => Some(&path.interfaces[pos - 1]),
                    _ => None,
                };
                if expected != Some(&link.upstream) {
                    return Err(TraceError::WrongUpstream {
                        signal: e.signal.clone(),
                        k: e.k,
                        path: link.path.clone(),
                        expected: expected
                            .map(ToString::to_string)
                            .unwrap_or_else(|| "<none: port is not downstream on this path>".into()),
                        found: link.upstream.clone(),
                    });
                }
                let upstream = self.event(&link.upstream, link.k).ok_or_else(|| {
                    TraceError::DanglingLink {
                        signal: e.signal.clone(),
                        k: e.k,
                        target: link.upstream.clone(),
                        target_k: link.k,
                    }
                })?;
                if e.tag < upstream.tag {
                    return Err(TraceError::CausalOrder { signal: e.signal.clone(), k: e.k });
                }
            }
        }
        Ok(())
    }

    // Links of different paths can point at each other; walk the whole
    // link graph once with a three-colour DFS.
    fn check_acyclic(&self) -> Result<(), TraceError> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Active,
            Done,
        }
        let mut marks: HashMap<(&PortRef, u64), Mark> = HashMap::new();
        for root in self.events() {
            if marks.contains_key(&(&root.signal, root.k)) {
                continue;
            }
            let mut stack: Vec<(&Event, usize)> = vec![(root, 0)];
            marks.insert((&root.signal, root.k), Mark::Active);
            while let Some((event, next)) = stack.pop() {
                if let Some(link) = event.links.get(next) {
                    stack.push((event, next + 1));
                    let upstream = self.event(&link.upstream, link.k).expect("links checked");
                    match marks.get(&(&upstream.signal, upstream.k)) {
                        Some(Mark::Active) => {
                            return Err(TraceError::LinkCycle {
                                signal: upstream.signal.clone(),
                                k: upstream.k,
                            })
                        }
                        Some(Mark::Done) => {}
                        None => {
                            marks.insert((&upstream.signal, upstream.k), Mark::Active);
                            stack.push((upstream, 0));
                        }
                    }
                } else {
                    marks.insert((&event.signal, event.k), Mark::Done);
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str, model: &SystemModel) -> Result<Self, TraceError> {
        let doc: TraceDoc = serde_json::from_str(text)?;
        let events = doc
            .events
            .into_iter()
            .map(|e| Event {
                signal: PortRef::new(e.component, e.port),
                k: e.k,
                value: e.value,
                tag: e.tag_ns,
                links: e.link.map(LinkField::into_vec).unwrap_or_default(),
            })
            .collect();
        Trace::new(events, model)
    }

    /// Events ordered by tag, then signal, then index.
    pub fn to_json(&self) -> String {
        let mut events: Vec<&Event> = self.events().collect();
        events.sort_by(|a, b| (a.tag, &a.signal, a.k).cmp(&(b.tag, &b.signal, b.k)));
        let doc = TraceDoc {
            events: events
                .into_iter()
                .map(|e| EventDoc {
                    component: e.signal.component.clone(),
                    port: e.signal.port,
                    k: e.k,
                    tag_ns: e.tag,
                    value: e.value,
                    link: LinkField::from_slice(&e.links),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("trace documents always serialize")
    }

    pub fn signal(&self, port: &PortRef) -> &[Event] {
        self.signals.get(port).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn signals(&self) -> impl Iterator<Item = (&PortRef, &[Event])> {
        self.signals.iter().map(|(p, e)| (p, e.as_slice()))
    }

    pub fn event(&self, port: &PortRef, k: u64) -> Option<&Event> {
        let index = usize::try_from(k.checked_sub(1)?).ok()?;
        self.signals.get(port)?.get(index)
    }

    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.signals.values().flatten()
    }

    pub fn len(&self) -> usize {
        self.signals.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Ids of all paths named by chain links.
    pub fn referenced_paths(&self) -> Vec<&str> {
        let mut ids: Vec<&str> =
            self.events().flat_map(|e| e.links.iter().map(|l| l.path.as_str())).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn into_events(self) -> Vec<Event> {
        self.signals.into_values().flatten().collect()
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceDoc {
    events: Vec<EventDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventDoc {
    component: String,
    port: u32,
    k: u64,
    tag_ns: TimeNs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    link: Option<LinkField>,
}

/// `link` holds one object, or a list when an event sits on several paths.
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum LinkField {
    One(ChainLink),
    Many(Vec<ChainLink>),
}

impl LinkField {
    fn into_vec(self) -> Vec<ChainLink> {
        match self {
            LinkField::One(l) => vec![l],
            LinkField::Many(v) => v,
        }
    }

    fn from_slice(links: &[ChainLink]) -> Option<Self> {
        match links {
            [] => None,
            [one] => Some(LinkField::One(one.clone())),
            many => Some(LinkField::Many(many.to_vec())),
        }
    }
}

/// One event per interface of a path, from the sampling event to the
/// terminal event.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalChain<'t> {
    pub path: String,
    pub events: Vec<&'t Event>,
}

impl<'t> CausalChain<'t> {
    pub fn sampling(&self) -> &'t Event {
        self.events[0]
    }

    pub fn terminal(&self) -> &'t Event {
        self.events[self.events.len() - 1]
    }

    /// Index of the terminal event.
    pub fn k(&self) -> u64 {
        self.terminal().k
    }
}

/// A terminal event whose ancestry does not reach the sampling interface.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedEvent {
    pub k: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChainExtraction<'t> {
    pub chains: Vec<CausalChain<'t>>,
    pub skipped: Vec<SkippedEvent>,
}

/// Correlates every terminal event of `path` with its sampling ancestor.
///
/// Output is ordered by terminal index. Trace validation already rejects
/// link cycles, so the walk is bounded by the path length.
pub fn extract_causal_chains<'t>(trace: &'t Trace, path: &SignalPath) -> ChainExtraction<'t> {
    let mut out = ChainExtraction::default();
    'terminal: for terminal in trace.signal(path.subject()) {
        let mut events = Vec::with_capacity(path.len());
        events.push(terminal);
        let mut current = terminal;
        for upstream_iface in path.interfaces.iter().rev().skip(1) {
            let Some(link) = current.link_on(&path.id) else {
                out.skipped.push(SkippedEvent {
                    k: terminal.k,
                    reason: format!("{}#{} has no link on path {}", current.signal, current.k, path.id),
                });
                continue 'terminal;
            };
            // A link may name the right path but belong to a different
            // prefix when the caller passes an unrelated path with the same id.
            if &link.upstream != upstream_iface {
                out.skipped.push(SkippedEvent {
                    k: terminal.k,
                    reason: format!("{}#{} links off the path to {}", current.signal, current.k, link.upstream),
                });
                continue 'terminal;
            }
            current = trace.event(&link.upstream, link.k).expect("links checked at construction");
            events.push(current);
        }
        events.reverse();
        out.chains.push(CausalChain { path: path.id.clone(), events });
    }
    out
}
