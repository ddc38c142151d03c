//! Synthetic chain-linked traces with ground truth, and single-instance
//! violation injection.
//!
//! Randomness comes from SplitMix64 so a seed reproduces the same trace on
//! every platform. Jitter moves sampling tags only; per-hop latencies are
//! drawn uniformly from the configured range; delays come from the model.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{latency, logical_timestamp, sampling_rate_runs};
use crate::model::{PortRef, SignalPath, SystemModel};
use crate::requirements::{subject_paths, RequirementKind, TransformError};
use crate::time::{Bounds, TimeNs};
use crate::trace::{extract_causal_chains, CausalChain, Event, Trace, TraceError};

/// SplitMix64 (Steele, Lea, Flood 2014).
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `0..n` by rejection. `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        let zone = u64::MAX - u64::MAX % n;
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % n;
            }
        }
    }

    /// Uniform in `lo..=hi`.
    pub fn range(&mut self, lo: i64, hi: i64) -> i64 {
        assert!(lo <= hi, "empty range");
        let span = hi.abs_diff(lo);
        if span == u64::MAX {
            return self.next_u64() as i64;
        }
        lo.wrapping_add(self.below(span + 1) as i64)
    }

    /// True with probability `p`.
    pub fn chance(&mut self, p: Ratio) -> bool {
        p.num > 0 && self.below(p.den) < p.num
    }
}

/// Exact probability `num / den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub const ZERO: Ratio = Ratio { num: 0, den: 1 };
}

impl Default for Ratio {
    fn default() -> Self {
        Ratio::ZERO
    }
}

/// Generation parameters of one signal path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathGen {
    #[serde(rename = "period_ns")]
    pub period: TimeNs,
    #[serde(rename = "jitter_ns", default)]
    pub jitter: TimeNs,
    /// First nominal sampling instant.
    #[serde(rename = "offset_ns", default)]
    pub offset: TimeNs,
    /// Range each hop's latency is drawn from; both ends required.
    pub hop_latency: Bounds,
    #[serde(default)]
    pub drop_probability: Ratio,
    /// Reuse the sampling tags of another path, so both paths sample at
    /// the same instants. Period, jitter and offset are then ignored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub align_to: Option<String>,
    /// Emit terminal events at the same instants as the named path, as a
    /// task reading both subjects in one activation would.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub read_with: Option<String>,
}

impl PathGen {
    pub fn periodic(period: TimeNs, hop_latency: Bounds) -> Self {
        PathGen {
            period,
            jitter: TimeNs::ZERO,
            offset: TimeNs::ZERO,
            hop_latency,
            drop_probability: Ratio::ZERO,
            align_to: None,
            read_with: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSpec {
    /// Absent means the caller picks one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Sampling instants fall in `[0, duration)`.
    #[serde(rename = "duration_ns")]
    pub duration: TimeNs,
    pub paths: BTreeMap<String, PathGen>,
}

impl GenSpec {
    pub fn from_json(text: &str) -> Result<Self, GenError> {
        serde_json::from_str(text).map_err(|e| GenError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("generator specs always serialize")
    }

    /// Number of sampling instants of a configured path.
    fn sample_count(&self, id: &str) -> Option<i64> {
        let g = self.paths.get(id)?;
        let g = match &g.align_to {
            Some(other) => self.paths.get(other)?,
            None => g,
        };
        if g.period <= TimeNs::ZERO {
            return None;
        }
        let span = (self.duration - g.offset).ns();
        Some(if span <= 0 { 0 } else { (span + g.period.ns() - 1) / g.period.ns() })
    }

    /// All invariant violations against `model`, in a stable order.
    pub fn problems(&self, model: &SystemModel) -> Vec<String> {
        let mut out = Vec::new();
        if self.duration < TimeNs::ZERO {
            out.push("duration must be non-negative".to_string());
        }
        let mut owner: BTreeMap<&PortRef, &str> = BTreeMap::new();
        for (id, g) in &self.paths {
            let Some(path) = model.path(id) else {
                out.push(format!("{id}: unknown signal path"));
                continue;
            };
            match &g.align_to {
                Some(other) => match self.paths.get(other) {
                    None => out.push(format!("{id}: align_to names unconfigured path {other:?}")),
                    Some(o) if o.align_to.is_some() => {
                        out.push(format!("{id}: align_to target {other:?} is itself aligned"))
                    }
                    Some(_) => {}
                },
                None => {
                    if g.period <= TimeNs::ZERO {
                        out.push(format!("{id}: period must be positive"));
                    }
                    if g.jitter < TimeNs::ZERO || g.jitter >= g.period {
                        out.push(format!("{id}: jitter must satisfy 0 <= jitter < period"));
                    }
                    if g.offset < TimeNs::ZERO {
                        out.push(format!("{id}: offset must be non-negative"));
                    }
                }
            }
            if let Some(other) = &g.read_with {
                match (self.paths.get(other), model.path(other)) {
                    (Some(o), Some(op)) => {
                        if other == id || o.read_with.is_some() {
                            out.push(format!("{id}: read_with target {other:?} must be another path without read_with"));
                        }
                        if path.len() < 2 || op.len() < 2 {
                            out.push(format!("{id}: read_with needs both paths to have at least two interfaces"));
                        }
                        if self.sample_count(id) != self.sample_count(other) {
                            out.push(format!("{id}: read_with needs as many samples as {other:?}"));
                        }
                    }
                    _ => out.push(format!("{id}: read_with names unconfigured path {other:?}")),
                }
            }
            match (g.hop_latency.lower, g.hop_latency.upper) {
                (Some(lo), Some(hi)) if lo >= TimeNs::ZERO && lo <= hi => {}
                (Some(_), Some(_)) => out.push(format!("{id}: hop latency range must satisfy 0 <= lower <= upper")),
                _ => out.push(format!("{id}: hop latency range needs both lower_ns and upper_ns")),
            }
            if g.drop_probability.den == 0 || g.drop_probability.num > g.drop_probability.den {
                out.push(format!("{id}: drop probability must be a ratio in [0, 1]"));
            }
            for iface in &path.interfaces {
                if let Some(prev) = owner.insert(iface, id) {
                    out.push(format!("{id}: interface {iface} is also on generated path {prev}"));
                }
            }
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("genspec parse error: {0}")]
    Parse(String),
    #[error("invalid genspec: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("genspec has no seed")]
    MissingSeed,
    #[error("generated trace rejected: {0}")]
    Trace(#[from] TraceError),
}

/// Ground truth for one complete chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainTruth {
    pub path: String,
    pub k: u64,
    pub h_ns: TimeNs,
    pub a_ns: TimeNs,
    pub t_ns: TimeNs,
}

/// A terminal event whose chain was cut on purpose.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedChain {
    pub path: String,
    pub k: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sidecar {
    pub seed: u64,
    pub chains: Vec<ChainTruth>,
    #[serde(default)]
    pub dropped: Vec<DroppedChain>,
}

impl Sidecar {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sidecars always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

fn sampling_tags(g: &PathGen, duration: TimeNs, rng: &mut SplitMix64) -> Vec<TimeNs> {
    let mut tags = Vec::new();
    let mut nominal = g.offset;
    while nominal < duration {
        tags.push(nominal + TimeNs(rng.range(0, g.jitter.ns())));
        nominal += g.period;
    }
    tags
}

/// Generates a trace for every path configured in `spec`. The spec must
/// carry a seed.
pub fn generate_trace(model: &SystemModel, spec: &GenSpec) -> Result<(Trace, Sidecar), GenError> {
    let problems = spec.problems(model);
    if !problems.is_empty() {
        return Err(GenError::Invalid(problems));
    }
    let seed = spec.seed.ok_or(GenError::MissingSeed)?;
    let mut rng = SplitMix64::new(seed);

    let mut sampling: BTreeMap<&str, Vec<TimeNs>> = BTreeMap::new();
    for (id, g) in spec.paths.iter().filter(|(_, g)| g.align_to.is_none()) {
        sampling.insert(id, sampling_tags(g, spec.duration, &mut rng));
    }

    // Per path: one row of interface tags per chain, and the hop whose
    // link is cut for dropped chains.
    let mut rows: BTreeMap<&str, Vec<Vec<TimeNs>>> = BTreeMap::new();
    let mut cuts: BTreeMap<&str, BTreeMap<usize, usize>> = BTreeMap::new();
    for (id, g) in &spec.paths {
        let path = model.path(id).expect("checked by problems()");
        let starts = &sampling[g.align_to.as_deref().unwrap_or(id)];
        let (lo, hi) = (g.hop_latency.lower.unwrap().ns(), g.hop_latency.upper.unwrap().ns());
        // A hop never overtakes the previous event on the same signal.
        let mut last = vec![TimeNs(i64::MIN); path.len()];
        let mut path_rows = Vec::with_capacity(starts.len());
        let mut path_cuts = BTreeMap::new();
        for (i, &start) in starts.iter().enumerate() {
            let mut row = vec![start];
            for pos in 1..path.len() {
                let tag = (row[pos - 1] + TimeNs(rng.range(lo, hi))).max(last[pos]);
                last[pos] = tag;
                row.push(tag);
            }
            if path.len() > 1 && rng.chance(g.drop_probability) {
                path_cuts.insert(i, 1 + rng.below(path.len() as u64 - 1) as usize);
            }
            path_rows.push(row);
        }
        rows.insert(id, path_rows);
        cuts.insert(id, path_cuts);
    }

    let mut joint: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (id, g) in &spec.paths {
        if let Some(target) = &g.read_with {
            joint.entry(target.as_str()).or_insert_with(|| vec![target.as_str()]).push(id);
        }
    }
    for group in joint.values() {
        for i in 0..rows[group[0]].len() {
            let read = group.iter().map(|id| *rows[id][i].last().unwrap()).max().unwrap();
            for id in group {
                *rows.get_mut(id).unwrap()[i].last_mut().unwrap() = read;
            }
        }
    }

    let mut events = Vec::new();
    let mut sidecar = Sidecar { seed, chains: Vec::new(), dropped: Vec::new() };
    for id in spec.paths.keys() {
        let path = model.path(id).expect("checked by problems()");
        let d = path.total_delay();
        for (i, row) in rows[id.as_str()].iter().enumerate() {
            let k = i as u64 + 1;
            let cut = cuts[id.as_str()].get(&i).copied();
            events.push(Event::new(path.interfaces[0].clone(), k, row[0]));
            for (pos, &tag) in row.iter().enumerate().skip(1) {
                let mut e = Event::new(path.interfaces[pos].clone(), k, tag);
                if cut != Some(pos) {
                    e = e.linked(id, path.interfaces[pos - 1].clone(), k);
                }
                events.push(e);
            }
            if cut.is_some() {
                sidecar.dropped.push(DroppedChain { path: id.clone(), k });
                continue;
            }
            let h = row[row.len() - 1] - row[0];
            sidecar.chains.push(ChainTruth { path: id.clone(), k, h_ns: h, a_ns: h + d, t_ns: row[0] - d });
        }
    }
    Ok((Trace::new(events, model)?, sidecar))
}

/// Which instance [`inject_violation`] perturbed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Injection {
    pub kind: RequirementKind,
    pub path: String,
    /// Terminal index of the perturbed chain.
    pub k: u64,
    #[serde(rename = "magnitude_ns")]
    pub magnitude: TimeNs,
}

#[derive(Debug, Error)]
pub enum InjectError {
    #[error(transparent)]
    Subject(#[from] TransformError),
    #[error("{kind} injection needs {expected} subject(s)")]
    SubjectCount { kind: RequirementKind, expected: usize },
    #[error("magnitude must be non-negative")]
    NegativeMagnitude,
    #[error("trace too small to perturb: {0}")]
    TooSmall(String),
    #[error("perturbed trace is invalid: {0}")]
    Trace(#[from] TraceError),
    #[error("perturbation on path {path} could not be confined to k = {k}")]
    NotIsolated { path: String, k: u64 },
}

fn first_path_with_chains<'m>(
    trace: &Trace,
    model: &'m SystemModel,
    subject: &PortRef,
) -> Result<&'m SignalPath, InjectError> {
    subject_paths(model, subject)?
        .into_iter()
        .find(|p| !extract_causal_chains(trace, p).chains.is_empty())
        .ok_or_else(|| InjectError::TooSmall(format!("no causal chain ends at {subject}")))
}

/// Per-interface threshold index of chain `c`.
fn chain_indices(c: &CausalChain<'_>) -> Vec<(PortRef, u64)> {
    c.events.iter().map(|e| (e.signal.clone(), e.k)).collect()
}

/// Shifts, on every listed signal, the events with index at or above the
/// given threshold.
fn shift_suffixes(events: &mut [Event], thresholds: &BTreeMap<PortRef, u64>, by: TimeNs) {
    for e in events {
        if thresholds.get(&e.signal).is_some_and(|&min| e.k >= min) {
            e.tag += by;
        }
    }
}

/// Perturbs exactly one instance of `kind` on a copy of `trace`.
///
/// The instance is a chain of the first path of `subjects[0]` that has
/// chains (for synchronicity, `subjects[1]` names the partner signal and
/// only indices with a chain on both sides are candidates):
///
/// - data age: the terminal event of chain `k` and every later event on
///   the path move `magnitude` later, so only `a_k` grows (later
///   chains move as a whole);
/// - synchronicity: the sampling event of chain `k` on the first subject
///   moves `magnitude` earlier, so only `ζ_k` shrinks;
/// - sampling rate, band limit, no aliasing: every event of chain `k`
///   and later moves `magnitude` later, opening a single gap so only
///   `Δt_k` grows.
///
/// The result is revalidated and checked to differ from the input only at
/// the chosen `k`.
pub fn inject_violation(
    trace: &Trace,
    model: &SystemModel,
    kind: RequirementKind,
    subjects: &[PortRef],
    magnitude: TimeNs,
    seed: u64,
) -> Result<(Trace, Injection), InjectError> {
    let expected = if kind == RequirementKind::Synchronicity { 2 } else { 1 };
    if subjects.len() != expected {
        return Err(InjectError::SubjectCount { kind, expected });
    }
    if magnitude < TimeNs::ZERO {
        return Err(InjectError::NegativeMagnitude);
    }
    let mut rng = SplitMix64::new(seed);
    let path = first_path_with_chains(trace, model, &subjects[0])?;
    let chains = extract_causal_chains(trace, path).chains;
    let mut events = trace.clone().into_events();

    let k = match kind {
        RequirementKind::DataAge => {
            let chain = &chains[rng.below(chains.len() as u64) as usize];
            let mut thresholds: BTreeMap<PortRef, u64> =
                chain_indices(chain).into_iter().map(|(p, k)| (p, k + 1)).collect();
            thresholds.insert(chain.terminal().signal.clone(), chain.terminal().k);
            shift_suffixes(&mut events, &thresholds, magnitude);
            chain.k()
        }
        RequirementKind::Synchronicity => {
            let partner: BTreeSet<u64> = subject_paths(model, &subjects[1])?
                .into_iter()
                .flat_map(|p| extract_causal_chains(trace, p).chains.into_iter().map(|c| c.k()))
                .collect();
            let candidates: Vec<&CausalChain<'_>> = chains
                .iter()
                .filter(|c| partner.contains(&c.k()))
                .filter(|c| {
                    let s = c.sampling();
                    s.k == 1 || s.tag - trace.event(&s.signal, s.k - 1).expect("indices are dense").tag >= magnitude
                })
                .collect();
            if candidates.is_empty() {
                return Err(InjectError::TooSmall(format!(
                    "no paired chain on path {} leaves {magnitude} before its sampling event",
                    path.id
                )));
            }
            let chain = candidates[rng.below(candidates.len() as u64) as usize];
            let s = chain.sampling();
            for e in &mut events {
                if e.signal == s.signal && e.k == s.k {
                    e.tag -= magnitude;
                }
            }
            chain.k()
        }
        RequirementKind::SamplingRate | RequirementKind::BandLimit | RequirementKind::NoAliasing => {
            let ks: BTreeSet<u64> = chains.iter().map(|c| c.k()).collect();
            let candidates: Vec<&CausalChain<'_>> = chains.iter().filter(|c| ks.contains(&(c.k() - 1))).collect();
            if candidates.is_empty() {
                return Err(InjectError::TooSmall(format!("path {} has no consecutive chains", path.id)));
            }
            let chain = candidates[rng.below(candidates.len() as u64) as usize];
            shift_suffixes(&mut events, &chain_indices(chain).into_iter().collect(), magnitude);
            chain.k()
        }
    };

    let perturbed = Trace::new(events, model)?;
    let injection = Injection { kind, path: path.id.clone(), k, magnitude };
    verify_isolated(trace, &perturbed, model, path, &injection)?;
    Ok((perturbed, injection))
}

fn verify_isolated(
    before: &Trace,
    after: &Trace,
    model: &SystemModel,
    path: &SignalPath,
    inj: &Injection,
) -> Result<(), InjectError> {
    let old = extract_causal_chains(before, path).chains;
    let new = extract_causal_chains(after, path).chains;
    let not_isolated = || InjectError::NotIsolated { path: path.id.clone(), k: inj.k };
    if old.len() != new.len() {
        return Err(not_isolated());
    }
    let m = inj.magnitude;
    for (o, n) in old.iter().zip(&new) {
        let hit = o.k() == inj.k;
        let (dh, dt) = (latency(n) - latency(o), logical_timestamp(n, model) - logical_timestamp(o, model));
        let ok = match inj.kind {
            RequirementKind::DataAge => dh == if hit { m } else { TimeNs::ZERO },
            RequirementKind::Synchronicity => {
                dt == if hit { -m } else { TimeNs::ZERO } && n.terminal().tag == o.terminal().tag
            }
            _ => dh == TimeNs::ZERO,
        };
        if !ok {
            return Err(not_isolated());
        }
    }
    if matches!(inj.kind, RequirementKind::SamplingRate | RequirementKind::BandLimit | RequirementKind::NoAliasing) {
        let (so, sn) = (sampling_rate_runs(&old, model), sampling_rate_runs(&new, model));
        for (k, v) in &so.values {
            let expected = if *k == inj.k { *v + m } else { *v };
            if sn.values.get(k) != Some(&expected) {
                return Err(not_isolated());
            }
        }
    }
    Ok(())
}

/// Ranges for [`random_scenario`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioLimits {
    /// Sampling period range, inclusive.
    pub period: (TimeNs, TimeNs),
    /// Largest end-to-end latency the hop ranges allow.
    pub max_latency: TimeNs,
    /// Largest total delay of a path.
    pub max_delay: TimeNs,
    /// Interface count range of each path, inclusive, at least 1.
    pub interfaces: (usize, usize),
    /// Largest jitter as a percentage of the period, below 100.
    pub max_jitter_percent: i64,
    /// Chains per path, inclusive.
    pub samples: (i64, i64),
    /// Whether chains may be dropped.
    pub drops: bool,
}

impl Default for ScenarioLimits {
    fn default() -> Self {
        ScenarioLimits {
            period: (TimeNs::from_ms(1), TimeNs::from_ms(100)),
            max_latency: TimeNs::from_ms(20),
            max_delay: TimeNs::from_ms(10),
            interfaces: (1, 6),
            max_jitter_percent: 50,
            samples: (5, 40),
            drops: true,
        }
    }
}

/// Random two-path model with a matching generator spec.
///
/// Paths `a` and `b` are port-disjoint and share one nominal sampling
/// schedule with independent jitter. When both have a downstream
/// interface, `b` is read together with `a`, so their terminal events
/// coincide and chains pair by index. Each
/// path alternates input and output interfaces after its sampling port;
/// inputs are randomly marked resampling, outputs randomly carry a
/// filter, and sampling ports declare a random band limit.
pub fn random_scenario(seed: u64, limits: &ScenarioLimits) -> (SystemModel, GenSpec) {
    use crate::model::{Component, Port, PortKind};
    use crate::time::Duration;

    let mut rng = SplitMix64::new(seed);
    let period = TimeNs(rng.range(limits.period.0.ns(), limits.period.1.ns()));
    let samples = rng.range(limits.samples.0, limits.samples.1);
    let mut components = Vec::new();
    let mut paths: Vec<SignalPath> = Vec::new();
    let mut gens = BTreeMap::new();
    for id in ["a", "b"] {
        let n = rng.range(limits.interfaces.0 as i64, limits.interfaces.1 as i64) as usize;
        let source = format!("{id}_src");
        let band_limit = Duration::Finite(TimeNs(rng.range(0, 2 * period.ns())));
        components.push(Component::new(&source, vec![Port::new(0, PortKind::Sampling).with_band_limit(band_limit)]));
        let mut interfaces = vec![PortRef::new(&source, 0)];
        for h in 1..=(n - 1).div_ceil(2) {
            let name = format!("{id}_n{h}");
            let mut input = Port::new(0, PortKind::Input);
            if rng.below(2) == 0 {
                input = input.resampling();
            }
            let mut comp = Component::new(&name, vec![input, Port::new(1, PortKind::Output)]);
            if rng.below(2) == 0 {
                comp = comp.with_filter(1, Duration::Finite(TimeNs(rng.range(0, 3 * period.ns()))));
            }
            components.push(comp);
            for port in 0..2 {
                if interfaces.len() < n {
                    interfaces.push(PortRef::new(&name, port));
                }
            }
        }
        let share = limits.max_delay.ns() / n as i64;
        let delays = (0..n).map(|_| Duration::Finite(TimeNs(rng.range(0, share)))).collect();
        paths.push(SignalPath::new(id, interfaces, delays));

        let hop_max = if n > 1 { limits.max_latency.ns() / (n as i64 - 1) } else { 0 };
        let hi = rng.range(0, hop_max);
        let lo = rng.range(0, hi);
        let drop_probability =
            if limits.drops && rng.below(3) == 0 { Ratio { num: 1, den: 10 } } else { Ratio::ZERO };
        gens.insert(
            id.to_string(),
            PathGen {
                jitter: TimeNs(rng.range(0, period.ns() * limits.max_jitter_percent / 100)),
                drop_probability,
                ..PathGen::periodic(period, Bounds::new(TimeNs(lo), TimeNs(hi)))
            },
        );
    }
    if paths.iter().all(|p| p.len() > 1) {
        gens.get_mut("b").unwrap().read_with = Some("a".to_string());
    }
    let model = SystemModel::new(components, paths).expect("scenario models are valid");
    let spec = GenSpec { seed: Some(rng.next_u64()), duration: TimeNs(period.ns() * samples), paths: gens };
    (model, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{data_age, event_distance};
    use crate::model::{Component, Port, PortKind};
    use crate::time::Duration;

    fn p(c: &str, i: u32) -> PortRef {
        PortRef::new(c, i)
    }

    fn ms(v: i64) -> TimeNs {
        TimeNs::from_ms(v)
    }

    fn three_hop_model() -> SystemModel {
        SystemModel::new(
            vec![
                Component::new("s", vec![Port::new(0, PortKind::Sampling)]),
                Component::new("f", vec![Port::new(0, PortKind::Input), Port::new(1, PortKind::Output)]),
            ],
            vec![SignalPath::new(
                "p",
                vec![p("s", 0), p("f", 0), p("f", 1)],
                vec![Duration::ZERO, Duration::ZERO, Duration::ms(1)],
            )],
        )
        .unwrap()
    }

    fn spec(g: PathGen, duration: TimeNs, seed: u64) -> GenSpec {
        GenSpec { seed: Some(seed), duration, paths: BTreeMap::from([("p".to_string(), g)]) }
    }

    #[test]
    fn splitmix_reference_values() {
        let mut r = SplitMix64::new(0);
        assert_eq!(r.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(r.next_u64(), 0x6E78_9E6A_A1B9_65F4);
        let mut r = SplitMix64::new(7);
        for _ in 0..1000 {
            let v = r.range(-3, 3);
            assert!((-3..=3).contains(&v));
        }
    }

    #[test]
    fn periodic_without_jitter() {
        let m = three_hop_model();
        let g = PathGen::periodic(ms(10), Bounds::exactly(ms(1)));
        let (trace, sidecar) = generate_trace(&m, &spec(g, ms(100), 1)).unwrap();
        let sampling = trace.signal(&p("s", 0));
        assert_eq!(sampling.len(), 10);
        let distances = event_distance(sampling);
        assert!(distances.values.values().all(|&d| d == ms(10)));
        assert_eq!(sidecar.chains.len(), 10);
        assert!(sidecar.chains.iter().all(|c| c.h_ns == ms(2) && c.a_ns == ms(3)));
    }

    #[test]
    fn sidecar_matches_metrics() {
        let m = three_hop_model();
        let g = PathGen {
            jitter: ms(4),
            drop_probability: Ratio { num: 1, den: 4 },
            ..PathGen::periodic(ms(5), Bounds::new(TimeNs::ZERO, ms(9)))
        };
        let (trace, sidecar) = generate_trace(&m, &spec(g, ms(500), 99)).unwrap();
        let chains = extract_causal_chains(&trace, m.path("p").unwrap());
        assert_eq!(chains.chains.len(), sidecar.chains.len());
        assert_eq!(chains.skipped.len(), sidecar.dropped.len());
        assert_eq!(chains.chains.len() + sidecar.dropped.len(), trace.signal(&p("f", 1)).len());
        for (c, truth) in chains.chains.iter().zip(&sidecar.chains) {
            assert_eq!(c.k(), truth.k);
            assert_eq!(latency(c), truth.h_ns);
            assert_eq!(data_age(c, &m), truth.a_ns);
            assert_eq!(logical_timestamp(c, &m), truth.t_ns);
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let m = three_hop_model();
        let g = PathGen { jitter: ms(3), ..PathGen::periodic(ms(10), Bounds::new(ms(0), ms(5))) };
        let s = spec(g, ms(200), 42);
        let (t1, c1) = generate_trace(&m, &s).unwrap();
        let (t2, c2) = generate_trace(&m, &s).unwrap();
        assert_eq!(t1.to_json(), t2.to_json());
        assert_eq!(c1.to_json(), c2.to_json());
        let (t3, _) = generate_trace(&m, &GenSpec { seed: Some(43), ..s }).unwrap();
        assert_ne!(t1.to_json(), t3.to_json());
    }

    #[test]
    fn invalid_specs() {
        let m = three_hop_model();
        let bad_jitter = PathGen { jitter: ms(10), ..PathGen::periodic(ms(10), Bounds::exactly(ms(1))) };
        assert!(matches!(generate_trace(&m, &spec(bad_jitter, ms(100), 1)), Err(GenError::Invalid(_))));
        let half_open = PathGen::periodic(ms(10), Bounds::at_least(ms(1)));
        assert!(matches!(generate_trace(&m, &spec(half_open, ms(100), 1)), Err(GenError::Invalid(_))));
        let negative = PathGen::periodic(ms(10), Bounds::new(ms(-1), ms(1)));
        assert!(matches!(generate_trace(&m, &spec(negative, ms(100), 1)), Err(GenError::Invalid(_))));
        let g = PathGen::periodic(ms(10), Bounds::exactly(ms(1)));
        assert!(matches!(
            generate_trace(&m, &GenSpec { seed: None, ..spec(g, ms(100), 1) }),
            Err(GenError::MissingSeed)
        ));
    }

    #[test]
    fn genspec_json_round_trip() {
        let text = r#"{"seed": 42, "duration_ns": 100000000, "paths": {"p": {
            "period_ns": 10000000, "jitter_ns": 1000000,
            "hop_latency": {"lower_ns": 0, "upper_ns": 2000000},
            "drop_probability": {"num": 1, "den": 10}}}}"#;
        let s = GenSpec::from_json(text).unwrap();
        assert_eq!(s.paths["p"].drop_probability, Ratio { num: 1, den: 10 });
        assert_eq!(GenSpec::from_json(&s.to_json()).unwrap(), s);
        assert!(GenSpec::from_json(r#"{"duration_ns": 1, "paths": {}, "extra": 1}"#).is_err());
    }

    fn generated(seed: u64) -> (SystemModel, Trace) {
        let m = three_hop_model();
        let g = PathGen { jitter: ms(2), ..PathGen::periodic(ms(10), Bounds::new(ms(0), ms(3))) };
        let (t, _) = generate_trace(&m, &spec(g, ms(200), seed)).unwrap();
        (m, t)
    }

    #[test]
    fn zero_magnitude_is_identity() {
        let (m, t) = generated(5);
        for kind in [RequirementKind::DataAge, RequirementKind::SamplingRate, RequirementKind::NoAliasing] {
            let (u, inj) = inject_violation(&t, &m, kind, &[p("f", 1)], TimeNs::ZERO, 3).unwrap();
            assert_eq!(u, t);
            assert!(inj.k >= 1);
        }
    }

    #[test]
    fn age_injection_hits_one_chain() {
        let (m, t) = generated(6);
        let (u, inj) = inject_violation(&t, &m, RequirementKind::DataAge, &[p("f", 1)], ms(10), 8).unwrap();
        let path = m.path("p").unwrap();
        let before = extract_causal_chains(&t, path).chains;
        let after = extract_causal_chains(&u, path).chains;
        for (b, a) in before.iter().zip(&after) {
            let grew = data_age(a, &m) - data_age(b, &m);
            assert_eq!(grew, if a.k() == inj.k { ms(10) } else { TimeNs::ZERO });
        }
    }

    #[test]
    fn rate_gap_changes_one_entry() {
        let (m, t) = generated(7);
        let (u, inj) = inject_violation(&t, &m, RequirementKind::SamplingRate, &[p("f", 1)], ms(25), 1).unwrap();
        let path = m.path("p").unwrap();
        let before = sampling_rate_runs(&extract_causal_chains(&t, path).chains, &m);
        let after = sampling_rate_runs(&extract_causal_chains(&u, path).chains, &m);
        let changed: Vec<u64> = before.values.keys().filter(|k| before.values[k] != after.values[k]).copied().collect();
        assert_eq!(changed, [inj.k]);
    }

    #[test]
    fn joint_reads_share_terminal_tags() {
        let m = SystemModel::new(
            vec![
                Component::new("s1", vec![Port::new(0, PortKind::Sampling)]),
                Component::new("s2", vec![Port::new(0, PortKind::Sampling)]),
                Component::new("x", vec![Port::new(0, PortKind::Input), Port::new(1, PortKind::Input)]),
            ],
            vec![
                SignalPath::undelayed("p", vec![p("s1", 0), p("x", 0)]),
                SignalPath::undelayed("q", vec![p("s2", 0), p("x", 1)]),
            ],
        )
        .unwrap();
        let g = PathGen { jitter: ms(4), ..PathGen::periodic(ms(10), Bounds::new(ms(0), ms(6))) };
        let spec = GenSpec {
            seed: Some(3),
            duration: ms(300),
            paths: BTreeMap::from([
                ("p".to_string(), g.clone()),
                ("q".to_string(), PathGen { read_with: Some("p".into()), ..g.clone() }),
            ]),
        };
        let (t, sidecar) = generate_trace(&m, &spec).unwrap();
        let (x0, x1) = (t.signal(&p("x", 0)), t.signal(&p("x", 1)));
        assert_eq!(x0.len(), 30);
        assert!(x0.iter().zip(x1).all(|(a, b)| a.tag == b.tag));
        assert!(sidecar.chains.iter().all(|c| c.h_ns >= TimeNs::ZERO));

        let mut short = spec.clone();
        short.paths.get_mut("q").unwrap().offset = ms(295);
        assert!(matches!(generate_trace(&m, &short), Err(GenError::Invalid(_))));
    }

    #[test]
    fn scenarios_generate() {
        let limits = ScenarioLimits::default();
        for seed in 0..50 {
            let (model, spec) = random_scenario(seed, &limits);
            let (trace, sidecar) = generate_trace(&model, &spec).unwrap();
            assert!(!trace.is_empty());
            for path in model.paths() {
                assert!(path.len() >= limits.interfaces.0 && path.len() <= limits.interfaces.1);
                assert!(path.total_delay() <= limits.max_delay);
            }
            let _ = sidecar;
        }
    }

    #[test]
    fn injection_errors() {
        let (m, t) = generated(8);
        assert!(matches!(
            inject_violation(&t, &m, RequirementKind::Synchronicity, &[p("f", 1)], ms(1), 0),
            Err(InjectError::SubjectCount { .. })
        ));
        assert!(matches!(
            inject_violation(&Trace::default(), &m, RequirementKind::DataAge, &[p("f", 1)], ms(1), 0),
            Err(InjectError::TooSmall(_))
        ));
    }
}
