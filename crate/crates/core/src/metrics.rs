//! Measured and logical signal properties of causal chains.
//!
//! Logical timestamps follow `t = t̂_s - d`: the sampling tag moved back by
//! the accumulated algorithmic delay of the path. Under that convention the
//! data age is exactly `a = h + d` and every derived constraint in
//! [`crate::requirements`] is exact.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{PortKind, PortRef, SignalPath, SystemModel};
use crate::time::{Bounds, Duration, TimeNs};
use crate::trace::{extract_causal_chains, CausalChain, Event, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertyKind {
    Age,
    Latency,
    EventDistance,
    Synchronicity,
    SamplingRate,
}

impl fmt::Display for PropertyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PropertyKind::Age => "age",
            PropertyKind::Latency => "latency",
            PropertyKind::EventDistance => "event_distance",
            PropertyKind::Synchronicity => "synchronicity",
            PropertyKind::SamplingRate => "sampling_rate",
        })
    }
}

/// Per-event values of one property, keyed by event index `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertySeries {
    pub kind: PropertyKind,
    pub values: BTreeMap<u64, TimeNs>,
}

impl PropertySeries {
    pub fn new(kind: PropertyKind) -> Self {
        PropertySeries { kind, values: BTreeMap::new() }
    }

    pub fn bounds(&self) -> Option<Bounds> {
        summarize(self).ok()
    }

    pub fn max(&self) -> Option<TimeNs> {
        self.values.values().copied().max()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("chains are not consecutive: k = {next} follows k = {prev}")]
    NonConsecutive { prev: u64, next: u64 },
    #[error("cannot pair events: {0}")]
    Pairing(String),
    #[error("missing sampling period for read interface {0}")]
    MissingPeriod(PortRef),
    #[error("empty series has no bounds")]
    EmptySeries,
    #[error("unknown signal path {0:?}")]
    UnknownPath(String),
}

fn path_of<'m>(chain: &CausalChain<'_>, model: &'m SystemModel) -> &'m SignalPath {
    model
        .path(&chain.path)
        .unwrap_or_else(|| panic!("chain refers to path {:?} missing from the model", chain.path))
}

/// Logical timestamp of the chain's terminal event: `t = t̂_s - d`, with
/// `d` the delay accumulated up to the terminal interface.
///
/// # Panics
/// If the chain's path is not part of `model`.
pub fn logical_timestamp(chain: &CausalChain<'_>, model: &SystemModel) -> TimeNs {
    let d = path_of(chain, model).delay_through(chain.events.len() - 1);
    chain.sampling().tag - d
}

/// Latency `h`: terminal tag minus sampling tag.
pub fn latency(chain: &CausalChain<'_>) -> TimeNs {
    chain.terminal().tag - chain.sampling().tag
}

/// Data age `a = t̂ - t`, which equals `h + d`.
pub fn data_age(chain: &CausalChain<'_>, model: &SystemModel) -> TimeNs {
    chain.terminal().tag - logical_timestamp(chain, model)
}

/// Tag distance between consecutive events of one signal. `k = 1` has no
/// predecessor and is omitted.
pub fn event_distance(events: &[Event]) -> PropertySeries {
    let mut series = PropertySeries::new(PropertyKind::EventDistance);
    for pair in events.windows(2) {
        series.values.insert(pair[1].k, pair[1].tag - pair[0].tag);
    }
    series
}

/// Synchronicity `ζ = t_a - t_b` of two chains whose terminal events were
/// produced together: equal index, tags no more than `epsilon` apart.
pub fn synchronicity(
    chain_a: &CausalChain<'_>,
    chain_b: &CausalChain<'_>,
    model: &SystemModel,
    epsilon: TimeNs,
) -> Result<TimeNs, MetricsError> {
    let (ta, tb) = (chain_a.terminal(), chain_b.terminal());
    if ta.k != tb.k {
        return Err(MetricsError::Pairing(format!("indices differ ({} vs {})", ta.k, tb.k)));
    }
    if !is_paired(ta.tag, tb.tag, epsilon) {
        return Err(MetricsError::Pairing(format!(
            "tags {} and {} differ by more than {}",
            ta.tag, tb.tag, epsilon
        )));
    }
    Ok(logical_timestamp(chain_a, model) - logical_timestamp(chain_b, model))
}

fn is_paired(a: TimeNs, b: TimeNs, epsilon: TimeNs) -> bool {
    (a - b).ns().abs() <= epsilon.ns()
}

/// Matches chains of two paths by terminal index, keeping only pairs whose
/// terminal tags lie within `epsilon`.
pub fn pair_by_index<'a, 't>(
    chains_a: &'a [CausalChain<'t>],
    chains_b: &'a [CausalChain<'t>],
    epsilon: TimeNs,
) -> Vec<(&'a CausalChain<'t>, &'a CausalChain<'t>)> {
    let by_k: BTreeMap<u64, &CausalChain<'t>> = chains_b.iter().map(|c| (c.k(), c)).collect();
    chains_a
        .iter()
        .filter_map(|a| {
            let b = by_k.get(&a.k())?;
            is_paired(a.terminal().tag, b.terminal().tag, epsilon).then_some((a, *b))
        })
        .collect()
}

/// Logical sampling rate `Δt_k = t_k - t_{k-1}` over chains with
/// consecutive terminal indices.
pub fn sampling_rate(chains: &[CausalChain<'_>], model: &SystemModel) -> Result<PropertySeries, MetricsError> {
    for pair in chains.windows(2) {
        if pair[1].k() != pair[0].k() + 1 {
            return Err(MetricsError::NonConsecutive { prev: pair[0].k(), next: pair[1].k() });
        }
    }
    Ok(sampling_rate_runs(chains, model))
}

/// Like [`sampling_rate`], but tolerates gaps: an entry exists for `k`
/// only when the chain for `k - 1` is present too.
pub fn sampling_rate_runs(chains: &[CausalChain<'_>], model: &SystemModel) -> PropertySeries {
    let mut series = PropertySeries::new(PropertyKind::SamplingRate);
    for pair in chains.windows(2) {
        if pair[1].k() == pair[0].k() + 1 {
            let dt = logical_timestamp(&pair[1], model) - logical_timestamp(&pair[0], model);
            series.values.insert(pair[1].k(), dt);
        }
    }
    series
}

/// Logical sampling rate observed at every interface of `path`, measured
/// on the chains of the path prefix that ends there.
pub fn interface_sampling_rates(
    trace: &Trace,
    model: &SystemModel,
    path: &SignalPath,
) -> Vec<(PortRef, PropertySeries)> {
    (0..path.len())
        .map(|pos| {
            let prefix = path.prefix(pos);
            let chains = extract_causal_chains(trace, &prefix).chains;
            (path.interfaces[pos].clone(), sampling_rate_runs(&chains, model))
        })
        .collect()
}

/// Worst-case (largest) logical sampling rate per interface. Interfaces
/// without any measurement are absent.
pub fn worst_case_periods(rates: &[(PortRef, PropertySeries)]) -> BTreeMap<PortRef, Duration> {
    rates
        .iter()
        .filter_map(|(port, series)| Some((port.clone(), Duration::Finite(series.max()?))))
        .collect()
}

/// Forward band-limit pass along `path`.
///
/// The sampling interface starts at `sampling_band_limit`. Every later
/// interface takes the maximum of the incoming band limit, its own
/// sampling period, and (for outputs) the declared filter cut-off.
/// Read interfaces must have a period; for others a missing period counts
/// as zero. The result is aligned with `path.interfaces`.
pub fn band_limit_propagate(
    model: &SystemModel,
    path: &SignalPath,
    sampling_band_limit: Duration,
    observed_sampling_periods: &BTreeMap<PortRef, Duration>,
) -> Result<Vec<Duration>, MetricsError> {
    let mut limits = Vec::with_capacity(path.len());
    let mut current = sampling_band_limit;
    limits.push(current);
    for iface in &path.interfaces[1..] {
        let period = match observed_sampling_periods.get(iface) {
            Some(&p) => p,
            None if model.kind(iface) == Some(PortKind::Input) => {
                return Err(MetricsError::MissingPeriod(iface.clone()))
            }
            None => Duration::ZERO,
        };
        current = current.max(period);
        if model.kind(iface) == Some(PortKind::Output) {
            current = current.max(model.filter_cutoff(iface));
        }
        limits.push(current);
    }
    Ok(limits)
}

/// An adjacent producer/consumer pair on a path where the consumer samples
/// slower than the band limit it receives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AliasingPair {
    /// Path position of the consumer.
    pub position: usize,
    pub producer: PortRef,
    pub consumer: PortRef,
    pub band_limit: Duration,
    pub period: Duration,
}

/// Every adjacent pair `(y, u)` of `path` for which `l_y >= Δt_u` is false.
/// Consumers without a known period are not evaluated.
pub fn detect_aliasing(
    path: &SignalPath,
    band_limits: &[Duration],
    periods: &BTreeMap<PortRef, Duration>,
) -> Vec<AliasingPair> {
    (1..path.len())
        .filter_map(|pos| {
            let consumer = &path.interfaces[pos];
            let period = *periods.get(consumer)?;
            let band_limit = band_limits[pos - 1];
            (band_limit < period).then(|| AliasingPair {
                position: pos,
                producer: path.interfaces[pos - 1].clone(),
                consumer: consumer.clone(),
                band_limit,
                period,
            })
        })
        .collect()
}

/// `[min, max]` over the defined entries.
pub fn summarize(series: &PropertySeries) -> Result<Bounds, MetricsError> {
    let lo = series.values.values().min().ok_or(MetricsError::EmptySeries)?;
    let hi = series.values.values().max().ok_or(MetricsError::EmptySeries)?;
    Ok(Bounds::new(*lo, *hi))
}

/// Series of a per-chain property keyed by terminal index.
pub fn chain_series<'t>(
    kind: PropertyKind,
    chains: &[CausalChain<'t>],
    f: impl Fn(&CausalChain<'t>) -> TimeNs,
) -> PropertySeries {
    PropertySeries { kind, values: chains.iter().map(|c| (c.k(), f(c))).collect() }
}
