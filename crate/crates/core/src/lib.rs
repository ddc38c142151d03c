//! Temporal-semantics analysis for component-based real-time software.
//!
//! A [`SystemModel`](model::SystemModel) declares components, ports and the
//! signal paths that carry data from sampling ports to the interfaces
//! under analysis. A [`Trace`](trace::Trace) records events at those
//! interfaces together with explicit causal links. From the two this crate
//! computes the measured properties (latency, event distance) and the
//! logical ones (data age, synchronicity, logical sampling rate, band
//! limit, aliasing), turns signal-level requirements into timing
//! constraints on cause-effect chains, and checks traces against both.

pub mod checker;
pub mod metrics;
pub mod model;
pub mod requirements;
pub mod time;
pub mod trace;
pub mod tracegen;

pub use checker::{check_agreement, check_constraint, check_requirement_direct, CheckOptions, Status, Verdict};
pub use metrics::{PropertyKind, PropertySeries};
pub use model::{load_model, resolve_signal_paths, validate_model, PortKind, PortRef, SignalPath, SystemModel};
pub use requirements::{load_requirements, transform, transform_all, SignalRequirement, TimingConstraint, TransformReport};
pub use time::{Bounds, Duration, TimeNs};
pub use trace::{extract_causal_chains, CausalChain, Event, Trace};
pub use tracegen::{generate_trace, inject_violation, GenSpec, Injection, Sidecar};
