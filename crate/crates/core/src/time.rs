//! Integer-nanosecond time values.
//!
//! Every tag, logical timestamp, delay and band limit is an exact `i64`
//! count of nanoseconds so that the derived identities between the
//! measured and logical properties hold with integer equality.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A signed point in time or signed difference, in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimeNs(pub i64);

impl TimeNs {
    pub const ZERO: TimeNs = TimeNs(0);

    pub const fn from_ms(ms: i64) -> Self {
        TimeNs(ms * 1_000_000)
    }

    pub const fn from_us(us: i64) -> Self {
        TimeNs(us * 1_000)
    }

    pub const fn ns(self) -> i64 {
        self.0
    }
}

impl Add for TimeNs {
    type Output = TimeNs;
    fn add(self, rhs: TimeNs) -> TimeNs {
        TimeNs(self.0 + rhs.0)
    }
}

impl AddAssign for TimeNs {
    fn add_assign(&mut self, rhs: TimeNs) {
        self.0 += rhs.0;
    }
}

impl Sub for TimeNs {
    type Output = TimeNs;
    fn sub(self, rhs: TimeNs) -> TimeNs {
        TimeNs(self.0 - rhs.0)
    }
}

impl SubAssign for TimeNs {
    fn sub_assign(&mut self, rhs: TimeNs) {
        self.0 -= rhs.0;
    }
}

impl Neg for TimeNs {
    type Output = TimeNs;
    fn neg(self) -> TimeNs {
        TimeNs(-self.0)
    }
}

impl std::iter::Sum for TimeNs {
    fn sum<I: Iterator<Item = TimeNs>>(iter: I) -> TimeNs {
        TimeNs(iter.map(|t| t.0).sum())
    }
}

impl fmt::Display for TimeNs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ns", self.0)
    }
}

/// A non-negative span that may also be unbounded.
///
/// Used for algorithmic delays, filter cut-offs, band limits and sampling
/// periods. `Unbounded` orders above every finite value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Duration {
    Finite(TimeNs),
    Unbounded,
}

impl Duration {
    pub const ZERO: Duration = Duration::Finite(TimeNs::ZERO);

    pub const fn ns(ns: i64) -> Self {
        Duration::Finite(TimeNs(ns))
    }

    pub const fn ms(ms: i64) -> Self {
        Duration::Finite(TimeNs::from_ms(ms))
    }

    pub fn finite(self) -> Option<TimeNs> {
        match self {
            Duration::Finite(t) => Some(t),
            Duration::Unbounded => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Duration::Finite(_))
    }

    /// True for finite negative values, which no delay, cut-off, band
    /// limit or period may take.
    pub fn is_negative(self) -> bool {
        matches!(self, Duration::Finite(t) if t.0 < 0)
    }
}

impl Default for Duration {
    fn default() -> Self {
        Duration::ZERO
    }
}

impl From<TimeNs> for Duration {
    fn from(t: TimeNs) -> Self {
        Duration::Finite(t)
    }
}

impl PartialOrd for Duration {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Duration {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Duration::Finite(a), Duration::Finite(b)) => a.cmp(b),
            (Duration::Finite(_), Duration::Unbounded) => Ordering::Less,
            (Duration::Unbounded, Duration::Finite(_)) => Ordering::Greater,
            (Duration::Unbounded, Duration::Unbounded) => Ordering::Equal,
        }
    }
}

impl fmt::Display for Duration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Duration::Finite(t) => t.fmt(f),
            Duration::Unbounded => f.write_str("unbounded"),
        }
    }
}

// Finite durations serialize as plain integers, `Unbounded` as the string
// "unbounded".
impl Serialize for Duration {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Duration::Finite(t) => serializer.serialize_i64(t.0),
            Duration::Unbounded => serializer.serialize_str("unbounded"),
        }
    }
}

impl<'de> Deserialize<'de> for Duration {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(i64),
            Str(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Int(ns) => Ok(Duration::ns(ns)),
            Repr::Str(s) if s == "unbounded" => Ok(Duration::Unbounded),
            Repr::Str(s) => Err(serde::de::Error::custom(format!(
                "expected integer nanoseconds or \"unbounded\", found {s:?}"
            ))),
        }
    }
}

/// An inclusive interval. A missing end is unbounded in that direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Bounds {
    #[serde(rename = "lower_ns", default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<TimeNs>,
    #[serde(rename = "upper_ns", default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<TimeNs>,
}

impl Bounds {
    pub const UNBOUNDED: Bounds = Bounds { lower: None, upper: None };

    pub fn new(lower: TimeNs, upper: TimeNs) -> Self {
        Bounds { lower: Some(lower), upper: Some(upper) }
    }

    pub fn at_least(lower: TimeNs) -> Self {
        Bounds { lower: Some(lower), upper: None }
    }

    pub fn at_most(upper: TimeNs) -> Self {
        Bounds { lower: None, upper: Some(upper) }
    }

    pub fn exactly(value: TimeNs) -> Self {
        Bounds::new(value, value)
    }

    pub fn is_well_formed(&self) -> bool {
        match (self.lower, self.upper) {
            (Some(lo), Some(hi)) => lo <= hi,
            _ => true,
        }
    }

    pub fn contains(&self, value: TimeNs) -> bool {
        self.lower.is_none_or(|lo| lo <= value) && self.upper.is_none_or(|hi| value <= hi)
    }

    /// `self ⊆ other`.
    pub fn is_within(&self, other: &Bounds) -> bool {
        let lower_ok = match (other.lower, self.lower) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some(o), Some(s)) => o <= s,
        };
        let upper_ok = match (other.upper, self.upper) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some(o), Some(s)) => s <= o,
        };
        lower_ok && upper_ok
    }

    /// Both ends moved by `-offset`.
    pub fn shifted_down(&self, offset: TimeNs) -> Bounds {
        Bounds { lower: self.lower.map(|v| v - offset), upper: self.upper.map(|v| v - offset) }
    }
}

impl fmt::Display for Bounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.lower {
            Some(lo) => write!(f, "[{lo}, ")?,
            None => f.write_str("(-inf, ")?,
        }
        match self.upper {
            Some(hi) => write!(f, "{hi}]"),
            None => f.write_str("+inf)"),
        }
    }
}
