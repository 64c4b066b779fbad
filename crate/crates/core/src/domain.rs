//! Shared vocabulary: emotion states, events, placements and the day horizon.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("emotion component {field} = {value} is outside [0, 1]")]
    EmotionOutOfRange { field: &'static str, value: f64 },
    #[error("emotion timestamp {0} must be finite and non-negative")]
    BadTimestamp(f64),
    #[error("event {id}: {reason}")]
    InvalidEvent { id: String, reason: String },
    #[error("invalid horizon: {0}")]
    InvalidHorizon(String),
    #[error("invalid wall-clock time {0:?}, expected HH:MM")]
    InvalidTime(String),
}

fn unit_interval(field: &'static str, value: f64) -> Result<(), DomainError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(DomainError::EmotionOutOfRange { field, value })
    }
}

/// Where an emotion reading came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EmotionSource {
    Biometric,
    Behavioral,
    #[default]
    Manual,
}

/// A valence/arousal/dominance reading, each component normalized to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmotionState {
    pub valence: f64,
    pub arousal: f64,
    pub dominance: f64,
    /// Seconds since the Unix epoch.
    #[serde(default)]
    pub at: f64,
    #[serde(default)]
    pub source: EmotionSource,
}

impl EmotionState {
    pub fn new(valence: f64, arousal: f64, dominance: f64) -> Result<Self, DomainError> {
        let state = Self {
            valence,
            arousal,
            dominance,
            at: 0.0,
            source: EmotionSource::Manual,
        };
        state.validate()?;
        Ok(state)
    }

    /// The (0.5, 0.5, 0.5) state used before anything has been detected.
    pub fn neutral() -> Self {
        Self {
            valence: 0.5,
            arousal: 0.5,
            dominance: 0.5,
            at: 0.0,
            source: EmotionSource::Manual,
        }
    }

    pub fn with_source(mut self, source: EmotionSource) -> Self {
        self.source = source;
        self
    }

    pub fn at(mut self, at: f64) -> Self {
        self.at = at;
        self
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        unit_interval("valence", self.valence)?;
        unit_interval("arousal", self.arousal)?;
        unit_interval("dominance", self.dominance)?;
        if !self.at.is_finite() || self.at < 0.0 {
            return Err(DomainError::BadTimestamp(self.at));
        }
        Ok(())
    }

    /// Scalar capacity for demanding work: high valence and dominance, low arousal.
    pub fn readiness(&self) -> f64 {
        (self.valence + (1.0 - self.arousal) + self.dominance) / 3.0
    }
}

impl Default for EmotionState {
    fn default() -> Self {
        Self::neutral()
    }
}

/// Binary level produced by the heart-rate classifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Low,
    High,
}

impl Level {
    pub fn index(self) -> usize {
        match self {
            Level::Low => 0,
            Level::High => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Level::Low
        } else {
            Level::High
        }
    }

    /// Position of the level on the continuous `[0, 1]` emotion scale.
    pub fn component(self) -> f64 {
        match self {
            Level::Low => 0.25,
            Level::High => 0.75,
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Low => "low",
            Level::High => "high",
        })
    }
}

/// One axis of the valence/arousal/dominance model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Valence,
    Arousal,
    Dominance,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [Dimension::Valence, Dimension::Arousal, Dimension::Dominance];

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Valence => "valence",
            Dimension::Arousal => "arousal",
            Dimension::Dominance => "dominance",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dimension {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "valence" | "v" => Ok(Dimension::Valence),
            "arousal" | "a" => Ok(Dimension::Arousal),
            "dominance" | "d" => Ok(Dimension::Dominance),
            other => Err(format!("unknown emotion dimension {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventId(pub String);

impl EventId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EventId {
    fn from(s: &str) -> Self {
        EventId(s.to_owned())
    }
}

impl From<String> for EventId {
    fn from(s: String) -> Self {
        EventId(s)
    }
}

fn default_load() -> f64 {
    0.5
}

/// A task to be placed on the calendar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub id: EventId,
    #[serde(default)]
    pub name: String,
    pub duration_min: u32,
    pub priority: f64,
    #[serde(default)]
    pub multitask: bool,
    #[serde(default = "default_load")]
    pub cognitive_load: f64,
    #[serde(default)]
    pub sensitive: bool,
    /// Earliest allowed start slot.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub earliest: Option<u32>,
    /// Latest allowed start slot.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latest: Option<u32>,
}

impl EventSpec {
    pub fn new(id: impl Into<EventId>, duration_min: u32, priority: f64) -> Self {
        let id = id.into();
        Self {
            name: id.0.clone(),
            id,
            duration_min,
            priority,
            multitask: false,
            cognitive_load: default_load(),
            sensitive: false,
            earliest: None,
            latest: None,
        }
    }

    pub fn load(mut self, cognitive_load: f64) -> Self {
        self.cognitive_load = cognitive_load;
        self
    }

    pub fn multitask(mut self, multitask: bool) -> Self {
        self.multitask = multitask;
        self
    }

    pub fn sensitive(mut self, sensitive: bool) -> Self {
        self.sensitive = sensitive;
        self
    }

    pub fn window(mut self, earliest: Option<u32>, latest: Option<u32>) -> Self {
        self.earliest = earliest;
        self.latest = latest;
        self
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        let bad = |reason: String| DomainError::InvalidEvent {
            id: self.id.0.clone(),
            reason,
        };
        if self.id.0.is_empty() {
            return Err(bad("empty id".into()));
        }
        if self.duration_min == 0 {
            return Err(bad("duration must be at least one minute".into()));
        }
        if !(0.0..=1.0).contains(&self.priority) {
            return Err(bad(format!("priority {} outside [0, 1]", self.priority)));
        }
        if !(0.0..=1.0).contains(&self.cognitive_load) {
            return Err(bad(format!(
                "cognitive load {} outside [0, 1]",
                self.cognitive_load
            )));
        }
        if let (Some(lo), Some(hi)) = (self.earliest, self.latest) {
            if lo > hi {
                return Err(bad(format!("earliest slot {lo} after latest slot {hi}")));
            }
        }
        Ok(())
    }
}

/// Minutes since midnight, written `HH:MM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WallTime(pub u32);

impl WallTime {
    pub fn hm(hours: u32, minutes: u32) -> Self {
        WallTime(hours * 60 + minutes)
    }

    pub fn minutes(self) -> u32 {
        self.0
    }
}

impl fmt::Display for WallTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}:{:02}", self.0 / 60, self.0 % 60)
    }
}

impl FromStr for WallTime {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || DomainError::InvalidTime(s.to_owned());
        let (h, m) = s.trim().split_once(':').ok_or_else(err)?;
        let h: u32 = h.parse().map_err(|_| err())?;
        let m: u32 = m.parse().map_err(|_| err())?;
        if h > 24 || m > 59 || (h == 24 && m != 0) {
            return Err(err());
        }
        Ok(WallTime::hm(h, m))
    }
}

impl Serialize for WallTime {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for WallTime {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The schedulable window of a single day, cut into equal slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Horizon {
    pub day_start: WallTime,
    pub day_end: WallTime,
    pub slot_minutes: u32,
}

impl Default for Horizon {
    fn default() -> Self {
        Self {
            day_start: WallTime::hm(9, 0),
            day_end: WallTime::hm(18, 0),
            slot_minutes: 30,
        }
    }
}

impl Horizon {
    pub fn new(
        day_start: WallTime,
        day_end: WallTime,
        slot_minutes: u32,
    ) -> Result<Self, DomainError> {
        let h = Self {
            day_start,
            day_end,
            slot_minutes,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if self.slot_minutes == 0 {
            return Err(DomainError::InvalidHorizon(
                "slot length must be positive".into(),
            ));
        }
        if self.day_start >= self.day_end {
            return Err(DomainError::InvalidHorizon(format!(
                "day start {} is not before day end {}",
                self.day_start, self.day_end
            )));
        }
        let span = self.day_end.0 - self.day_start.0;
        if !span.is_multiple_of(self.slot_minutes) {
            return Err(DomainError::InvalidHorizon(format!(
                "{span} minute day is not a whole number of {} minute slots",
                self.slot_minutes
            )));
        }
        Ok(())
    }

    pub fn slot_count(&self) -> u32 {
        (self.day_end.0 - self.day_start.0) / self.slot_minutes
    }

    /// Number of slots an event of `duration_min` occupies.
    pub fn slots_for(&self, duration_min: u32) -> u32 {
        duration_min.div_ceil(self.slot_minutes)
    }

    pub fn slot_time(&self, slot: u32) -> WallTime {
        WallTime(self.day_start.0 + slot * self.slot_minutes)
    }
}

/// An event together with its solved placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledEvent {
    pub event: EventSpec,
    pub start_slot: u32,
    /// Exclusive end slot.
    pub end_slot: u32,
}

impl ScheduledEvent {
    pub fn new(event: EventSpec, start_slot: u32, horizon: &Horizon) -> Self {
        let end_slot = start_slot + horizon.slots_for(event.duration_min);
        Self {
            event,
            start_slot,
            end_slot,
        }
    }

    pub fn id(&self) -> &EventId {
        &self.event.id
    }

    pub fn overlaps(&self, other: &ScheduledEvent) -> bool {
        self.start_slot < other.end_slot && other.start_slot < self.end_slot
    }
}
