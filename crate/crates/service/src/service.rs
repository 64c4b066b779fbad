use std::path::Path;
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use emocal_core::behavior::ActivityModels;
use emocal_core::ecg::{Channel, EcgRecording};
use emocal_core::scheduler::{self, Schedule, SchedulerError};
use emocal_core::{EmotionSource, EmotionState, EventId, EventSpec};
use serde::{Deserialize, Serialize};

use crate::infer::{emotion_from_activity, levels_from_ecg};
use crate::journal::{FileJournal, Journal, LogEntry, MemoryJournal, Mutation};
use crate::{AppState, Clock, ConfigPatch, SequenceModels, ServiceConfig, ServiceError, SystemClock};

/// Request body for a new event; the id is generated when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewEvent {
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub name: String,
    pub duration_min: u32,
    pub priority: f64,
    #[serde(default)]
    pub multitask: bool,
    #[serde(default = "half")]
    pub cognitive_load: f64,
    #[serde(default)]
    pub sensitive: bool,
    #[serde(default)]
    pub earliest: Option<u32>,
    #[serde(default)]
    pub latest: Option<u32>,
}

fn half() -> f64 {
    0.5
}

impl From<EventSpec> for NewEvent {
    fn from(e: EventSpec) -> Self {
        Self {
            id: Some(e.id.0),
            name: e.name,
            duration_min: e.duration_min,
            priority: e.priority,
            multitask: e.multitask,
            cognitive_load: e.cognitive_load,
            sensitive: e.sensitive,
            earliest: e.earliest,
            latest: e.latest,
        }
    }
}

/// Where a new emotion reading comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum EmotionInput {
    Manual {
        valence: f64,
        arousal: f64,
        dominance: f64,
    },
    /// An ECG recording in the text format, classified by the sequence models.
    Ecg {
        recording: String,
        #[serde(default = "first_channel")]
        channel: u8,
    },
    /// An activity log CSV, classified by the activity models.
    Activity { log: String },
}

fn first_channel() -> u8 {
    1
}

struct Writer {
    state: AppState,
    seq: u64,
    journal: Box<dyn Journal>,
}

#[derive(Default)]
struct Models {
    sequence: Option<Arc<SequenceModels>>,
    activity: Option<Arc<ActivityModels>>,
}

/// The calendar service. Mutations are serialized through one writer;
/// readers get immutable snapshots and never wait on a solve.
pub struct Service {
    writer: Mutex<Writer>,
    published: RwLock<Arc<AppState>>,
    models: RwLock<Models>,
    clock: Arc<dyn Clock>,
}

impl Service {
    pub fn new(journal: Box<dyn Journal>, state: AppState, seq: u64, clock: Arc<dyn Clock>) -> Self {
        Self {
            published: RwLock::new(Arc::new(state.clone())),
            writer: Mutex::new(Writer { state, seq, journal }),
            models: RwLock::new(Models::default()),
            clock,
        }
    }

    /// A fresh service journaling to memory.
    pub fn in_memory(clock: Arc<dyn Clock>) -> Self {
        Self::new(Box::<MemoryJournal>::default(), AppState::default(), 0, clock)
    }

    /// Recovers from (or starts) a journal directory, using the system clock.
    pub fn open(dir: impl AsRef<Path>, snapshot_every: u64) -> Result<Self, ServiceError> {
        let (journal, state, seq) = FileJournal::open(dir, snapshot_every)?;
        log::info!("recovered {} events at journal entry {seq}", state.events.len());
        Ok(Self::new(Box::new(journal), state, seq, Arc::new(SystemClock)))
    }

    pub fn with_sequence_models(self, models: SequenceModels) -> Self {
        self.models.write().expect("models lock").sequence = Some(Arc::new(models));
        self
    }

    pub fn with_activity_models(self, models: ActivityModels) -> Self {
        self.models.write().expect("models lock").activity = Some(Arc::new(models));
        self
    }

    fn lock(&self) -> MutexGuard<'_, Writer> {
        // a panic mid-mutation leaves the previous state intact, so the lock stays usable
        self.writer.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Journals a mutation, then applies and publishes it.
    fn commit(&self, w: &mut Writer, mutation: Mutation) -> Result<(), ServiceError> {
        let entry = LogEntry {
            seq: w.seq + 1,
            mutation,
            at: self.clock.now(),
        };
        let mut next = w.state.clone();
        next.apply(&entry)?;
        w.journal.append(&entry, &next)?;
        w.state = next;
        w.seq = entry.seq;
        *self.published.write().unwrap_or_else(|p| p.into_inner()) = Arc::new(w.state.clone());
        Ok(())
    }

    /// A consistent snapshot of the current state.
    pub fn state(&self) -> Arc<AppState> {
        self.published.read().unwrap_or_else(|p| p.into_inner()).clone()
    }

    pub fn schedule(&self) -> Option<Schedule> {
        self.state().last_schedule.clone()
    }

    /// Sequence number of the last journal entry.
    pub fn seq(&self) -> u64 {
        self.lock().seq
    }

    /// The journal as JSON lines.
    pub fn journal_text(&self) -> Result<String, ServiceError> {
        Ok(self.lock().journal.contents()?)
    }

    pub fn add_event(&self, req: NewEvent) -> Result<EventSpec, ServiceError> {
        let mut w = self.lock();
        let id = match req.id {
            Some(id) => id,
            None => w.state.fresh_id(),
        };
        let event = EventSpec {
            name: if req.name.is_empty() { id.clone() } else { req.name },
            id: EventId(id),
            duration_min: req.duration_min,
            priority: req.priority,
            multitask: req.multitask,
            cognitive_load: req.cognitive_load,
            sensitive: req.sensitive,
            earliest: req.earliest,
            latest: req.latest,
        };
        event
            .validate()
            .map_err(|e| ServiceError::ValidationFailed(e.to_string()))?;
        if w.state.has_event(event.id.as_str()) {
            return Err(ServiceError::ValidationFailed(format!("event {} already exists", event.id)));
        }
        self.commit(&mut w, Mutation::EventAdded(event.clone()))?;
        Ok(event)
    }

    pub fn remove_event(&self, id: &str) -> Result<(), ServiceError> {
        let mut w = self.lock();
        if !w.state.has_event(id) {
            return Err(ServiceError::NotFound(format!("event {id}")));
        }
        self.commit(&mut w, Mutation::EventRemoved { id: id.into() })
    }

    /// Records a new emotion reading. Model inference runs before the writer
    /// lock is taken.
    pub fn set_emotion(&self, input: EmotionInput) -> Result<EmotionState, ServiceError> {
        let invalid = |e: &dyn std::fmt::Display| ServiceError::ValidationFailed(e.to_string());
        let reading = match input {
            EmotionInput::Manual {
                valence,
                arousal,
                dominance,
            } => EmotionState::new(valence, arousal, dominance).map_err(|e| invalid(&e))?,
            EmotionInput::Ecg { recording, channel } => {
                let models = self.models.read().expect("models lock").sequence.clone();
                let models = models.ok_or_else(|| ServiceError::ModelMissing("sequence".into()))?;
                let channel = Channel::from_number(channel)
                    .ok_or_else(|| ServiceError::ValidationFailed(format!("channel {channel} is not 1 or 2")))?;
                let rec = EcgRecording::parse(&recording).map_err(|e| invalid(&e))?;
                let levels = levels_from_ecg(&models, &rec, channel)?;
                let [v, a, d] = levels.map(|l| l.component());
                EmotionState::new(v, a, d)
                    .map_err(|e| invalid(&e))?
                    .with_source(EmotionSource::Biometric)
            }
            EmotionInput::Activity { log } => {
                let models = self.models.read().expect("models lock").activity.clone();
                let models = models.ok_or_else(|| ServiceError::ModelMissing("activity".into()))?;
                let config = self.state().config.clone();
                emotion_from_activity(&models, &log, &config)?
            }
        };
        let mut w = self.lock();
        let reading = reading.at(self.clock.now());
        reading.validate().map_err(|e| invalid(&e))?;
        self.commit(&mut w, Mutation::EmotionSet(reading))?;
        Ok(reading)
    }

    /// Solves the current problem and records the schedule. On failure the
    /// state is unchanged.
    pub fn solve(&self) -> Result<Schedule, ServiceError> {
        let mut w = self.lock();
        if w.state.events.is_empty() {
            return Err(ServiceError::NoEvents);
        }
        let schedule = scheduler::solve(&w.state.problem()).map_err(|e| match e {
            SchedulerError::Infeasible(reason) => ServiceError::Infeasible(reason),
            other => ServiceError::ValidationFailed(other.to_string()),
        })?;
        self.commit(&mut w, Mutation::ScheduleSolved(schedule.clone()))?;
        Ok(schedule)
    }

    pub fn set_config(&self, patch: &ConfigPatch) -> Result<ServiceConfig, ServiceError> {
        let mut w = self.lock();
        let config = patch.apply(&w.state.config)?;
        self.commit(&mut w, Mutation::ConfigChanged(config.clone()))?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{replay, ManualClock};

    fn service() -> Service {
        Service::in_memory(Arc::new(ManualClock::new(100.0)))
    }

    fn event(id: &str, minutes: u32) -> NewEvent {
        EventSpec::new(id, minutes, 0.5).into()
    }

    #[test]
    fn ids_are_generated_and_unique() {
        let s = service();
        s.add_event(event("evt-2", 30)).unwrap();
        let mut req = event("x", 30);
        req.id = None;
        assert_eq!(s.add_event(req.clone()).unwrap().id.as_str(), "evt-3");
        assert_eq!(s.add_event(req).unwrap().id.as_str(), "evt-4");
        assert!(matches!(s.add_event(event("evt-2", 30)), Err(ServiceError::ValidationFailed(_))));
    }

    #[test]
    fn failures_leave_no_trace() {
        let s = service();
        assert!(matches!(s.solve(), Err(ServiceError::NoEvents)));
        assert!(matches!(s.remove_event("nope"), Err(ServiceError::NotFound(_))));
        assert!(matches!(s.add_event(event("bad", 0)), Err(ServiceError::ValidationFailed(_))));
        let emotion = EmotionInput::Ecg {
            recording: String::new(),
            channel: 1,
        };
        assert!(matches!(s.set_emotion(emotion), Err(ServiceError::ModelMissing(_))));
        assert_eq!(s.seq(), 0);
        assert_eq!(s.journal_text().unwrap(), "");
    }

    #[test]
    fn infeasible_solve_is_structured_and_harmless() {
        let s = service();
        s.add_event(event("long", 600)).unwrap();
        let before = s.state();
        match s.solve() {
            Err(ServiceError::Infeasible(r)) => {
                let body = ServiceError::Infeasible(r).body();
                assert_eq!(body.details["reason"], "no_start_slot");
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
        assert_eq!(*s.state(), *before);
    }

    #[test]
    fn each_mutation_is_one_entry_and_replays() {
        let s = service();
        s.add_event(event("a", 60)).unwrap();
        s.add_event(event("b", 30)).unwrap();
        s.set_emotion(EmotionInput::Manual {
            valence: 0.2,
            arousal: 0.9,
            dominance: 0.4,
        })
        .unwrap();
        s.solve().unwrap();
        s.set_config(&ConfigPatch {
            alpha_emotional: Some(3.0),
            ..Default::default()
        })
        .unwrap();
        s.remove_event("a").unwrap();
        assert_eq!(s.seq(), 6);
        let text = s.journal_text().unwrap();
        assert_eq!(text.lines().count(), 6);
        assert_eq!(replay(&text).unwrap(), *s.state());
        assert_eq!(s.state().emotion.at, 100.0);
    }
}
