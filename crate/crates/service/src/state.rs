use emocal_core::scheduler::{Problem, Schedule};
use emocal_core::{EmotionState, EventSpec};
use serde::{Deserialize, Serialize};

use crate::journal::{LogEntry, Mutation};
use crate::{ServiceConfig, ServiceError};

/// Everything the service knows; the fold of the journal.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AppState {
    /// In insertion order.
    pub events: Vec<EventSpec>,
    pub emotion: EmotionState,
    pub last_schedule: Option<Schedule>,
    pub config: ServiceConfig,
    /// Count of events ever added; seeds generated ids.
    pub next_id: u64,
}

impl AppState {
    pub fn problem(&self) -> Problem {
        Problem::new(self.events.clone(), self.config.horizon, self.emotion)
            .with_weights(self.config.weights.clone())
            .with_thresholds(self.config.thresholds)
    }

    pub fn has_event(&self, id: &str) -> bool {
        self.events.iter().any(|e| e.id.as_str() == id)
    }

    /// The smallest free `evt-N` id with `N` above the number of events ever added.
    pub fn fresh_id(&self) -> String {
        (self.next_id + 1..)
            .map(|n| format!("evt-{n}"))
            .find(|id| !self.has_event(id))
            .expect("unbounded range")
    }

    /// Applies one journal entry. Fails when the entry does not fit the state.
    pub fn apply(&mut self, entry: &LogEntry) -> Result<(), ServiceError> {
        let corrupt = |message: String| ServiceError::CorruptLog {
            seq: entry.seq,
            message,
        };
        match &entry.mutation {
            Mutation::EventAdded(e) => {
                if self.has_event(e.id.as_str()) {
                    return Err(corrupt(format!("event {} added twice", e.id)));
                }
                self.events.push(e.clone());
                self.next_id += 1;
            }
            Mutation::EventRemoved { id } => {
                let pos = self
                    .events
                    .iter()
                    .position(|e| &e.id == id)
                    .ok_or_else(|| corrupt(format!("removal of unknown event {id}")))?;
                self.events.remove(pos);
            }
            Mutation::EmotionSet(s) => self.emotion = *s,
            Mutation::ScheduleSolved(s) => self.last_schedule = Some(s.clone()),
            Mutation::ConfigChanged(c) => self.config = c.clone(),
        }
        Ok(())
    }
}
