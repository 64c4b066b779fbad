//! Calendar state as an append-only journal of mutations, the operations
//! that produce them, and an HTTP front end.
//!
//! Every successful mutation appends exactly one [`LogEntry`]; folding the
//! journal from an empty [`AppState`] reproduces the live state.

mod clock;
mod config;
mod error;
pub mod http;
mod infer;
mod journal;
mod service;
mod state;

pub use clock::{Clock, ManualClock, SystemClock};
pub use config::{ConfigPatch, ServiceConfig};
pub use error::{ErrorBody, ServiceError};
pub use infer::{emotion_from_activity, levels_from_ecg, train_bundle, SequenceBundle, SequenceModels};
pub use journal::{replay, replay_from, FileJournal, Journal, LogEntry, MemoryJournal, Mutation};
pub use service::{EmotionInput, NewEvent, Service};
pub use state::AppState;
