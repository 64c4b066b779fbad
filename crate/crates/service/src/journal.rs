use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use emocal_core::scheduler::Schedule;
use emocal_core::{EmotionState, EventId, EventSpec};
use serde::{Deserialize, Serialize};

use crate::{AppState, ServiceConfig, ServiceError};

/// A state change, as recorded in the journal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Mutation {
    EventAdded(EventSpec),
    EventRemoved { id: EventId },
    EmotionSet(EmotionState),
    ScheduleSolved(Schedule),
    ConfigChanged(ServiceConfig),
}

/// One journal line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    /// Starts at 1 and increases by one per entry.
    pub seq: u64,
    #[serde(flatten)]
    pub mutation: Mutation,
    /// Seconds since the Unix epoch.
    pub at: f64,
}

/// Durable storage for journal entries.
pub trait Journal: Send {
    /// Persists `entry`; `state` is the state after applying it.
    fn append(&mut self, entry: &LogEntry, state: &AppState) -> io::Result<()>;

    /// The journal as JSON lines.
    fn contents(&self) -> io::Result<String>;
}

/// Keeps the journal text in memory.
#[derive(Debug, Default)]
pub struct MemoryJournal {
    text: String,
}

impl Journal for MemoryJournal {
    fn append(&mut self, entry: &LogEntry, _state: &AppState) -> io::Result<()> {
        self.text.push_str(&serde_json::to_string(entry)?);
        self.text.push('\n');
        Ok(())
    }

    fn contents(&self) -> io::Result<String> {
        Ok(self.text.clone())
    }
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    seq: u64,
    state: AppState,
}

/// `journal.jsonl` plus a `snapshot.json` rewritten every `snapshot_every`
/// entries. The journal is never truncated; the snapshot only shortens
/// recovery.
#[derive(Debug)]
pub struct FileJournal {
    dir: PathBuf,
    file: File,
    snapshot_every: u64,
}

pub const JOURNAL_FILE: &str = "journal.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";

impl FileJournal {
    /// Opens (or creates) a journal directory and recovers its state and
    /// last sequence number.
    pub fn open(dir: impl AsRef<Path>, snapshot_every: u64) -> Result<(Self, AppState, u64), ServiceError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let (base, after) = match fs::read_to_string(dir.join(SNAPSHOT_FILE)) {
            Ok(text) => {
                let snap: Snapshot = serde_json::from_str(&text).map_err(|e| ServiceError::CorruptLog {
                    seq: 0,
                    message: format!("unreadable snapshot: {e}"),
                })?;
                (snap.state, snap.seq)
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => (AppState::default(), 0),
            Err(e) => return Err(e.into()),
        };
        let text = match fs::read_to_string(dir.join(JOURNAL_FILE)) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(e.into()),
        };
        let (state, seq) = replay_from(base, after, &text)?;
        if seq < after {
            return Err(ServiceError::CorruptLog {
                seq: seq + 1,
                message: format!("journal ends before the snapshot at entry {after}"),
            });
        }
        let file = OpenOptions::new().create(true).append(true).open(dir.join(JOURNAL_FILE))?;
        Ok((
            Self {
                dir,
                file,
                snapshot_every: snapshot_every.max(1),
            },
            state,
            seq,
        ))
    }

    fn write_snapshot(&self, seq: u64, state: &AppState) -> io::Result<()> {
        let tmp = self.dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        fs::write(&tmp, serde_json::to_vec(&Snapshot { seq, state: state.clone() })?)?;
        fs::rename(tmp, self.dir.join(SNAPSHOT_FILE))
    }
}

impl Journal for FileJournal {
    fn append(&mut self, entry: &LogEntry, state: &AppState) -> io::Result<()> {
        let mut line = serde_json::to_string(entry)?;
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.flush()?;
        if entry.seq.is_multiple_of(self.snapshot_every) {
            self.write_snapshot(entry.seq, state)?;
        }
        Ok(())
    }

    fn contents(&self) -> io::Result<String> {
        fs::read_to_string(self.dir.join(JOURNAL_FILE))
    }
}

/// Folds a whole journal from the empty state.
pub fn replay(text: &str) -> Result<AppState, ServiceError> {
    replay_from(AppState::default(), 0, text).map(|(s, _)| s)
}

/// Folds the entries after `after` onto `state`, checking that sequence
/// numbers run 1, 2, 3, ... without gaps. Returns the state and the last
/// sequence number. A final line without its newline counts as truncated.
pub fn replay_from(mut state: AppState, after: u64, text: &str) -> Result<(AppState, u64), ServiceError> {
    let mut expected = 1;
    let mut rest = text;
    while !rest.is_empty() {
        let (line, tail) = match rest.split_once('\n') {
            Some(split) => split,
            None => {
                return Err(ServiceError::CorruptLog {
                    seq: expected,
                    message: "truncated final line".into(),
                })
            }
        };
        rest = tail;
        if line.trim().is_empty() {
            continue;
        }
        let entry: LogEntry = serde_json::from_str(line).map_err(|e| ServiceError::CorruptLog {
            seq: expected,
            message: format!("unparsable entry: {e}"),
        })?;
        if entry.seq != expected {
            return Err(ServiceError::CorruptLog {
                seq: expected,
                message: format!("expected entry {expected}, found {}", entry.seq),
            });
        }
        if entry.seq > after {
            state.apply(&entry)?;
        }
        expected += 1;
    }
    Ok((state, expected - 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(seq: u64, id: &str) -> LogEntry {
        LogEntry {
            seq,
            mutation: Mutation::EventAdded(EventSpec::new(id, 30, 0.5)),
            at: 1.5,
        }
    }

    fn lines(entries: &[LogEntry]) -> String {
        entries
            .iter()
            .map(|e| serde_json::to_string(e).unwrap() + "\n")
            .collect()
    }

    #[test]
    fn entry_wire_shape() {
        let v = serde_json::to_value(entry(1, "a")).unwrap();
        assert_eq!(v["seq"], 1);
        assert_eq!(v["kind"], "event_added");
        assert_eq!(v["payload"]["id"], "a");
        assert_eq!(v["at"], 1.5);
    }

    #[test]
    fn replays_in_order() {
        let s = replay(&lines(&[entry(1, "a"), entry(2, "b")])).unwrap();
        assert_eq!(s.events.len(), 2);
        assert_eq!(s.next_id, 2);
    }

    #[test]
    fn gaps_and_garbage_are_located() {
        let gap = replay(&lines(&[entry(1, "a"), entry(3, "b")])).unwrap_err();
        assert!(matches!(gap, ServiceError::CorruptLog { seq: 2, .. }));
        let text = lines(&[entry(1, "a")]) + "{not json\n";
        assert!(matches!(replay(&text).unwrap_err(), ServiceError::CorruptLog { seq: 2, .. }));
        let mut cut = lines(&[entry(1, "a"), entry(2, "b")]);
        cut.truncate(cut.len() - 5);
        assert!(matches!(replay(&cut).unwrap_err(), ServiceError::CorruptLog { seq: 2, .. }));
    }

    #[test]
    fn entries_that_do_not_fit_are_corrupt() {
        let dup = replay(&lines(&[entry(1, "a"), entry(2, "a")])).unwrap_err();
        assert!(matches!(dup, ServiceError::CorruptLog { seq: 2, .. }));
    }

    #[test]
    fn empty_journal_is_the_default_state() {
        assert_eq!(replay("").unwrap(), AppState::default());
    }
}
