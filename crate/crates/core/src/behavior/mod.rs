//! Emotion classification from keyboard and mouse activity.
//!
//! An interaction log is split into six per-activity tables, each row labeled
//! with the strongest of twelve mood intensities. Minority classes are topped
//! up with SMOTE and classical classifiers are trained per table.

mod eval;
mod linear;
mod smote;
mod synth;
mod tree;

use std::collections::HashMap;
use std::fmt;
use std::io;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use eval::{
    classify_activity, drop_singletons, evaluate, score, AccuracyGrid, AccuracyReport,
    ActivityModels, ClassifierConfig, Method, Model, PipelineConfig,
};
pub use linear::{train_bayes, train_linear, BayesModel, LinearConfig, LinearModel};
pub use smote::{smote, smote_with_origins, Smoted, DEFAULT_K};
pub use synth::{generate_activity_log, ActivityLogConfig};
pub use tree::{
    gini, train_forest, train_tree, ForestConfig, ForestModel, MaxFeatures, Node, TreeConfig,
    TreeModel,
};

pub const MOOD_COUNT: usize = 12;

#[derive(Debug, Error)]
pub enum BehaviorError {
    #[error("malformed event at row {row}: {message}")]
    MalformedEvent { row: usize, message: String },
    #[error("table is empty")]
    EmptyTable,
    #[error("class {class} has {count} rows, need at least 2 to oversample")]
    ClassTooSmall { class: usize, count: usize },
    #[error("training data holds a single class")]
    SingleClassDataset,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("feature width {got} does not match model width {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// The six activity types, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActivityKind {
    MouseMovement,
    MouseClick,
    MouseButtonUp,
    MouseButtonDown,
    KeyPressed,
    KeyReleased,
}

impl ActivityKind {
    pub const ALL: [ActivityKind; 6] = [
        ActivityKind::MouseMovement,
        ActivityKind::MouseClick,
        ActivityKind::MouseButtonUp,
        ActivityKind::MouseButtonDown,
        ActivityKind::KeyPressed,
        ActivityKind::KeyReleased,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActivityKind::MouseMovement => "MouseMovement",
            ActivityKind::MouseClick => "MouseClick",
            ActivityKind::MouseButtonUp => "MouseButtonUp",
            ActivityKind::MouseButtonDown => "MouseButtonDown",
            ActivityKind::KeyPressed => "KeyPressed",
            ActivityKind::KeyReleased => "KeyReleased",
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&k| k == self).expect("listed")
    }

    pub fn is_mouse(self) -> bool {
        !self.is_key()
    }

    pub fn is_key(self) -> bool {
        matches!(self, ActivityKind::KeyPressed | ActivityKind::KeyReleased)
    }

    fn has_button(self) -> bool {
        matches!(
            self,
            ActivityKind::MouseClick | ActivityKind::MouseButtonUp | ActivityKind::MouseButtonDown
        )
    }

    pub fn feature_names(self) -> &'static [&'static str] {
        match self {
            ActivityKind::MouseMovement => &["x", "y"],
            k if k.has_button() => &["button", "x", "y"],
            _ => &["alt", "control", "shift", "meta", "key_id", "repeat"],
        }
    }

    /// Default per-class SMOTE target: the high-volume tables get 5000.
    pub fn smote_target(self) -> usize {
        match self {
            ActivityKind::MouseMovement | ActivityKind::KeyReleased => 5000,
            _ => 500,
        }
    }
}

impl fmt::Display for ActivityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivityKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown activity {s:?}"))
    }
}

/// One row of an interaction log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityEvent {
    pub kind: ActivityKind,
    pub x: Option<i64>,
    pub y: Option<i64>,
    pub button: Option<u8>,
    pub alt: Option<bool>,
    pub control: Option<bool>,
    pub shift: Option<bool>,
    pub meta: Option<bool>,
    /// Key text; privacy-scrubbed keys read `ANONYMIZED`.
    pub key: Option<String>,
    /// FALSE on the first emission of a held key, TRUE on auto-repeats.
    pub repeat: Option<bool>,
    pub intensities: [f64; MOOD_COUNT],
}

impl ActivityEvent {
    pub fn mouse(
        kind: ActivityKind,
        x: i64,
        y: i64,
        button: Option<u8>,
        intensities: [f64; MOOD_COUNT],
    ) -> Self {
        Self {
            kind,
            x: Some(x),
            y: Some(y),
            button,
            alt: None,
            control: None,
            shift: None,
            meta: None,
            key: None,
            repeat: None,
            intensities,
        }
    }

    pub fn key(
        kind: ActivityKind,
        key: impl Into<String>,
        modifiers: [bool; 4],
        repeat: bool,
        intensities: [f64; MOOD_COUNT],
    ) -> Self {
        let [alt, control, shift, meta] = modifiers.map(Some);
        Self {
            kind,
            x: None,
            y: None,
            button: None,
            alt,
            control,
            shift,
            meta,
            key: Some(key.into()),
            repeat: Some(repeat),
            intensities,
        }
    }

    /// Checks that the fields required by the event's kind are present and
    /// that intensities are percentages.
    pub fn validate(&self) -> Result<(), String> {
        if let Some(v) = self
            .intensities
            .iter()
            .find(|v| !(0.0..=100.0).contains(*v))
        {
            return Err(format!("intensity {v} outside [0, 100]"));
        }
        let missing = |field: &str| Err(format!("{} event without {field}", self.kind));
        if self.kind.is_mouse() {
            if self.x.is_none() || self.y.is_none() {
                return missing("coordinates");
            }
            if self.kind.has_button() && self.button.is_none() {
                return missing("button");
            }
        } else {
            for (name, v) in [
                ("alt", self.alt),
                ("control", self.control),
                ("shift", self.shift),
                ("meta", self.meta),
                ("repeat", self.repeat),
            ] {
                if v.is_none() {
                    return missing(name);
                }
            }
            if self.key.is_none() {
                return missing("key");
            }
        }
        Ok(())
    }
}

/// Index of the strongest mood; ties go to the lowest index.
pub fn label_row(event: &ActivityEvent) -> usize {
    let mut best = 0;
    for (i, &v) in event.intensities.iter().enumerate() {
        if v > event.intensities[best] {
            best = i;
        }
    }
    if event.intensities[best] == 0.0 {
        log::warn!("all mood intensities are zero; labeling as class 0");
    }
    best
}

const BASE_COLUMNS: [&str; 10] = [
    "event", "x", "y", "button", "alt", "control", "shift", "meta", "key", "repeat",
];

fn header() -> Vec<String> {
    BASE_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain((0..MOOD_COUNT).map(|i| format!("mood_{i}")))
        .collect()
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_uppercase().as_str() {
        "TRUE" => Some(true),
        "FALSE" => Some(false),
        _ => None,
    }
}

fn fmt_bool(b: bool) -> &'static str {
    if b {
        "TRUE"
    } else {
        "FALSE"
    }
}

/// Reads a comma-separated log with a header row. Columns are located by
/// name; empty cells are absent values; booleans are `TRUE`/`FALSE`.
pub fn read_log(reader: impl io::Read) -> Result<Vec<ActivityEvent>, BehaviorError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let names = rdr.headers()?.clone();
    let col = |name: &str| names.iter().position(|h| h.eq_ignore_ascii_case(name));
    let base: Vec<Option<usize>> = BASE_COLUMNS.iter().map(|c| col(c)).collect();
    let moods: Vec<usize> = (0..MOOD_COUNT)
        .map(|i| {
            col(&format!("mood_{i}")).ok_or_else(|| BehaviorError::MalformedEvent {
                row: 0,
                message: format!("header lacks mood_{i}"),
            })
        })
        .collect::<Result<_, _>>()?;
    let kind_col = base[0].ok_or_else(|| BehaviorError::MalformedEvent {
        row: 0,
        message: "header lacks event".into(),
    })?;

    let mut events = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let bad = |message: String| BehaviorError::MalformedEvent { row, message };
        let cell = |c: Option<usize>| c.and_then(|c| record.get(c)).filter(|s| !s.is_empty());
        let int = |c: usize| -> Result<Option<i64>, BehaviorError> {
            cell(base[c])
                .map(|s| {
                    s.parse::<i64>()
                        .map_err(|_| bad(format!("{} is not an integer: {s:?}", BASE_COLUMNS[c])))
                })
                .transpose()
        };
        let flag = |c: usize| -> Result<Option<bool>, BehaviorError> {
            cell(base[c])
                .map(|s| {
                    parse_bool(s)
                        .ok_or_else(|| bad(format!("{} is not TRUE/FALSE: {s:?}", BASE_COLUMNS[c])))
                })
                .transpose()
        };
        let kind: ActivityKind = record
            .get(kind_col)
            .unwrap_or_default()
            .parse()
            .map_err(|e: String| bad(e))?;
        let button = int(3)?
            .map(|b| u8::try_from(b).map_err(|_| bad(format!("button {b} out of range"))))
            .transpose()?;
        let mut intensities = [0.0; MOOD_COUNT];
        for (slot, &c) in intensities.iter_mut().zip(&moods) {
            let s = record.get(c).unwrap_or_default();
            *slot = s
                .parse()
                .map_err(|_| bad(format!("mood intensity {s:?} is not a number")))?;
        }
        let event = ActivityEvent {
            kind,
            x: int(1)?,
            y: int(2)?,
            button,
            alt: flag(4)?,
            control: flag(5)?,
            shift: flag(6)?,
            meta: flag(7)?,
            key: cell(base[8]).map(str::to_owned),
            repeat: flag(9)?,
            intensities,
        };
        event.validate().map_err(bad)?;
        events.push(event);
    }
    Ok(events)
}

pub fn write_log(events: &[ActivityEvent], writer: impl io::Write) -> Result<(), BehaviorError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header())?;
    for e in events {
        let opt = |v: Option<String>| v.unwrap_or_default();
        let mut record = vec![
            e.kind.name().to_owned(),
            opt(e.x.map(|v| v.to_string())),
            opt(e.y.map(|v| v.to_string())),
            opt(e.button.map(|v| v.to_string())),
        ];
        for b in [e.alt, e.control, e.shift, e.meta] {
            record.push(opt(b.map(|b| fmt_bool(b).to_owned())));
        }
        record.push(opt(e.key.clone()));
        record.push(opt(e.repeat.map(|b| fmt_bool(b).to_owned())));
        record.extend(e.intensities.iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Stable key-text to integer mapping in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct KeyVocabulary {
    names: Vec<String>,
    ids: HashMap<String, usize>,
}

impl From<Vec<String>> for KeyVocabulary {
    fn from(names: Vec<String>) -> Self {
        let mut v = KeyVocabulary::default();
        for n in &names {
            v.id_or_insert(n);
        }
        v
    }
}

impl From<KeyVocabulary> for Vec<String> {
    fn from(v: KeyVocabulary) -> Self {
        v.names
    }
}

impl KeyVocabulary {
    pub fn id_or_insert(&mut self, key: &str) -> usize {
        if let Some(&id) = self.ids.get(key) {
            return id;
        }
        let id = self.names.len();
        self.names.push(key.to_owned());
        self.ids.insert(key.to_owned(), id);
        id
    }

    pub fn id(&self, key: &str) -> Option<usize> {
        self.ids.get(key).copied()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Feature rows with class labels.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LabeledTable {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub feature_names: Vec<String>,
}

impl LabeledTable {
    pub fn new(feature_names: Vec<String>) -> Self {
        Self {
            rows: Vec::new(),
            labels: Vec::new(),
            feature_names,
        }
    }

    pub fn push(&mut self, row: Vec<f64>, label: usize) {
        debug_assert_eq!(row.len(), self.feature_names.len());
        self.rows.push(row);
        self.labels.push(label);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.feature_names.len()
    }

    /// One more than the largest label.
    pub fn class_count(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledTable {
        LabeledTable {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }
}

/// The six activity tables plus the key vocabulary used to encode them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partitioned {
    /// Indexed like [`ActivityKind::ALL`].
    pub tables: Vec<LabeledTable>,
    pub vocabulary: KeyVocabulary,
}

impl Partitioned {
    pub fn table(&self, kind: ActivityKind) -> &LabeledTable {
        &self.tables[kind.index()]
    }
}

fn b(v: Option<bool>) -> f64 {
    f64::from(u8::from(v.unwrap_or(false)))
}

/// Encodes an event as the feature row of its table, extending `vocab` with
/// unseen keys.
pub fn encode(event: &ActivityEvent, vocab: &mut KeyVocabulary) -> Vec<f64> {
    let xy = [event.x.unwrap_or(0) as f64, event.y.unwrap_or(0) as f64];
    match event.kind {
        ActivityKind::MouseMovement => xy.to_vec(),
        k if k.has_button() => vec![f64::from(event.button.unwrap_or(0)), xy[0], xy[1]],
        _ => vec![
            b(event.alt),
            b(event.control),
            b(event.shift),
            b(event.meta),
            vocab.id_or_insert(event.key.as_deref().unwrap_or_default()) as f64,
            b(event.repeat),
        ],
    }
}

/// Splits a log into its six activity tables.
pub fn partition(events: &[ActivityEvent]) -> Result<Partitioned, BehaviorError> {
    if events.is_empty() {
        return Err(BehaviorError::EmptyTable);
    }
    let mut tables: Vec<LabeledTable> = ActivityKind::ALL
        .iter()
        .map(|k| LabeledTable::new(k.feature_names().iter().map(|s| s.to_string()).collect()))
        .collect();
    let mut vocabulary = KeyVocabulary::default();
    for (i, e) in events.iter().enumerate() {
        e.validate()
            .map_err(|message| BehaviorError::MalformedEvent {
                row: i + 1,
                message,
            })?;
        let row = encode(e, &mut vocabulary);
        tables[e.kind.index()].push(row, label_row(e));
    }
    Ok(Partitioned { tables, vocabulary })
}
