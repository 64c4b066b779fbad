//! Emotion-aware calendar optimization.
//!
//! The crate is split along the data flow of the system:
//!
//! - [`ecg`] turns two-channel ECG recordings into heart-rate training windows.
//! - [`seqnet`] trains LSTM/GRU low/high classifiers on those windows.
//! - [`behavior`] classifies keyboard/mouse activity logs into one of twelve
//!   emotion classes after SMOTE rebalancing.
//! - [`scheduler`] places calendar events with a branch-and-bound solver over an
//!   emotion-extended constraint set and a weighted multi-objective cost.
//!
//! [`domain`] holds the shared vocabulary and [`metrics`] the loss/accuracy
//! functions. Hot loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled (the default) and plain iterators otherwise.

// `!(x > y)` is used on purpose where NaN must fail the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod behavior;
pub mod domain;
pub mod ecg;
pub mod metrics;
pub mod par;
pub mod scheduler;
pub mod seqnet;

pub use domain::{
    Dimension, EmotionSource, EmotionState, EventId, EventSpec, Horizon, Level, ScheduledEvent,
    WallTime,
};
