//! LSTM and GRU binary sequence classifiers written from scratch.
//!
//! A model runs one recurrent cell over a window of heart-rate samples from a
//! zero state, applies inverted dropout to the last hidden state while
//! training, and projects it to two softmax logits (low, high). Gradients are
//! exact backpropagation through time; see `tests/gradient_check.rs`.

mod cell;
mod tensor;
mod train;

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Level;
use crate::metrics::{argmax, softmax};

pub use cell::{backward, backward_with_masks, mean_loss};
pub use tensor::Matrix;
pub use train::{train, EpochStats, TrainConfig, TrainingCurves};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeqnetError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("training data contains a single class")]
    SingleClassDataset,
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("model document line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Lstm,
    Gru,
}

impl CellKind {
    /// Gate names in storage order.
    pub fn gate_names(self) -> &'static [&'static str] {
        match self {
            CellKind::Lstm => &["forget", "input", "output", "candidate"],
            CellKind::Gru => &["update", "reset", "candidate"],
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellKind::Lstm => "lstm",
            CellKind::Gru => "gru",
        })
    }
}

impl FromStr for CellKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lstm" => Ok(CellKind::Lstm),
            "gru" => Ok(CellKind::Gru),
            other => Err(format!("unknown cell kind {other:?}")),
        }
    }
}

/// Affine map over the concatenation `[h; x]` of hidden state and input.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Gate {
    fn zeros(hidden: usize, input: usize) -> Self {
        Self {
            weight: Matrix::zeros(hidden, hidden + input),
            bias: vec![0.0; hidden],
        }
    }

    /// `W z + b`
    fn affine(&self, z: &[f64]) -> Vec<f64> {
        let mut out = self.bias.clone();
        self.weight.matvec_acc(z, &mut out);
        out
    }
}

/// Parameters of a recurrent classifier. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentModel {
    pub kind: CellKind,
    pub hidden_size: usize,
    pub input_size: usize,
    pub dropout_rate: f64,
    /// LSTM: forget, input, output, candidate. GRU: update, reset, candidate.
    pub gates: Vec<Gate>,
    /// 2 x hidden projection to (low, high) logits.
    pub out_weight: Matrix,
    pub out_bias: Vec<f64>,
}

impl RecurrentModel {
    pub fn zeros(kind: CellKind, hidden_size: usize, input_size: usize) -> Self {
        Self {
            kind,
            hidden_size,
            input_size,
            dropout_rate: 0.5,
            gates: kind
                .gate_names()
                .iter()
                .map(|_| Gate::zeros(hidden_size, input_size))
                .collect(),
            out_weight: Matrix::zeros(2, hidden_size),
            out_bias: vec![0.0; 2],
        }
    }

    /// Uniform initialization in `±1/sqrt(hidden_size)`.
    pub fn init(kind: CellKind, hidden_size: usize, input_size: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (hidden_size as f64).sqrt();
        let mut model = Self::zeros(kind, hidden_size, input_size);
        for tensor in model.tensors_mut() {
            for v in tensor.1 {
                *v = rng.random_range(-bound..=bound);
            }
        }
        model
    }

    pub fn with_dropout(mut self, rate: f64) -> Self {
        self.dropout_rate = rate;
        self
    }

    /// Same shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        let mut z = Self::zeros(self.kind, self.hidden_size, self.input_size);
        z.dropout_rate = self.dropout_rate;
        z
    }

    /// Named parameter tensors in a fixed order, with their shapes.
    pub fn tensors(&self) -> Vec<(String, (usize, usize), &[f64])> {
        let mut out = Vec::new();
        for (name, gate) in self.kind.gate_names().iter().zip(&self.gates) {
            out.push((
                format!("{name}.weight"),
                (gate.weight.rows(), gate.weight.cols()),
                gate.weight.as_slice(),
            ));
            out.push((
                format!("{name}.bias"),
                (gate.bias.len(), 1),
                gate.bias.as_slice(),
            ));
        }
        out.push((
            "output.weight".into(),
            (self.out_weight.rows(), self.out_weight.cols()),
            self.out_weight.as_slice(),
        ));
        out.push(("output.bias".into(), (2, 1), self.out_bias.as_slice()));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = Vec::new();
        for (name, gate) in self.kind.gate_names().iter().zip(self.gates.iter_mut()) {
            out.push((format!("{name}.weight"), gate.weight.as_mut_slice()));
            out.push((format!("{name}.bias"), gate.bias.as_mut_slice()));
        }
        out.push(("output.weight".into(), self.out_weight.as_mut_slice()));
        out.push(("output.bias".into(), self.out_bias.as_mut_slice()));
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.2.len()).sum()
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: f64, other: &RecurrentModel) {
        let theirs = other.tensors();
        for ((_, mine), (_, _, src)) in self.tensors_mut().into_iter().zip(theirs) {
            for (m, s) in mine.iter_mut().zip(src) {
                *m += alpha * s;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.2.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.2.iter().all(|v| v.is_finite()))
    }

    fn check_state(&self, what: &str, v: &[f64]) -> Result<(), SeqnetError> {
        if v.len() != self.hidden_size {
            return Err(SeqnetError::ShapeMismatch(format!(
                "{what} has length {}, hidden size is {}",
                v.len(),
                self.hidden_size
            )));
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<(), SeqnetError> {
        if x.len() != self.input_size {
            return Err(SeqnetError::ShapeMismatch(format!(
                "input has length {}, input size is {}",
                x.len(),
                self.input_size
            )));
        }
        Ok(())
    }

    /// Number of time steps in a flattened window.
    fn steps(&self, window: &[f64]) -> Result<usize, SeqnetError> {
        if window.is_empty() || !window.len().is_multiple_of(self.input_size) {
            return Err(SeqnetError::ShapeMismatch(format!(
                "window of {} values is not a whole number of {}-wide steps",
                window.len(),
                self.input_size
            )));
        }
        Ok(window.len() / self.input_size)
    }

    /// One LSTM step: returns `(h_t, c_t)`.
    pub fn lstm_step(
        &self,
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>), SeqnetError> {
        self.expect_kind(CellKind::Lstm)?;
        self.check_input(x)?;
        self.check_state("h_prev", h_prev)?;
        self.check_state("c_prev", c_prev)?;
        let t = cell::lstm_forward(self, x, h_prev, c_prev);
        Ok((t.h, t.c))
    }

    /// One GRU step: returns `h_t`.
    pub fn gru_step(&self, x: &[f64], h_prev: &[f64]) -> Result<Vec<f64>, SeqnetError> {
        self.expect_kind(CellKind::Gru)?;
        self.check_input(x)?;
        self.check_state("h_prev", h_prev)?;
        Ok(cell::gru_forward(self, x, h_prev).h)
    }

    fn expect_kind(&self, kind: CellKind) -> Result<(), SeqnetError> {
        if self.kind != kind {
            return Err(SeqnetError::ShapeMismatch(format!(
                "{kind} step on a {} model",
                self.kind
            )));
        }
        Ok(())
    }

    /// Class probabilities `[p_low, p_high]` for one window. Dropout is applied
    /// to the final hidden state only when `training` is set.
    pub fn forward(
        &self,
        window: &[f64],
        training: bool,
        rng: &mut impl Rng,
    ) -> Result<[f64; 2], SeqnetError> {
        let mask = if training {
            Some(self.dropout_mask(rng))
        } else {
            None
        };
        self.steps(window)?;
        let h = cell::final_hidden(self, window);
        Ok(self.head(&h, mask.as_deref()))
    }

    /// Inference-mode probabilities.
    pub fn predict_proba(&self, window: &[f64]) -> Result<[f64; 2], SeqnetError> {
        self.steps(window)?;
        Ok(self.head(&cell::final_hidden(self, window), None))
    }

    pub fn predict(&self, window: &[f64]) -> Result<Level, SeqnetError> {
        Ok(Level::from_index(argmax(&self.predict_proba(window)?)))
    }

    fn head(&self, h: &[f64], mask: Option<&[f64]>) -> [f64; 2] {
        let dropped: Vec<f64> = match mask {
            Some(m) => h.iter().zip(m).map(|(a, b)| a * b).collect(),
            None => h.to_vec(),
        };
        let mut logits = self.out_bias.clone();
        self.out_weight.matvec_acc(&dropped, &mut logits);
        let p = softmax(&logits);
        [p[0], p[1]]
    }

    /// Inverted-dropout mask: kept units are scaled by `1 / (1 - rate)`.
    pub fn dropout_mask(&self, rng: &mut impl Rng) -> Vec<f64> {
        let keep = 1.0 - self.dropout_rate;
        (0..self.hidden_size)
            .map(|_| {
                if rng.random::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Flat text document: a header of `key value` lines, then each tensor as
    /// `tensor <name> <rows> <cols>` followed by one line of values.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "kind {}", self.kind).unwrap();
        writeln!(out, "hidden_size {}", self.hidden_size).unwrap();
        writeln!(out, "input_size {}", self.input_size).unwrap();
        writeln!(out, "dropout_rate {}", self.dropout_rate).unwrap();
        for (name, (rows, cols), values) in self.tensors() {
            writeln!(out, "tensor {name} {rows} {cols}").unwrap();
            let line: Vec<String> = values.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(" ")).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, SeqnetError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let err = |line: usize, message: String| SeqnetError::Parse { line, message };
        let mut header = |key: &str| -> Result<(usize, String), SeqnetError> {
            let (n, l) = lines
                .next()
                .ok_or_else(|| err(0, format!("missing {key}")))?;
            match l.split_once(' ') {
                Some((k, v)) if k == key => Ok((n, v.trim().to_owned())),
                _ => Err(err(n, format!("expected {key}"))),
            }
        };
        let (n, kind) = header("kind")?;
        let kind: CellKind = kind.parse().map_err(|e| err(n, e))?;
        let (n, hidden) = header("hidden_size")?;
        let hidden: usize = hidden
            .parse()
            .map_err(|_| err(n, "bad hidden_size".into()))?;
        let (n, input) = header("input_size")?;
        let input: usize = input.parse().map_err(|_| err(n, "bad input_size".into()))?;
        let (n, dropout) = header("dropout_rate")?;
        let dropout: f64 = dropout
            .parse()
            .map_err(|_| err(n, "bad dropout_rate".into()))?;

        let mut model = Self::zeros(kind, hidden, input).with_dropout(dropout);
        for (name, slot) in model.tensors_mut() {
            let (n, head) = lines
                .next()
                .ok_or_else(|| err(0, format!("missing tensor {name}")))?;
            let fields: Vec<&str> = head.split_whitespace().collect();
            if fields.len() != 4 || fields[0] != "tensor" || fields[1] != name {
                return Err(err(n, format!("expected tensor {name}")));
            }
            let rows: usize = fields[2].parse().map_err(|_| err(n, "bad rows".into()))?;
            let cols: usize = fields[3].parse().map_err(|_| err(n, "bad cols".into()))?;
            if rows * cols != slot.len() {
                return Err(err(
                    n,
                    format!("{name} is {rows}x{cols}, expected {} values", slot.len()),
                ));
            }
            let (n, body) = lines
                .next()
                .ok_or_else(|| err(0, format!("missing values of {name}")))?;
            let values: Vec<f64> = body
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| err(n, format!("{e}")))?;
            if values.len() != slot.len() {
                return Err(err(
                    n,
                    format!(
                        "{name} has {} values, expected {}",
                        values.len(),
                        slot.len()
                    ),
                ));
            }
            slot.copy_from_slice(&values);
        }
        if !model.is_finite() {
            return Err(err(0, "non-finite parameter".into()));
        }
        Ok(model)
    }
}
