use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{backward_with_masks, mean_loss, CellKind, RecurrentModel, SeqnetError};
use crate::domain::Level;
use crate::ecg::WindowedDataset;
use crate::metrics::accuracy;
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden_size: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout_rate: f64,
    /// Fraction of windows used for training; the rest are held out.
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_size: 32,
            epochs: 50,
            batch_size: 16,
            learning_rate: 0.05,
            dropout_rate: 0.5,
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), SeqnetError> {
        let bad = |m: String| Err(SeqnetError::InvalidConfig(m));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning rate {} must be non-negative",
                self.learning_rate
            ));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!(
                "train fraction {} must lie in (0, 1)",
                self.train_fraction
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!(
                "dropout rate {} must lie in [0, 1)",
                self.dropout_rate
            ));
        }
        if self.hidden_size == 0 || self.batch_size == 0 {
            return bad("hidden size and batch size must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Inference-mode mean cross-entropy on the training split after the epoch.
    pub train_loss: f64,
    pub test_loss: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingCurves {
    pub epochs: Vec<EpochStats>,
    pub train_size: usize,
    pub test_size: usize,
}

impl TrainingCurves {
    pub fn final_accuracy(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.test_accuracy)
    }

    /// Share of consecutive epochs whose training loss did not go up.
    pub fn non_increasing_fraction(&self) -> f64 {
        let pairs = self.epochs.windows(2);
        let total = pairs.len();
        if total == 0 {
            return 1.0;
        }
        let ok = self
            .epochs
            .windows(2)
            .filter(|w| w[1].train_loss <= w[0].train_loss)
            .count();
        ok as f64 / total as f64
    }
}

/// Mini-batch gradient descent on mean cross-entropy, deterministic per seed.
///
/// The dataset is shuffled once and split into train and held-out parts;
/// each epoch reshuffles the training part, draws fresh dropout masks, and
/// records losses and held-out accuracy.
pub fn train(
    dataset: &WindowedDataset,
    kind: CellKind,
    cfg: &TrainConfig,
) -> Result<(RecurrentModel, TrainingCurves), SeqnetError> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(SeqnetError::EmptyBatch);
    }
    let first = dataset.labels[0];
    if dataset.labels.iter().all(|&l| l == first) {
        return Err(SeqnetError::SingleClassDataset);
    }
    if dataset.len() < 2 {
        return Err(SeqnetError::InvalidConfig(
            "need at least two windows".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9e37_79b9));
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut rng);
    let n_train =
        ((dataset.len() as f64 * cfg.train_fraction).round() as usize).clamp(1, dataset.len() - 1);
    let train_set = dataset.subset(&order[..n_train]);
    let test_set = dataset.subset(&order[n_train..]);

    let mut model =
        RecurrentModel::init(kind, cfg.hidden_size, 1, cfg.seed).with_dropout(cfg.dropout_rate);
    let mut curves = TrainingCurves {
        epochs: Vec::with_capacity(cfg.epochs),
        train_size: train_set.len(),
        test_size: test_set.len(),
    };
    let mut idx: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..cfg.epochs {
        idx.shuffle(&mut rng);
        for batch in idx.chunks(cfg.batch_size) {
            let windows: Vec<Vec<f64>> = batch
                .iter()
                .map(|&i| train_set.windows[i].clone())
                .collect();
            let labels: Vec<Level> = batch.iter().map(|&i| train_set.labels[i]).collect();
            let masks: Option<Vec<Vec<f64>>> = (model.dropout_rate > 0.0)
                .then(|| batch.iter().map(|_| model.dropout_mask(&mut rng)).collect());
            let (_, grad) = backward_with_masks(&model, &windows, &labels, masks.as_deref())?;
            model.add_scaled(-cfg.learning_rate, &grad);
        }
        curves
            .epochs
            .push(evaluate_epoch(&model, epoch + 1, &train_set, &test_set)?);
    }
    Ok((model, curves))
}

fn evaluate_epoch(
    model: &RecurrentModel,
    epoch: usize,
    train_set: &WindowedDataset,
    test_set: &WindowedDataset,
) -> Result<EpochStats, SeqnetError> {
    let predictions: Vec<Level> = par::map(&test_set.windows, |w| model.predict(w))
        .into_iter()
        .collect::<Result<_, _>>()?;
    Ok(EpochStats {
        epoch,
        train_loss: mean_loss(model, &train_set.windows, &train_set.labels)?,
        test_loss: mean_loss(model, &test_set.windows, &test_set.labels)?,
        test_accuracy: accuracy(&predictions, &test_set.labels).expect("non-empty test split"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_dataset() -> WindowedDataset {
        let mut d = WindowedDataset::new(4);
        for i in 0..20 {
            let level = if i % 2 == 0 { Level::Low } else { Level::High };
            let base = if level == Level::Low { 0.2 } else { 0.8 };
            d.push(vec![base + 0.01 * (i % 3) as f64; 4], level);
        }
        d
    }

    #[test]
    fn rejects_single_class() {
        let mut d = WindowedDataset::new(2);
        d.push(vec![0.1, 0.2], Level::Low);
        d.push(vec![0.3, 0.2], Level::Low);
        assert_eq!(
            train(&d, CellKind::Gru, &TrainConfig::default()).unwrap_err(),
            SeqnetError::SingleClassDataset
        );
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = TrainConfig {
            train_fraction: 1.0,
            ..Default::default()
        };
        assert!(matches!(
            train(&tiny_dataset(), CellKind::Gru, &cfg),
            Err(SeqnetError::InvalidConfig(_))
        ));
    }

    #[test]
    fn zero_learning_rate_freezes_parameters() {
        let cfg = TrainConfig {
            hidden_size: 4,
            epochs: 3,
            learning_rate: 0.0,
            ..Default::default()
        };
        let (model, curves) = train(&tiny_dataset(), CellKind::Lstm, &cfg).unwrap();
        assert_eq!(
            model,
            RecurrentModel::init(CellKind::Lstm, 4, 1, cfg.seed).with_dropout(0.5)
        );
        let first = curves.epochs[0].train_loss;
        assert!(curves.epochs.iter().all(|e| e.train_loss == first));
    }

    #[test]
    fn same_seed_same_curves() {
        let cfg = TrainConfig {
            hidden_size: 4,
            epochs: 3,
            ..Default::default()
        };
        let a = train(&tiny_dataset(), CellKind::Gru, &cfg).unwrap();
        let b = train(&tiny_dataset(), CellKind::Gru, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
