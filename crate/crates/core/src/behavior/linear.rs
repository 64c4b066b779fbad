use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BehaviorError, LabeledTable};
use crate::metrics::{argmax, softmax};

pub const VARIANCE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for LinearConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            learning_rate: 0.1,
            batch_size: 64,
        }
    }
}

/// Multinomial logistic regression on standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// One weight vector per class.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl LinearModel {
    fn standardize(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    fn logits(&self, z: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| b + w.iter().zip(z).map(|(a, c)| a * c).sum::<f64>())
            .collect()
    }

    pub fn predict_proba(&self, row: &[f64]) -> Vec<f64> {
        softmax(&self.logits(&self.standardize(row)))
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        argmax(&self.predict_proba(row))
    }
}

fn check(table: &LabeledTable) -> Result<(), BehaviorError> {
    if table.is_empty() {
        return Err(BehaviorError::EmptyTable);
    }
    if table.class_counts().iter().filter(|&&c| c > 0).count() < 2 {
        return Err(BehaviorError::SingleClassDataset);
    }
    Ok(())
}

fn column_stats(table: &LabeledTable, rows: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let w = table.width();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; w];
    for &r in rows {
        for (m, x) in mean.iter_mut().zip(&table.rows[r]) {
            *m += x / n;
        }
    }
    let mut var = vec![0.0; w];
    for &r in rows {
        for ((v, x), m) in var.iter_mut().zip(&table.rows[r]).zip(&mean) {
            *v += (x - m).powi(2) / n;
        }
    }
    (mean, var)
}

/// Mini-batch gradient descent on softmax cross-entropy from zero weights.
pub fn train_linear(
    table: &LabeledTable,
    cfg: &LinearConfig,
    seed: u64,
) -> Result<LinearModel, BehaviorError> {
    check(table)?;
    if cfg.batch_size == 0 || !(cfg.learning_rate >= 0.0) {
        return Err(BehaviorError::InvalidConfig(
            "batch size must be positive and learning rate non-negative".into(),
        ));
    }
    let classes = table.class_count();
    let width = table.width();
    let all: Vec<usize> = (0..table.len()).collect();
    let (mean, var) = column_stats(table, &all);
    let scale = var
        .iter()
        .map(|v| if *v > 0.0 { v.sqrt() } else { 1.0 })
        .collect();
    let mut model = LinearModel {
        weights: vec![vec![0.0; width]; classes],
        bias: vec![0.0; classes],
        mean,
        scale,
    };
    let z: Vec<Vec<f64>> = table.rows.iter().map(|r| model.standardize(r)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order = all;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let mut gw = vec![vec![0.0; width]; classes];
            let mut gb = vec![0.0; classes];
            for &i in batch {
                let mut p = softmax(&model.logits(&z[i]));
                p[table.labels[i]] -= 1.0;
                for (k, d) in p.iter().enumerate() {
                    gb[k] += d;
                    for (g, x) in gw[k].iter_mut().zip(&z[i]) {
                        *g += d * x;
                    }
                }
            }
            let step = cfg.learning_rate / batch.len() as f64;
            for k in 0..classes {
                model.bias[k] -= step * gb[k];
                for (w, g) in model.weights[k].iter_mut().zip(&gw[k]) {
                    *w -= step * g;
                }
            }
        }
    }
    Ok(model)
}

/// Gaussian naive Bayes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesModel {
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    /// `None` for classes absent from training.
    pub log_priors: Vec<Option<f64>>,
}

impl BayesModel {
    pub fn log_posteriors(&self, row: &[f64]) -> Vec<f64> {
        self.log_priors
            .iter()
            .enumerate()
            .map(|(k, prior)| match prior {
                None => f64::NEG_INFINITY,
                Some(p) => {
                    p + row
                        .iter()
                        .zip(self.means[k].iter().zip(&self.variances[k]))
                        .map(|(x, (m, v))| {
                            -0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (x - m).powi(2) / v)
                        })
                        .sum::<f64>()
                }
            })
            .collect()
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        argmax(&self.log_posteriors(row))
    }
}

pub fn train_bayes(table: &LabeledTable) -> Result<BayesModel, BehaviorError> {
    check(table)?;
    let classes = table.class_count();
    let mut members = vec![Vec::new(); classes];
    for (i, &l) in table.labels.iter().enumerate() {
        members[l].push(i);
    }
    let n = table.len() as f64;
    let mut model = BayesModel {
        means: Vec::with_capacity(classes),
        variances: Vec::with_capacity(classes),
        log_priors: Vec::with_capacity(classes),
    };
    for rows in &members {
        if rows.is_empty() {
            model.means.push(vec![0.0; table.width()]);
            model.variances.push(vec![1.0; table.width()]);
            model.log_priors.push(None);
            continue;
        }
        let (mean, var) = column_stats(table, rows);
        model.means.push(mean);
        model
            .variances
            .push(var.into_iter().map(|v| v.max(VARIANCE_FLOOR)).collect());
        model.log_priors.push(Some((rows.len() as f64 / n).ln()));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> LabeledTable {
        let mut t = LabeledTable::new(vec!["a".into(), "b".into()]);
        for i in 0..100 {
            let j = (i * 37 % 100) as f64 / 100.0 - 0.5;
            t.push(vec![-3.0 + j, 2.0 - j], 0);
            t.push(vec![3.0 - j, -2.0 + j], 1);
        }
        t
    }

    #[test]
    fn both_models_separate_blobs() {
        let t = blobs();
        let lin = train_linear(&t, &LinearConfig::default(), 1).unwrap();
        let nb = train_bayes(&t).unwrap();
        for (r, &l) in t.rows.iter().zip(&t.labels) {
            assert_eq!(lin.predict(r), l);
            assert_eq!(nb.predict(r), l);
        }
    }

    #[test]
    fn zero_learning_rate_is_uniform() {
        let cfg = LinearConfig {
            learning_rate: 0.0,
            ..Default::default()
        };
        let m = train_linear(&blobs(), &cfg, 1).unwrap();
        assert_eq!(m.predict_proba(&[5.0, 5.0]), vec![0.5, 0.5]);
    }

    #[test]
    fn constant_feature_uses_variance_floor() {
        let mut t = LabeledTable::new(vec!["c".into()]);
        for l in [0, 0, 1, 1] {
            t.push(vec![7.0], l);
        }
        let m = train_bayes(&t).unwrap();
        assert!(m.variances.iter().flatten().all(|&v| v == VARIANCE_FLOOR));
        assert!(m.log_posteriors(&[7.0]).iter().all(|v| v.is_finite()));
        assert_eq!(m.predict(&[7.0]), 0);
    }
}
