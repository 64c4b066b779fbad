use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linear::{train_bayes, train_linear, BayesModel, LinearConfig, LinearModel};
use super::smote::{smote, DEFAULT_K};
use super::tree::{train_forest, train_tree, ForestConfig, ForestModel, TreeConfig, TreeModel};
use super::{
    encode, label_row, partition, ActivityEvent, ActivityKind, BehaviorError, KeyVocabulary,
    LabeledTable, MOOD_COUNT,
};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Logistic,
    Forest,
    Tree,
    Bayes,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Logistic,
        Method::Forest,
        Method::Tree,
        Method::Bayes,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::Logistic => "Logistic Regression",
            Method::Forest => "Random Forest",
            Method::Tree => "Decision Tree",
            Method::Bayes => "Naive Bayes",
        }
    }

    fn key(self) -> &'static str {
        match self {
            Method::Logistic => "logistic",
            Method::Forest => "forest",
            Method::Tree => "tree",
            Method::Bayes => "bayes",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.key().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                format!("unknown method {s:?}; expected tree, forest, logistic or bayes")
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassifierConfig {
    #[serde(default)]
    pub tree: TreeConfig,
    #[serde(default)]
    pub forest: ForestConfig,
    #[serde(default)]
    pub linear: LinearConfig,
}

/// Any trained classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Tree(TreeModel),
    Forest(ForestModel),
    Linear(LinearModel),
    Bayes(BayesModel),
}

impl Model {
    pub fn fit(
        method: Method,
        table: &LabeledTable,
        cfg: &ClassifierConfig,
        seed: u64,
    ) -> Result<Self, BehaviorError> {
        Ok(match method {
            Method::Tree => Model::Tree(train_tree(table, &cfg.tree, seed)?),
            Method::Forest => Model::Forest(train_forest(table, &cfg.forest, seed)?),
            Method::Logistic => Model::Linear(train_linear(table, &cfg.linear, seed)?),
            Method::Bayes => Model::Bayes(train_bayes(table)?),
        })
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        match self {
            Model::Tree(m) => m.predict(row),
            Model::Forest(m) => m.predict(row),
            Model::Linear(m) => m.predict(row),
            Model::Bayes(m) => m.predict(row),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    /// Correct predictions over test rows.
    pub overall: f64,
    /// Accuracy within each true class; `None` where the class is absent.
    pub per_class: Vec<Option<f64>>,
    pub correct: usize,
    pub n_train: usize,
    pub n_test: usize,
}

/// Scores `predict` on every row of `table`.
pub fn score(
    predict: impl Fn(&[f64]) -> usize,
    table: &LabeledTable,
) -> Result<AccuracyReport, BehaviorError> {
    if table.is_empty() {
        return Err(BehaviorError::EmptyTable);
    }
    let classes = table.class_count();
    let mut hits = vec![0usize; classes];
    let mut seen = vec![0usize; classes];
    for (row, &label) in table.rows.iter().zip(&table.labels) {
        seen[label] += 1;
        if predict(row) == label {
            hits[label] += 1;
        }
    }
    let correct: usize = hits.iter().sum();
    Ok(AccuracyReport {
        overall: correct as f64 / table.len() as f64,
        per_class: hits
            .iter()
            .zip(&seen)
            .map(|(&h, &s)| (s > 0).then(|| h as f64 / s as f64))
            .collect(),
        correct,
        n_train: 0,
        n_test: table.len(),
    })
}

/// Seeded shuffle, train on the first `train_fraction`, score on the rest.
pub fn evaluate(
    method: Method,
    table: &LabeledTable,
    cfg: &ClassifierConfig,
    train_fraction: f64,
    seed: u64,
) -> Result<AccuracyReport, BehaviorError> {
    if table.len() < 2 {
        return Err(BehaviorError::EmptyTable);
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(BehaviorError::InvalidConfig(format!(
            "train fraction {train_fraction} must lie in (0, 1)"
        )));
    }
    let mut order: Vec<usize> = (0..table.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train =
        ((table.len() as f64 * train_fraction).round() as usize).clamp(1, table.len() - 1);
    let train = table.subset(&order[..n_train]);
    let test = table.subset(&order[n_train..]);
    let model = Model::fit(method, &train, cfg, seed)?;
    let mut report = score(|r| model.predict(r), &test)?;
    report.n_train = n_train;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub methods: Vec<Method>,
    /// Per-class SMOTE targets in table order; defaults to 5000 for mouse
    /// movement and key release and 500 elsewhere.
    pub targets: [usize; 6],
    pub k: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub classifiers: ClassifierConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            targets: ActivityKind::ALL.map(ActivityKind::smote_target),
            k: DEFAULT_K,
            train_fraction: 0.8,
            seed: 0,
            classifiers: ClassifierConfig::default(),
        }
    }
}

/// Accuracy per method (rows) and activity table (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyGrid {
    pub methods: Vec<Method>,
    pub datasets: Vec<ActivityKind>,
    /// `cells[m][d]`; `None` where the table could not be evaluated.
    pub cells: Vec<Vec<Option<f64>>>,
    /// Rows per table after oversampling.
    pub rows: Vec<usize>,
}

impl AccuracyGrid {
    pub fn get(&self, method: Method, kind: ActivityKind) -> Option<f64> {
        let m = self.methods.iter().position(|&x| x == method)?;
        let d = self.datasets.iter().position(|&x| x == kind)?;
        self.cells[m][d]
    }
}

impl fmt::Display for AccuracyGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "| {:<19} |", "Method")?;
        for d in &self.datasets {
            write!(f, " {:>15} |", d.name())?;
        }
        writeln!(f)?;
        write!(f, "|{}|", "-".repeat(21))?;
        for _ in &self.datasets {
            write!(f, "{}|", "-".repeat(17))?;
        }
        writeln!(f)?;
        for (m, row) in self.methods.iter().zip(&self.cells) {
            write!(f, "| {:<19} |", m.label())?;
            for cell in row {
                match cell {
                    Some(a) => write!(f, " {:>14.2}% |", 100.0 * a)?,
                    None => write!(f, " {:>15} |", "n/a")?,
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Drops classes with fewer than two rows, which SMOTE cannot interpolate.
pub fn drop_singletons(table: &LabeledTable) -> LabeledTable {
    let counts = table.class_counts();
    let keep: Vec<usize> = (0..table.len())
        .filter(|&i| counts[table.labels[i]] >= 2)
        .collect();
    if keep.len() < table.len() {
        log::info!(
            "dropping {} rows of singleton classes",
            table.len() - keep.len()
        );
    }
    table.subset(&keep)
}

/// Partitions a log, oversamples every table, and evaluates each method on
/// each table. Tables are processed in parallel.
pub fn classify_activity(
    events: &[ActivityEvent],
    cfg: &PipelineConfig,
) -> Result<AccuracyGrid, BehaviorError> {
    let parts = partition(events)?;
    let per_table = par::map(
        &ActivityKind::ALL,
        |&kind| -> Result<(usize, Vec<Option<f64>>), BehaviorError> {
            let table = drop_singletons(parts.table(kind));
            let distinct = table.class_counts().iter().filter(|&&c| c > 0).count();
            if distinct < 2 {
                log::warn!("{kind}: fewer than two classes, skipped");
                return Ok((table.len(), vec![None; cfg.methods.len()]));
            }
            let balanced = smote(&table, cfg.targets[kind.index()], cfg.k, cfg.seed)?;
            let cells = cfg
                .methods
                .iter()
                .map(|&m| {
                    match evaluate(m, &balanced, &cfg.classifiers, cfg.train_fraction, cfg.seed) {
                        Ok(r) => Ok(Some(r.overall)),
                        Err(BehaviorError::SingleClassDataset) => Ok(None),
                        Err(e) => Err(e),
                    }
                })
                .collect::<Result<_, _>>()?;
            Ok((balanced.len(), cells))
        },
    );
    let mut rows = Vec::new();
    let mut columns = Vec::new();
    for r in per_table {
        let (n, c) = r?;
        rows.push(n);
        columns.push(c);
    }
    let cells = (0..cfg.methods.len())
        .map(|m| columns.iter().map(|c| c[m]).collect())
        .collect();
    Ok(AccuracyGrid {
        methods: cfg.methods.clone(),
        datasets: ActivityKind::ALL.to_vec(),
        cells,
        rows,
    })
}

/// One fitted classifier per activity table plus the key vocabulary used to
/// encode them, ready to label new logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityModels {
    pub method: Method,
    pub vocabulary: KeyVocabulary,
    /// Indexed like [`ActivityKind::ALL`]; `None` for tables with fewer than two classes.
    pub models: Vec<Option<Model>>,
}

impl ActivityModels {
    /// Oversamples each table and fits `method` on all of it.
    pub fn fit(
        events: &[ActivityEvent],
        method: Method,
        cfg: &PipelineConfig,
    ) -> Result<Self, BehaviorError> {
        let parts = partition(events)?;
        let models = par::map(
            &ActivityKind::ALL,
            |&kind| -> Result<Option<Model>, BehaviorError> {
                let table = drop_singletons(parts.table(kind));
                if table.class_counts().iter().filter(|&&c| c > 0).count() < 2 {
                    return Ok(None);
                }
                let balanced = smote(&table, cfg.targets[kind.index()], cfg.k, cfg.seed)?;
                Model::fit(method, &balanced, &cfg.classifiers, cfg.seed).map(Some)
            },
        )
        .into_iter()
        .collect::<Result<_, _>>()?;
        Ok(Self {
            method,
            vocabulary: parts.vocabulary,
            models,
        })
    }

    /// Predicted class of one event, if its table has a model. Keys never
    /// seen in training get fresh ids past the vocabulary.
    pub fn predict(&self, event: &ActivityEvent) -> Option<usize> {
        let model = self.models.get(event.kind.index())?.as_ref()?;
        let mut vocab = self.vocabulary.clone();
        Some(model.predict(&encode(event, &mut vocab)))
    }

    /// Majority class over every event with a model; ties go to the lowest
    /// class. `None` when no event could be classified.
    pub fn majority(&self, events: &[ActivityEvent]) -> Option<usize> {
        let mut votes = [0usize; MOOD_COUNT];
        let mut any = false;
        for e in events {
            if let Some(c) = self.predict(e) {
                votes[c.min(MOOD_COUNT - 1)] += 1;
                any = true;
            }
        }
        any.then(|| {
            (0..MOOD_COUNT)
                .rev()
                .max_by_key(|&c| votes[c])
                .expect("twelve classes")
        })
    }

    /// Fraction of events whose predicted class equals their labeled mood.
    pub fn agreement(&self, events: &[ActivityEvent]) -> Option<f64> {
        let (hits, total) =
            events
                .iter()
                .fold((0usize, 0usize), |(h, t), e| match self.predict(e) {
                    Some(c) => (h + usize::from(c == label_row(e)), t + 1),
                    None => (h, t),
                });
        (total > 0).then(|| hits as f64 / total as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> LabeledTable {
        let mut t = LabeledTable::new(vec!["x".into()]);
        for i in 0..50 {
            t.push(vec![i as f64], usize::from(i >= 25));
        }
        t
    }

    #[test]
    fn constant_predictor_on_its_own_class() {
        let mut t = LabeledTable::new(vec!["x".into()]);
        t.push(vec![1.0], 0);
        t.push(vec![2.0], 0);
        let r = score(|_| 0, &t).unwrap();
        assert_eq!(r.overall, 1.0);
        assert_eq!(r.per_class, vec![Some(1.0)]);
    }

    #[test]
    fn reports_are_reproducible_and_recountable() {
        let t = table();
        let a = evaluate(Method::Tree, &t, &ClassifierConfig::default(), 0.8, 4).unwrap();
        let b = evaluate(Method::Tree, &t, &ClassifierConfig::default(), 0.8, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_train + a.n_test, 50);
        assert_eq!(a.overall, a.correct as f64 / a.n_test as f64);
    }

    #[test]
    fn method_names_parse() {
        for m in Method::ALL {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("svm".parse::<Method>().is_err());
    }

    #[test]
    fn grid_renders_one_line_per_method() {
        let grid = AccuracyGrid {
            methods: vec![Method::Tree, Method::Bayes],
            datasets: ActivityKind::ALL.to_vec(),
            cells: vec![vec![Some(0.5); 6], vec![None; 6]],
            rows: vec![0; 6],
        };
        let text = grid.to_string();
        assert_eq!(text.lines().count(), 4);
        assert!(text.contains("Decision Tree") && text.contains("50.00%") && text.contains("n/a"));
        assert_eq!(grid.get(Method::Tree, ActivityKind::KeyPressed), Some(0.5));
    }
}
