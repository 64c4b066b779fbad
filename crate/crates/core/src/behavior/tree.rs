//! CART classification trees with Gini impurity, and bagged forests.

use std::cmp::Ordering;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BehaviorError, LabeledTable};
use crate::par;

/// Gini impurity `1 - sum(p_k^2)` of a class histogram.
pub fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    #[default]
    All,
    /// `ceil(sqrt(width))` features drawn per split.
    Sqrt,
}

impl MaxFeatures {
    fn count(self, width: usize) -> usize {
        match self {
            MaxFeatures::All => width,
            MaxFeatures::Sqrt => ((width as f64).sqrt().ceil() as usize).clamp(1, width),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub max_features: MaxFeatures,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: 16,
            min_leaf: 1,
            max_features: MaxFeatures::All,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        counts: Vec<usize>,
    },
    /// Rows with `row[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        counts: Vec<usize>,
    },
}

impl Node {
    pub fn counts(&self) -> &[usize] {
        match self {
            Node::Leaf { counts } | Node::Split { counts, .. } => counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    /// Root first; children are indices into this list.
    pub nodes: Vec<Node>,
    pub class_count: usize,
    pub width: usize,
}

fn argmax_lowest(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

impl TreeModel {
    pub fn leaf_counts(&self, row: &[f64]) -> &[usize] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { counts } => return counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    at = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    /// Majority class of the row's leaf, ties to the lowest class.
    pub fn predict(&self, row: &[f64]) -> usize {
        argmax_lowest(self.leaf_counts(row))
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// `num / den` with exact comparison.
#[derive(Clone, Copy)]
struct Ratio {
    num: u128,
    den: u128,
}

impl Ratio {
    fn cmp(self, other: Ratio) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

struct Builder<'a> {
    table: &'a LabeledTable,
    cfg: &'a TreeConfig,
    classes: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    purity: Ratio,
}

impl Builder<'_> {
    fn histogram(&self, rows: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &r in rows {
            counts[self.table.labels[r]] += 1;
        }
        counts
    }

    /// Maximizes `sum(cL^2)/nL + sum(cR^2)/nR`, which minimizes the
    /// weighted Gini of the children. Scanning features and thresholds in
    /// ascending order and keeping only strict improvements realizes the
    /// lowest-feature, lowest-threshold tie-break.
    fn best_split(&mut self, rows: &[usize], counts: &[usize]) -> Option<BestSplit> {
        let width = self.table.width();
        let m = self.cfg.max_features.count(width);
        let mut features: Vec<usize> = if m == width {
            (0..width).collect()
        } else {
            sample(&mut self.rng, width, m).into_vec()
        };
        features.sort_unstable();

        let n = rows.len();
        let min_leaf = self.cfg.min_leaf.max(1);
        let total_sq: u128 = counts.iter().map(|&c| (c * c) as u128).sum();
        let mut best: Option<BestSplit> = None;
        let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(n);
        for f in features {
            sorted.clear();
            sorted.extend(
                rows.iter()
                    .map(|&r| (self.table.rows[r][f], self.table.labels[r])),
            );
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = vec![0usize; self.classes];
            let mut right = counts.to_vec();
            let (mut sq_left, mut sq_right) = (0u128, total_sq);
            for i in 0..n - 1 {
                let c = sorted[i].1;
                sq_left += (2 * left[c] + 1) as u128;
                sq_right -= (2 * right[c] - 1) as u128;
                left[c] += 1;
                right[c] -= 1;
                let (a, b) = (sorted[i].0, sorted[i + 1].0);
                let n_left = i + 1;
                let n_right = n - n_left;
                if a == b || n_left < min_leaf || n_right < min_leaf {
                    continue;
                }
                let purity = Ratio {
                    num: sq_left * n_right as u128 + sq_right * n_left as u128,
                    den: (n_left * n_right) as u128,
                };
                if best
                    .as_ref()
                    .is_none_or(|s| purity.cmp(s.purity) == Ordering::Greater)
                {
                    let mid = a + (b - a) / 2.0;
                    best = Some(BestSplit {
                        feature: f,
                        threshold: if mid < b { mid } else { a },
                        purity,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let counts = self.histogram(&rows);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            counts: counts.clone(),
        });
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.cfg.max_depth || rows.len() < 2 * self.cfg.min_leaf.max(1) {
            return id;
        }
        let Some(split) = self.best_split(&rows, &counts) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&i| self.table.rows[i][split.feature] <= split.threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
            counts,
        };
        id
    }
}

fn check_trainable(table: &LabeledTable) -> Result<(), BehaviorError> {
    if table.is_empty() {
        return Err(BehaviorError::EmptyTable);
    }
    if table.class_counts().iter().filter(|&&c| c > 0).count() < 2 {
        return Err(BehaviorError::SingleClassDataset);
    }
    Ok(())
}

fn build(
    table: &LabeledTable,
    rows: Vec<usize>,
    classes: usize,
    cfg: &TreeConfig,
    rng: ChaCha8Rng,
) -> TreeModel {
    let mut b = Builder {
        table,
        cfg,
        classes,
        rng,
        nodes: Vec::new(),
    };
    b.grow(rows, 0);
    TreeModel {
        nodes: b.nodes,
        class_count: classes,
        width: table.width(),
    }
}

/// Greedy Gini tree; `seed` only matters when features are subsampled.
pub fn train_tree(
    table: &LabeledTable,
    cfg: &TreeConfig,
    seed: u64,
) -> Result<TreeModel, BehaviorError> {
    check_trainable(table)?;
    let rows = (0..table.len()).collect();
    Ok(build(
        table,
        rows,
        table.class_count(),
        cfg,
        ChaCha8Rng::seed_from_u64(seed),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub tree: TreeConfig,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 30,
            bootstrap: true,
            tree: TreeConfig {
                max_features: MaxFeatures::Sqrt,
                ..TreeConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
    pub class_count: usize,
}

impl ForestModel {
    /// Majority vote over trees, ties to the lowest class.
    pub fn predict(&self, row: &[f64]) -> usize {
        let mut votes = vec![0; self.class_count];
        for t in &self.trees {
            votes[t.predict(row)] += 1;
        }
        argmax_lowest(&votes)
    }
}

/// Seed of tree `t`; tree 0 uses the forest seed itself, so a one-tree
/// forest without bootstrap is exactly [`train_tree`].
fn tree_seed(seed: u64, t: usize) -> u64 {
    seed.wrapping_add((t as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Trees are grown in parallel, each from its own seed.
pub fn train_forest(
    table: &LabeledTable,
    cfg: &ForestConfig,
    seed: u64,
) -> Result<ForestModel, BehaviorError> {
    check_trainable(table)?;
    if cfg.n_trees == 0 {
        return Err(BehaviorError::InvalidConfig(
            "a forest needs at least one tree".into(),
        ));
    }
    let classes = table.class_count();
    let n = table.len();
    let trees = par::map_range(cfg.n_trees, |t| {
        let s = tree_seed(seed, t);
        let rows: Vec<usize> = if cfg.bootstrap {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            rng.set_stream(1);
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        build(
            table,
            rows,
            classes,
            &cfg.tree,
            ChaCha8Rng::seed_from_u64(s),
        )
    });
    Ok(ForestModel {
        trees,
        class_count: classes,
    })
}
