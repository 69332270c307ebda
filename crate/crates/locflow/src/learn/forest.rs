use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::SparseFeatureVector;

use super::{densify, Classifier, LabeledDataset};

/// How each tree draws its training sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bootstrap {
    /// n draws with replacement (the usual random forest).
    Standard,
    /// Every row once; no resampling (test hook for CART-oracle equality).
    None,
    /// Rows sorted by a content hash before standard resampling, making the
    /// forest invariant to input row order (test hook for determinism).
    RowHash,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureSubsample {
    /// ceil(sqrt(d)) candidate features per node, drawn without replacement.
    Sqrt,
    /// All features considered at every node (test hook).
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub seed: u64,
    pub bootstrap: Bootstrap,
    pub feature_subsample: FeatureSubsample,
    /// Track out-of-bag rows and report OOB accuracy (Standard/RowHash
    /// bootstrap only).
    pub compute_oob: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: None,
            min_leaf: 1,
            seed: 42,
            bootstrap: Bootstrap::Standard,
            feature_subsample: FeatureSubsample::Sqrt,
            compute_oob: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        /// Index into the model vocabulary.
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        /// Class counts of the bootstrap rows that reached this leaf, in
        /// label-space order.
        histogram: Vec<u32>,
    },
}

impl TreeNode {
    pub fn leaf_histogram<'a>(&'a self, x: &[f64]) -> &'a [u32] {
        match self {
            TreeNode::Leaf { histogram } => histogram,
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                let value = x.get(*feature).copied().unwrap_or(0.0);
                if value <= *threshold {
                    left.leaf_histogram(x)
                } else {
                    right.leaf_histogram(x)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfModel {
    pub label_space: Vec<String>,
    pub vocabulary: Vec<String>,
    pub trees: Vec<TreeNode>,
    pub config: ForestConfig,
    /// Fraction of rows whose out-of-bag vote matched their label; present
    /// only when requested at training time.
    pub oob_accuracy: Option<f64>,
}

/// Bootstrap-aggregated CART trees with Gini splits. Per-tree seeds are
/// drawn from the master seed up front, so tree training can run in
/// parallel without affecting the result.
pub fn train_random_forest(data: &LabeledDataset, config: ForestConfig) -> Result<RfModel> {
    if data.rows.is_empty() {
        return Err(Error::Training(
            "random forest needs a nonempty dataset".into(),
        ));
    }
    assert!(config.n_trees > 0, "n_trees must be positive");
    assert!(config.min_leaf > 0, "min_leaf must be positive");

    let vocabulary = data.canonical_vocabulary();
    let xs: Vec<Vec<f64>> = data
        .rows
        .iter()
        .map(|(f, _)| densify(f, &vocabulary))
        .collect();
    let labels = data.label_indices();
    let n = xs.len();
    let n_classes = data.label_space.len();

    // Stable row order for the RowHash hook: sort by content digest.
    let row_order: Vec<usize> = match config.bootstrap {
        Bootstrap::RowHash => {
            let mut order: Vec<(String, usize)> = (0..n)
                .map(|i| (row_digest(&data.rows[i].0, &data.rows[i].1), i))
                .collect();
            order.sort();
            order.into_iter().map(|(_, i)| i).collect()
        }
        _ => (0..n).collect(),
    };

    let mut master = ChaCha8Rng::seed_from_u64(config.seed);
    let tree_seeds: Vec<u64> = (0..config.n_trees).map(|_| master.gen()).collect();

    let candidate_count = match config.feature_subsample {
        FeatureSubsample::Sqrt => (vocabulary.len() as f64).sqrt().ceil() as usize,
        FeatureSubsample::All => vocabulary.len(),
    }
    .max(1);

    let grown: Vec<(TreeNode, Vec<bool>)> = tree_seeds
        .par_iter()
        .map(|tree_seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(*tree_seed);
            let mut in_bag = vec![false; n];
            let sample: Vec<usize> = match config.bootstrap {
                Bootstrap::None => row_order.clone(),
                Bootstrap::Standard | Bootstrap::RowHash => {
                    (0..n).map(|_| row_order[rng.gen_range(0..n)]).collect()
                }
            };
            for &i in &sample {
                in_bag[i] = true;
            }
            let tree = grow_tree(
                &xs,
                &labels,
                n_classes,
                sample,
                candidate_count,
                &config,
                0,
                &mut rng,
            );
            (tree, in_bag)
        })
        .collect();

    let oob_accuracy = if config.compute_oob && config.bootstrap != Bootstrap::None {
        Some(oob_accuracy(&grown, &xs, &labels, n_classes))
    } else {
        None
    };
    Ok(RfModel {
        label_space: data.label_space.clone(),
        vocabulary,
        trees: grown.into_iter().map(|(tree, _)| tree).collect(),
        config,
        oob_accuracy,
    })
}

fn row_digest(features: &SparseFeatureVector, label: &str) -> String {
    let mut hasher = Sha256::new();
    for (name, value) in features.iter() {
        hasher.update(name.as_bytes());
        hasher.update([0u8]);
        hasher.update(value.to_bits().to_be_bytes());
    }
    hasher.update([1u8]);
    hasher.update(label.as_bytes());
    hex::encode(hasher.finalize())
}

fn oob_accuracy(
    grown: &[(TreeNode, Vec<bool>)],
    xs: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
) -> f64 {
    let mut correct = 0usize;
    let mut voted = 0usize;
    for (i, x) in xs.iter().enumerate() {
        let mut votes = vec![0u64; n_classes];
        for (tree, in_bag) in grown {
            if !in_bag[i] {
                for (v, count) in votes.iter_mut().zip(tree.leaf_histogram(x)) {
                    *v += u64::from(*count);
                }
            }
        }
        if votes.iter().all(|v| *v == 0) {
            continue;
        }
        let mut best = 0;
        for (c, v) in votes.iter().enumerate().skip(1) {
            if *v > votes[best] {
                best = c;
            }
        }
        voted += 1;
        if best == labels[i] {
            correct += 1;
        }
    }
    if voted == 0 {
        0.0
    } else {
        correct as f64 / voted as f64
    }
}

#[allow(clippy::too_many_arguments)]
fn grow_tree(
    xs: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    rows: Vec<usize>,
    candidate_count: usize,
    config: &ForestConfig,
    depth: usize,
    rng: &mut ChaCha8Rng,
) -> TreeNode {
    let histogram = class_histogram(&rows, labels, n_classes);
    let pure = histogram.iter().filter(|c| **c > 0).count() <= 1;
    let depth_capped = config.max_depth.is_some_and(|cap| depth >= cap);
    if pure || depth_capped || rows.len() < 2 * config.min_leaf {
        return TreeNode::Leaf { histogram };
    }

    let d = xs[0].len();
    let candidates: Vec<usize> = if candidate_count >= d {
        (0..d).collect()
    } else {
        rand::seq::index::sample(rng, d, candidate_count).into_vec()
    };

    let Some((feature, threshold)) = best_split(xs, labels, n_classes, &rows, &candidates, config)
    else {
        return TreeNode::Leaf { histogram };
    };

    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
        rows.into_iter().partition(|&i| xs[i][feature] <= threshold);
    let left = grow_tree(
        xs,
        labels,
        n_classes,
        left_rows,
        candidate_count,
        config,
        depth + 1,
        rng,
    );
    let right = grow_tree(
        xs,
        labels,
        n_classes,
        right_rows,
        candidate_count,
        config,
        depth + 1,
        rng,
    );
    TreeNode::Split {
        feature,
        threshold,
        left: Box::new(left),
        right: Box::new(right),
    }
}

fn class_histogram(rows: &[usize], labels: &[usize], n_classes: usize) -> Vec<u32> {
    let mut histogram = vec![0u32; n_classes];
    for &i in rows {
        histogram[labels[i]] += 1;
    }
    histogram
}

fn gini(histogram: &[u32], total: f64) -> f64 {
    let sum_sq: f64 = histogram
        .iter()
        .map(|c| {
            let p = *c as f64 / total;
            p * p
        })
        .sum();
    1.0 - sum_sq
}

/// Best (feature, midpoint threshold) over the candidate features by
/// weighted Gini impurity. Ties keep the first candidate encountered, so
/// the result is deterministic given the candidate order.
fn best_split(
    xs: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    rows: &[usize],
    candidates: &[usize],
    config: &ForestConfig,
) -> Option<(usize, f64)> {
    let total = rows.len() as f64;
    let mut best: Option<(f64, usize, f64)> = None;
    for &feature in candidates {
        // Sort row values once per feature; thresholds are midpoints of
        // consecutive distinct values.
        let mut ordered: Vec<(f64, usize)> =
            rows.iter().map(|&i| (xs[i][feature], labels[i])).collect();
        ordered.sort_by(|a, b| a.0.total_cmp(&b.0));
        if ordered[0].0 == ordered[ordered.len() - 1].0 {
            continue;
        }
        let mut left = vec![0u32; n_classes];
        let mut right = class_histogram(rows, labels, n_classes);
        let mut moved = 0usize;
        for w in 0..ordered.len() - 1 {
            left[ordered[w].1] += 1;
            right[ordered[w].1] -= 1;
            moved += 1;
            if ordered[w].0 == ordered[w + 1].0 {
                continue;
            }
            let threshold = ordered[w].0 + (ordered[w + 1].0 - ordered[w].0) / 2.0;
            // Floating midpoints of adjacent values can collapse onto an
            // endpoint; skip rather than emit an empty side.
            if threshold <= ordered[w].0 || threshold > ordered[w + 1].0 {
                continue;
            }
            let n_left = moved;
            let n_right = ordered.len() - moved;
            if n_left < config.min_leaf || n_right < config.min_leaf {
                continue;
            }
            let impurity = (n_left as f64 / total) * gini(&left, n_left as f64)
                + (n_right as f64 / total) * gini(&right, n_right as f64);
            if best.is_none_or(|(best_impurity, _, _)| impurity < best_impurity) {
                best = Some((impurity, feature, threshold));
            }
        }
    }
    best.map(|(_, feature, threshold)| (feature, threshold))
}

impl Classifier for RfModel {
    fn label_space(&self) -> &[String] {
        &self.label_space
    }

    /// Fraction of summed leaf-histogram mass per class across all trees.
    fn score(&self, features: &SparseFeatureVector) -> Vec<f64> {
        let x = densify(features, &self.vocabulary);
        let mut votes = vec![0u64; self.label_space.len()];
        for tree in &self.trees {
            for (v, count) in votes.iter_mut().zip(tree.leaf_histogram(&x)) {
                *v += u64::from(*count);
            }
        }
        let total: u64 = votes.iter().sum();
        if total == 0 {
            return vec![0.0; votes.len()];
        }
        votes.iter().map(|v| *v as f64 / total as f64).collect()
    }
}
