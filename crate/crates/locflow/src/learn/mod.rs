//! The four learning algorithms used by the pipeline, plus information-gain
//! feature ranking. All trainers are deterministic given (data order,
//! config, seed) and all models serialize losslessly.

mod forest;
mod info_gain;
mod logistic;
mod naive_bayes;
mod ocsvm;

pub use forest::{
    train_random_forest, Bootstrap, FeatureSubsample, ForestConfig, RfModel, TreeNode,
};
pub use info_gain::{entropy, info_gain};
pub use logistic::{loss_and_gradient, train_logistic, LogisticConfig, LrModel};
pub use naive_bayes::{train_naive_bayes, NbModel};
pub use ocsvm::{train_ocsvm, OcsvmConfig, OcsvmModel};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::SparseFeatureVector;

/// Training rows with the orderings that make everything reproducible:
/// `label_space` fixes class indices and tie-breaking, `vocabulary` fixes
/// dense feature indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub rows: Vec<(SparseFeatureVector, String)>,
    pub label_space: Vec<String>,
    pub vocabulary: Vec<String>,
}

impl LabeledDataset {
    /// Build a dataset deriving label space and vocabulary from the rows
    /// (both sorted for determinism).
    pub fn from_rows(rows: Vec<(SparseFeatureVector, String)>) -> LabeledDataset {
        let mut label_space: Vec<String> = rows.iter().map(|(_, l)| l.clone()).collect();
        label_space.sort();
        label_space.dedup();
        let mut vocabulary: Vec<String> = rows
            .iter()
            .flat_map(|(f, _)| f.names().map(str::to_string))
            .collect();
        vocabulary.sort();
        vocabulary.dedup();
        LabeledDataset {
            rows,
            label_space,
            vocabulary,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::Training("empty dataset".into()));
        }
        let known: std::collections::BTreeSet<&str> =
            self.vocabulary.iter().map(String::as_str).collect();
        for (features, label) in &self.rows {
            if !self.label_space.iter().any(|l| l == label) {
                return Err(Error::Training(format!(
                    "label {label:?} missing from label space"
                )));
            }
            for name in features.names() {
                if !known.contains(name) {
                    return Err(Error::Training(format!(
                        "feature {name:?} missing from vocabulary"
                    )));
                }
            }
        }
        Ok(())
    }

    /// The vocabulary in canonical (sorted, deduplicated) order. Trainers
    /// index features through this, so a model never depends on how the
    /// caller happened to order the vocabulary.
    pub fn canonical_vocabulary(&self) -> Vec<String> {
        let mut v = self.vocabulary.clone();
        v.sort();
        v.dedup();
        v
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.label_space.iter().position(|l| l == label)
    }

    /// Dense design matrix in vocabulary order.
    pub fn densify_rows(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|(f, _)| densify(f, &self.vocabulary))
            .collect()
    }

    /// Labels as indices into the label space.
    pub fn label_indices(&self) -> Vec<usize> {
        self.rows
            .iter()
            .map(|(_, l)| self.label_index(l).expect("validated dataset"))
            .collect()
    }
}

/// Project a sparse vector onto a fixed vocabulary. Names outside the
/// vocabulary are ignored; absent names read as 0.
pub fn densify(features: &SparseFeatureVector, vocabulary: &[String]) -> Vec<f64> {
    vocabulary.iter().map(|name| features.get(name)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: String,
    /// One score per label, in label-space order.
    pub scores: Vec<(String, f64)>,
}

/// Common inference surface. `score` returns per-class scores in
/// label-space order; `predict` takes the argmax, breaking ties in favor of
/// the earlier label.
pub trait Classifier {
    fn label_space(&self) -> &[String];
    fn score(&self, features: &SparseFeatureVector) -> Vec<f64>;

    fn predict(&self, features: &SparseFeatureVector) -> Prediction {
        let scores = self.score(features);
        let labels = self.label_space();
        debug_assert_eq!(scores.len(), labels.len());
        let mut best = 0;
        for (i, s) in scores.iter().enumerate().skip(1) {
            if *s > scores[best] {
                best = i;
            }
        }
        Prediction {
            label: labels[best].clone(),
            scores: labels.iter().cloned().zip(scores).collect(),
        }
    }
}

#[cfg(test)]
pub(crate) fn sparse(pairs: &[(&str, f64)]) -> SparseFeatureVector {
    pairs
        .iter()
        .map(|(name, value)| (name.to_string(), *value))
        .collect()
}
