use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::SparseFeatureVector;

use super::{Classifier, LabeledDataset};

/// Bernoulli naive Bayes over binarized features (active iff value != 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbModel {
    pub label_space: Vec<String>,
    pub vocabulary: Vec<String>,
    pub log_prior: Vec<f64>,
    /// log P(feature active | class), indexed [class][feature].
    pub log_likelihood: Vec<Vec<f64>>,
    /// log P(feature inactive | class).
    pub log_complement: Vec<Vec<f64>>,
}

/// Closed-form Bernoulli counts with Laplace smoothing:
/// P(f | c) = (count(f, c) + α) / (count(c) + 2α).
pub fn train_naive_bayes(data: &LabeledDataset, smoothing: f64) -> Result<NbModel> {
    if data.rows.is_empty() {
        return Err(Error::Training(
            "naive Bayes needs a nonempty dataset".into(),
        ));
    }
    assert!(smoothing > 0.0, "smoothing must be positive");
    let vocabulary = data.canonical_vocabulary();
    let n_classes = data.label_space.len();
    let n_features = vocabulary.len();
    let mut class_counts = vec![0usize; n_classes];
    let mut feature_counts = vec![vec![0usize; n_features]; n_classes];
    for (features, label) in &data.rows {
        let c = data
            .label_index(label)
            .ok_or_else(|| Error::Training(format!("label {label:?} not in label space")))?;
        class_counts[c] += 1;
        for (f, name) in vocabulary.iter().enumerate() {
            if features.get(name) != 0.0 {
                feature_counts[c][f] += 1;
            }
        }
    }
    let total = data.rows.len() as f64;
    let mut log_prior = Vec::with_capacity(n_classes);
    let mut log_likelihood = Vec::with_capacity(n_classes);
    let mut log_complement = Vec::with_capacity(n_classes);
    for c in 0..n_classes {
        log_prior.push((class_counts[c] as f64 / total).ln());
        let denominator = class_counts[c] as f64 + 2.0 * smoothing;
        let mut active = Vec::with_capacity(n_features);
        let mut inactive = Vec::with_capacity(n_features);
        for &count in &feature_counts[c] {
            let p = (count as f64 + smoothing) / denominator;
            active.push(p.ln());
            inactive.push((1.0 - p).ln());
        }
        log_likelihood.push(active);
        log_complement.push(inactive);
    }
    Ok(NbModel {
        label_space: data.label_space.clone(),
        vocabulary,
        log_prior,
        log_likelihood,
        log_complement,
    })
}

impl NbModel {
    /// Unnormalized log joint ln P(class) + Σ_f ln P(x_f | class), summed in
    /// vocabulary order.
    pub fn log_joint(&self, features: &SparseFeatureVector) -> Vec<f64> {
        (0..self.label_space.len())
            .map(|c| {
                let mut score = self.log_prior[c];
                for (f, name) in self.vocabulary.iter().enumerate() {
                    score += if features.get(name) != 0.0 {
                        self.log_likelihood[c][f]
                    } else {
                        self.log_complement[c][f]
                    };
                }
                score
            })
            .collect()
    }
}

impl Classifier for NbModel {
    fn label_space(&self) -> &[String] {
        &self.label_space
    }

    /// Posterior probabilities via a max-shifted softmax over the log
    /// joints.
    fn score(&self, features: &SparseFeatureVector) -> Vec<f64> {
        let joint = self.log_joint(features);
        let max = joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let unnormalized: Vec<f64> = joint.iter().map(|j| (j - max).exp()).collect();
        let total: f64 = unnormalized.iter().sum();
        unnormalized.iter().map(|u| u / total).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::sparse;

    #[test]
    fn smoothed_likelihoods_match_closed_form() {
        // {(x={f}, A), (x={}, B)}, α=1: P(f|A) = 2/3, P(f|B) = 1/3.
        let data = LabeledDataset::from_rows(vec![
            (sparse(&[("f", 1.0)]), "A".into()),
            (sparse(&[]), "B".into()),
        ]);
        let model = train_naive_bayes(&data, 1.0).unwrap();
        let a = data.label_space.iter().position(|l| l == "A").unwrap();
        let b = data.label_space.iter().position(|l| l == "B").unwrap();
        assert_eq!(model.log_likelihood[a][0], (2.0f64 / 3.0).ln());
        assert_eq!(model.log_likelihood[b][0], (1.0f64 / 3.0).ln());
    }

    #[test]
    fn classifies_its_own_training_rows() {
        let data = LabeledDataset::from_rows(vec![
            (sparse(&[("f", 1.0)]), "A".into()),
            (sparse(&[]), "B".into()),
        ]);
        let model = train_naive_bayes(&data, 1.0).unwrap();
        assert_eq!(model.predict(&sparse(&[("f", 1.0)])).label, "A");
        assert_eq!(model.predict(&sparse(&[])).label, "B");
    }

    #[test]
    fn single_class_dataset_always_predicts_it() {
        let data = LabeledDataset::from_rows(vec![
            (sparse(&[("f", 1.0)]), "only".into()),
            (sparse(&[("g", 1.0)]), "only".into()),
        ]);
        let model = train_naive_bayes(&data, 1.0).unwrap();
        assert_eq!(model.predict(&sparse(&[("h", 1.0)])).label, "only");
        assert_eq!(model.score(&sparse(&[])), vec![1.0]);
    }

    #[test]
    fn duplicating_every_row_leaves_predictions_unchanged() {
        // Smoothing keeps the doubled counts from being an exact rescaling,
        // so probe away from the decision boundary.
        let rows = vec![
            (sparse(&[("f", 1.0)]), "A".to_string()),
            (sparse(&[("f", 1.0), ("g", 1.0)]), "A".to_string()),
            (sparse(&[("h", 1.0)]), "B".to_string()),
            (sparse(&[("h", 1.0), ("g", 1.0)]), "B".to_string()),
        ];
        let mut doubled = rows.clone();
        doubled.extend(rows.clone());
        let single = train_naive_bayes(&LabeledDataset::from_rows(rows), 1.0).unwrap();
        let double = train_naive_bayes(&LabeledDataset::from_rows(doubled), 1.0).unwrap();
        for probe in [
            sparse(&[("f", 1.0)]),
            sparse(&[("h", 1.0)]),
            sparse(&[("f", 1.0), ("g", 1.0)]),
            sparse(&[("h", 1.0), ("g", 1.0)]),
        ] {
            assert_eq!(single.predict(&probe).label, double.predict(&probe).label);
        }
    }

    #[test]
    fn unknown_features_are_ignored() {
        let data = LabeledDataset::from_rows(vec![
            (sparse(&[("f", 1.0)]), "A".into()),
            (sparse(&[]), "B".into()),
        ]);
        let model = train_naive_bayes(&data, 1.0).unwrap();
        let with_unknown = sparse(&[("f", 1.0), ("mystery", 1.0)]);
        assert_eq!(
            model.score(&with_unknown),
            model.score(&sparse(&[("f", 1.0)]))
        );
    }

    #[test]
    fn empty_dataset_is_a_training_error() {
        let data = LabeledDataset::from_rows(vec![]);
        assert!(train_naive_bayes(&data, 1.0).is_err());
    }
}
