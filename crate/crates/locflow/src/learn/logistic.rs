use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::SparseFeatureVector;

use super::{densify, Classifier, LabeledDataset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            learning_rate: 0.1,
            epochs: 500,
            l2: 1e-4,
        }
    }
}

/// One-vs-rest logistic regression: one weight vector and bias per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrModel {
    pub label_space: Vec<String>,
    pub vocabulary: Vec<String>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub config: LogisticConfig,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Regularized log loss and its analytic gradient for one binary head:
/// J = (1/n) Σ -[y ln p + (1-y) ln(1-p)] + (λ/2)‖w‖², bias unregularized.
/// Exposed so the gradient can be checked against finite differences.
pub fn loss_and_gradient(
    xs: &[Vec<f64>],
    ys: &[f64],
    weights: &[f64],
    bias: f64,
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let n = xs.len() as f64;
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let z = bias + x.iter().zip(weights).map(|(xi, wi)| xi * wi).sum::<f64>();
        let p = sigmoid(z);
        // ln via log-sum-exp keeps the loss finite for confident mistakes.
        loss += softplus(-z) + (1.0 - y) * z;
        let residual = p - y;
        for (g, xi) in grad_w.iter_mut().zip(x) {
            *g += residual * xi;
        }
        grad_b += residual;
    }
    loss /= n;
    grad_b /= n;
    for g in grad_w.iter_mut() {
        *g /= n;
    }
    let penalty: f64 = weights.iter().map(|w| w * w).sum();
    loss += 0.5 * l2 * penalty;
    for (g, w) in grad_w.iter_mut().zip(weights) {
        *g += l2 * w;
    }
    (loss, grad_w, grad_b)
}

/// ln(1 + e^z), stable for large |z|.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Full-batch gradient descent, one independent head per class.
/// Deterministic given config and data order.
pub fn train_logistic(data: &LabeledDataset, config: LogisticConfig) -> Result<LrModel> {
    if data.label_space.len() < 2 {
        return Err(Error::Training(
            "logistic regression needs at least two classes".into(),
        ));
    }
    let vocabulary = data.canonical_vocabulary();
    let xs: Vec<Vec<f64>> = data
        .rows
        .iter()
        .map(|(f, _)| densify(f, &vocabulary))
        .collect();
    let labels = data.label_indices();
    let d = vocabulary.len();
    let mut weights = Vec::with_capacity(data.label_space.len());
    let mut biases = Vec::with_capacity(data.label_space.len());
    for class in 0..data.label_space.len() {
        let ys: Vec<f64> = labels
            .iter()
            .map(|l| if *l == class { 1.0 } else { 0.0 })
            .collect();
        let mut w = vec![0.0; d];
        let mut b = 0.0;
        for epoch in 0..config.epochs {
            let (loss, grad_w, grad_b) = loss_and_gradient(&xs, &ys, &w, b, config.l2);
            if !loss.is_finite() {
                return Err(Error::Training(format!(
                    "non-finite logistic loss for class {:?} at epoch {epoch}",
                    data.label_space[class]
                )));
            }
            for (wi, gi) in w.iter_mut().zip(&grad_w) {
                *wi -= config.learning_rate * gi;
            }
            b -= config.learning_rate * grad_b;
        }
        weights.push(w);
        biases.push(b);
    }
    Ok(LrModel {
        label_space: data.label_space.clone(),
        vocabulary,
        weights,
        biases,
        config,
    })
}

impl Classifier for LrModel {
    fn label_space(&self) -> &[String] {
        &self.label_space
    }

    /// Per-class sigmoid scores (one-vs-rest heads are independent, so the
    /// scores are not normalized across classes).
    fn score(&self, features: &SparseFeatureVector) -> Vec<f64> {
        let x = densify(features, &self.vocabulary);
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| sigmoid(b + x.iter().zip(w).map(|(xi, wi)| xi * wi).sum::<f64>()))
            .collect()
    }
}
