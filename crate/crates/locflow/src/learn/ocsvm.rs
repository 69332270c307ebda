use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::SparseFeatureVector;

use super::densify;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OcsvmConfig {
    /// Upper bound on the training outlier fraction.
    pub nu: f64,
    /// RBF width; defaults to 1/d when unset.
    pub gamma: Option<f64>,
    /// Duality-gap tolerance for convergence.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for OcsvmConfig {
    fn default() -> Self {
        OcsvmConfig {
            nu: 0.1,
            gamma: None,
            tolerance: 1e-7,
            max_iterations: 500_000,
        }
    }
}

/// ν-one-class SVM with Gaussian RBF kernel. Because K(x,x) = 1, the learned
/// boundary coincides with Support Vector Data Description: a minimal
/// enclosing ball in feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcsvmModel {
    pub vocabulary: Vec<String>,
    /// Support vectors, already min-max scaled.
    pub support_vectors: Vec<Vec<f64>>,
    pub alphas: Vec<f64>,
    pub gamma: f64,
    pub nu: f64,
    pub rho: f64,
    /// Per-feature training minima and maxima for min-max scaling.
    pub scale_min: Vec<f64>,
    pub scale_max: Vec<f64>,
    /// Duality gap certified at convergence.
    pub gap: f64,
}

/// Solve the one-class dual
///   min ½ αᵀKα   s.t.  0 ≤ α_i ≤ C = 1/(νn),  Σα = 1
/// by pairwise coordinate descent on maximal violating pairs. Inputs are
/// min-max scaled to [0,1] per feature before the kernel is formed; the
/// bounds are stored in the model and reapplied at prediction time.
pub fn train_ocsvm(
    rows: &[SparseFeatureVector],
    vocabulary: &[String],
    config: OcsvmConfig,
) -> Result<OcsvmModel> {
    if rows.is_empty() {
        return Err(Error::Training(
            "one-class SVM needs a nonempty dataset".into(),
        ));
    }
    assert!(
        config.nu > 0.0 && config.nu < 1.0,
        "nu must lie strictly inside (0, 1)"
    );
    let mut vocabulary = vocabulary.to_vec();
    vocabulary.sort();
    vocabulary.dedup();
    let n = rows.len();
    let d = vocabulary.len();
    let gamma = config.gamma.unwrap_or(1.0 / d.max(1) as f64);
    assert!(gamma > 0.0, "gamma must be positive");

    let dense: Vec<Vec<f64>> = rows.iter().map(|r| densify(r, &vocabulary)).collect();
    let (scale_min, scale_max) = fit_scaler(&dense, d);
    let scaled: Vec<Vec<f64>> = dense
        .iter()
        .map(|x| apply_scaler(x, &scale_min, &scale_max))
        .collect();

    let kernel: Vec<Vec<f64>> = scaled
        .iter()
        .map(|a| scaled.iter().map(|b| rbf(a, b, gamma)).collect())
        .collect();

    let c = 1.0 / (config.nu * n as f64);
    // Uniform start is always feasible: 1/n ≤ C whenever ν < 1.
    let mut alpha = vec![1.0 / n as f64; n];
    let mut gradient: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| kernel[i][j] * alpha[j]).sum())
        .collect();

    let mut iterations = 0usize;
    loop {
        // Maximal violating pair: the most reducible α against the most
        // raisable one. Stopping when the pair violation drops to the
        // tolerance certifies the duality gap at the same level, since
        // gap(ρ = min ∇f over raisable) ≤ max violation.
        let mut up: Option<usize> = None;
        let mut down: Option<usize> = None;
        for i in 0..n {
            if alpha[i] > 0.0 && up.is_none_or(|u| gradient[i] > gradient[u]) {
                up = Some(i);
            }
            if alpha[i] < c && down.is_none_or(|d| gradient[i] < gradient[d]) {
                down = Some(i);
            }
        }
        let (i, j) = match (up, down) {
            (Some(i), Some(j)) if i != j => (i, j),
            _ => break,
        };
        if gradient[i] - gradient[j] <= config.tolerance {
            break;
        }
        if iterations >= config.max_iterations {
            return Err(Error::SolverDiverged {
                gap: duality_gap(&alpha, &gradient, c),
                iterations,
            });
        }

        let eta = kernel[i][i] + kernel[j][j] - 2.0 * kernel[i][j];
        let unclipped = if eta > 1e-12 {
            (gradient[i] - gradient[j]) / eta
        } else {
            f64::INFINITY
        };
        let delta = unclipped.min(alpha[i]).min(c - alpha[j]);
        if delta <= 0.0 {
            break;
        }
        alpha[i] -= delta;
        alpha[j] += delta;
        for (g, row) in gradient.iter_mut().zip(&kernel) {
            *g += delta * (row[j] - row[i]);
        }
        iterations += 1;
    }

    // Incremental gradient updates drift; recompute exactly before deriving
    // the offset and the certified gap.
    for (i, g) in gradient.iter_mut().enumerate() {
        *g = (0..n).map(|j| kernel[i][j] * alpha[j]).sum();
    }
    let rho = estimate_rho(&alpha, &gradient, c);
    let gap = duality_gap(&alpha, &gradient, c);
    let mut support_vectors = Vec::new();
    let mut alphas = Vec::new();
    for (x, a) in scaled.into_iter().zip(&alpha) {
        if *a > 0.0 {
            support_vectors.push(x);
            alphas.push(*a);
        }
    }
    Ok(OcsvmModel {
        vocabulary,
        support_vectors,
        alphas,
        gamma,
        nu: config.nu,
        rho,
        scale_min,
        scale_max,
        gap,
    })
}

fn fit_scaler(dense: &[Vec<f64>], d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut low = vec![f64::INFINITY; d];
    let mut high = vec![f64::NEG_INFINITY; d];
    for x in dense {
        for (f, v) in x.iter().enumerate() {
            low[f] = low[f].min(*v);
            high[f] = high[f].max(*v);
        }
    }
    for f in 0..d {
        if !low[f].is_finite() {
            low[f] = 0.0;
            high[f] = 0.0;
        }
    }
    (low, high)
}

fn apply_scaler(x: &[f64], low: &[f64], high: &[f64]) -> Vec<f64> {
    x.iter()
        .enumerate()
        .map(|(f, v)| {
            let range = high[f] - low[f];
            if range > 0.0 {
                (v - low[f]) / range
            } else {
                0.0
            }
        })
        .collect()
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let dist_sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * dist_sq).exp()
}

/// KKT offset: the mean gradient over free support vectors, falling back to
/// the midpoint between the bound groups when no α is strictly inside.
fn estimate_rho(alpha: &[f64], gradient: &[f64], c: f64) -> f64 {
    let free: Vec<f64> = alpha
        .iter()
        .zip(gradient)
        .filter(|(a, _)| **a > 0.0 && **a < c)
        .map(|(_, g)| *g)
        .collect();
    if !free.is_empty() {
        return free.iter().sum::<f64>() / free.len() as f64;
    }
    let upper = alpha
        .iter()
        .zip(gradient)
        .filter(|(a, _)| **a >= c)
        .map(|(_, g)| *g)
        .fold(f64::NEG_INFINITY, f64::max);
    let lower = alpha
        .iter()
        .zip(gradient)
        .filter(|(a, _)| **a <= 0.0)
        .map(|(_, g)| *g)
        .fold(f64::INFINITY, f64::min);
    match (upper.is_finite(), lower.is_finite()) {
        (true, true) => (upper + lower) / 2.0,
        (true, false) => upper,
        (false, true) => lower,
        (false, false) => 0.0,
    }
}

/// Certified optimality distance: with f(α) = ½αᵀKα and ∇f = Kα,
///   gap(ρ) = αᵀKα + C·Σ max(0, ρ − ∇f_i) − ρ
/// upper-bounds the distance to the optimum for every ρ and vanishes at the
/// solution; minimizing over the breakpoints ρ ∈ {∇f_i} gives the tightest
/// certificate.
fn duality_gap(alpha: &[f64], gradient: &[f64], c: f64) -> f64 {
    let quad: f64 = alpha.iter().zip(gradient).map(|(a, g)| a * g).sum();
    let mut best = f64::INFINITY;
    for rho in gradient {
        let hinge: f64 = gradient.iter().map(|g| (rho - g).max(0.0)).sum();
        best = best.min(quad + c * hinge - rho);
    }
    best
}

impl OcsvmModel {
    /// Σ α_i K(x_i, x) − ρ over the scaled input; non-negative means the
    /// point falls inside the learned support region.
    pub fn decision(&self, features: &SparseFeatureVector) -> f64 {
        let x = apply_scaler(
            &densify(features, &self.vocabulary),
            &self.scale_min,
            &self.scale_max,
        );
        let kernel_sum: f64 = self
            .support_vectors
            .iter()
            .zip(&self.alphas)
            .map(|(sv, a)| a * rbf(sv, &x, self.gamma))
            .sum();
        kernel_sum - self.rho
    }

    pub fn is_in_class(&self, features: &SparseFeatureVector) -> bool {
        self.decision(features) >= 0.0
    }
}
