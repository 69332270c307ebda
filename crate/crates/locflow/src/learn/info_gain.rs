use super::LabeledDataset;

/// Shannon entropy in bits of a label count vector.
pub fn entropy(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    counts
        .iter()
        .filter(|c| **c > 0)
        .map(|c| {
            let p = *c as f64 / total;
            -p * p.log2()
        })
        .sum()
}

/// Rank features by information gain: the label-entropy reduction from the
/// best single threshold split, taken at the entropy-minimizing midpoint
/// between consecutive distinct values. Binary 0/1 features reduce to their
/// natural presence split. Sorted by descending gain, then feature name.
pub fn info_gain(data: &LabeledDataset) -> Vec<(String, f64)> {
    let n_classes = data.label_space.len();
    let labels = data.label_indices();
    let total = labels.len();
    let mut base_counts = vec![0usize; n_classes];
    for &l in &labels {
        base_counts[l] += 1;
    }
    let base_entropy = entropy(&base_counts);

    let mut ranked: Vec<(String, f64)> = data
        .vocabulary
        .iter()
        .map(|name| {
            let mut ordered: Vec<(f64, usize)> = data
                .rows
                .iter()
                .zip(&labels)
                .map(|((features, _), &l)| (features.get(name), l))
                .collect();
            ordered.sort_by(|a, b| a.0.total_cmp(&b.0));
            let gain = if ordered[0].0 == ordered[total - 1].0 {
                0.0
            } else {
                let mut left = vec![0usize; n_classes];
                let mut right = base_counts.clone();
                let mut moved = 0usize;
                let mut best = f64::INFINITY;
                for w in 0..total - 1 {
                    left[ordered[w].1] += 1;
                    right[ordered[w].1] -= 1;
                    moved += 1;
                    if ordered[w].0 == ordered[w + 1].0 {
                        continue;
                    }
                    let conditional = (moved as f64 / total as f64) * entropy(&left)
                        + ((total - moved) as f64 / total as f64) * entropy(&right);
                    best = best.min(conditional);
                }
                (base_entropy - best).max(0.0)
            };
            (name.clone(), gain)
        })
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked
}
