use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::learn::{Classifier, LabeledDataset};

use super::{ConfusionMatrix, EvalReport};

/// Stratified k-fold cross-validation. Rows of each class are shuffled with
/// a ChaCha8 stream seeded from `seed` and dealt round-robin across folds,
/// so every class keeps (as nearly as possible) its overall proportion in
/// every fold and the split depends only on (data order, k, seed). Each row
/// is predicted exactly once by a model that never saw it; the per-fold
/// confusion matrices are summed into one aggregate.
pub fn kfold<C, F>(
    data: &LabeledDataset,
    k: usize,
    seed: u64,
    trainer: F,
) -> Result<(ConfusionMatrix, EvalReport)>
where
    C: Classifier + Send,
    F: Fn(&LabeledDataset) -> Result<C> + Sync,
{
    if k < 2 {
        return Err(Error::Data(format!("k-fold needs k >= 2, got {k}")));
    }
    data.validate()?;

    let mut fold_of = vec![0usize; data.rows.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for class in &data.label_space {
        let mut members: Vec<usize> = data
            .rows
            .iter()
            .enumerate()
            .filter(|(_, (_, label))| label == class)
            .map(|(i, _)| i)
            .collect();
        if members.len() < k {
            return Err(Error::ClassTooSmall {
                class: class.clone(),
                rows: members.len(),
                needed: k,
            });
        }
        members.shuffle(&mut rng);
        for (position, row) in members.into_iter().enumerate() {
            fold_of[row] = position % k;
        }
    }

    // Folds are independent once the assignment is fixed; results are
    // collected in fold order, so parallelism cannot change the aggregate.
    let per_fold: Result<Vec<Vec<(usize, String)>>> = (0..k)
        .into_par_iter()
        .map(|fold| {
            let training = LabeledDataset {
                rows: data
                    .rows
                    .iter()
                    .zip(&fold_of)
                    .filter(|(_, f)| **f != fold)
                    .map(|(row, _)| row.clone())
                    .collect(),
                label_space: data.label_space.clone(),
                vocabulary: data.vocabulary.clone(),
            };
            let model = trainer(&training)?;
            let mut predictions = Vec::new();
            for (i, (features, _)) in data.rows.iter().enumerate() {
                if fold_of[i] == fold {
                    predictions.push((i, model.predict(features).label));
                }
            }
            Ok(predictions)
        })
        .collect();

    let mut cm = ConfusionMatrix::new(data.label_space.clone());
    let mut seen = vec![false; data.rows.len()];
    for fold in per_fold? {
        for (row, predicted) in fold {
            debug_assert!(!seen[row], "row {row} predicted twice");
            seen[row] = true;
            cm.record(&data.rows[row].1, &predicted)?;
        }
    }
    debug_assert!(seen.iter().all(|s| *s));

    let mut report = EvalReport::from_confusion(cm.clone())?;
    report.fold_count = Some(k);
    report.seed = Some(seed);
    Ok((cm, report))
}
