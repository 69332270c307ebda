use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::StatVector;

/// Empirical CDF of one statistical feature within one class.
/// `points` are (value, cumulative fraction) with values strictly
/// ascending; duplicates are collapsed into one step carrying their
/// combined mass, so the last point is always exactly 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCdf {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Set when the class had no flows to draw from.
    pub empty: bool,
}

/// Build per-class CDF tables for one of the 31 statistical features,
/// named by `selector`. Classes are reported in `label_space` order; a
/// class without rows yields an empty, flagged table rather than an error.
pub fn cdf_export(
    rows: &[(StatVector, String)],
    label_space: &[String],
    selector: &str,
) -> Result<Vec<ClassCdf>> {
    let field = StatVector::field_index(selector).ok_or_else(|| Error::UnknownSelector {
        given: selector.to_string(),
        valid: StatVector::FIELD_NAMES
            .iter()
            .map(|s| s.to_string())
            .collect(),
    })?;

    let mut out = Vec::with_capacity(label_space.len());
    for label in label_space {
        let mut values: Vec<f64> = rows
            .iter()
            .filter(|(_, l)| l == label)
            .map(|(stats, _)| stats.to_array()[field])
            .collect();
        if values.is_empty() {
            out.push(ClassCdf {
                label: label.clone(),
                points: Vec::new(),
                empty: true,
            });
            continue;
        }
        values.sort_by(f64::total_cmp);
        let total = values.len();
        let mut points: Vec<(f64, f64)> = Vec::new();
        for (seen, value) in values.into_iter().enumerate() {
            let cumulative = (seen + 1) as f64 / total as f64;
            match points.last_mut() {
                Some(last) if last.0 == value => last.1 = cumulative,
                _ => points.push((value, cumulative)),
            }
        }
        out.push(ClassCdf {
            label: label.clone(),
            points,
            empty: false,
        });
    }
    Ok(out)
}
