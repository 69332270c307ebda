//! Per-flow feature extraction.
//!
//! Two families: fixed-order statistics over packet sizes and timing
//! ([`stat_features`]), and sparse lexical features over request URLs
//! ([`lexical_features`]). Both can be merged into one sparse vector.

mod lexical;
mod sparse;

pub use lexical::{flow_lexical_features, lexical_features, tokenize_url};
pub use sparse::SparseFeatureVector;

use serde::{Deserialize, Serialize};

use crate::capture::{Direction, HttpFlow};

/// Seven-number summary of one empirical distribution.
///
/// Moments are population moments: skewness is m3 / sigma^3 and kurtosis is
/// m4 / sigma^4 (not excess). A zero-variance or singleton sample has
/// skewness and kurtosis of 0 rather than NaN, and an empty sample is all
/// zeros, so downstream learners never see non-finite values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DistStats {
    pub min: f64,
    pub max: f64,
    pub median: f64,
    pub mean: f64,
    pub std_dev: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

pub fn distribution_stats(values: &[f64]) -> DistStats {
    if values.is_empty() {
        return DistStats::default();
    }
    let n = values.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let min = sorted[0];
    let max = sorted[sorted.len() - 1];
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2]) / 2.0
    };
    let mean = sorted.iter().sum::<f64>() / n;
    let m2 = sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std_dev = m2.sqrt();
    let (skewness, kurtosis) = if m2 > 0.0 {
        let m3 = sorted.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
        let m4 = sorted.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
        (m3 / m2.powf(1.5), m4 / (m2 * m2))
    } else {
        (0.0, 0.0)
    };
    DistStats {
        min,
        max,
        median,
        mean,
        std_dev,
        skewness,
        kurtosis,
    }
}

/// The 31 flow statistics, in the order they are serialized everywhere.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StatVector {
    pub tcp_count: f64,
    pub uplink_tcp_count: f64,
    pub http_count: f64,
    pub size_all: DistStats,
    pub size_uplink: DistStats,
    pub size_downlink: DistStats,
    pub interval_ms: DistStats,
}

impl StatVector {
    /// Serialization order of [`to_array`]; also the valid selectors for
    /// CDF export and the feature names used in sparse vectors.
    pub const FIELD_NAMES: [&'static str; 31] = [
        "tcp_count",
        "uplink_tcp_count",
        "http_count",
        "size_all_min",
        "size_all_max",
        "size_all_median",
        "size_all_mean",
        "size_all_std_dev",
        "size_all_skewness",
        "size_all_kurtosis",
        "size_uplink_min",
        "size_uplink_max",
        "size_uplink_median",
        "size_uplink_mean",
        "size_uplink_std_dev",
        "size_uplink_skewness",
        "size_uplink_kurtosis",
        "size_downlink_min",
        "size_downlink_max",
        "size_downlink_median",
        "size_downlink_mean",
        "size_downlink_std_dev",
        "size_downlink_skewness",
        "size_downlink_kurtosis",
        "interval_ms_min",
        "interval_ms_max",
        "interval_ms_median",
        "interval_ms_mean",
        "interval_ms_std_dev",
        "interval_ms_skewness",
        "interval_ms_kurtosis",
    ];

    pub fn to_array(&self) -> [f64; 31] {
        let d = |s: &DistStats| {
            [
                s.min, s.max, s.median, s.mean, s.std_dev, s.skewness, s.kurtosis,
            ]
        };
        let mut out = [0.0; 31];
        out[0] = self.tcp_count;
        out[1] = self.uplink_tcp_count;
        out[2] = self.http_count;
        out[3..10].copy_from_slice(&d(&self.size_all));
        out[10..17].copy_from_slice(&d(&self.size_uplink));
        out[17..24].copy_from_slice(&d(&self.size_downlink));
        out[24..31].copy_from_slice(&d(&self.interval_ms));
        out
    }

    pub fn to_sparse(&self) -> SparseFeatureVector {
        Self::FIELD_NAMES
            .iter()
            .zip(self.to_array())
            .map(|(name, value)| (name.to_string(), value))
            .collect()
    }

    /// Index of `name` in [`FIELD_NAMES`], if it is one of the 31 fields.
    pub fn field_index(name: &str) -> Option<usize> {
        Self::FIELD_NAMES.iter().position(|f| *f == name)
    }
}

/// Compute the statistical features of one flow.
///
/// Sizes are full on-the-wire packet lengths; inter-arrival intervals are
/// between consecutive packets of the flow regardless of direction, in
/// milliseconds.
pub fn stat_features(flow: &HttpFlow) -> StatVector {
    let sizes: Vec<f64> = flow.packets.iter().map(|p| p.total_len as f64).collect();
    let uplink: Vec<f64> = flow
        .packets
        .iter()
        .filter(|p| p.direction == Direction::Uplink)
        .map(|p| p.total_len as f64)
        .collect();
    let downlink: Vec<f64> = flow
        .packets
        .iter()
        .filter(|p| p.direction == Direction::Downlink)
        .map(|p| p.total_len as f64)
        .collect();
    let intervals: Vec<f64> = flow
        .packets
        .windows(2)
        .map(|w| (w[1].timestamp - w[0].timestamp) * 1000.0)
        .collect();
    StatVector {
        tcp_count: flow.packets.len() as f64,
        uplink_tcp_count: uplink.len() as f64,
        http_count: flow.packets.iter().filter(|p| p.has_http_layer).count() as f64,
        size_all: distribution_stats(&sizes),
        size_uplink: distribution_stats(&uplink),
        size_downlink: distribution_stats(&downlink),
        interval_ms: distribution_stats(&intervals),
    }
}
