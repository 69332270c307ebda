use crate::capture::{HttpFlow, HttpRequest};

use super::sparse::SparseFeatureVector;

/// Lowercase a URL component and split it on every non-alphanumeric byte.
/// Order and duplicates are preserved; empty segments are dropped.
pub fn tokenize_url(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Sparse lexical features of one request: binary `host:` and `path:` token
/// indicators plus three numeric length features.
pub fn lexical_features(request: &HttpRequest) -> SparseFeatureVector {
    let mut out = SparseFeatureVector::new();
    for token in tokenize_url(&request.host) {
        out.set_binary(format!("host:{token}"));
    }
    for token in tokenize_url(&request.path) {
        out.set_binary(format!("path:{token}"));
    }
    out.set("len_host", request.host.len() as f64);
    out.set("len_url", request.full_url.len() as f64);
    out.set("num_dots", request.full_url.matches('.').count() as f64);
    out
}

/// Lexical features of a whole flow: the union of every request's token
/// indicators, with the numeric features taken from the first request.
/// A flow with no parsed requests has no lexical features.
pub fn flow_lexical_features(flow: &HttpFlow) -> SparseFeatureVector {
    let Some(first) = flow.requests.first() else {
        return SparseFeatureVector::new();
    };
    let mut out = lexical_features(first);
    for request in &flow.requests[1..] {
        for token in tokenize_url(&request.host) {
            out.set_binary(format!("host:{token}"));
        }
        for token in tokenize_url(&request.path) {
            out.set_binary(format!("path:{token}"));
        }
    }
    out
}
