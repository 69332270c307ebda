use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Named-feature map shared by the lexical and context featurizers.
///
/// Binary features are stored with value 1; entries with value 0 are never
/// stored, so "absent" and "zero" are the same thing everywhere downstream.
/// Backed by a `BTreeMap` so iteration order (and therefore every derived
/// artifact) is deterministic.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SparseFeatureVector {
    entries: BTreeMap<String, f64>,
}

impl SparseFeatureVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Set a feature value. Zero values clear the entry; empty names are
    /// rejected since downstream vocabularies key on the name.
    pub fn set(&mut self, name: impl Into<String>, value: f64) {
        let name = name.into();
        debug_assert!(!name.is_empty(), "feature names must be non-empty");
        if name.is_empty() {
            return;
        }
        if value == 0.0 {
            self.entries.remove(&name);
        } else {
            self.entries.insert(name, value);
        }
    }

    /// Set a binary (presence) feature.
    pub fn set_binary(&mut self, name: impl Into<String>) {
        self.set(name, 1.0);
    }

    /// Value of a feature, 0 when absent.
    pub fn get(&self, name: &str) -> f64 {
        self.entries.get(name).copied().unwrap_or(0.0)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    /// Merge entries from `other`; on collisions `other` wins.
    pub fn union(&mut self, other: &SparseFeatureVector) {
        for (name, value) in &other.entries {
            self.entries.insert(name.clone(), *value);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl FromIterator<(String, f64)> for SparseFeatureVector {
    fn from_iter<T: IntoIterator<Item = (String, f64)>>(iter: T) -> Self {
        let mut v = SparseFeatureVector::new();
        for (name, value) in iter {
            v.set(name, value);
        }
        v
    }
}
