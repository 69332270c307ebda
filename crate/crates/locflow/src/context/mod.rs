//! App-level context features: the topic, app-name, and UI-text evidence
//! used to judge whether location sharing fits what the user sees on screen.

mod names;
mod porter;
mod text;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use names::name_features;
pub use porter::stem;
pub use text::{preprocess_text, preprocess_text_with, DEFAULT_STOP_WORDS};

use crate::error::{Error, Result};
use crate::features::SparseFeatureVector;

/// One ⟨app, window⟩ snapshot: static market metadata plus the visible UI
/// text at capture time.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppContext {
    pub instance_id: String,
    pub app_name: String,
    pub description: String,
    pub market_category: String,
    #[serde(default)]
    pub ui_texts: Vec<String>,
    #[serde(default)]
    pub clickable_labels: Vec<String>,
}

pub const TOPICS_SCHEMA: &str = "topics.v1";

/// Topic keywords, city gazetteer, and app-name wordlist. Keyword lists are
/// stored pre-stemmed so matching never depends on stemmer behavior.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopicConfig {
    pub schema: String,
    pub topics: BTreeMap<String, BTreeSet<String>>,
    #[serde(default)]
    pub city_names: BTreeSet<String>,
    #[serde(default)]
    pub name_wordlist: Vec<String>,
    /// Overrides the built-in stop-word list when present.
    #[serde(default)]
    pub stop_words: Option<BTreeSet<String>>,
}

impl TopicConfig {
    pub fn from_toml_str(raw: &str) -> Result<TopicConfig> {
        let mut config: TopicConfig =
            toml::from_str(raw).map_err(|e| Error::Data(format!("topic config: {e}")))?;
        if config.schema != TOPICS_SCHEMA {
            return Err(Error::Schema {
                expected: TOPICS_SCHEMA.into(),
                found: config.schema,
            });
        }
        for (topic, keywords) in &config.topics {
            if keywords.is_empty() {
                return Err(Error::Data(format!(
                    "topic {topic:?} has an empty keyword set"
                )));
            }
        }
        // City matching is case-insensitive; normalize once at load.
        config.city_names = config
            .city_names
            .iter()
            .map(|c| c.trim().to_lowercase())
            .collect();
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TopicConfig> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    fn preprocess(&self, text: &str) -> Vec<String> {
        match &self.stop_words {
            Some(words) => preprocess_text_with(text, words),
            None => preprocess_text(text),
        }
    }
}

/// Pick the topic whose keyword set is hit by the most distinct tokens.
/// Ties go to the lexicographically smallest topic name; zero hits fall back
/// to the market category, namespaced "market:<category>".
pub fn assign_topic(tokens: &[String], config: &TopicConfig, fallback: &str) -> String {
    let distinct: BTreeSet<&str> = tokens.iter().map(String::as_str).collect();
    let mut best: Option<(usize, &str)> = None;
    for (topic, keywords) in &config.topics {
        let hits = keywords
            .iter()
            .filter(|k| distinct.contains(k.as_str()))
            .count();
        if hits > 0 && best.is_none_or(|(best_hits, _)| hits > best_hits) {
            best = Some((hits, topic));
        }
    }
    match best {
        Some((_, topic)) => topic.to_string(),
        None => format!("market:{fallback}"),
    }
}

/// Binary `ui:<token>` features over the window's visible text, plus the
/// "city-clickable" marker when a clickable widget is labeled exactly with a
/// configured city name.
pub fn ui_features(context: &AppContext, config: &TopicConfig) -> SparseFeatureVector {
    let mut out = SparseFeatureVector::new();
    for text in &context.ui_texts {
        for token in config.preprocess(text) {
            out.set_binary(format!("ui:{token}"));
        }
    }
    let city_clickable = context
        .clickable_labels
        .iter()
        .any(|label| config.city_names.contains(&label.trim().to_lowercase()));
    if city_clickable {
        out.set_binary("city-clickable");
    }
    out
}

/// The full intention feature vector: exactly one `topic:*` one-hot from the
/// description, plus name and UI features. Namespacing keeps the three
/// families collision-free.
pub fn context_vector(context: &AppContext, config: &TopicConfig) -> SparseFeatureVector {
    let tokens = config.preprocess(&context.description);
    let topic = assign_topic(&tokens, config, &context.market_category);
    let mut out = SparseFeatureVector::new();
    out.set_binary(format!("topic:{topic}"));
    out.union(&name_features(&context.app_name, &config.name_wordlist));
    out.union(&ui_features(context, config));
    out
}
