use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::{LrModel, NbModel, OcsvmModel, RfModel};

use super::FeatureSet;

pub const BUNDLE_SCHEMA: &str = "bundle.v1";

/// The versioned container a deployment needs: the three context voters,
/// the two flow models (the one-class model carries its min-max scaling
/// bounds), their vocabularies, and digests of the training-side inputs so
/// a verdict can be traced back to the exact configuration that produced
/// the models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub schema: String,
    pub tool_version: String,
    pub seed: u64,
    pub context_rf: RfModel,
    pub context_nb: NbModel,
    pub context_lr: LrModel,
    pub context_vocabulary: Vec<String>,
    /// SHA-256 of the topic configuration file the voters saw.
    pub topic_config_digest: String,
    pub flow_rf: RfModel,
    pub flow_ocsvm: OcsvmModel,
    pub flow_vocabulary: Vec<String>,
    pub feature_set: FeatureSet,
    /// SHA-256 of the hostname list used during auto-labeling.
    pub hostlist_digest: String,
}

impl ModelBundle {
    /// Serialize as JSON; the write is atomic so readers never observe a
    /// half-written bundle.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes = serde_json::to_vec_pretty(self)
            .map_err(|e| Error::Data(format!("bundle serialization failed: {e}")))?;
        crate::io::atomic_write(path, &bytes)
    }

    /// Load and verify the schema version before touching the payload, so
    /// an incompatible bundle reports its version instead of a parse error.
    pub fn load(path: impl AsRef<Path>) -> Result<ModelBundle> {
        let raw = std::fs::read_to_string(path.as_ref())?;
        let value: serde_json::Value = serde_json::from_str(&raw)
            .map_err(|e| Error::Data(format!("bundle is not valid JSON: {e}")))?;
        let found = value
            .get("schema")
            .and_then(|s| s.as_str())
            .unwrap_or("<missing>")
            .to_string();
        if found != BUNDLE_SCHEMA {
            return Err(Error::Schema {
                expected: BUNDLE_SCHEMA.to_string(),
                found,
            });
        }
        serde_json::from_value(value)
            .map_err(|e| Error::Data(format!("bundle payload is malformed: {e}")))
    }
}
