//! Artifact files shared by the pipeline stages: line-delimited JSON
//! records, tabular exports, sidecar metadata, and stage manifests.
//!
//! Every artifact embeds its schema version (each JSONL record carries a
//! `schema` field; tabular files start with a version row) and every write
//! is atomic: a temporary sibling is written first and renamed over the
//! target, so a crashed stage never leaves a half-written artifact.

use std::collections::BTreeMap;
use std::net::IpAddr;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::capture::HttpFlow;
use crate::error::{Error, Result};
use crate::eval::ClassCdf;
use crate::features::StatVector;
use crate::pipeline::flow_features;
use crate::pipeline::FeatureSet;

pub const FLOWS_SCHEMA: &str = "flows.v1";
pub const CONTEXTS_SCHEMA: &str = "contexts.v1";
pub const INSTANCE_LABELS_SCHEMA: &str = "instance-labels.v1";
pub const FLOW_LABELS_SCHEMA: &str = "flow-labels.v1";
pub const VERDICTS_SCHEMA: &str = "verdicts.v1";
pub const SIDECAR_SCHEMA: &str = "sidecar.v1";
pub const FEATURES_SCHEMA: &str = "features.v1";
pub const CDF_SCHEMA: &str = "cdf.v1";
pub const REPORT_SCHEMA: &str = "report.v1";
pub const MANIFEST_SCHEMA: &str = "manifest.v1";

/// Write `bytes` to `path` via a temporary sibling plus rename.
pub fn atomic_write(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Data(format!("cannot write to {}", path.display())))?;
    let tmp = path.with_file_name(format!("{}.tmp", file_name.to_string_lossy()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: impl AsRef<Path>) -> Result<String> {
    Ok(digest_bytes(&std::fs::read(path)?))
}

fn inject_schema<T: Serialize>(record: &T, schema: &str) -> Result<serde_json::Value> {
    let mut value = serde_json::to_value(record)
        .map_err(|e| Error::Data(format!("record serialization failed: {e}")))?;
    let object = value
        .as_object_mut()
        .ok_or_else(|| Error::Data("records must serialize to JSON objects".into()))?;
    object.insert("schema".into(), serde_json::Value::String(schema.into()));
    Ok(value)
}

fn extract_schema(value: &mut serde_json::Value, expected: &str) -> Result<()> {
    let found = value
        .as_object_mut()
        .and_then(|o| o.remove("schema"))
        .and_then(|s| s.as_str().map(str::to_string))
        .unwrap_or_else(|| "<missing>".to_string());
    if found != expected {
        return Err(Error::Schema {
            expected: expected.to_string(),
            found,
        });
    }
    Ok(())
}

/// Write records as line-delimited JSON, one object per line, each carrying
/// the schema version.
pub fn write_jsonl<T: Serialize>(
    path: impl AsRef<Path>,
    schema: &str,
    records: &[T],
) -> Result<()> {
    let mut out = String::new();
    for record in records {
        let value = inject_schema(record, schema)?;
        out.push_str(&value.to_string());
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Read line-delimited JSON records, verifying the schema of every line.
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>, schema: &str) -> Result<Vec<T>> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path)?;
    let mut records = Vec::new();
    for (lineno, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut value: serde_json::Value = serde_json::from_str(line).map_err(|e| {
            Error::Data(format!(
                "{}:{}: not valid JSON: {e}",
                path.display(),
                lineno + 1
            ))
        })?;
        extract_schema(&mut value, schema)?;
        records.push(serde_json::from_value(value).map_err(|e| {
            Error::Data(format!(
                "{}:{}: malformed record: {e}",
                path.display(),
                lineno + 1
            ))
        })?);
    }
    Ok(records)
}

/// Write one JSON object with the schema version injected.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, schema: &str, value: &T) -> Result<()> {
    let value = inject_schema(value, schema)?;
    let mut bytes = serde_json::to_vec_pretty(&value)
        .map_err(|e| Error::Data(format!("serialization failed: {e}")))?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>, schema: &str) -> Result<T> {
    let raw = std::fs::read_to_string(path.as_ref())?;
    let mut value: serde_json::Value =
        serde_json::from_str(&raw).map_err(|e| Error::Data(format!("not valid JSON: {e}")))?;
    extract_schema(&mut value, schema)?;
    serde_json::from_value(value).map_err(|e| Error::Data(format!("malformed artifact: {e}")))
}

/// Export flow features as a tab-separated table: version row, header row
/// (flow id, the 31 statistical names, one sparse lexical column), then one
/// row per flow. Lexical entries are space-separated `name:value` pairs;
/// names may contain colons, values never do, so `rsplit(':')` parses them.
pub fn write_features_tsv(path: impl AsRef<Path>, flows: &[HttpFlow]) -> Result<()> {
    let mut out = String::new();
    out.push_str(FEATURES_SCHEMA);
    out.push('\n');
    out.push_str("flow_id");
    for name in StatVector::FIELD_NAMES {
        out.push('\t');
        out.push_str(name);
    }
    out.push_str("\tlexical\n");
    for flow in flows {
        out.push_str(&flow.id);
        for value in crate::features::stat_features(flow).to_array() {
            out.push('\t');
            out.push_str(&value.to_string());
        }
        out.push('\t');
        let lexical = flow_features(flow, FeatureSet::Lexical);
        let mut first = true;
        for (name, value) in lexical.iter() {
            if !first {
                out.push(' ');
            }
            first = false;
            out.push_str(&format!("{name}:{value}"));
        }
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Export per-class CDF tables as tab-separated rows of
/// (class, value, cumulative fraction). Classes without rows are recorded
/// as a `# empty:` comment so their absence is visible in the artifact.
pub fn write_cdf_tsv(path: impl AsRef<Path>, selector: &str, tables: &[ClassCdf]) -> Result<()> {
    let mut out = String::new();
    out.push_str(CDF_SCHEMA);
    out.push('\n');
    out.push_str(&format!("# selector: {selector}\n"));
    out.push_str("class\tvalue\tcumulative_fraction\n");
    for table in tables {
        if table.empty {
            out.push_str(&format!("# empty: {}\n", table.label));
            continue;
        }
        for (value, fraction) in &table.points {
            out.push_str(&format!("{}\t{}\t{}\n", table.label, value, fraction));
        }
    }
    atomic_write(path, out.as_bytes())
}

/// One sidecar rule: the filter fields that are present must all match the
/// flow's canonical (device to server) 4-tuple; the first matching rule in
/// file order assigns the metadata.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SidecarRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src_ip: Option<IpAddr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src_port: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dst_ip: Option<IpAddr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dst_port: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taint_location: Option<bool>,
}

impl SidecarRule {
    fn matches(&self, flow: &HttpFlow) -> bool {
        self.src_ip.is_none_or(|v| v == flow.key.src_ip)
            && self.src_port.is_none_or(|v| v == flow.key.src_port)
            && self.dst_ip.is_none_or(|v| v == flow.key.dst_ip)
            && self.dst_port.is_none_or(|v| v == flow.key.dst_port)
    }
}

pub fn read_sidecar(path: impl AsRef<Path>) -> Result<Vec<SidecarRule>> {
    read_jsonl(path, SIDECAR_SCHEMA)
}

/// Attach instance ids and taint verdicts to flows. For each flow the first
/// matching rule wins; rules never clear fields they do not set.
pub fn apply_sidecar(flows: &mut [HttpFlow], rules: &[SidecarRule]) {
    for flow in flows {
        if let Some(rule) = rules.iter().find(|r| r.matches(flow)) {
            if rule.instance_id.is_some() {
                flow.source_instance_id = rule.instance_id.clone();
            }
            if rule.taint_location.is_some() {
                flow.taint_location = rule.taint_location;
            }
        }
    }
}

/// Provenance record written next to every stage's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub stage: String,
    pub tool_version: String,
    pub seed: u64,
    /// Input path → SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    /// Output path → SHA-256 of its bytes.
    pub outputs: BTreeMap<String, String>,
    /// The resolved stage configuration.
    pub config: serde_json::Value,
    /// Unix timestamp; the only field allowed to differ between reruns.
    pub created_unix: u64,
}

impl Manifest {
    pub fn new(stage: &str, seed: u64, config: serde_json::Value) -> Manifest {
        Manifest {
            schema: MANIFEST_SCHEMA.to_string(),
            stage: stage.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            config,
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn record_input(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.inputs
            .insert(path.display().to_string(), file_digest(path)?);
        Ok(())
    }

    pub fn record_output(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.outputs
            .insert(path.display().to_string(), file_digest(path)?);
        Ok(())
    }

    /// Write `<stage>.manifest.json` into `dir` and return its path.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let path = dir.as_ref().join(format!("{}.manifest.json", self.stage));
        let mut bytes = serde_json::to_vec_pretty(self)
            .map_err(|e| Error::Data(format!("manifest serialization failed: {e}")))?;
        bytes.push(b'\n');
        atomic_write(&path, &bytes)?;
        Ok(path)
    }
}
