//! End-to-end orchestration: consensus voting over app contexts, automatic
//! flow labeling, flow dataset assembly, and bundle-based classification.
//!
//! The training side may read app-level context (names, descriptions, UI
//! strings); the classification side reads nothing but the flow and the
//! bundle, so a deployed model needs only network traffic.

mod bundle;
mod hostlist;

pub use bundle::{ModelBundle, BUNDLE_SCHEMA};
pub use hostlist::HostnameList;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::capture::{detect_coordinates, HttpFlow};
use crate::context::{context_vector, AppContext, TopicConfig};
use crate::error::{Error, Result};
use crate::features::{flow_lexical_features, stat_features, SparseFeatureVector, StatVector};
use crate::learn::{Classifier, LabeledDataset, Prediction};

pub const EXPECTED_LABEL: &str = "expected";
pub const UNEXPECTED_LABEL: &str = "unexpected";

/// How the consensus vote settled one running instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceVerdict {
    Expected,
    Unexpected,
    /// The voters disagreed; the instance contributes nothing downstream.
    Filtered,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceLabel {
    pub instance_id: String,
    pub verdict: InstanceVerdict,
}

/// The three flow classes of the detection problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowClass {
    IllegalLoc,
    LegalLoc,
    NonLoc,
}

impl FlowClass {
    /// All classes, in the sorted label order used by every dataset.
    pub const ALL: [FlowClass; 3] = [
        FlowClass::IllegalLoc,
        FlowClass::LegalLoc,
        FlowClass::NonLoc,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FlowClass::IllegalLoc => "illegal-loc",
            FlowClass::LegalLoc => "legal-loc",
            FlowClass::NonLoc => "non-loc",
        }
    }
}

impl std::fmt::Display for FlowClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FlowClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<FlowClass> {
        match s {
            "illegal-loc" => Ok(FlowClass::IllegalLoc),
            "legal-loc" => Ok(FlowClass::LegalLoc),
            "non-loc" => Ok(FlowClass::NonLoc),
            other => Err(Error::Data(format!(
                "unknown flow class {other:?}; expected illegal-loc, legal-loc, or non-loc"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowLabel {
    pub flow_id: String,
    pub class: FlowClass,
}

/// Unanimity vote over the three intention classifiers. Any disagreement
/// filters the instance instead of guessing.
pub fn consensus_vote(p_rf: &str, p_nb: &str, p_lr: &str) -> Option<String> {
    (p_rf == p_nb && p_nb == p_lr).then(|| p_rf.to_string())
}

/// Voting core, separated from model inference so tests can feed crafted
/// prediction triples. Triples are (RF, NB, LR) labels per instance.
pub fn vote_instances(predictions: &[(String, [String; 3])]) -> Vec<InstanceLabel> {
    predictions
        .iter()
        .map(|(instance_id, [rf, nb, lr])| {
            let verdict = match consensus_vote(rf, nb, lr).as_deref() {
                Some(EXPECTED_LABEL) => InstanceVerdict::Expected,
                Some(UNEXPECTED_LABEL) => InstanceVerdict::Unexpected,
                // Voters are trained on the two-label space; anything else
                // is treated as disagreement rather than trusted.
                Some(_) | None => InstanceVerdict::Filtered,
            };
            InstanceLabel {
                instance_id: instance_id.clone(),
                verdict,
            }
        })
        .collect()
}

/// Run the three trained voters over every context and apply consensus
/// voting. One label per context, in input order.
pub fn label_instances(
    contexts: &[AppContext],
    config: &TopicConfig,
    rf: &dyn Classifier,
    nb: &dyn Classifier,
    lr: &dyn Classifier,
) -> Vec<InstanceLabel> {
    let predictions: Vec<(String, [String; 3])> = contexts
        .iter()
        .map(|context| {
            let features = context_vector(context, config);
            (
                context.instance_id.clone(),
                [
                    rf.predict(&features).label,
                    nb.predict(&features).label,
                    lr.predict(&features).label,
                ],
            )
        })
        .collect();
    vote_instances(&predictions)
}

/// A flow carries location data when the external taint annotation says so
/// or when any of its request URLs contains a coordinate pair.
pub fn is_location_flow(flow: &HttpFlow) -> bool {
    flow.taint_location == Some(true)
        || flow
            .requests
            .iter()
            .any(|r| detect_coordinates(&r.full_url).is_some())
}

/// Drop tallies from [`auto_label_flows`]. Dropped flows get no label and
/// never reach training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabelDiagnostics {
    pub labeled: usize,
    /// Flows whose instance was filtered by consensus voting.
    pub dropped_filtered: usize,
    /// Location flows whose instance id was absent or unknown.
    pub dropped_unresolved: usize,
}

/// Label flows from the instance verdicts and the ad/analytics hostname
/// list. Rules, in order: flows of filtered instances are dropped;
/// non-location flows are non-loc; location flows need a resolvable
/// instance (otherwise dropped and counted); unexpected instances make
/// them illegal-loc; expected instances make them illegal-loc when a
/// request host matches the hostname list, legal-loc otherwise.
pub fn auto_label_flows(
    flows: &[HttpFlow],
    instance_labels: &[InstanceLabel],
    hostlist: &HostnameList,
) -> (Vec<FlowLabel>, LabelDiagnostics) {
    let verdict_of: BTreeMap<&str, InstanceVerdict> = instance_labels
        .iter()
        .map(|l| (l.instance_id.as_str(), l.verdict))
        .collect();

    enum Outcome {
        Labeled(FlowClass),
        DroppedFiltered,
        DroppedUnresolved,
    }

    let outcomes: Vec<(String, Outcome)> = flows
        .par_iter()
        .map(|flow| {
            let verdict = flow
                .source_instance_id
                .as_deref()
                .and_then(|id| verdict_of.get(id).copied());
            let outcome = match verdict {
                Some(InstanceVerdict::Filtered) => Outcome::DroppedFiltered,
                _ if !is_location_flow(flow) => Outcome::Labeled(FlowClass::NonLoc),
                None => Outcome::DroppedUnresolved,
                Some(InstanceVerdict::Unexpected) => Outcome::Labeled(FlowClass::IllegalLoc),
                Some(InstanceVerdict::Expected) => {
                    if flow.requests.iter().any(|r| hostlist.matches(&r.host)) {
                        Outcome::Labeled(FlowClass::IllegalLoc)
                    } else {
                        Outcome::Labeled(FlowClass::LegalLoc)
                    }
                }
            };
            (flow.id.clone(), outcome)
        })
        .collect();

    let mut labels = Vec::new();
    let mut diagnostics = LabelDiagnostics::default();
    for (flow_id, outcome) in outcomes {
        match outcome {
            Outcome::Labeled(class) => {
                diagnostics.labeled += 1;
                labels.push(FlowLabel { flow_id, class });
            }
            Outcome::DroppedFiltered => diagnostics.dropped_filtered += 1,
            Outcome::DroppedUnresolved => diagnostics.dropped_unresolved += 1,
        }
    }
    (labels, diagnostics)
}

/// Which feature families go into a flow vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSet {
    Stats,
    Lexical,
    Both,
}

impl FeatureSet {
    pub fn includes_stats(&self) -> bool {
        matches!(self, FeatureSet::Stats | FeatureSet::Both)
    }

    pub fn includes_lexical(&self) -> bool {
        matches!(self, FeatureSet::Lexical | FeatureSet::Both)
    }
}

/// Featurize one flow. The statistical names never collide with the
/// host:/path:/len_* lexical names, so the union is lossless.
pub fn flow_features(flow: &HttpFlow, set: FeatureSet) -> SparseFeatureVector {
    let mut out = SparseFeatureVector::new();
    if set.includes_stats() {
        out.union(&stat_features(flow).to_sparse());
    }
    if set.includes_lexical() {
        out.union(&flow_lexical_features(flow));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetMode {
    Supervised,
    OneClass,
}

/// Join flows with their labels and build a training dataset.
///
/// Supervised mode keeps all three classes and fails by name when one is
/// empty. One-class mode keeps only illegal-loc rows. The vocabulary is the
/// union of feature names over retained rows, plus every one of the 31
/// statistical names when stats are in the feature set (zero-valued stats
/// are absent from sparse rows but still belong to the schema).
pub fn build_flow_dataset(
    flows: &[HttpFlow],
    labels: &[FlowLabel],
    mode: DatasetMode,
    features: FeatureSet,
) -> Result<LabeledDataset> {
    let mut class_of: BTreeMap<&str, FlowClass> = BTreeMap::new();
    for label in labels {
        if class_of
            .insert(label.flow_id.as_str(), label.class)
            .is_some()
        {
            return Err(Error::Data(format!(
                "flow {:?} labeled more than once",
                label.flow_id
            )));
        }
    }

    let retained: Vec<(&HttpFlow, FlowClass)> = flows
        .iter()
        .filter_map(|flow| class_of.get(flow.id.as_str()).map(|c| (flow, *c)))
        .filter(|(_, class)| match mode {
            DatasetMode::Supervised => true,
            DatasetMode::OneClass => *class == FlowClass::IllegalLoc,
        })
        .collect();

    let label_space: Vec<String> = match mode {
        DatasetMode::Supervised => FlowClass::ALL.iter().map(|c| c.to_string()).collect(),
        DatasetMode::OneClass => vec![FlowClass::IllegalLoc.to_string()],
    };
    for class in &label_space {
        if !retained.iter().any(|(_, c)| c.to_string() == *class) {
            return Err(Error::EmptyClass(class.clone()));
        }
    }

    let rows: Vec<(SparseFeatureVector, String)> = retained
        .par_iter()
        .map(|(flow, class)| (flow_features(flow, features), class.to_string()))
        .collect();

    let mut vocabulary: BTreeSet<String> = rows
        .iter()
        .flat_map(|(f, _)| f.names().map(str::to_string))
        .collect();
    if features.includes_stats() {
        vocabulary.extend(StatVector::FIELD_NAMES.iter().map(|s| s.to_string()));
    }

    Ok(LabeledDataset {
        rows,
        label_space,
        vocabulary: vocabulary.into_iter().collect(),
    })
}

/// One-class half of a verdict: `illegal-loc` when the decision function is
/// nonnegative, `other` outside the learned support region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneClassVerdict {
    pub label: String,
    pub decision: f64,
}

/// What the deployed classifier reports for one flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowVerdict {
    pub flow_id: String,
    pub supervised: Prediction,
    pub one_class: OneClassVerdict,
    /// SHA-256 over the feature vector (names and exact value bits), for
    /// auditing which inputs produced the verdict.
    pub feature_hash: String,
}

/// Stable digest of a sparse vector: entries in name order, each hashed as
/// name, NUL, little-endian IEEE-754 bits, newline.
pub fn feature_hash(features: &SparseFeatureVector) -> String {
    let mut hasher = Sha256::new();
    for (name, value) in features.iter() {
        hasher.update(name.as_bytes());
        hasher.update([0u8]);
        hasher.update(value.to_bits().to_le_bytes());
        hasher.update(*b"\n");
    }
    hex::encode(hasher.finalize())
}

/// Classify one flow with a loaded bundle. Reads nothing but the flow's
/// packets and requests; app context never enters this path.
pub fn classify_flow(bundle: &ModelBundle, flow: &HttpFlow) -> FlowVerdict {
    let features = flow_features(flow, bundle.feature_set);
    let supervised = bundle.flow_rf.predict(&features);
    let decision = bundle.flow_ocsvm.decision(&features);
    FlowVerdict {
        flow_id: flow.id.clone(),
        supervised,
        one_class: OneClassVerdict {
            label: if decision >= 0.0 {
                FlowClass::IllegalLoc.to_string()
            } else {
                "other".to_string()
            },
            decision,
        },
        feature_hash: feature_hash(&features),
    }
}
