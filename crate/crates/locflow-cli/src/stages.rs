//! The pipeline stages behind the subcommands. Every stage reads its inputs
//! from disk, writes its artifacts atomically with embedded schema versions,
//! and drops a manifest recording input/output digests, the resolved config,
//! the seed, and the tool version. Re-running a stage with identical inputs,
//! config, and seed reproduces every artifact byte for byte; only the
//! manifest timestamp may differ.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use locflow::capture::{read_pcap, sessionize as sessionize_packets, CaptureDiagnostics, HttpFlow};
use locflow::context::{context_vector, AppContext, TopicConfig};
use locflow::eval::{cdf_export, kfold, ConfusionMatrix, EvalReport};
use locflow::features::{stat_features, SparseFeatureVector, StatVector};
use locflow::io::{self, Manifest};
use locflow::learn::{
    info_gain, train_logistic, train_naive_bayes, train_ocsvm, train_random_forest, LabeledDataset,
    LrModel, NbModel, RfModel,
};
use locflow::pipeline::{
    auto_label_flows, build_flow_dataset, classify_flow, flow_features, label_instances,
    DatasetMode, FlowClass, FlowLabel, FlowVerdict, HostnameList, ModelBundle, BUNDLE_SCHEMA,
    EXPECTED_LABEL, UNEXPECTED_LABEL,
};

use crate::config::RunConfig;
use crate::Failure;

pub const FLOWS_FILE: &str = "flows.jsonl";
pub const FEATURES_FILE: &str = "features.tsv";
pub const CONTEXT_MODELS_FILE: &str = "context-models.json";
pub const INSTANCE_LABELS_FILE: &str = "instance-labels.jsonl";
pub const FLOW_LABELS_FILE: &str = "flow-labels.jsonl";
pub const BUNDLE_FILE: &str = "bundle.json";
pub const VERDICTS_FILE: &str = "verdicts.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const REPORT_TEXT_FILE: &str = "report.txt";
pub const ONE_CLASS_REPORT_FILE: &str = "one-class-report.json";
pub const ONE_CLASS_REPORT_TEXT_FILE: &str = "one-class-report.txt";

const CONTEXT_MODELS_SCHEMA: &str = "context-models.v1";
const INSTANCE_TRUTH_SCHEMA: &str = "instance-truth.v1";

/// Ground-truth intent label for one running instance: "expected" or
/// "unexpected".
#[derive(Debug, Clone, Serialize, Deserialize)]
struct InstanceTruth {
    instance_id: String,
    label: String,
}

/// The trained context voters, persisted between train-context and label.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ContextModels {
    rf: RfModel,
    nb: NbModel,
    lr: LrModel,
    vocabulary: Vec<String>,
    topic_config_digest: String,
}

/// Resolve an artifact a stage depends on, naming the stage that produces
/// it when it is absent.
fn require_artifact(config: &RunConfig, file: &str, producer: &str) -> Result<PathBuf, Failure> {
    let path = config.out(file);
    if !path.exists() {
        return Err(Failure::Data(format!(
            "missing artifact {}; run the {producer} stage first",
            path.display()
        )));
    }
    Ok(path)
}

fn stage_manifest(config: &RunConfig, stage: &str) -> Manifest {
    Manifest::new(stage, config.seed, config.manifest_value())
}

pub fn sessionize(config: &RunConfig) -> Result<(), Failure> {
    let mut manifest = stage_manifest(config, "sessionize");
    let mut flows: Vec<HttpFlow> = Vec::new();
    let mut totals = CaptureDiagnostics::default();
    for capture in &config.paths.captures {
        manifest.record_input(capture)?;
        let (packets, diagnostics) = read_pcap(capture)?;
        totals.total_records += diagnostics.total_records;
        totals.malformed_records += diagnostics.malformed_records;
        totals.non_ip += diagnostics.non_ip;
        totals.non_tcp += diagnostics.non_tcp;
        flows.extend(sessionize_packets(
            packets,
            config.sessionize.idle_timeout_secs,
        ));
    }
    // Each capture is sessionized on its own (timestamps need not be
    // monotone across files); renumber so ids are unique across the run.
    for (seq, flow) in flows.iter_mut().enumerate() {
        flow.id = format!("flow-{seq:06}");
    }
    if let Some(sidecar) = &config.paths.sidecar {
        manifest.record_input(sidecar)?;
        let rules = io::read_sidecar(sidecar)?;
        io::apply_sidecar(&mut flows, &rules);
    }
    let out = config.out(FLOWS_FILE);
    io::write_jsonl(&out, io::FLOWS_SCHEMA, &flows)?;
    manifest.record_output(&out)?;
    manifest.write(&config.paths.out_dir)?;
    println!(
        "sessionize: {} flows from {} captures ({} records, {} malformed, {} non-ip, {} non-tcp)",
        flows.len(),
        config.paths.captures.len(),
        totals.total_records,
        totals.malformed_records,
        totals.non_ip,
        totals.non_tcp
    );
    Ok(())
}

pub fn featurize(config: &RunConfig) -> Result<(), Failure> {
    let flows_path = require_artifact(config, FLOWS_FILE, "sessionize")?;
    let mut manifest = stage_manifest(config, "featurize");
    manifest.record_input(&flows_path)?;
    let flows: Vec<HttpFlow> = io::read_jsonl(&flows_path, io::FLOWS_SCHEMA)?;
    let out = config.out(FEATURES_FILE);
    io::write_features_tsv(&out, &flows)?;
    manifest.record_output(&out)?;
    manifest.write(&config.paths.out_dir)?;
    println!(
        "featurize: {} rows written to {}",
        flows.len(),
        out.display()
    );
    Ok(())
}

pub fn train_context(config: &RunConfig) -> Result<(), Failure> {
    let mut manifest = stage_manifest(config, "train-context");
    manifest.record_input(&config.paths.contexts)?;
    manifest.record_input(&config.paths.ground_truth)?;
    manifest.record_input(&config.paths.topics)?;

    let contexts: Vec<AppContext> = io::read_jsonl(&config.paths.contexts, io::CONTEXTS_SCHEMA)?;
    let truth: Vec<InstanceTruth> =
        io::read_jsonl(&config.paths.ground_truth, INSTANCE_TRUTH_SCHEMA)?;
    let topics = TopicConfig::load(&config.paths.topics)?;

    let mut label_of: BTreeMap<&str, &str> = BTreeMap::new();
    for entry in &truth {
        if entry.label != EXPECTED_LABEL && entry.label != UNEXPECTED_LABEL {
            return Err(Failure::Data(format!(
                "ground truth labels instance {:?} as {:?}; expected \"{EXPECTED_LABEL}\" or \"{UNEXPECTED_LABEL}\"",
                entry.instance_id, entry.label
            )));
        }
        if label_of.insert(&entry.instance_id, &entry.label).is_some() {
            return Err(Failure::Data(format!(
                "instance {:?} appears twice in the ground truth",
                entry.instance_id
            )));
        }
    }

    let rows: Vec<(SparseFeatureVector, String)> = contexts
        .iter()
        .filter_map(|context| {
            label_of
                .get(context.instance_id.as_str())
                .map(|label| (context_vector(context, &topics), label.to_string()))
        })
        .collect();
    let skipped = contexts.len() - rows.len();
    for label in [EXPECTED_LABEL, UNEXPECTED_LABEL] {
        if !rows.iter().any(|(_, l)| l == label) {
            return Err(Failure::Data(format!(
                "ground truth covers no \"{label}\" instances; the voters need both intent classes"
            )));
        }
    }
    let data = LabeledDataset::from_rows(rows);

    let models = ContextModels {
        rf: train_random_forest(&data, config.context_model.forest(config.seed))?,
        nb: train_naive_bayes(&data, config.context_model.nb_smoothing)?,
        lr: train_logistic(&data, config.context_model.logistic())?,
        vocabulary: data.vocabulary.clone(),
        topic_config_digest: io::file_digest(&config.paths.topics)?,
    };
    let out = config.out(CONTEXT_MODELS_FILE);
    io::write_json(&out, CONTEXT_MODELS_SCHEMA, &models)?;
    manifest.record_output(&out)?;
    manifest.write(&config.paths.out_dir)?;
    println!(
        "train-context: {} labeled instances ({} contexts without ground truth skipped)",
        data.rows.len(),
        skipped
    );
    Ok(())
}

pub fn label(config: &RunConfig) -> Result<(), Failure> {
    let flows_path = require_artifact(config, FLOWS_FILE, "sessionize")?;
    let models_path = require_artifact(config, CONTEXT_MODELS_FILE, "train-context")?;
    let mut manifest = stage_manifest(config, "label");
    for path in [
        flows_path.as_path(),
        models_path.as_path(),
        config.paths.contexts.as_path(),
        config.paths.topics.as_path(),
        config.paths.hostlist.as_path(),
    ] {
        manifest.record_input(path)?;
    }

    let flows: Vec<HttpFlow> = io::read_jsonl(&flows_path, io::FLOWS_SCHEMA)?;
    let models: ContextModels = io::read_json(&models_path, CONTEXT_MODELS_SCHEMA)?;
    let contexts: Vec<AppContext> = io::read_jsonl(&config.paths.contexts, io::CONTEXTS_SCHEMA)?;
    let topics = TopicConfig::load(&config.paths.topics)?;
    let hostlist = HostnameList::load(&config.paths.hostlist)?;

    let instance_labels = label_instances(&contexts, &topics, &models.rf, &models.nb, &models.lr);
    let (flow_labels, diagnostics) = auto_label_flows(&flows, &instance_labels, &hostlist);

    let instances_out = config.out(INSTANCE_LABELS_FILE);
    io::write_jsonl(&instances_out, io::INSTANCE_LABELS_SCHEMA, &instance_labels)?;
    let labels_out = config.out(FLOW_LABELS_FILE);
    io::write_jsonl(&labels_out, io::FLOW_LABELS_SCHEMA, &flow_labels)?;
    manifest.record_output(&instances_out)?;
    manifest.record_output(&labels_out)?;
    manifest.write(&config.paths.out_dir)?;
    println!(
        "label: {} flows labeled, {} dropped as filtered, {} dropped as unresolved",
        diagnostics.labeled, diagnostics.dropped_filtered, diagnostics.dropped_unresolved
    );
    Ok(())
}

pub fn train_flow(config: &RunConfig) -> Result<(), Failure> {
    let flows_path = require_artifact(config, FLOWS_FILE, "sessionize")?;
    let labels_path = require_artifact(config, FLOW_LABELS_FILE, "label")?;
    let models_path = require_artifact(config, CONTEXT_MODELS_FILE, "train-context")?;
    let mut manifest = stage_manifest(config, "train-flow");
    for path in [
        flows_path.as_path(),
        labels_path.as_path(),
        models_path.as_path(),
        config.paths.hostlist.as_path(),
    ] {
        manifest.record_input(path)?;
    }

    let flows: Vec<HttpFlow> = io::read_jsonl(&flows_path, io::FLOWS_SCHEMA)?;
    let flow_labels: Vec<FlowLabel> = io::read_jsonl(&labels_path, io::FLOW_LABELS_SCHEMA)?;
    let context: ContextModels = io::read_json(&models_path, CONTEXT_MODELS_SCHEMA)?;
    let hostlist = HostnameList::load(&config.paths.hostlist)?;

    // The bundle always carries both flow models: classify reports a
    // supervised and a one-class verdict per flow, whatever the evaluate
    // mode. The mode only selects which of them evaluate scores.
    let feature_set = config.flow_model.feature_set;
    let supervised =
        build_flow_dataset(&flows, &flow_labels, DatasetMode::Supervised, feature_set)?;
    let flow_rf = train_random_forest(&supervised, config.flow_model.forest(config.seed))?;

    let one_class = build_flow_dataset(&flows, &flow_labels, DatasetMode::OneClass, feature_set)?;
    let oc_rows: Vec<SparseFeatureVector> = one_class
        .rows
        .iter()
        .map(|(features, _)| features.clone())
        .collect();
    let flow_ocsvm = train_ocsvm(&oc_rows, &one_class.vocabulary, config.flow_model.ocsvm())?;

    let bundle = ModelBundle {
        schema: BUNDLE_SCHEMA.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        context_rf: context.rf,
        context_nb: context.nb,
        context_lr: context.lr,
        context_vocabulary: context.vocabulary,
        topic_config_digest: context.topic_config_digest,
        flow_rf,
        flow_ocsvm,
        flow_vocabulary: supervised.vocabulary.clone(),
        feature_set,
        hostlist_digest: hostlist.digest.clone(),
    };
    let out = config.out(BUNDLE_FILE);
    bundle.save(&out)?;
    manifest.record_output(&out)?;
    manifest.write(&config.paths.out_dir)?;
    println!(
        "train-flow: supervised model on {} rows, one-class model on {} rows",
        supervised.rows.len(),
        oc_rows.len()
    );
    Ok(())
}

pub fn classify(config: &RunConfig, flows_override: Option<&Path>) -> Result<(), Failure> {
    let bundle_path = require_artifact(config, BUNDLE_FILE, "train-flow")?;
    let flows_path = match flows_override {
        Some(path) if !path.exists() => {
            return Err(Failure::Usage(format!(
                "flow artifact {} does not exist",
                path.display()
            )));
        }
        Some(path) => path.to_path_buf(),
        None => require_artifact(config, FLOWS_FILE, "sessionize")?,
    };
    let mut manifest = stage_manifest(config, "classify");
    manifest.record_input(&bundle_path)?;
    manifest.record_input(&flows_path)?;

    let bundle = ModelBundle::load(&bundle_path)?;
    let flows: Vec<HttpFlow> = io::read_jsonl(&flows_path, io::FLOWS_SCHEMA)?;
    let verdicts: Vec<FlowVerdict> = flows
        .par_iter()
        .map(|f| classify_flow(&bundle, f))
        .collect();
    let out = config.out(VERDICTS_FILE);
    io::write_jsonl(&out, io::VERDICTS_SCHEMA, &verdicts)?;
    manifest.record_output(&out)?;
    manifest.write(&config.paths.out_dir)?;
    let illegal = FlowClass::IllegalLoc.to_string();
    let flagged = verdicts
        .iter()
        .filter(|v| v.supervised.label == illegal)
        .count();
    println!(
        "classify: {} flows, {} flagged {illegal} by the supervised model",
        verdicts.len(),
        flagged
    );
    Ok(())
}

pub fn evaluate(config: &RunConfig) -> Result<(), Failure> {
    let flows_path = require_artifact(config, FLOWS_FILE, "sessionize")?;
    let labels_path = require_artifact(config, FLOW_LABELS_FILE, "label")?;
    let mut manifest = stage_manifest(config, "evaluate");
    manifest.record_input(&flows_path)?;
    manifest.record_input(&labels_path)?;

    let flows: Vec<HttpFlow> = io::read_jsonl(&flows_path, io::FLOWS_SCHEMA)?;
    let flow_labels: Vec<FlowLabel> = io::read_jsonl(&labels_path, io::FLOW_LABELS_SCHEMA)?;
    let feature_set = config.flow_model.feature_set;

    if config.mode.supervised() {
        let supervised =
            build_flow_dataset(&flows, &flow_labels, DatasetMode::Supervised, feature_set)?;
        let forest = config.flow_model.forest(config.seed);
        let (_, mut report) = kfold(&supervised, config.evaluate.folds, config.seed, |train| {
            train_random_forest(train, forest)
        })?;
        let mut ranking = info_gain(&supervised);
        ranking.truncate(config.evaluate.top_features);
        report.feature_ranking = ranking;
        write_report(
            config,
            &mut manifest,
            &report,
            REPORT_FILE,
            REPORT_TEXT_FILE,
        )?;
        println!(
            "evaluate: supervised weighted F {:.4} over {} folds",
            report.weighted.f_measure, config.evaluate.folds
        );
    }
    if config.mode.one_class() {
        let report = one_class_report(config, &flows, &flow_labels)?;
        write_report(
            config,
            &mut manifest,
            &report,
            ONE_CLASS_REPORT_FILE,
            ONE_CLASS_REPORT_TEXT_FILE,
        )?;
        println!(
            "evaluate: one-class F {:.4} on the held-out mix",
            report.per_class[0].metrics.f_measure
        );
    }
    manifest.write(&config.paths.out_dir)?;
    Ok(())
}

fn write_report(
    config: &RunConfig,
    manifest: &mut Manifest,
    report: &EvalReport,
    json_file: &str,
    text_file: &str,
) -> Result<(), Failure> {
    let json_out = config.out(json_file);
    io::write_json(&json_out, io::REPORT_SCHEMA, report)?;
    manifest.record_output(&json_out)?;
    let text_out = config.out(text_file);
    let text = format!("{}\n{}", io::REPORT_SCHEMA, report.render_text());
    io::atomic_write(&text_out, text.as_bytes())?;
    manifest.record_output(&text_out)?;
    Ok(())
}

/// Score the one-class model on a holdout: train on every other illegal
/// flow (even positions, in flow order) and test on the held-out illegal
/// flows plus every labeled non-illegal flow.
fn one_class_report(
    config: &RunConfig,
    flows: &[HttpFlow],
    labels: &[FlowLabel],
) -> Result<EvalReport, Failure> {
    let feature_set = config.flow_model.feature_set;
    let class_of: BTreeMap<&str, FlowClass> = labels
        .iter()
        .map(|l| (l.flow_id.as_str(), l.class))
        .collect();
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for flow in flows {
        match class_of.get(flow.id.as_str()) {
            Some(FlowClass::IllegalLoc) => positives.push(flow_features(flow, feature_set)),
            Some(_) => negatives.push(flow_features(flow, feature_set)),
            None => {}
        }
    }
    if positives.len() < 2 || negatives.is_empty() {
        return Err(Failure::Data(format!(
            "one-class evaluation needs at least 2 illegal-loc flows and 1 other flow; have {} and {}",
            positives.len(),
            negatives.len()
        )));
    }
    let mut train = Vec::new();
    let mut held_out = Vec::new();
    for (i, features) in positives.into_iter().enumerate() {
        if i % 2 == 0 {
            train.push(features);
        } else {
            held_out.push(features);
        }
    }

    // Same vocabulary convention as dataset assembly: names present in the
    // training rows, plus the full statistical schema when stats are in.
    let mut vocabulary: BTreeSet<String> = train
        .iter()
        .flat_map(|f| f.names().map(str::to_string))
        .collect();
    if feature_set.includes_stats() {
        vocabulary.extend(StatVector::FIELD_NAMES.iter().map(|s| s.to_string()));
    }
    let vocabulary: Vec<String> = vocabulary.into_iter().collect();
    let model = train_ocsvm(&train, &vocabulary, config.flow_model.ocsvm())?;

    let positive = FlowClass::IllegalLoc.to_string();
    let mut cm = ConfusionMatrix::new(vec![positive.clone(), "other".to_string()]);
    for (actual, rows) in [(positive.as_str(), &held_out), ("other", &negatives)] {
        for features in rows {
            let predicted = if model.decision(features) >= 0.0 {
                positive.as_str()
            } else {
                "other"
            };
            cm.record(actual, predicted)?;
        }
    }
    let mut report = EvalReport::from_confusion(cm)?;
    report.seed = Some(config.seed);
    Ok(report)
}

pub fn cdf(config: &RunConfig, selector_override: Option<&str>) -> Result<(), Failure> {
    // The override must show up in the manifest's resolved config.
    let mut resolved = config.clone();
    if let Some(selector) = selector_override {
        resolved.cdf.selector = selector.to_string();
    }
    let config = &resolved;
    let selector = config.cdf.selector.as_str();

    let flows_path = require_artifact(config, FLOWS_FILE, "sessionize")?;
    let labels_path = require_artifact(config, FLOW_LABELS_FILE, "label")?;
    let mut manifest = stage_manifest(config, "cdf");
    manifest.record_input(&flows_path)?;
    manifest.record_input(&labels_path)?;

    let flows: Vec<HttpFlow> = io::read_jsonl(&flows_path, io::FLOWS_SCHEMA)?;
    let flow_labels: Vec<FlowLabel> = io::read_jsonl(&labels_path, io::FLOW_LABELS_SCHEMA)?;
    let class_of: BTreeMap<&str, FlowClass> = flow_labels
        .iter()
        .map(|l| (l.flow_id.as_str(), l.class))
        .collect();
    let rows: Vec<(StatVector, String)> = flows
        .iter()
        .filter_map(|flow| {
            class_of
                .get(flow.id.as_str())
                .map(|class| (stat_features(flow), class.to_string()))
        })
        .collect();
    let label_space: Vec<String> = FlowClass::ALL.iter().map(|c| c.to_string()).collect();
    let tables = cdf_export(&rows, &label_space, selector)?;

    let out = config.out(&format!("cdf-{selector}.tsv"));
    io::write_cdf_tsv(&out, selector, &tables)?;
    manifest.record_output(&out)?;
    manifest.write(&config.paths.out_dir)?;
    println!("cdf: {selector} over {} labeled flows", rows.len());
    Ok(())
}

/// Every stage in pipeline order on the configured inputs.
pub fn run_all(config: &RunConfig) -> Result<(), Failure> {
    sessionize(config)?;
    featurize(config)?;
    train_context(config)?;
    label(config)?;
    train_flow(config)?;
    classify(config, None)?;
    evaluate(config)?;
    cdf(config, None)?;
    Ok(())
}
