//! The run configuration: one TOML file naming every input, the output
//! directory, the seed, and the hyperparameter overrides. The `--seed` flag
//! replaces the configured seed before validation, and the `LOCFLOW_OUT`
//! environment variable replaces the output directory; nothing else is
//! overridable from the environment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use locflow::learn::{ForestConfig, LogisticConfig, OcsvmConfig};
use locflow::pipeline::FeatureSet;

use crate::Failure;

/// Used when neither the config nor the `--seed` flag sets one.
pub const DEFAULT_SEED: u64 = 42;

/// Which flow models the `evaluate` stage scores.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Supervised,
    OneClass,
    #[default]
    Both,
}

impl Mode {
    pub fn supervised(&self) -> bool {
        matches!(self, Mode::Supervised | Mode::Both)
    }

    pub fn one_class(&self) -> bool {
        matches!(self, Mode::OneClass | Mode::Both)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Capture files, sessionized in the listed order.
    pub captures: Vec<PathBuf>,
    /// Optional flow metadata (instance ids, taint verdicts).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sidecar: Option<PathBuf>,
    /// Recorded app contexts, one per running instance.
    pub contexts: PathBuf,
    /// Topic keywords, city gazetteer, and app-name wordlist.
    pub topics: PathBuf,
    /// Ad/analytics hostname suffixes.
    pub hostlist: PathBuf,
    /// Instance-level intent labels that train the context voters.
    pub ground_truth: PathBuf,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionizeConfig {
    /// Idle gap that closes a session, in seconds.
    pub idle_timeout_secs: f64,
}

impl Default for SessionizeConfig {
    fn default() -> Self {
        SessionizeConfig {
            idle_timeout_secs: 60.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContextModelConfig {
    pub rf_trees: usize,
    pub nb_smoothing: f64,
    pub lr_learning_rate: f64,
    pub lr_epochs: usize,
    pub lr_l2: f64,
}

impl Default for ContextModelConfig {
    fn default() -> Self {
        let lr = LogisticConfig::default();
        ContextModelConfig {
            rf_trees: ForestConfig::default().n_trees,
            nb_smoothing: 1.0,
            lr_learning_rate: lr.learning_rate,
            lr_epochs: lr.epochs,
            lr_l2: lr.l2,
        }
    }
}

impl ContextModelConfig {
    pub fn forest(&self, seed: u64) -> ForestConfig {
        ForestConfig {
            n_trees: self.rf_trees,
            seed,
            ..ForestConfig::default()
        }
    }

    pub fn logistic(&self) -> LogisticConfig {
        LogisticConfig {
            learning_rate: self.lr_learning_rate,
            epochs: self.lr_epochs,
            l2: self.lr_l2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowModelConfig {
    /// Feature families in the flow vectors: "stats", "lexical", or "both".
    pub feature_set: FeatureSet,
    pub rf_trees: usize,
    pub rf_min_leaf: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rf_max_depth: Option<usize>,
    pub ocsvm_nu: f64,
    /// RBF width; omitted means 1/dimension.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ocsvm_gamma: Option<f64>,
    pub ocsvm_tolerance: f64,
    pub ocsvm_max_iterations: usize,
}

impl Default for FlowModelConfig {
    fn default() -> Self {
        let rf = ForestConfig::default();
        let oc = OcsvmConfig::default();
        FlowModelConfig {
            feature_set: FeatureSet::Both,
            rf_trees: rf.n_trees,
            rf_min_leaf: rf.min_leaf,
            rf_max_depth: rf.max_depth,
            ocsvm_nu: oc.nu,
            ocsvm_gamma: oc.gamma,
            ocsvm_tolerance: oc.tolerance,
            ocsvm_max_iterations: oc.max_iterations,
        }
    }
}

impl FlowModelConfig {
    pub fn forest(&self, seed: u64) -> ForestConfig {
        ForestConfig {
            n_trees: self.rf_trees,
            min_leaf: self.rf_min_leaf,
            max_depth: self.rf_max_depth,
            seed,
            ..ForestConfig::default()
        }
    }

    pub fn ocsvm(&self) -> OcsvmConfig {
        OcsvmConfig {
            nu: self.ocsvm_nu,
            gamma: self.ocsvm_gamma,
            tolerance: self.ocsvm_tolerance,
            max_iterations: self.ocsvm_max_iterations,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub folds: usize,
    /// How many information-gain entries the report keeps.
    pub top_features: usize,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig {
            folds: 10,
            top_features: 25,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CdfConfig {
    /// Statistical feature exported by the `cdf` stage.
    pub selector: String,
}

impl Default for CdfConfig {
    fn default() -> Self {
        CdfConfig {
            selector: "tcp_count".to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub sessionize: SessionizeConfig,
    #[serde(default)]
    pub context_model: ContextModelConfig,
    #[serde(default)]
    pub flow_model: FlowModelConfig,
    #[serde(default)]
    pub evaluate: EvaluateConfig,
    #[serde(default)]
    pub cdf: CdfConfig,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl RunConfig {
    /// Parse the file, apply the seed flag and the `LOCFLOW_OUT` override,
    /// verify that every referenced input exists, and create the output
    /// directory.
    pub fn load(path: &Path, seed_flag: Option<u64>) -> Result<RunConfig, Failure> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: RunConfig = toml::from_str(&raw)
            .map_err(|e| Failure::Usage(format!("config {}: {e}", path.display())))?;
        if let Some(seed) = seed_flag {
            config.seed = seed;
        }
        if let Some(out_dir) = std::env::var_os("LOCFLOW_OUT") {
            config.paths.out_dir = PathBuf::from(out_dir);
        }
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), Failure> {
        if self.paths.captures.is_empty() {
            return Err(Failure::Usage("config names no capture files".into()));
        }
        let mut inputs: Vec<&Path> = self.paths.captures.iter().map(PathBuf::as_path).collect();
        inputs.extend([
            self.paths.contexts.as_path(),
            self.paths.topics.as_path(),
            self.paths.hostlist.as_path(),
            self.paths.ground_truth.as_path(),
        ]);
        if let Some(sidecar) = &self.paths.sidecar {
            inputs.push(sidecar);
        }
        for path in inputs {
            if !path.exists() {
                return Err(Failure::Usage(format!(
                    "configured input {} does not exist",
                    path.display()
                )));
            }
        }
        let timeout = self.sessionize.idle_timeout_secs;
        if !timeout.is_finite() || timeout <= 0.0 {
            return Err(Failure::Usage(
                "sessionize.idle_timeout_secs must be positive".into(),
            ));
        }
        if self.context_model.rf_trees == 0 || self.flow_model.rf_trees == 0 {
            return Err(Failure::Usage("rf_trees must be at least 1".into()));
        }
        if self.flow_model.rf_min_leaf == 0 {
            return Err(Failure::Usage(
                "flow_model.rf_min_leaf must be at least 1".into(),
            ));
        }
        let smoothing = self.context_model.nb_smoothing;
        if !smoothing.is_finite() || smoothing <= 0.0 {
            return Err(Failure::Usage(
                "context_model.nb_smoothing must be positive".into(),
            ));
        }
        if !(self.flow_model.ocsvm_nu > 0.0 && self.flow_model.ocsvm_nu < 1.0) {
            return Err(Failure::Usage(
                "flow_model.ocsvm_nu must lie strictly inside (0, 1)".into(),
            ));
        }
        if let Some(gamma) = self.flow_model.ocsvm_gamma {
            if !gamma.is_finite() || gamma <= 0.0 {
                return Err(Failure::Usage(
                    "flow_model.ocsvm_gamma must be positive".into(),
                ));
            }
        }
        if self.evaluate.folds < 2 {
            return Err(Failure::Usage("evaluate.folds must be at least 2".into()));
        }
        std::fs::create_dir_all(&self.paths.out_dir).map_err(|e| {
            Failure::Usage(format!(
                "cannot create output directory {}: {e}",
                self.paths.out_dir.display()
            ))
        })?;
        Ok(())
    }

    pub fn out(&self, file: &str) -> PathBuf {
        self.paths.out_dir.join(file)
    }

    /// The resolved configuration, as recorded in every stage manifest.
    pub fn manifest_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes to JSON")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_inputs(dir: &Path) -> String {
        for name in [
            "a.pcap",
            "contexts.jsonl",
            "topics.toml",
            "hosts.txt",
            "truth.jsonl",
        ] {
            std::fs::write(dir.join(name), b"x").unwrap();
        }
        format!(
            "[paths]\ncaptures = ['{d}/a.pcap']\ncontexts = '{d}/contexts.jsonl'\n\
             topics = '{d}/topics.toml'\nhostlist = '{d}/hosts.txt'\n\
             ground_truth = '{d}/truth.jsonl'\nout_dir = '{d}/out'\n",
            d = dir.display()
        )
    }

    fn load(dir: &Path, toml: &str, seed: Option<u64>) -> Result<RunConfig, Failure> {
        let path = dir.join("config.toml");
        std::fs::write(&path, toml).unwrap();
        RunConfig::load(&path, seed)
    }

    #[test]
    fn minimal_config_gets_documented_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let config = load(dir.path(), &write_inputs(dir.path()), None).unwrap();
        assert_eq!(config.seed, DEFAULT_SEED);
        assert_eq!(config.mode, Mode::Both);
        assert_eq!(config.sessionize.idle_timeout_secs, 60.0);
        assert_eq!(config.evaluate.folds, 10);
        assert_eq!(config.cdf.selector, "tcp_count");
        assert!(dir.path().join("out").is_dir());
    }

    #[test]
    fn seed_flag_beats_the_configured_seed() {
        let dir = tempfile::tempdir().unwrap();
        let toml = format!("seed = 9\n{}", write_inputs(dir.path()));
        assert_eq!(load(dir.path(), &toml, None).unwrap().seed, 9);
        assert_eq!(load(dir.path(), &toml, Some(5)).unwrap().seed, 5);
    }

    #[test]
    fn unknown_keys_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let toml = format!("typo_field = 1\n{}", write_inputs(dir.path()));
        let err = load(dir.path(), &toml, None).unwrap_err();
        assert!(matches!(err, Failure::Usage(_)), "got {err:?}");
    }

    #[test]
    fn missing_input_path_is_rejected_by_name() {
        let dir = tempfile::tempdir().unwrap();
        let toml = write_inputs(dir.path()).replace("a.pcap", "gone.pcap");
        let err = load(dir.path(), &toml, None).unwrap_err();
        match err {
            Failure::Usage(message) => assert!(message.contains("gone.pcap"), "{message}"),
            other => panic!("wrong failure: {other:?}"),
        }
    }

    #[test]
    fn out_of_range_hyperparameters_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let base = write_inputs(dir.path());
        for extra in [
            "[evaluate]\nfolds = 1\n",
            "[flow_model]\nocsvm_nu = 1.5\n",
            "[context_model]\nnb_smoothing = 0.0\n",
        ] {
            let err = load(dir.path(), &format!("{base}{extra}"), None).unwrap_err();
            assert!(matches!(err, Failure::Usage(_)), "{extra} got {err:?}");
        }
    }
}
