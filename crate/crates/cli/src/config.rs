use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use protodep::model::{CalConfig, Thresholds};
use protodep::training::TrainConfig;

/// Raised for anything wrong with the configuration or its paths.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: PathBuf,
    pub checkpoint: PathBuf,
    pub flow: PathBuf,
    pub oracle: PathBuf,
    pub template: Option<PathBuf>,
    /// Reference graph for the emitted report.
    pub truth_graph: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            corpus: "data/mini_corpus.jsonl".into(),
            checkpoint: "out/model.ckpt".into(),
            flow: "data/rrc_flow.tsv".into(),
            oracle: "data/oracle_table.tsv".into(),
            template: None,
            truth_graph: None,
            out_dir: "out".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdConfig {
    pub low: f64,
    pub high: f64,
    /// Minimum probability for an edge to enter the graph.
    pub accept: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            low: 0.3,
            high: 0.7,
            accept: 0.7,
        }
    }
}

impl ThresholdConfig {
    pub fn band(&self) -> Thresholds {
        Thresholds {
            low: self.low,
            high: self.high,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Required by training.
    pub seed: Option<u64>,
    /// Share of samples used for training; the rest validates.
    pub split_ratio: f64,
    /// Epochs for the retraining pass after evidence is applied.
    pub retrain_epochs: usize,
    pub paths: Paths,
    pub thresholds: ThresholdConfig,
    pub model: CalConfig,
    pub train: TrainConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: None,
            split_ratio: 0.9,
            retrain_epochs: 20,
            paths: Paths::default(),
            thresholds: ThresholdConfig::default(),
            model: CalConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl PipelineConfig {
    /// Reads a TOML file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| ConfigError(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let p = &mut cfg.paths;
        for field in [
            &mut p.corpus,
            &mut p.checkpoint,
            &mut p.flow,
            &mut p.oracle,
            &mut p.out_dir,
        ] {
            rebase(base, field);
        }
        for field in [&mut p.template, &mut p.truth_graph].into_iter().flatten() {
            rebase(base, field);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let t = &self.thresholds;
        if !(0.0 < t.low && t.low < t.high && t.high < 1.0) {
            return Err(ConfigError(format!(
                "thresholds must satisfy 0 < low < high < 1, got low={} high={}",
                t.low, t.high
            )));
        }
        if !(t.accept > 0.0 && t.accept < 1.0) {
            return Err(ConfigError(format!("accept threshold {} outside (0, 1)", t.accept)));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio <= 1.0) {
            return Err(ConfigError(format!("split_ratio {} outside (0, 1]", self.split_ratio)));
        }
        self.model.validate().map_err(|e| ConfigError(e.to_string()))?;
        self.train.validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(())
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.paths.out_dir.join(name)
    }
}

/// Fails unless `path` exists.
pub fn require(path: &Path, what: &str) -> Result<(), ConfigError> {
    if path.exists() {
        Ok(())
    } else {
        Err(ConfigError(format!("{what} not found: {}", path.display())))
    }
}
