use std::path::{Path, PathBuf};

use pwi_core::autodiff::OptimizerConfig;
use pwi_core::data::{DataFormat, LoadOptions, LogRegConfig, OverlapUnit};
use pwi_core::model::{Aggregation, Composition, InputMode, ModelConfig};
use pwi_core::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DATA_ROOT_ENV: &str = "PWI_DATA_ROOT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub name: String,
    /// Directory relative paths are resolved against; falls back to
    /// `$PWI_DATA_ROOT`, then to the config file's directory.
    pub root: Option<PathBuf>,
    pub format: String,
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Word vectors in `word v1 … vd` text format.
    pub pretrained: Option<PathBuf>,
    pub lowercase: bool,
    pub strict: bool,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            name: "data".into(),
            root: None,
            format: DataFormat::Canonical.name().into(),
            train: None,
            dev: None,
            test: None,
            pretrained: None,
            lowercase: false,
            strict: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub input: String,
    pub composition: String,
    pub subword_n: usize,
    pub aggregation: String,
    pub depth: usize,
    pub hidden: usize,
    pub word_dim: usize,
    pub subword_dim: usize,
    pub char_hidden: usize,
    pub cnn_channels: usize,
    pub mlp_hidden: usize,
    pub lm_gamma: f64,
    pub lm_hidden: usize,
    pub lm_proj: usize,
    pub lm_min_freq: usize,
    pub lm_normalize: bool,
    pub alpha: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::default();
        let depth = match m.aggregation {
            Aggregation::DeepCnn { depth } => depth,
            Aggregation::Mlp => 4,
        };
        ModelSection {
            input: m.input.name().into(),
            composition: m.composition.to_string(),
            subword_n: m.subword_n,
            aggregation: m.aggregation.name().into(),
            depth,
            hidden: m.hidden,
            word_dim: m.word_dim,
            subword_dim: m.subword_dim,
            char_hidden: m.char_hidden,
            cnn_channels: m.cnn_channels,
            mlp_hidden: m.mlp_hidden,
            lm_gamma: m.lm_gamma,
            lm_hidden: m.lm_hidden,
            lm_proj: m.lm_proj,
            lm_min_freq: m.lm_min_freq,
            lm_normalize: m.lm_normalize,
            alpha: m.alpha,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    /// `adam` or `sgd`.
    pub optimizer: String,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub dev_fraction: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        let OptimizerConfig::Adam { lr, beta1, beta2, eps } = t.optimizer else {
            unreachable!("default optimizer is Adam")
        };
        TrainSection {
            epochs: t.epochs,
            optimizer: "adam".into(),
            lr,
            beta1,
            beta2,
            adam_eps: eps,
            batch_size: t.batch_size,
            seed: t.seed,
            dev_fraction: t.dev_fraction,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// LM weight of the LM cells.
    pub gamma: f64,
    /// Cell names to run; empty runs all sixteen.
    pub cells: Vec<String>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            gamma: 0.1,
            cells: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    pub units: Vec<String>,
    /// Checkpoint whose embeddings `analyze neighbors` probes; without one
    /// the pretrained vectors are used.
    pub checkpoint: Option<PathBuf>,
    pub queries: Vec<String>,
    pub neighbors_k: usize,
    pub baseline_l2: f64,
    pub baseline_lr: f64,
    pub baseline_iterations: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        let lr = LogRegConfig::default();
        AnalysisSection {
            units: OverlapUnit::ALL.iter().map(|u| u.name().to_string()).collect(),
            checkpoint: None,
            queries: Vec::new(),
            neighbors_k: 10,
            baseline_l2: lr.l2,
            baseline_lr: lr.lr,
            baseline_iterations: lr.iterations,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub grid: GridSection,
    pub analysis: AnalysisSection,
    /// Directory of the config file, for resolving relative paths.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.message().to_string())
    }

    /// The effective settings, defaults included, in config-file syntax.
    pub fn explain(&self) -> String {
        let mut out = toml::to_string(self).expect("config serializes");
        let optional = [
            ("data.root", self.data.root.is_none()),
            ("data.train", self.data.train.is_none()),
            ("data.dev", self.data.dev.is_none()),
            ("data.test", self.data.test.is_none()),
            ("data.pretrained", self.data.pretrained.is_none()),
            ("analysis.checkpoint", self.analysis.checkpoint.is_none()),
        ];
        let unset: Vec<&str> = optional.iter().filter(|(_, u)| *u).map(|(k, _)| *k).collect();
        if !unset.is_empty() {
            out.push_str(&format!("\n# unset: {}\n", unset.join(", ")));
        }
        out
    }

    pub fn data_root(&self) -> PathBuf {
        self.data
            .root
            .clone()
            .or_else(|| std::env::var_os(DATA_ROOT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| self.base_dir.clone())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.data_root().join(p)
        }
    }

    pub fn load_options(&self) -> Result<LoadOptions, CliError> {
        Ok(LoadOptions {
            format: self.data.format.parse::<DataFormat>().map_err(invalid)?,
            strict: self.data.strict,
            lowercase: self.data.lowercase,
        })
    }

    pub fn model_config(&self) -> Result<ModelConfig, CliError> {
        let m = &self.model;
        let cfg = ModelConfig {
            input: m.input.parse::<InputMode>().map_err(invalid)?,
            composition: m.composition.parse::<Composition>().map_err(invalid)?,
            subword_n: m.subword_n,
            aggregation: Aggregation::parse(&m.aggregation, m.depth).map_err(invalid)?,
            hidden: m.hidden,
            word_dim: m.word_dim,
            subword_dim: m.subword_dim,
            char_hidden: m.char_hidden,
            cnn_channels: m.cnn_channels,
            mlp_hidden: m.mlp_hidden,
            lm_gamma: m.lm_gamma,
            lm_hidden: m.lm_hidden,
            lm_proj: m.lm_proj,
            lm_min_freq: m.lm_min_freq,
            lm_normalize: m.lm_normalize,
            alpha: m.alpha,
            seed: self.train.seed,
        };
        cfg.validate().map_err(invalid)?;
        Ok(cfg)
    }

    pub fn train_config(&self) -> Result<TrainConfig, CliError> {
        let t = &self.train;
        let optimizer = match t.optimizer.as_str() {
            "adam" => OptimizerConfig::Adam {
                lr: t.lr,
                beta1: t.beta1,
                beta2: t.beta2,
                eps: t.adam_eps,
            },
            "sgd" => OptimizerConfig::Sgd { lr: t.lr },
            other => return Err(invalid(format!("unknown optimizer `{other}`"))),
        };
        let cfg = TrainConfig {
            epochs: t.epochs,
            optimizer,
            batch_size: t.batch_size,
            seed: t.seed,
            dev_fraction: t.dev_fraction,
            model: self.model_config()?,
        };
        cfg.validate().map_err(invalid)?;
        Ok(cfg)
    }

    pub fn logreg_config(&self) -> LogRegConfig {
        LogRegConfig {
            l2: self.analysis.baseline_l2,
            lr: self.analysis.baseline_lr,
            iterations: self.analysis.baseline_iterations,
        }
    }

    pub fn overlap_units(&self) -> Result<Vec<OverlapUnit>, CliError> {
        self.analysis.units.iter().map(|u| u.parse().map_err(invalid)).collect()
    }
}
