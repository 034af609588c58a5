//! Experiment files for the `train` subcommand.
//!
//! A config is a TOML document with four tables:
//!
//! ```toml
//! [data]
//! source = "blobs"        # or "csv" with path, label_column, has_header
//! seed = 1
//! n_per_class = 200
//! classes = 3
//! dims = 16
//! spread = 1.0
//! val_fraction = 0.25
//! split_seed = 0
//!
//! [model]
//! [[model.layers]]
//! kind = "dense"
//! inputs = 16
//! outputs = 32
//! init = { gaussian = { stddev = 0.5 } }
//! [[model.layers]]
//! kind = "relu"
//! # ...
//!
//! [train]
//! reg = "srip"
//! epochs = 150
//! seed = 0
//!
//! [schedule]
//! lambda_init = 0.1
//! ```
//!
//! Every table rejects keys it does not know, naming the offending key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{gen_blobs, load_csv, split, DataError, Dataset};
use crate::linalg::DEFAULT_POWER_ITERS;
use crate::regularizers::{RegKind, SripMode};
use crate::schedule::{Breakpoint, ScheduleConfig};
use crate::trainer::{LayerSpec, OptimizerConfig, Shape3, TrainConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    Blobs {
        #[serde(default = "default_data_seed")]
        seed: u64,
        n_per_class: usize,
        classes: usize,
        dims: usize,
        spread: f64,
        #[serde(default = "default_val_fraction")]
        val_fraction: f64,
        #[serde(default)]
        split_seed: u64,
    },
    Csv {
        /// Relative paths resolve against the config file's directory.
        path: PathBuf,
        label_column: usize,
        #[serde(default)]
        has_header: bool,
        #[serde(default = "default_val_fraction")]
        val_fraction: f64,
        #[serde(default)]
        split_seed: u64,
    },
}

fn default_data_seed() -> u64 {
    1
}

fn default_val_fraction() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Defaults to a flat vector sized by the first dense layer.
    #[serde(default)]
    pub input_shape: Option<Shape3>,
    pub layers: Vec<LayerSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub reg: RegKind,
    pub srip_mode: SripMode,
    pub power_iters: usize,
    pub warm_start: bool,
    pub include_classifier: bool,
    pub mc_off_diagonal_only: bool,
    pub lr: f64,
    pub lr_breakpoints: Vec<Breakpoint>,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub threads: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let opt = OptimizerConfig::default();
        Self {
            reg: RegKind::None,
            srip_mode: SripMode::Power,
            power_iters: DEFAULT_POWER_ITERS,
            warm_start: false,
            include_classifier: true,
            mc_off_diagonal_only: false,
            lr: opt.lr_init,
            lr_breakpoints: opt.lr_breakpoints,
            momentum: opt.momentum,
            epochs: 150,
            batch_size: 32,
            seed: 0,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub schedule: ScheduleConfig,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.message().to_string())
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), ConfigError> {
        let bytes = std::fs::read(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let text = String::from_utf8_lossy(&bytes);
        let mut cfg = Self::parse(&text).map_err(|message| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        })?;
        if let DataConfig::Csv { path: data_path, .. } = &mut cfg.data {
            if data_path.is_relative() {
                if let Some(dir) = path.parent() {
                    *data_path = dir.join(&*data_path);
                }
            }
        }
        Ok((cfg, bytes))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn train_config(&self) -> Result<TrainConfig, ConfigError> {
        let input_shape = match self.model.input_shape {
            Some(s) => s,
            None => match self.model.layers.first() {
                Some(LayerSpec::Dense { inputs, .. }) => Shape3::flat(*inputs),
                _ => {
                    return Err(ConfigError::Invalid(
                        "model.input_shape is required unless the first layer is dense".into(),
                    ))
                }
            },
        };
        let t = &self.train;
        Ok(TrainConfig {
            input_shape,
            layers: self.model.layers.clone(),
            reg_kind: t.reg,
            srip_mode: t.srip_mode,
            power_iters: t.power_iters,
            warm_start: t.warm_start,
            mc_off_diagonal_only: t.mc_off_diagonal_only,
            include_classifier: t.include_classifier,
            schedule: self.schedule.clone(),
            optimizer: OptimizerConfig {
                lr_init: t.lr,
                lr_breakpoints: t.lr_breakpoints.clone(),
                momentum: t.momentum,
            },
            epochs: t.epochs,
            batch_size: t.batch_size,
            seed: t.seed,
            threads: t.threads,
        })
    }

    /// Builds the train and validation sets.
    pub fn datasets(&self) -> Result<(Dataset, Dataset), DataError> {
        match &self.data {
            DataConfig::Blobs {
                seed,
                n_per_class,
                classes,
                dims,
                spread,
                val_fraction,
                split_seed,
            } => {
                let ds = gen_blobs(*seed, *n_per_class, *classes, *dims, *spread)?;
                split(&ds, *val_fraction, *split_seed)
            }
            DataConfig::Csv {
                path,
                label_column,
                has_header,
                val_fraction,
                split_seed,
            } => {
                let ds = load_csv(path, *label_column, *has_header)?;
                split(&ds, *val_fraction, *split_seed)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::Init;

    const MINIMAL: &str = r#"
[data]
source = "blobs"
n_per_class = 10
classes = 3
dims = 4
spread = 0.5

[model]
[[model.layers]]
kind = "dense"
inputs = 4
outputs = 8
init = { gaussian = { stddev = 0.5 } }
[[model.layers]]
kind = "relu"
[[model.layers]]
kind = "dense"
inputs = 8
outputs = 3
[[model.layers]]
kind = "softmax_xent"

[train]
reg = "srip"
epochs = 3
"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        let tc = cfg.train_config().unwrap();
        assert_eq!(tc.input_shape, Shape3::flat(4));
        assert_eq!(tc.reg_kind, RegKind::Srip);
        assert_eq!(tc.epochs, 3);
        assert_eq!(tc.batch_size, 32);
        assert_eq!(tc.schedule, ScheduleConfig::default());
        assert_eq!(
            tc.layers[0],
            LayerSpec::Dense {
                inputs: 4,
                outputs: 8,
                init: Init::Gaussian { stddev: 0.5 }
            }
        );
        assert_eq!(
            tc.layers[2],
            LayerSpec::Dense {
                inputs: 8,
                outputs: 3,
                init: Init::Orthogonal
            }
        );
        let (tr, va) = cfg.datasets().unwrap();
        assert_eq!(tr.len() + va.len(), 30);
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        let again = ExperimentConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn unknown_keys_are_named() {
        for (table, bad) in [
            ("[train]", "learning_rte = 0.1"),
            ("[data]", "sprea = 1.0"),
            ("[schedule]", "lambda_inti = 0.2"),
        ] {
            let text = MINIMAL.replacen(table, &format!("{table}\n{bad}"), 1);
            let text = if table == "[schedule]" {
                format!("{MINIMAL}\n{table}\n{bad}\n")
            } else {
                text
            };
            let err = ExperimentConfig::parse(&text).unwrap_err();
            let key = bad.split(' ').next().unwrap();
            assert!(err.contains(key), "{err}");
        }
        let err = ExperimentConfig::parse(&format!("{MINIMAL}\n[extra]\nx = 1\n")).unwrap_err();
        assert!(err.contains("extra"), "{err}");
    }

    #[test]
    fn schedule_override() {
        let text = format!("{MINIMAL}\n[schedule]\nlambda_init = 0.2\nlambda_breakpoints = [[10, 0.0]]\n");
        let cfg = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(cfg.schedule.lambda_at(9), 0.2);
        assert_eq!(cfg.schedule.lambda_at(10), 0.0);
        assert_eq!(cfg.schedule.weight_decay_at(RegKind::So, 30), 1e-4);
    }

    #[test]
    fn missing_file_names_path() {
        let err = ExperimentConfig::load(Path::new("/nonexistent/run.toml")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/run.toml"));
    }
}
