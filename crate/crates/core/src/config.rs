//! JSON experiment configuration and named presets.
//!
//! ```json
//! {
//!   "model": { "input_dim": 32, "hidden_width": 64, "depth": 6, "num_classes": 10, "seed": 0 },
//!   "train": { "batch_size": 32, "learning_rate": 0.01, "epochs": 20,
//!              "loss": { "kind": "pz", "cutoff": 0.1 }, "shuffle_seed": 100 },
//!   "data": { "source": "blobs", "num_classes": 10, "samples_per_class": 200, "input_dim": 32,
//!             "center_scale": 5.0, "noise_std": 1.0, "seed": 7 },
//!   "val_fraction": 0.2,
//!   "split_seed": 7,
//!   "label_noise": 0.0,
//!   "plots": true
//! }
//! ```
//!
//! `data.source` is one of `blobs`, `gaussian` (`n`, `input_dim`,
//! `num_classes`, `seed`) or `idx` (`images`, `labels`, optional
//! `num_classes`). Label noise, when nonzero, is applied to the training
//! split only.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{
    dataset_from_idx, gaussian_inputs, generate_blobs, inject_label_noise, split, BlobSpec, Dataset,
};
use crate::error::{Error, Result};
use crate::losses::LossSpec;
use crate::model::{Activation, ModelConfig};
use crate::numerics::Rng;
use crate::trainer::TrainConfig;

const SPLIT_STREAM: u64 = 2;
const NOISE_STREAM: u64 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataSource {
    Blobs(BlobSpec),
    Gaussian {
        n: usize,
        input_dim: usize,
        num_classes: usize,
        seed: u64,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
        #[serde(default)]
        num_classes: Option<usize>,
    },
}

fn default_val_fraction() -> f64 {
    0.2
}

fn default_plots() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: DataSource,
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
    #[serde(default)]
    pub split_seed: u64,
    #[serde(default)]
    pub label_noise: f64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "default_plots")]
    pub plots: bool,
}

pub const PRESET_NAMES: [&str; 4] = ["ce-paper", "bl-paper", "pz-paper", "igb-probe"];

/// Ten well-separated blobs and a depth-6 network: the desk-scale stand-in
/// for the image-classification setting, with batch 32, 20 epochs of SGD.
fn desk_scale(loss: LossSpec) -> ExperimentConfig {
    ExperimentConfig {
        model: ModelConfig {
            input_dim: 32,
            hidden_width: 64,
            depth: 6,
            num_classes: 10,
            activation: Activation::Relu,
            seed: 0,
        },
        train: TrainConfig {
            batch_size: 32,
            learning_rate: 0.01,
            epochs: 20,
            loss,
            shuffle_seed: 100,
        },
        data: DataSource::Blobs(BlobSpec {
            num_classes: 10,
            samples_per_class: 200,
            input_dim: 32,
            center_scale: 5.0,
            noise_std: 1.0,
            seed: 7,
        }),
        val_fraction: 0.2,
        split_seed: 7,
        label_noise: 0.0,
        out_dir: None,
        plots: true,
    }
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "ce-paper" => Ok(desk_scale(LossSpec::CrossEntropy)),
            "bl-paper" => Ok(desk_scale(LossSpec::Blurry { gamma: 0.7 })),
            "pz-paper" => Ok(desk_scale(LossSpec::PiecewiseZero { cutoff: 0.1 })),
            "igb-probe" => {
                // depth-20 width-128 probe on standard-normal inputs
                let mut cfg = desk_scale(LossSpec::CrossEntropy);
                cfg.model.input_dim = 128;
                cfg.model.hidden_width = 128;
                cfg.model.depth = 20;
                cfg.data = DataSource::Gaussian {
                    n: 5000,
                    input_dim: 128,
                    num_classes: 10,
                    seed: 1,
                };
                Ok(cfg)
            }
            other => Err(Error::config(format!(
                "unknown preset {other:?}; expected one of {}",
                PRESET_NAMES.join(", ")
            ))),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::config(format!("config: {e}")))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.loss.validate()?;
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::config("val_fraction must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return Err(Error::config("label_noise must lie in [0, 1]"));
        }
        let (dim, k) = match &self.data {
            DataSource::Blobs(b) => (Some(b.input_dim), Some(b.num_classes)),
            DataSource::Gaussian {
                input_dim,
                num_classes,
                ..
            } => (Some(*input_dim), Some(*num_classes)),
            DataSource::Idx { num_classes, .. } => (None, *num_classes),
        };
        if dim.is_some_and(|d| d != self.model.input_dim) {
            return Err(Error::config("data input_dim differs from model input_dim"));
        }
        if k.is_some_and(|k| k != self.model.num_classes) {
            return Err(Error::config(
                "data num_classes differs from model num_classes",
            ));
        }
        Ok(())
    }

    /// Builds the full dataset, splits it, and applies label noise to the
    /// training side.
    pub fn datasets(&self) -> Result<(Dataset, Dataset)> {
        self.validate()?;
        let full = match &self.data {
            DataSource::Blobs(spec) => generate_blobs(spec)?,
            DataSource::Gaussian {
                n,
                input_dim,
                num_classes,
                seed,
            } => gaussian_inputs(*n, *input_dim, *num_classes, *seed)?,
            DataSource::Idx {
                images,
                labels,
                num_classes,
            } => {
                let ds = dataset_from_idx(
                    &fs::read(images)?,
                    &fs::read(labels)?,
                    num_classes.or(Some(self.model.num_classes)),
                )?;
                if ds.input_dim() != self.model.input_dim {
                    return Err(Error::config(format!(
                        "idx images have {} pixels, model input_dim is {}",
                        ds.input_dim(),
                        self.model.input_dim
                    )));
                }
                ds
            }
        };
        let (mut train, val) = split(
            &full,
            self.val_fraction,
            &mut Rng::with_stream(self.split_seed, SPLIT_STREAM),
        )?;
        if self.label_noise > 0.0 {
            train = inject_label_noise(
                &train,
                self.label_noise,
                &mut Rng::with_stream(self.split_seed, NOISE_STREAM),
            )?;
        }
        Ok((train, val))
    }
}
