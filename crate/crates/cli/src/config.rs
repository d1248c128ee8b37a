//! Run configuration. Values are layered: built-in defaults, then an
//! optional JSON file, then explicit command-line flags.

use std::path::{Path, PathBuf};

use diner_core::network::{Activation, BackboneSpec, Encoding, DEFAULT_OCTAVES, DEFAULT_OMEGA0};
use diner_core::numerics::AdamConfig;
use diner_core::training::{TableInitKind, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackboneKind {
    Mlp,
    Siren,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EncodingKind {
    None,
    Pe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TableInitChoice {
    Zero,
    Grid,
    Uniform,
}

impl From<TableInitChoice> for TableInitKind {
    fn from(c: TableInitChoice) -> Self {
        match c {
            TableInitChoice::Zero => TableInitKind::Zero,
            TableInitChoice::Grid => TableInitKind::Grid,
            TableInitChoice::Uniform => TableInitKind::default(),
        }
    }
}

/// Architecture settings; every field optional so patches can be layered.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelPatch {
    pub backbone: Option<BackboneKind>,
    pub width: Option<usize>,
    pub depth: Option<usize>,
    pub encoding: Option<EncodingKind>,
    pub octaves: Option<usize>,
    pub omega0: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainPatch {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr_net: Option<f64>,
    pub lr_table: Option<f64>,
    pub seed: Option<u64>,
    pub use_table: Option<bool>,
    pub table_init: Option<TableInitKind>,
    pub freeze_table: Option<bool>,
    pub log_every: Option<usize>,
    pub adam: Option<AdamConfig>,
}

/// The JSON document accepted by `--config`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub model: ModelPatch,
    pub train: TrainPatch,
}

macro_rules! overlay {
    ($base:expr, $over:expr, $($f:ident),+) => {
        $( if $over.$f.is_some() { $base.$f = $over.$f.clone(); } )+
    };
}

impl ModelPatch {
    pub fn overlay(&mut self, over: &ModelPatch) {
        overlay!(self, over, backbone, width, depth, encoding, octaves, omega0);
    }
}

impl TrainPatch {
    pub fn overlay(&mut self, over: &TrainPatch) {
        overlay!(
            self,
            over,
            epochs,
            batch_size,
            lr_net,
            lr_table,
            seed,
            use_table,
            table_init,
            freeze_table,
            log_every,
            adam
        );
    }
}

impl RunConfig {
    /// Malformed or unknown content is a usage error; an unreadable file
    /// is an I/O error.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// Applies `over` on top of `self`; set fields in `over` win.
    pub fn overlay(&mut self, over: &RunConfig) {
        if over.input.is_some() {
            self.input.clone_from(&over.input);
        }
        if over.out.is_some() {
            self.out.clone_from(&over.out);
        }
        self.model.overlay(&over.model);
        self.train.overlay(&over.train);
    }
}

/// Fully resolved architecture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelChoice {
    pub backbone: BackboneKind,
    pub width: usize,
    pub depth: usize,
    pub encoding: EncodingKind,
    pub octaves: usize,
    pub omega0: f64,
}

impl ModelChoice {
    pub fn resolve(base: BackboneKind, patch: &ModelPatch) -> Self {
        Self {
            backbone: patch.backbone.unwrap_or(base),
            width: patch.width.unwrap_or(64),
            depth: patch.depth.unwrap_or(2),
            encoding: patch.encoding.unwrap_or(EncodingKind::None),
            octaves: patch.octaves.unwrap_or(DEFAULT_OCTAVES),
            omega0: patch.omega0.unwrap_or(DEFAULT_OMEGA0),
        }
    }

    pub fn activation(&self) -> Activation {
        match self.backbone {
            BackboneKind::Mlp => Activation::Relu,
            BackboneKind::Siren => Activation::Sine {
                omega0: self.omega0,
            },
        }
    }

    pub fn spec(&self, d_in: usize, d_out: usize) -> BackboneSpec {
        BackboneSpec {
            d_in,
            d_out,
            width: self.width,
            depth: self.depth,
            activation: self.activation(),
            encoding: match self.encoding {
                EncodingKind::None => Encoding::None,
                EncodingKind::Pe => Encoding::Fourier {
                    octaves: self.octaves,
                },
            },
        }
    }

    /// Combinations that run but are unusual.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.backbone == BackboneKind::Siren && self.encoding == EncodingKind::Pe {
            w.push(
                "positional encoding in front of a sine network is unusual and tends to overfit"
                    .into(),
            );
        }
        w
    }
}

/// Training settings on top of `base`, which supplies the learning rate
/// for the chosen activation and any command-specific defaults.
pub fn resolve_train(base: TrainConfig, patch: &TrainPatch) -> Result<TrainConfig> {
    let mut cfg = base;
    let p = patch;
    if let Some(v) = p.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = p.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = p.lr_net {
        cfg.lr_net = v;
    }
    if p.lr_table.is_some() {
        cfg.lr_table = p.lr_table;
    }
    if let Some(v) = p.seed {
        cfg.seed = v;
    }
    if let Some(v) = p.use_table {
        cfg.use_table = v;
    }
    if let Some(v) = p.table_init {
        cfg.table_init = v;
    }
    if let Some(v) = p.freeze_table {
        cfg.freeze_table = v;
    }
    if let Some(v) = p.log_every {
        cfg.log_every = v;
    }
    if let Some(v) = p.adam {
        cfg.adam = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn require_path(value: &Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    value
        .clone()
        .ok_or_else(|| CliError::Usage(format!("{flag} is required (flag or config file)")))
}
