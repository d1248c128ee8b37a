//! Fitting a backbone, with or without a learnable coordinate table, to a
//! signal or through a physical forward process.
//!
//! Training is full-batch by default: one Adam step per epoch on the summed
//! gradient. Per-sample contributions are summed in a fixed order (sorted by
//! target value for direct fitting) in fixed-size chunks merged by a fixed
//! pairwise tree, so results are bit-reproducible and independent of the
//! worker count.

mod engine;
mod invariance;
mod metrics;
mod samples;

use serde::{Deserialize, Serialize};

pub(crate) use engine::predict as predict_inputs;
pub use engine::{fit, train, L2Fit, Objective};
pub use invariance::{invariance_report, InvarianceReport, OrderResult};
pub use metrics::{psnr, psnr_from_mse, MetricsLog, MetricsRow};
pub use samples::{rearrange, Arrangement, SampleSet};

use crate::coord_table::{lattice_coords, CoordTable, TableInit};
use crate::error::{Error, Result};
use crate::network::{Activation, Backbone, BackboneOptimizer, BackboneSpec};
use crate::numerics::{AdamConfig, Rng, Tensor2D};

/// Samples per work unit. Fixed so the reduction tree never depends on the
/// number of threads.
pub const CHUNK: usize = 256;

const BACKBONE_STREAM: u64 = 1;
const TABLE_STREAM: u64 = 2;
const SHUFFLE_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// Sum of squared errors.
    #[default]
    L2,
}

/// Table initialization without the lattice extents, which come from the
/// data at model construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TableInitKind {
    Zero,
    Grid,
    Uniform { scale: f64 },
}

impl Default for TableInitKind {
    fn default() -> Self {
        TableInitKind::Uniform { scale: 1e-4 }
    }
}

impl TableInitKind {
    pub fn with_shape(self, shape: &[usize]) -> TableInit {
        match self {
            TableInitKind::Zero => TableInit::Zero,
            TableInitKind::Grid => TableInit::Grid {
                shape: shape.to_vec(),
            },
            TableInitKind::Uniform { scale } => TableInit::Uniform { scale },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Samples per optimizer step; 0 means the full signal.
    pub batch_size: usize,
    pub lr_net: f64,
    /// Table learning rate; defaults to `lr_net`.
    pub lr_table: Option<f64>,
    pub seed: u64,
    pub use_table: bool,
    pub table_init: TableInitKind,
    /// Keep the table fixed (only the backbone trains).
    pub freeze_table: bool,
    pub loss: Loss,
    pub log_every: usize,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 3000,
            batch_size: 0,
            lr_net: 1e-3,
            lr_table: None,
            seed: 0,
            use_table: true,
            table_init: TableInitKind::default(),
            freeze_table: false,
            loss: Loss::L2,
            log_every: 100,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Defaults with the learning rate conventional for `activation`
    /// (1e-4 for sine networks, 1e-3 for ReLU).
    pub fn for_activation(activation: Activation) -> Self {
        let lr_net = match activation {
            Activation::Sine { .. } => 1e-4,
            Activation::Relu => 1e-3,
        };
        Self {
            lr_net,
            ..Self::default()
        }
    }

    pub fn table_lr(&self) -> f64 {
        self.lr_table.unwrap_or(self.lr_net)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        for (name, lr) in [("lr_net", self.lr_net), ("lr_table", self.table_lr())] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {lr}")));
            }
        }
        if self.log_every == 0 {
            return Err(Error::config("log_every must be at least 1"));
        }
        Ok(())
    }
}

/// A backbone, its optimizer state, and an optional coordinate table.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub backbone: Backbone,
    pub optimizer: BackboneOptimizer,
    pub table: Option<CoordTable>,
}

impl Model {
    pub fn new(backbone: Backbone, table: Option<CoordTable>, adam: AdamConfig) -> Result<Self> {
        if let Some(t) = &table {
            if t.d_in() != backbone.d_in() {
                return Err(Error::shape(format!(
                    "table width {} differs from backbone input width {}",
                    t.d_in(),
                    backbone.d_in()
                )));
            }
        }
        let optimizer = BackboneOptimizer::new(&backbone, adam);
        Ok(Self {
            backbone,
            optimizer,
            table,
        })
    }

    /// Seeds the backbone and table from independent substreams of
    /// `cfg.seed`, so a given seed yields the same backbone with or without
    /// a table.
    pub fn init(spec: &BackboneSpec, shape: &[usize], cfg: &TrainConfig) -> Result<Self> {
        if spec.d_in != shape.len() {
            return Err(Error::shape(format!(
                "backbone takes {}-d coordinates but the signal is {}-d",
                spec.d_in,
                shape.len()
            )));
        }
        let root = Rng::new(cfg.seed);
        let backbone = Backbone::init(spec, &mut root.substream(BACKBONE_STREAM))?;
        let table = if cfg.use_table {
            let n = shape.iter().product();
            let mut t = CoordTable::new(
                n,
                spec.d_in,
                &cfg.table_init.with_shape(shape),
                &mut root.substream(TABLE_STREAM),
            )?;
            t.set_adam_config(cfg.adam);
            Some(t)
        } else {
            None
        };
        Self::new(backbone, table, cfg.adam)
    }

    /// Network inputs for every element in flat order: the table rows when
    /// a table is present, otherwise the normalized lattice.
    pub fn inputs(&self, shape: &[usize]) -> Result<Tensor2D> {
        let n: usize = shape.iter().product();
        match &self.table {
            Some(t) if t.len() != n => Err(Error::shape(format!(
                "table has {} rows for {n} elements",
                t.len()
            ))),
            Some(t) => Tensor2D::from_vec(n, t.d_in(), t.entries().to_vec()),
            None => Ok(lattice_coords(shape)),
        }
    }

    /// Raw (unclamped) network output for every element, in flat order.
    pub fn predict(&self, shape: &[usize]) -> Result<Tensor2D> {
        engine::predict(&self.backbone, &self.inputs(shape)?)
    }
}

#[cfg(test)]
mod tests;
