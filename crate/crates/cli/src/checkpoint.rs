//! `DINR` checkpoint container.
//!
//! ```text
//! "DINR" | version: u32 LE | meta_len: u64 LE | meta: JSON | payload
//! ```
//!
//! The payload is a run of little-endian 8-byte sections whose names and
//! lengths are listed in the metadata, and are also fully determined by the
//! backbone spec and table size. Section order: per layer `weight`, `bias`;
//! per optimizer buffer `m`, `v`; then table `entries`, `m`, `v`, `steps`.

use std::io::Write;
use std::path::Path;

use diner_core::coord_table::CoordTable;
use diner_core::network::{Backbone, BackboneOptimizer, BackboneSpec, Layer};
use diner_core::numerics::{AdamConfig, AdamState, Tensor2D};
use diner_core::training::{Model, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::fsutil::write_atomic;

pub const MAGIC: &[u8; 4] = b"DINR";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Direct signal fit; outputs are channel values.
    Fit,
    /// Lensless reconstruction; outputs are amplitude and phase logits.
    Lensless,
}

/// Everything needed to resume or evaluate a trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub spec: BackboneSpec,
    /// Signal extent the table covers.
    pub shape: Vec<usize>,
    pub train: TrainConfig,
    pub epoch: usize,
    pub model: Model,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Dtype {
    F64,
    U64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Section {
    name: String,
    dtype: Dtype,
    len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableMeta {
    rows: usize,
    adam: AdamConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Metadata {
    kind: ModelKind,
    backbone: BackboneSpec,
    shape: Vec<usize>,
    train: TrainConfig,
    epoch: usize,
    optimizer_adam: AdamConfig,
    optimizer_steps: Vec<u64>,
    table: Option<TableMeta>,
    sections: Vec<Section>,
}

/// `(fan_out, fan_in)` for each layer of `spec`.
fn layer_dims(spec: &BackboneSpec) -> Vec<(usize, usize)> {
    let mut dims = Vec::with_capacity(spec.depth + 1);
    let mut fan_in = spec.encoding.output_width(spec.d_in);
    for _ in 0..spec.depth {
        dims.push((spec.width, fan_in));
        fan_in = spec.width;
    }
    dims.push((spec.d_out, fan_in));
    dims
}

fn expected_sections(spec: &BackboneSpec, table: Option<&TableMeta>) -> Vec<Section> {
    let f = |name: String, len| Section {
        name,
        dtype: Dtype::F64,
        len,
    };
    let dims = layer_dims(spec);
    let mut out = Vec::new();
    for (i, &(o, n)) in dims.iter().enumerate() {
        out.push(f(format!("layer{i}.weight"), o * n));
        out.push(f(format!("layer{i}.bias"), o));
    }
    for (i, &(o, n)) in dims.iter().enumerate() {
        for (part, len) in [("weight", o * n), ("bias", o)] {
            out.push(f(format!("adam.layer{i}.{part}.m"), len));
            out.push(f(format!("adam.layer{i}.{part}.v"), len));
        }
    }
    if let Some(t) = table {
        let len = t.rows * spec.d_in;
        out.push(f("table.entries".into(), len));
        out.push(f("table.m".into(), len));
        out.push(f("table.v".into(), len));
        out.push(Section {
            name: "table.steps".into(),
            dtype: Dtype::U64,
            len: t.rows,
        });
    }
    out
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let model = &self.model;
        let table = model.table.as_ref().map(|t| TableMeta {
            rows: t.len(),
            adam: t.adam_config(),
        });
        let meta = Metadata {
            kind: self.kind,
            backbone: self.spec,
            shape: self.shape.clone(),
            train: self.train.clone(),
            epoch: self.epoch,
            optimizer_adam: model.optimizer.config,
            optimizer_steps: model.optimizer.states().iter().map(|s| s.t).collect(),
            sections: expected_sections(&self.spec, table.as_ref()),
            table,
        };

        let mut payload: Vec<&[f64]> = Vec::new();
        for l in model.backbone.layers() {
            payload.push(l.weight.as_slice());
            payload.push(&l.bias);
        }
        for s in model.optimizer.states() {
            payload.push(&s.m);
            payload.push(&s.v);
        }
        if let Some(t) = &model.table {
            payload.extend([t.entries(), t.first_moments(), t.second_moments()]);
        }
        let f64_sections = meta.sections.iter().filter(|s| s.dtype == Dtype::F64);
        if payload.len() != f64_sections.clone().count()
            || f64_sections.zip(&payload).any(|(s, p)| s.len != p.len())
        {
            return Err(CliError::Usage(
                "model layout does not match its backbone spec".into(),
            ));
        }

        let json = serde_json::to_vec(&meta).expect("metadata serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for p in payload {
            for v in p {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        if let Some(t) = &model.table {
            for s in t.steps() {
                out.extend_from_slice(&s.to_le_bytes());
            }
        }
        Ok(out)
    }

    /// Parses a checkpoint; `path` only labels errors.
    pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<Self> {
        let bad = |msg: String| CliError::format(path, msg);
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(bad("not a DINR checkpoint".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(CliError::Version {
                path: path.into(),
                found: version,
                expected: VERSION,
            });
        }
        let meta_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let meta_end = usize::try_from(meta_len)
            .ok()
            .and_then(|l| l.checked_add(16))
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| bad("metadata length exceeds file size".into()))?;
        let meta: Metadata = serde_json::from_slice(&bytes[16..meta_end])
            .map_err(|e| bad(format!("metadata: {e}")))?;
        if meta.sections != expected_sections(&meta.backbone, meta.table.as_ref()) {
            return Err(bad("section table does not match the backbone spec".into()));
        }
        let payload = &bytes[meta_end..];
        let total: usize = meta.sections.iter().map(|s| s.len * 8).sum();
        if payload.len() != total {
            return Err(bad(format!(
                "payload has {} bytes, metadata describes {total}",
                payload.len()
            )));
        }

        let mut words = payload.chunks_exact(8).map(|c| c.try_into().unwrap());
        let mut take_f64 =
            |len: usize| -> Vec<f64> { (&mut words).take(len).map(f64::from_le_bytes).collect() };
        let dims = layer_dims(&meta.backbone);
        let mut layers = Vec::with_capacity(dims.len());
        for &(o, n) in &dims {
            let weight = Tensor2D::from_vec(o, n, take_f64(o * n))?;
            let bias = take_f64(o);
            layers.push(Layer { weight, bias });
        }
        if meta.optimizer_steps.len() != 2 * dims.len() {
            return Err(bad(
                "optimizer step count does not match the layer count".into()
            ));
        }
        let mut states = Vec::with_capacity(2 * dims.len());
        let mut steps = meta.optimizer_steps.iter();
        for &(o, n) in &dims {
            for len in [o * n, o] {
                let m = take_f64(len);
                let v = take_f64(len);
                states.push(AdamState {
                    m,
                    v,
                    t: *steps.next().unwrap(),
                });
            }
        }
        let spec = meta.backbone;
        let backbone = Backbone::from_layers(layers, spec.activation, spec.encoding, spec.d_in)?;
        let table = match &meta.table {
            Some(t) => {
                let len = t.rows * spec.d_in;
                let entries = take_f64(len);
                let m = take_f64(len);
                let v = take_f64(len);
                let steps = (&mut words).map(u64::from_le_bytes).collect();
                Some(CoordTable::from_parts(
                    spec.d_in, entries, m, v, steps, t.adam,
                )?)
            }
            None => None,
        };
        let model = Model {
            backbone,
            optimizer: BackboneOptimizer::from_states(meta.optimizer_adam, states),
            table,
        };
        Ok(Checkpoint {
            kind: meta.kind,
            spec,
            shape: meta.shape,
            train: meta.train,
            epoch: meta.epoch,
            model,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        write_atomic(path, |f| f.write_all(&bytes))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        Self::from_bytes(path, &bytes)
    }
}
