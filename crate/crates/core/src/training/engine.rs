use std::ops::Range;
use std::time::Instant;

use rayon::prelude::*;

use super::{
    metrics::psnr_from_mse, MetricsLog, MetricsRow, Model, SampleSet, TrainConfig, CHUNK,
    SHUFFLE_STREAM,
};
use crate::error::{Error, Result};
use crate::network::{Backbone, Gradients};
use crate::numerics::{seeded_permutation, Rng, Tensor2D};

/// What the network outputs are scored against.
///
/// Outputs are presented as an `N × d_out` matrix in flat element order.
pub trait Objective: Sync {
    fn num_samples(&self) -> usize;

    fn d_out(&self) -> usize;

    /// Order in which per-element gradient contributions are summed.
    fn reduction_order(&self) -> Vec<usize>;

    /// Targets of a per-element squared-error objective (`N × d_out`, flat
    /// order). Objectives that return them can be trained chunk by chunk
    /// and with mini-batches.
    fn pointwise_targets(&self) -> Option<&[f64]> {
        None
    }

    /// Loss and `∂L/∂outputs`.
    fn evaluate(&self, outputs: &Tensor2D) -> Result<(f64, Tensor2D)>;

    /// Quality of `outputs` in dB.
    fn psnr(&self, outputs: &Tensor2D) -> f64;
}

/// Direct fitting: `L = Σ_i ‖f(x_i) − y_i‖²`.
pub struct L2Fit<'a> {
    data: &'a SampleSet,
}

impl<'a> L2Fit<'a> {
    pub fn new(data: &'a SampleSet) -> Self {
        Self { data }
    }
}

impl Objective for L2Fit<'_> {
    fn num_samples(&self) -> usize {
        self.data.len()
    }

    fn d_out(&self) -> usize {
        self.data.d_out()
    }

    /// Sorting by target makes the summation independent of how the signal
    /// is arranged: elements with equal targets (and equal table rows) make
    /// bitwise-equal contributions, so their relative order is immaterial.
    fn reduction_order(&self) -> Vec<usize> {
        self.data.value_order()
    }

    fn pointwise_targets(&self) -> Option<&[f64]> {
        Some(self.data.values())
    }

    fn evaluate(&self, outputs: &Tensor2D) -> Result<(f64, Tensor2D)> {
        check_outputs(outputs, self.num_samples(), self.d_out())?;
        let y = self.data.values();
        let d = self.d_out();
        let mut grad = Tensor2D::zeros(outputs.rows(), d);
        let mut loss = 0.0;
        for i in self.reduction_order() {
            for c in 0..d {
                let r = outputs.get(i, c) - y[i * d + c];
                loss += r * r;
                grad.set(i, c, 2.0 * r);
            }
        }
        Ok((loss, grad))
    }

    fn psnr(&self, outputs: &Tensor2D) -> f64 {
        let y = self.data.values();
        let sse: f64 = outputs
            .as_slice()
            .iter()
            .zip(y)
            .map(|(o, t)| {
                let r = o.clamp(0.0, 1.0) - t.clamp(0.0, 1.0);
                r * r
            })
            .sum();
        psnr_from_mse(sse / y.len() as f64)
    }
}

fn check_outputs(outputs: &Tensor2D, n: usize, d: usize) -> Result<()> {
    if outputs.rows() != n || outputs.cols() != d {
        return Err(Error::shape(format!(
            "{}x{} outputs for {n} elements with {d} channels",
            outputs.rows(),
            outputs.cols()
        )));
    }
    Ok(())
}

/// Fits `model` directly to `data`.
///
/// `cfg.use_table` must agree with whether the model carries a table.
pub fn fit(model: &mut Model, data: &SampleSet, cfg: &TrainConfig) -> Result<MetricsLog> {
    if model.backbone.d_in() != data.d_in() || model.backbone.d_out() != data.d_out() {
        return Err(Error::config(format!(
            "backbone maps {} -> {} but the signal is {}-d with {} channels",
            model.backbone.d_in(),
            model.backbone.d_out(),
            data.d_in(),
            data.d_out()
        )));
    }
    train(model, &L2Fit::new(data), data.shape(), cfg)
}

struct ChunkOutcome {
    loss: f64,
    clamped_sse: f64,
    grads: Option<Gradients>,
}

/// Generic training loop over any [`Objective`] defined on the lattice
/// `shape`.
pub fn train<O: Objective>(
    model: &mut Model,
    objective: &O,
    shape: &[usize],
    cfg: &TrainConfig,
) -> Result<MetricsLog> {
    cfg.validate()?;
    let n: usize = shape.iter().product();
    if objective.num_samples() != n {
        return Err(Error::config(format!(
            "objective covers {} elements but the lattice has {n}",
            objective.num_samples()
        )));
    }
    if cfg.use_table != model.table.is_some() {
        return Err(Error::config(format!(
            "config use_table = {} but the model {} a table",
            cfg.use_table,
            if model.table.is_some() {
                "has"
            } else {
                "lacks"
            }
        )));
    }
    if let Some(t) = &model.table {
        if t.len() != n {
            return Err(Error::config(format!(
                "table has {} rows for {n} elements",
                t.len()
            )));
        }
    }
    if objective.d_out() != model.backbone.d_out() {
        return Err(Error::config(
            "objective and backbone disagree on output width",
        ));
    }
    if cfg.batch_size > 0 && objective.pointwise_targets().is_none() {
        return Err(Error::config("mini-batching needs a per-element objective"));
    }

    let lattice = if model.table.is_none() {
        Some(crate::coord_table::lattice_coords(shape))
    } else {
        None
    };
    let order = objective.reduction_order();
    let start = Instant::now();
    let mut log = MetricsLog::default();
    let mut shuffle = Rng::new(cfg.seed).substream(SHUFFLE_STREAM);
    let train_table = model.table.is_some() && !cfg.freeze_table;

    for epoch in 0..cfg.epochs {
        let (loss, psnr) = if cfg.batch_size == 0 {
            step(model, objective, lattice.as_ref(), &order, cfg, train_table)?
        } else {
            let perm = seeded_permutation(&mut shuffle, n)?;
            let mut loss = 0.0;
            let mut sse = 0.0;
            for batch in perm.chunks(cfg.batch_size) {
                let (l, s) =
                    step_pointwise(model, objective, lattice.as_ref(), batch, cfg, train_table)?;
                loss += l;
                sse += s;
            }
            (loss, psnr_from_mse(sse / (n * objective.d_out()) as f64))
        };
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        if epoch % cfg.log_every == 0 {
            log.push(MetricsRow {
                epoch,
                loss,
                psnr_db: psnr,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            });
        }
    }

    let inputs = model.inputs(shape)?;
    let outputs = predict(&model.backbone, &inputs)?;
    let (loss, _) = objective.evaluate(&outputs)?;
    if !loss.is_finite() {
        return Err(Error::Diverged {
            epoch: cfg.epochs,
            loss,
        });
    }
    log.push(MetricsRow {
        epoch: cfg.epochs,
        loss,
        psnr_db: objective.psnr(&outputs),
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    });
    Ok(log)
}

fn chunk_ranges(len: usize) -> Vec<Range<usize>> {
    (0..len)
        .step_by(CHUNK)
        .map(|s| s..(s + CHUNK).min(len))
        .collect()
}

fn gather_inputs(model: &Model, lattice: Option<&Tensor2D>, idx: &[usize]) -> Result<Tensor2D> {
    match (&model.table, lattice) {
        (Some(t), _) => t.gather(idx),
        (None, Some(l)) => {
            let mut x = Tensor2D::zeros(idx.len(), l.cols());
            for (r, &i) in idx.iter().enumerate() {
                x.row_mut(r).copy_from_slice(l.row(i));
            }
            Ok(x)
        }
        (None, None) => unreachable!("lattice is built whenever there is no table"),
    }
}

/// Pairwise sum with a shape fixed by the number of parts.
fn tree_sum(mut parts: Vec<Gradients>) -> Gradients {
    assert!(!parts.is_empty());
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                a.add_params(&b);
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().unwrap()
}

fn apply_updates(
    model: &mut Model,
    chunks: &[&[usize]],
    mut outcomes: Vec<Gradients>,
    cfg: &TrainConfig,
    train_table: bool,
) -> Result<()> {
    if train_table {
        let table = model.table.as_mut().expect("train_table implies a table");
        for (idx, g) in chunks.iter().zip(outcomes.iter_mut()) {
            let gin = g.input.take().expect("input gradients requested");
            table.step_rows(idx, &gin, cfg.table_lr())?;
        }
    }
    let total = tree_sum(outcomes);
    model
        .optimizer
        .step(&mut model.backbone, &total, cfg.lr_net)
}

/// One optimizer step over the elements in `idx` for a per-element
/// objective, forward and backward fused per chunk. Returns the loss and the
/// clamped squared error before the update.
fn step_pointwise<O: Objective>(
    model: &mut Model,
    objective: &O,
    lattice: Option<&Tensor2D>,
    idx: &[usize],
    cfg: &TrainConfig,
    train_table: bool,
) -> Result<(f64, f64)> {
    let targets = objective.pointwise_targets().expect("checked by caller");
    let d = objective.d_out();
    let chunks: Vec<&[usize]> = chunk_ranges(idx.len())
        .into_iter()
        .map(|r| &idx[r])
        .collect();
    let m: &Model = model;
    let outcomes: Vec<ChunkOutcome> = chunks
        .par_iter()
        .map(|ids| {
            let x = gather_inputs(m, lattice, ids)?;
            let (out, trace) = m.backbone.forward_traced(&x)?;
            let mut g = Tensor2D::zeros(ids.len(), d);
            let mut loss = 0.0;
            let mut clamped_sse = 0.0;
            for (r, &i) in ids.iter().enumerate() {
                for c in 0..d {
                    let o = out.get(r, c);
                    let y = targets[i * d + c];
                    let res = o - y;
                    loss += res * res;
                    g.set(r, c, 2.0 * res);
                    let rc = o.clamp(0.0, 1.0) - y.clamp(0.0, 1.0);
                    clamped_sse += rc * rc;
                }
            }
            let grads = m.backbone.backward(&trace, &g, train_table)?;
            Ok(ChunkOutcome {
                loss,
                clamped_sse,
                grads: Some(grads),
            })
        })
        .collect::<Result<_>>()?;
    let loss = outcomes.iter().map(|o| o.loss).sum();
    let sse = outcomes.iter().map(|o| o.clamped_sse).sum();
    if !f64::is_finite(loss) {
        return Ok((loss, sse));
    }
    let grads = outcomes.into_iter().map(|o| o.grads.unwrap()).collect();
    apply_updates(model, &chunks, grads, cfg, train_table)?;
    Ok((loss, sse))
}

/// One full-batch optimizer step. Returns the loss and PSNR before the
/// update.
fn step<O: Objective>(
    model: &mut Model,
    objective: &O,
    lattice: Option<&Tensor2D>,
    order: &[usize],
    cfg: &TrainConfig,
    train_table: bool,
) -> Result<(f64, f64)> {
    if objective.pointwise_targets().is_some() {
        let (loss, sse) = step_pointwise(model, objective, lattice, order, cfg, train_table)?;
        return Ok((
            loss,
            psnr_from_mse(sse / (order.len() * objective.d_out()) as f64),
        ));
    }

    let d = objective.d_out();
    let chunks: Vec<&[usize]> = chunk_ranges(order.len())
        .into_iter()
        .map(|r| &order[r])
        .collect();
    let m: &Model = model;
    let forwards = chunks
        .par_iter()
        .map(|ids| m.backbone.forward_traced(&gather_inputs(m, lattice, ids)?))
        .collect::<Result<Vec<_>>>()?;
    let mut outputs = Tensor2D::zeros(order.len(), d);
    for (ids, (out, _)) in chunks.iter().zip(&forwards) {
        for (r, &i) in ids.iter().enumerate() {
            outputs.row_mut(i).copy_from_slice(out.row(r));
        }
    }
    let (loss, grad) = objective.evaluate(&outputs)?;
    let psnr = objective.psnr(&outputs);
    if !loss.is_finite() {
        return Ok((loss, psnr));
    }
    let grads = chunks
        .par_iter()
        .zip(forwards.par_iter())
        .map(|(ids, (_, trace))| {
            let mut g = Tensor2D::zeros(ids.len(), d);
            for (r, &i) in ids.iter().enumerate() {
                g.row_mut(r).copy_from_slice(grad.row(i));
            }
            m.backbone.backward(trace, &g, train_table)
        })
        .collect::<Result<Vec<_>>>()?;
    apply_updates(model, &chunks, grads, cfg, train_table)?;
    Ok((loss, psnr))
}

/// Chunked, parallel forward evaluation of `inputs` (one row per element).
pub(crate) fn predict(backbone: &Backbone, inputs: &Tensor2D) -> Result<Tensor2D> {
    let ranges = chunk_ranges(inputs.rows());
    let parts = ranges
        .par_iter()
        .map(|r| {
            let x = Tensor2D::from_vec(
                r.len(),
                inputs.cols(),
                inputs.as_slice()[r.start * inputs.cols()..r.end * inputs.cols()].to_vec(),
            )?;
            backbone.forward(&x, None)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut data = Vec::with_capacity(inputs.rows() * backbone.d_out());
    for p in parts {
        data.extend_from_slice(p.as_slice());
    }
    Tensor2D::from_vec(inputs.rows(), backbone.d_out(), data)
}
