use serde::Serialize;

use super::{fit, rearrange, Arrangement, Model, SampleSet, TableInitKind, TrainConfig};
use crate::error::{Error, Result};
use crate::network::BackboneSpec;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderResult {
    pub order: String,
    pub psnr_db: f64,
    pub final_loss: f64,
}

/// Outcome of training one model per arrangement of the same signal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub orders: Vec<OrderResult>,
    /// `(a, b, |ΔPSNR|)` for every pair of orders.
    pub pairwise_gaps_db: Vec<(usize, usize, f64)>,
    pub max_gap_db: f64,
    /// Largest per-entry difference between tables once each is mapped back
    /// to the original element order.
    pub table_residual: f64,
    /// Largest per-parameter difference between the trained backbones.
    pub network_residual: f64,
}

/// Trains one table-backed model per arrangement, each from the same seed
/// and a zero table, and compares them.
///
/// The table init in `cfg` is overridden with zeros; mini-batching is
/// rejected since the shuffle would differ per arrangement.
pub fn invariance_report(
    data: &SampleSet,
    spec: &BackboneSpec,
    cfg: &TrainConfig,
    orders: &[Arrangement],
) -> Result<InvarianceReport> {
    if !cfg.use_table {
        return Err(Error::config("invariance runs need a coordinate table"));
    }
    if cfg.batch_size != 0 {
        return Err(Error::config(
            "invariance runs must use full-batch training",
        ));
    }
    if orders.is_empty() {
        return Err(Error::EmptyInput);
    }
    let cfg = TrainConfig {
        table_init: TableInitKind::Zero,
        ..cfg.clone()
    };

    let mut results = Vec::with_capacity(orders.len());
    let mut aligned_tables = Vec::with_capacity(orders.len());
    let mut backbones = Vec::with_capacity(orders.len());
    for &order in orders {
        let (arranged, perm) = rearrange(data, order);
        let mut model = Model::init(spec, arranged.shape(), &cfg)?;
        let log = fit(&mut model, &arranged, &cfg)?;
        let last = log.last().expect("fit always logs a final row");
        results.push(OrderResult {
            order: order.name(),
            psnr_db: last.psnr_db,
            final_loss: last.loss,
        });

        // Row i of this table encodes original element perm[i].
        let table = model.table.as_ref().expect("use_table checked");
        let d = table.d_in();
        let mut aligned = vec![0.0; table.entries().len()];
        for (i, &src) in perm.iter().enumerate() {
            aligned[src * d..(src + 1) * d].copy_from_slice(table.lookup(i)?);
        }
        aligned_tables.push(aligned);
        backbones.push(model.backbone);
    }

    let mut pairwise = Vec::new();
    let mut max_gap = 0.0f64;
    for a in 0..results.len() {
        for b in a + 1..results.len() {
            let gap = gap_db(results[a].psnr_db, results[b].psnr_db);
            max_gap = max_gap.max(gap);
            pairwise.push((a, b, gap));
        }
    }

    let max_abs_diff = |x: &[f64], y: &[f64]| {
        x.iter()
            .zip(y)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max)
    };
    let table_residual = aligned_tables[1..]
        .iter()
        .map(|t| max_abs_diff(t, &aligned_tables[0]))
        .fold(0.0, f64::max);
    let flat = |bk: &crate::network::Backbone| -> Vec<f64> {
        bk.layers()
            .iter()
            .flat_map(|l| l.weight.as_slice().iter().chain(&l.bias).copied())
            .collect()
    };
    let reference = flat(&backbones[0]);
    let network_residual = backbones[1..]
        .iter()
        .map(|bk| max_abs_diff(&flat(bk), &reference))
        .fold(0.0, f64::max);

    Ok(InvarianceReport {
        orders: results,
        pairwise_gaps_db: pairwise,
        max_gap_db: max_gap,
        table_residual,
        network_residual,
    })
}

// Two perfect fits compare equal.
fn gap_db(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs()
    }
}
