use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Grid;

/// `10·log10(1/mse)`; a perfect match is reported as `+∞`.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

/// PSNR between two signals after clamping both to `[0, 1]`.
pub fn psnr(a: &Grid, b: &Grid) -> Result<f64> {
    if !a.same_layout(b) {
        return Err(Error::Shape(format!(
            "{:?}x{} vs {:?}x{}",
            a.shape(),
            a.channels(),
            b.shape(),
            b.channels()
        )));
    }
    let sse: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| {
            let d = x.clamp(0.0, 1.0) - y.clamp(0.0, 1.0);
            d * d
        })
        .sum();
    Ok(psnr_from_mse(sse / a.as_slice().len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub epoch: usize,
    pub loss: f64,
    pub psnr_db: f64,
    pub wall_ms: f64,
}

/// Training curve. `loss` and `psnr_db` at epoch `e` describe the model
/// before that epoch's update; the last row (epoch = number of epochs)
/// describes the trained model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsLog {
    pub rows: Vec<MetricsRow>,
}

impl MetricsLog {
    pub fn push(&mut self, row: MetricsRow) {
        debug_assert!(self.rows.last().is_none_or(|r| r.epoch < row.epoch));
        self.rows.push(row);
    }

    pub fn last(&self) -> Option<&MetricsRow> {
        self.rows.last()
    }

    pub fn final_psnr(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.psnr_db)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,loss,psnr_db,wall_ms\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{:e},{},{:.3}", r.epoch, r.loss, r.psnr_db, r.wall_ms);
        }
        s
    }
}
