//! Frequency-band statistics, learned-INR extraction, and upsampling of
//! network outputs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coord_table::CoordTable;
use crate::error::{Error, Result};
use crate::network::Backbone;
use crate::numerics::{fft2_in_place, ComplexGrid, Grid, Tensor2D};

pub const DEFAULT_BANDS: usize = 4;

/// Share of spectral magnitude per radial band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// `[r_lo, r_hi)` per band in cycles per sample; the last band is closed.
    pub band_edges: Vec<(f64, f64)>,
    pub band_ratios: Vec<f64>,
    /// Sum of `|F|` over all bins.
    pub total_energy: f64,
}

/// Splits the 2D spectrum of `img` (channels averaged) into `n_bands`
/// equal-width annuli of normalized radial frequency `r ∈ [0, √2/2]` and
/// reports each band's share of the total magnitude. DC falls in band 0.
pub fn band_ratios(img: &Grid, n_bands: usize) -> Result<SpectrumReport> {
    if img.ndim() != 2 {
        return Err(Error::shape(format!(
            "band ratios need a 2D grid, got {}D",
            img.ndim()
        )));
    }
    if n_bands == 0 {
        return Err(Error::config("at least one band is required"));
    }
    let (h, w) = (img.shape()[0], img.shape()[1]);
    let gray = img.channel_mean();
    let spectrum = spectrum(h, w, gray.as_slice())?;

    let r_max = 0.5 * std::f64::consts::SQRT_2;
    let width = r_max / n_bands as f64;
    let mut sums = vec![0.0; n_bands];
    for ky in 0..h {
        let fy = signed_frequency(ky, h);
        for kx in 0..w {
            let fx = signed_frequency(kx, w);
            let r = fx.hypot(fy);
            let band = ((r / width) as usize).min(n_bands - 1);
            sums[band] += spectrum.as_slice()[ky * w + kx].norm();
        }
    }
    let total: f64 = sums.iter().sum();
    let band_ratios = if total > 0.0 {
        sums.iter().map(|s| s / total).collect()
    } else {
        // All-zero image: treat as pure DC.
        let mut r = vec![0.0; n_bands];
        r[0] = 1.0;
        r
    };
    let band_edges = (0..n_bands)
        .map(|k| (k as f64 * width, (k + 1) as f64 * width))
        .collect();
    Ok(SpectrumReport {
        band_edges,
        band_ratios,
        total_energy: total,
    })
}

/// Bin index to frequency in `[-0.5, 0.5)` cycles per sample.
fn signed_frequency(k: usize, n: usize) -> f64 {
    let k = k as f64;
    let n = n as f64;
    if k < n / 2.0 {
        k / n
    } else {
        (k - n) / n
    }
}

fn spectrum(h: usize, w: usize, values: &[f64]) -> Result<ComplexGrid> {
    let mut g = ComplexGrid::from_vec(
        h,
        w,
        values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
    )?;
    if h.is_power_of_two() && w.is_power_of_two() {
        fft2_in_place(&mut g, false)?;
        return Ok(g);
    }
    // Separable direct transform for other sizes.
    let row_t = dft_matrix(w);
    let col_t = dft_matrix(h);
    let data = g.as_mut_slice();
    let mut buf = vec![Complex64::new(0.0, 0.0); h.max(w)];
    for y in 0..h {
        let row = &mut data[y * w..(y + 1) * w];
        for (k, out) in buf[..w].iter_mut().enumerate() {
            *out = row
                .iter()
                .zip(&row_t[k * w..(k + 1) * w])
                .map(|(a, b)| a * b)
                .sum();
        }
        row.copy_from_slice(&buf[..w]);
    }
    for x in 0..w {
        for (k, out) in buf[..h].iter_mut().enumerate() {
            *out = (0..h).map(|y| data[y * w + x] * col_t[k * h + y]).sum();
        }
        for y in 0..h {
            data[y * w + x] = buf[y];
        }
    }
    Ok(g)
}

fn dft_matrix(n: usize) -> Vec<Complex64> {
    let mut m = Vec::with_capacity(n * n);
    for k in 0..n {
        for j in 0..n {
            let angle = -2.0 * std::f64::consts::PI * ((k * j) % n) as f64 / n as f64;
            m.push(Complex64::from_polar(1.0, angle));
        }
    }
    m
}

/// Evaluates `backbone` on a uniform mesh of `resolution` spanning the
/// per-axis bounding box of the table entries, clamped to `[0, 1]`.
pub fn extract_learned_inr(
    backbone: &Backbone,
    table: &CoordTable,
    resolution: &[usize],
) -> Result<Grid> {
    let d = table.d_in();
    if resolution.len() != d || backbone.d_in() != d {
        return Err(Error::shape(format!(
            "resolution has {} axes, table {d}, backbone {}",
            resolution.len(),
            backbone.d_in()
        )));
    }
    if resolution.contains(&0) {
        return Err(Error::EmptyInput);
    }
    let bounds = table.bounds();
    for (axis, &(lo, hi)) in bounds.iter().enumerate() {
        if lo == hi {
            return Err(Error::DegenerateRange { axis, value: lo });
        }
    }
    let n: usize = resolution.iter().product();
    let mut mesh = Tensor2D::zeros(n, d);
    for i in 0..n {
        let mut rem = i;
        for axis in (0..d).rev() {
            let len = resolution[axis];
            let k = rem % len;
            rem /= len;
            let (lo, hi) = bounds[axis];
            let t = if len == 1 {
                0.5
            } else {
                k as f64 / (len - 1) as f64
            };
            mesh.set(i, axis, lo + (hi - lo) * t);
        }
    }
    let out = crate::training::predict_inputs(backbone, &mesh)?;
    Ok(Grid::new(resolution.to_vec(), backbone.d_out(), out.into_vec())?.clamped())
}

/// Multilinear upsampling: each axis of extent `n` becomes `(n − 1)·factor + 1`,
/// keeping the original samples and filling between them linearly.
pub fn post_interpolate(out: &Grid, factor: usize) -> Result<Grid> {
    if factor == 0 {
        return Err(Error::config("interpolation factor must be at least 1"));
    }
    if factor == 1 {
        return Ok(out.clone());
    }
    let shape = out.shape();
    let c = out.channels();
    let new_shape: Vec<usize> = shape.iter().map(|&n| (n - 1) * factor + 1).collect();
    let total: usize = new_shape.iter().product();
    let d = shape.len();
    let mut data = Vec::with_capacity(total * c);
    let mut pos = vec![(0usize, 0.0f64); d];
    let mut acc = vec![0.0; c];
    for i in 0..total {
        let mut rem = i;
        for axis in (0..d).rev() {
            let k = rem % new_shape[axis];
            rem /= new_shape[axis];
            let (base, frac) = (k / factor, (k % factor) as f64 / factor as f64);
            pos[axis] = (base, frac);
        }
        acc.fill(0.0);
        // Visit the 2^d surrounding corners.
        for corner in 0..(1usize << d) {
            let mut weight = 1.0;
            let mut flat = 0;
            for axis in 0..d {
                let (base, frac) = pos[axis];
                let upper = corner >> axis & 1 == 1;
                weight *= if upper { frac } else { 1.0 - frac };
                let idx = if upper {
                    (base + 1).min(shape[axis] - 1)
                } else {
                    base
                };
                flat = flat * shape[axis] + idx;
            }
            if weight != 0.0 {
                for (a, v) in acc.iter_mut().zip(out.element(flat)) {
                    *a += weight * v;
                }
            }
        }
        data.extend_from_slice(&acc);
    }
    Grid::new(new_shape, c, data)
}
