//! Multi-height lensless imaging: Fresnel propagation, measurement
//! simulation, physics-constrained reconstruction, and conversion of
//! permittivity contrast to refractive index.

mod reconstruct;

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

pub use reconstruct::{field_from_outputs, reconstruct, LenslessObjective, Reconstruction};

use crate::error::{Error, Result};
use crate::numerics::{ComplexGrid, Fft2Plan, Grid};

/// Wavelength, sensor sampling and capture distances, all in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticsConfig {
    pub wavelength: f64,
    pub pixel_pitch: f64,
    pub heights: Vec<f64>,
    /// Illumination `P`; `None` is a unit plane wave.
    pub illumination: Option<ComplexGrid>,
}

impl OpticsConfig {
    pub fn new(wavelength: f64, pixel_pitch: f64, heights: Vec<f64>) -> Result<Self> {
        let cfg = Self {
            wavelength,
            pixel_pitch,
            heights,
            illumination: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// 532 nm light, 5 µm pixels, sensor at 1.0, 1.5 and 2.0 mm.
    pub fn synthetic() -> Self {
        Self {
            wavelength: 532e-9,
            pixel_pitch: 5e-6,
            heights: vec![1.0e-3, 1.5e-3, 2.0e-3],
            illumination: None,
        }
    }

    pub fn with_illumination(mut self, p: ComplexGrid) -> Self {
        self.illumination = Some(p);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::config(format!(
                "wavelength must be positive, got {}",
                self.wavelength
            )));
        }
        if !(self.pixel_pitch > 0.0 && self.pixel_pitch.is_finite()) {
            return Err(Error::config(format!(
                "pixel pitch must be positive, got {}",
                self.pixel_pitch
            )));
        }
        if self.heights.is_empty() {
            return Err(Error::config("at least one height is required"));
        }
        for (i, z) in self.heights.iter().enumerate() {
            if !z.is_finite() {
                return Err(Error::config(format!("height {i} is not finite")));
            }
            if self.heights[..i].contains(z) {
                return Err(Error::config(format!("height {z} m appears twice")));
            }
        }
        Ok(())
    }

    /// Largest `|z|` whose transfer-function chirp is sampled without
    /// aliasing on an `height × width` grid: `λ|z| ≤ N·Δx²` on both axes.
    pub fn max_distance(&self, height: usize, width: usize) -> f64 {
        height.min(width) as f64 * self.pixel_pitch * self.pixel_pitch / self.wavelength
    }

    fn illumination_for(&self, h: usize, w: usize) -> Result<Vec<Complex64>> {
        match &self.illumination {
            None => Ok(vec![Complex64::new(1.0, 0.0); h * w]),
            Some(p) if p.height() == h && p.width() == w => Ok(p.as_slice().to_vec()),
            Some(p) => Err(Error::shape(format!(
                "illumination is {}x{} but the field is {h}x{w}",
                p.height(),
                p.width()
            ))),
        }
    }
}

/// Fresnel propagation over one distance with a cached transfer function
/// `H = exp(i2πz/λ)·exp(−iπλz(fx² + fy²))`.
pub struct Propagator {
    plan: Fft2Plan,
    z: f64,
    transfer: Vec<Complex64>,
}

impl Propagator {
    pub fn new(height: usize, width: usize, z: f64, optics: &OpticsConfig) -> Result<Self> {
        optics.validate()?;
        let plan = Fft2Plan::new(height, width)?;
        let z_max = optics.max_distance(height, width);
        if z.abs() > z_max {
            return Err(Error::SamplingViolation { z, z_max });
        }
        let lambda = optics.wavelength;
        let dx = optics.pixel_pitch;
        let freq = |k: usize, n: usize| {
            let k = if k < n.div_ceil(2) {
                k as f64
            } else {
                k as f64 - n as f64
            };
            k / (n as f64 * dx)
        };
        let carrier = Complex64::from_polar(1.0, 2.0 * PI * z / lambda);
        let mut transfer = Vec::with_capacity(height * width);
        for ky in 0..height {
            let fy = freq(ky, height);
            for kx in 0..width {
                let fx = freq(kx, width);
                transfer.push(
                    carrier * Complex64::from_polar(1.0, -PI * lambda * z * (fx * fx + fy * fy)),
                );
            }
        }
        Ok(Self { plan, z, transfer })
    }

    pub fn distance(&self) -> f64 {
        self.z
    }

    pub fn forward(&self, field: &mut ComplexGrid) -> Result<()> {
        self.apply(field, false)
    }

    /// Applies the adjoint, which for a unit-modulus transfer function is
    /// propagation over `−z`.
    pub fn adjoint(&self, field: &mut ComplexGrid) -> Result<()> {
        self.apply(field, true)
    }

    fn apply(&self, field: &mut ComplexGrid, conjugate: bool) -> Result<()> {
        self.plan.execute(field, false)?;
        for (v, h) in field.as_mut_slice().iter_mut().zip(&self.transfer) {
            *v *= if conjugate { h.conj() } else { *h };
        }
        self.plan.execute(field, true)
    }
}

pub fn propagate(field: &ComplexGrid, z: f64, optics: &OpticsConfig) -> Result<ComplexGrid> {
    let mut out = field.clone();
    Propagator::new(field.height(), field.width(), z, optics)?.forward(&mut out)?;
    Ok(out)
}

/// Intensity images, one per capture distance.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    heights: Vec<f64>,
    intensities: Vec<Grid>,
}

impl MeasurementSet {
    pub fn new(heights: Vec<f64>, intensities: Vec<Grid>) -> Result<Self> {
        if heights.len() != intensities.len() {
            return Err(Error::shape(format!(
                "{} heights but {} intensity images",
                heights.len(),
                intensities.len()
            )));
        }
        let first = intensities.first().ok_or(Error::EmptyInput)?;
        if first.ndim() != 2 || first.channels() != 1 {
            return Err(Error::shape("intensity images must be 2D single-channel"));
        }
        for g in &intensities {
            if !g.same_layout(first) {
                return Err(Error::shape("intensity images differ in extent"));
            }
            if let Some(i) = g.as_slice().iter().position(|&v| v < 0.0) {
                return Err(Error::non_finite(i, "negative intensity"));
            }
        }
        Ok(Self {
            heights,
            intensities,
        })
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn intensities(&self) -> &[Grid] {
        &self.intensities
    }

    /// `(height, width)` of every image.
    pub fn extent(&self) -> (usize, usize) {
        let s = self.intensities[0].shape();
        (s[0], s[1])
    }

    pub fn peak(&self) -> f64 {
        self.intensities
            .iter()
            .flat_map(|g| g.as_slice())
            .fold(0.0, |a, &b| a.max(b))
    }
}

/// `I_z = |propagate(P ⊙ O, z)|²` for every configured height.
pub fn simulate(object: &ComplexGrid, optics: &OpticsConfig) -> Result<MeasurementSet> {
    optics.validate()?;
    let (h, w) = (object.height(), object.width());
    let p = optics.illumination_for(h, w)?;
    let exit: Vec<Complex64> = object
        .as_slice()
        .iter()
        .zip(&p)
        .map(|(o, p)| o * p)
        .collect();
    let exit = ComplexGrid::from_vec(h, w, exit)?;
    let intensities = optics
        .heights
        .par_iter()
        .map(|&z| {
            let mut u = exit.clone();
            Propagator::new(h, w, z, optics)?.forward(&mut u)?;
            Grid::new(vec![h, w], 1, u.intensity())
        })
        .collect::<Result<Vec<_>>>()?;
    MeasurementSet::new(optics.heights.clone(), intensities)
}

/// Measurement-domain PSNR with the measured peak as the signal maximum.
pub fn measurement_psnr(predicted: &MeasurementSet, measured: &MeasurementSet) -> Result<f64> {
    if predicted.heights.len() != measured.heights.len() || predicted.extent() != measured.extent()
    {
        return Err(Error::shape("measurement sets differ in layout"));
    }
    let mut sse = 0.0;
    let mut n = 0usize;
    for (a, b) in predicted.intensities.iter().zip(&measured.intensities) {
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            sse += (x - y) * (x - y);
            n += 1;
        }
    }
    Ok(peak_psnr(sse / n as f64, measured.peak()))
}

pub(crate) fn peak_psnr(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    }
}

/// Pearson correlation of two equally long sequences; 0 when either is
/// constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Smooth amplitude-and-phase test object on an `n × n` grid: amplitude in
/// roughly `[0.2, 0.9]`, phase up to about 1.6 rad.
pub fn synthetic_phantom(n: usize) -> ComplexGrid {
    let mut amp = Vec::with_capacity(n * n);
    let mut phase = Vec::with_capacity(n * n);
    let gauss = |x: f64, y: f64, cx: f64, cy: f64, s: f64| {
        (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * s * s)).exp()
    };
    for iy in 0..n {
        for ix in 0..n {
            let x = crate::coord_table::lattice_coord(ix, n);
            let y = crate::coord_table::lattice_coord(iy, n);
            let a = 0.55 + 0.3 * gauss(x, y, -0.35, -0.3, 0.25)
                - 0.35 * gauss(x, y, 0.4, 0.35, 0.2)
                + 0.08 * (2.5 * PI * x).sin() * (1.5 * PI * y).cos();
            let p = 1.2 * gauss(x, y, 0.25, -0.3, 0.3) + 0.6 * gauss(x, y, -0.4, 0.45, 0.18);
            amp.push(a.clamp(0.05, 1.0));
            phase.push(p);
        }
    }
    ComplexGrid::from_polar(n, n, &amp, &phase).expect("phantom samples are finite")
}

/// Complex permittivity contrast relative to the background medium.
#[derive(Debug, Clone, PartialEq)]
pub struct PermittivityContrast {
    re: Grid,
    im: Grid,
}

impl PermittivityContrast {
    pub fn new(re: Grid, im: Grid) -> Result<Self> {
        if !re.same_layout(&im) {
            return Err(Error::shape("real and imaginary contrast differ in layout"));
        }
        if let Some(i) = im.as_slice().iter().position(|&v| v < 0.0) {
            return Err(Error::config(format!(
                "imaginary contrast must be non-negative (absorbing), sample {i} is negative"
            )));
        }
        Ok(Self { re, im })
    }

    pub fn re(&self) -> &Grid {
        &self.re
    }

    pub fn im(&self) -> &Grid {
        &self.im
    }
}

/// Real and imaginary refractive index of a medium with background index
/// `n0` and permittivity contrast `Δε`:
/// `n_re = √(½((n0² + Δε_re) + √((n0² + Δε_re)² + Δε_im²)))`, `n_im = Δε_im / (2 n_re)`.
pub fn permittivity_to_ri(p: &PermittivityContrast, n0: f64) -> Result<(Grid, Grid)> {
    if !(n0 > 0.0 && n0.is_finite()) {
        return Err(Error::config(format!(
            "background index must be positive, got {n0}"
        )));
    }
    let mut n_re = Vec::with_capacity(p.re.as_slice().len());
    let mut n_im = Vec::with_capacity(n_re.capacity());
    for (i, (&dr, &di)) in p.re.as_slice().iter().zip(p.im.as_slice()).enumerate() {
        let base = n0 * n0 + dr;
        let re = (0.5 * (base + base.hypot(di))).sqrt();
        let im = di / (2.0 * re);
        if !re.is_finite() || !im.is_finite() {
            return Err(Error::non_finite(i, "refractive index"));
        }
        n_re.push(re);
        n_im.push(im);
    }
    let shape = p.re.shape().to_vec();
    let c = p.re.channels();
    Ok((
        Grid::new(shape.clone(), c, n_re)?,
        Grid::new(shape, c, n_im)?,
    ))
}
