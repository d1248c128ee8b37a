use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex-valued 2D field, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    height: usize,
    width: usize,
    data: Vec<Complex64>,
}

impl ComplexGrid {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, Complex64::new(0.0, 0.0))
    }

    pub fn filled(height: usize, width: usize, value: Complex64) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::shape(format!(
                "{} samples cannot form a {height}x{width} field",
                data.len()
            )));
        }
        if let Some(i) = data
            .iter()
            .position(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::non_finite(i, "complex field sample"));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn from_parts(height: usize, width: usize, re: &[f64], im: &[f64]) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::shape("real and imaginary parts differ in length"));
        }
        Self::from_vec(
            height,
            width,
            re.iter()
                .zip(im)
                .map(|(&r, &i)| Complex64::new(r, i))
                .collect(),
        )
    }

    /// Builds `amplitude · exp(i·phase)` sample by sample.
    pub fn from_polar(
        height: usize,
        width: usize,
        amplitude: &[f64],
        phase: &[f64],
    ) -> Result<Self> {
        if amplitude.len() != phase.len() {
            return Err(Error::shape("amplitude and phase differ in length"));
        }
        Self::from_vec(
            height,
            width,
            amplitude
                .iter()
                .zip(phase)
                .map(|(&a, &p)| Complex64::from_polar(a, p))
                .collect(),
        )
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn re(&self) -> Vec<f64> {
        self.data.iter().map(|c| c.re).collect()
    }

    pub fn im(&self) -> Vec<f64> {
        self.data.iter().map(|c| c.im).collect()
    }

    pub fn amplitude(&self) -> Vec<f64> {
        self.data.iter().map(|c| c.norm()).collect()
    }

    pub fn phase(&self) -> Vec<f64> {
        self.data.iter().map(|c| c.arg()).collect()
    }

    /// `|u|²` per sample.
    pub fn intensity(&self) -> Vec<f64> {
        self.data.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn same_shape(&self, other: &ComplexGrid) -> bool {
        self.height == other.height && self.width == other.width
    }
}
