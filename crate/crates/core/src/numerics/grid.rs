use crate::error::{first_non_finite, Error, Result};

/// A sampled signal on a regular lattice: `shape` gives the extents
/// (row-major, last axis fastest) and every lattice element carries
/// `channels` values stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    shape: Vec<usize>,
    channels: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn new(shape: Vec<usize>, channels: usize, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) || channels == 0 {
            return Err(Error::shape(format!(
                "grid extents {shape:?} with {channels} channels"
            )));
        }
        let n: usize = shape.iter().product();
        if data.len() != n * channels {
            return Err(Error::shape(format!(
                "{} values for extents {shape:?} x {channels} channels",
                data.len()
            )));
        }
        if let Some(i) = first_non_finite(&data) {
            return Err(Error::non_finite(i, "grid value"));
        }
        Ok(Self {
            shape,
            channels,
            data,
        })
    }

    pub fn filled(shape: Vec<usize>, channels: usize, value: f64) -> Result<Self> {
        let n: usize = shape.iter().product();
        Self::new(shape, channels, vec![value; n * channels])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    /// Number of lattice elements (not values).
    pub fn len(&self) -> usize {
        self.data.len() / self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn element(&self, i: usize) -> &[f64] {
        &self.data[i * self.channels..(i + 1) * self.channels]
    }

    pub fn element_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.channels..(i + 1) * self.channels]
    }

    pub fn same_layout(&self, other: &Grid) -> bool {
        self.shape == other.shape && self.channels == other.channels
    }

    pub fn clamped(&self) -> Grid {
        Grid {
            shape: self.shape.clone(),
            channels: self.channels,
            data: self.data.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        }
    }

    /// Averages the channels into a single-channel grid.
    pub fn channel_mean(&self) -> Grid {
        let c = self.channels as f64;
        Grid {
            shape: self.shape.clone(),
            channels: 1,
            data: self
                .data
                .chunks_exact(self.channels)
                .map(|e| e.iter().sum::<f64>() / c)
                .collect(),
        }
    }

    /// Extracts one channel as a single-channel grid.
    pub fn channel(&self, ch: usize) -> Grid {
        assert!(ch < self.channels);
        Grid {
            shape: self.shape.clone(),
            channels: 1,
            data: self
                .data
                .chunks_exact(self.channels)
                .map(|e| e[ch])
                .collect(),
        }
    }
}
