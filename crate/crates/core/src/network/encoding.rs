use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::numerics::{sin_cos, Tensor2D};

/// Input preprocessing applied before the first layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Encoding {
    None,
    /// Each component `x` becomes `sin(2^k π x), cos(2^k π x)` for
    /// `k = 0..octaves`, grouped per component.
    Fourier {
        octaves: usize,
    },
}

impl Encoding {
    pub fn output_width(&self, d_in: usize) -> usize {
        match *self {
            Encoding::None => d_in,
            Encoding::Fourier { octaves } => d_in * 2 * octaves,
        }
    }

    /// Encodes a single coordinate vector.
    pub fn encode(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.output_width(x.len())];
        self.encode_into(x, &mut out);
        out
    }

    fn encode_into(&self, x: &[f64], out: &mut [f64]) {
        match *self {
            Encoding::None => out.copy_from_slice(x),
            Encoding::Fourier { octaves } => {
                for (j, &xj) in x.iter().enumerate() {
                    let base = j * 2 * octaves;
                    for k in 0..octaves {
                        let (s, c) = sin_cos(octave_freq(k) * xj);
                        out[base + 2 * k] = s;
                        out[base + 2 * k + 1] = c;
                    }
                }
            }
        }
    }

    pub(crate) fn encode_batch(&self, x: &Tensor2D) -> Tensor2D {
        let mut out = Tensor2D::zeros(x.rows(), self.output_width(x.cols()));
        for r in 0..x.rows() {
            self.encode_into(x.row(r), out.row_mut(r));
        }
        out
    }

    /// Chain rule through the encoding: maps `∂L/∂features` to `∂L/∂x`.
    /// `encoded` must be the output of [`Encoding::encode_batch`] on the
    /// same inputs.
    pub(crate) fn backward_batch(
        &self,
        encoded: &Tensor2D,
        grad_features: &Tensor2D,
        d_in: usize,
    ) -> Tensor2D {
        match *self {
            Encoding::None => grad_features.clone(),
            Encoding::Fourier { octaves } => {
                let mut out = Tensor2D::zeros(grad_features.rows(), d_in);
                for r in 0..grad_features.rows() {
                    let feats = encoded.row(r);
                    let g = grad_features.row(r);
                    for j in 0..d_in {
                        let base = j * 2 * octaves;
                        let mut acc = 0.0;
                        for k in 0..octaves {
                            let (s, c) = (feats[base + 2 * k], feats[base + 2 * k + 1]);
                            acc += octave_freq(k) * (g[base + 2 * k] * c - g[base + 2 * k + 1] * s);
                        }
                        out.set(r, j, acc);
                    }
                }
                out
            }
        }
    }
}

#[inline]
fn octave_freq(k: usize) -> f64 {
    (1u64 << k) as f64 * PI
}
