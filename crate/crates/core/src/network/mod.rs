//! Coordinate network backbone: an optional input encoding, hidden layers
//! with a shared activation, and a final affine layer with no activation.
//!
//! Forward and backward passes operate on batches (one coordinate per row)
//! and the backward pass is derived by hand, producing both parameter
//! gradients and gradients with respect to the raw input coordinates. The
//! latter are what drive the learnable coordinate table.

mod encoding;

use serde::{Deserialize, Serialize};

pub use encoding::Encoding;

use crate::error::{first_non_finite, Error, Result};
use crate::numerics::{
    adam_step, matmul_into, sine_activation, AdamConfig, AdamState, Rng, Tensor2D, Transpose,
};

pub const DEFAULT_OMEGA0: f64 = 30.0;
pub const DEFAULT_OCTAVES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Relu,
    /// `sin(omega0 · a)`
    Sine {
        omega0: f64,
    },
}

impl Activation {
    pub fn sine() -> Self {
        Activation::Sine {
            omega0: DEFAULT_OMEGA0,
        }
    }
}

/// Architecture description; `depth` counts hidden layers, so a `2×64`
/// network has `depth = 2, width = 64` plus the linear output layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackboneSpec {
    pub d_in: usize,
    pub d_out: usize,
    pub width: usize,
    pub depth: usize,
    pub activation: Activation,
    pub encoding: Encoding,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out × in`
    pub weight: Tensor2D,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(fan_out: usize, fan_in: usize) -> Self {
        Self {
            weight: Tensor2D::zeros(fan_out, fan_in),
            bias: vec![0.0; fan_out],
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.cols()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.rows()
    }

    fn add_assign(&mut self, other: &Layer) {
        for (a, b) in self
            .weight
            .as_mut_slice()
            .iter_mut()
            .zip(other.weight.as_slice())
        {
            *a += b;
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Backbone {
    layers: Vec<Layer>,
    activation: Activation,
    encoding: Encoding,
    d_in: usize,
    d_out: usize,
}

/// Intermediate values recorded by [`Backbone::forward`] for the backward
/// pass. Instead of raw pre-activations it keeps the activation slope
/// `ρ'(a)`, which is all the chain rule needs.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    input: Tensor2D,
    encoded: Tensor2D,
    hidden: Vec<Tensor2D>,
    slopes: Vec<Tensor2D>,
}

impl ForwardTrace {
    pub fn batch_len(&self) -> usize {
        self.input.rows()
    }

    /// Post-activation outputs of the hidden layers.
    pub fn hidden(&self) -> &[Tensor2D] {
        &self.hidden
    }
}

/// Parameter gradients (same layout as the backbone's layers) and,
/// optionally, gradients with respect to the raw input coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
    pub input: Option<Tensor2D>,
}

impl Gradients {
    pub fn zeros_like(bk: &Backbone) -> Self {
        Self {
            layers: bk
                .layers
                .iter()
                .map(|l| Layer::zeros(l.fan_out(), l.fan_in()))
                .collect(),
            input: None,
        }
    }

    /// Adds the parameter gradients of `other`; input gradients are ignored.
    pub fn add_params(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.add_assign(b);
        }
    }
}

impl Backbone {
    /// Builds a backbone from explicit layers, checking that widths chain.
    pub fn from_layers(
        layers: Vec<Layer>,
        activation: Activation,
        encoding: Encoding,
        d_in: usize,
    ) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::config("a backbone needs at least one hidden layer"));
        }
        validate_activation(&activation)?;
        validate_encoding(&encoding)?;
        let mut width = encoding.output_width(d_in);
        for (i, l) in layers.iter().enumerate() {
            if l.fan_in() != width {
                return Err(Error::shape(format!(
                    "layer {i} expects {} inputs but receives {width}",
                    l.fan_in()
                )));
            }
            if l.bias.len() != l.fan_out() {
                return Err(Error::shape(format!(
                    "layer {i} bias has {} entries for {} outputs",
                    l.bias.len(),
                    l.fan_out()
                )));
            }
            if let Some(j) = first_non_finite(l.weight.as_slice()).or(first_non_finite(&l.bias)) {
                return Err(Error::non_finite(j, format!("layer {i} parameter")));
            }
            width = l.fan_out();
        }
        let d_out = width;
        Ok(Self {
            layers,
            activation,
            encoding,
            d_in,
            d_out,
        })
    }

    /// Random initialization.
    ///
    /// ReLU layers draw weights from `U(±√(6/n))` (He-uniform, `n` = fan-in).
    /// Sine layers follow the usual sine-network scheme: the first layer uses
    /// `U(±1/n)` and later layers `U(±√(6/n)/ω0)`. Biases always come from
    /// `U(±1/√n)`.
    pub fn init(spec: &BackboneSpec, rng: &mut Rng) -> Result<Self> {
        if spec.width == 0 || spec.depth == 0 || spec.d_in == 0 || spec.d_out == 0 {
            return Err(Error::config(format!(
                "width, depth, d_in and d_out must be positive (got {}x{}, {} -> {})",
                spec.depth, spec.width, spec.d_in, spec.d_out
            )));
        }
        validate_activation(&spec.activation)?;
        validate_encoding(&spec.encoding)?;
        let mut widths = vec![spec.encoding.output_width(spec.d_in)];
        widths.extend(std::iter::repeat_n(spec.width, spec.depth));
        widths.push(spec.d_out);

        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let n = fan_in as f64;
                let w_bound = match spec.activation {
                    Activation::Relu => (6.0 / n).sqrt(),
                    Activation::Sine { .. } if i == 0 => 1.0 / n,
                    Activation::Sine { omega0 } => (6.0 / n).sqrt() / omega0,
                };
                let b_bound = 1.0 / n.sqrt();
                let mut layer = Layer::zeros(fan_out, fan_in);
                for v in layer.weight.as_mut_slice() {
                    *v = rng.uniform(-w_bound, w_bound);
                }
                for v in &mut layer.bias {
                    *v = rng.uniform(-b_bound, b_bound);
                }
                layer
            })
            .collect();
        Self::from_layers(layers, spec.activation, spec.encoding, spec.d_in)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn encoding(&self) -> Encoding {
        self.encoding
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.as_slice().len() + l.bias.len())
            .sum()
    }

    /// Evaluates a single coordinate.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let batch = Tensor2D::from_vec(1, x.len(), x.to_vec())?;
        Ok(self.forward(&batch, None)?.into_vec())
    }

    /// Evaluates a batch (`batch × d_in`), optionally recording a trace.
    pub fn forward(&self, coords: &Tensor2D, trace: Option<&mut ForwardTrace>) -> Result<Tensor2D> {
        if coords.cols() != self.d_in {
            return Err(Error::shape(format!(
                "backbone takes {}-d coordinates, got {}",
                self.d_in,
                coords.cols()
            )));
        }
        if let Some(i) = first_non_finite(coords.as_slice()) {
            return Err(Error::non_finite(i, "input coordinate"));
        }
        let batch = coords.rows();
        let encoded = self.encoding.encode_batch(coords);
        let last = self.layers.len() - 1;
        let mut hidden = Vec::with_capacity(last);
        let mut slopes = Vec::with_capacity(last);
        for (i, layer) in self.layers[..last].iter().enumerate() {
            let prev = if i == 0 { &encoded } else { &hidden[i - 1] };
            let mut a = affine(layer, prev);
            let mut slope = Tensor2D::zeros(batch, layer.fan_out());
            apply_activation(self.activation, &mut a, &mut slope);
            hidden.push(a);
            slopes.push(slope);
        }
        let prev = hidden.last().unwrap_or(&encoded);
        let out = affine(&self.layers[last], prev);
        if let Some(t) = trace {
            *t = ForwardTrace {
                input: coords.clone(),
                encoded,
                hidden,
                slopes,
            };
        }
        Ok(out)
    }

    /// Forward pass that also returns the trace.
    pub fn forward_traced(&self, coords: &Tensor2D) -> Result<(Tensor2D, ForwardTrace)> {
        let mut trace = ForwardTrace {
            input: Tensor2D::zeros(0, 0),
            encoded: Tensor2D::zeros(0, 0),
            hidden: Vec::new(),
            slopes: Vec::new(),
        };
        let out = self.forward(coords, Some(&mut trace))?;
        Ok((out, trace))
    }

    /// Back-propagates `grad_out = ∂L/∂output` (`batch × d_out`).
    ///
    /// Activation slopes: `ω0·cos(ω0·a)` for sine and `1[a > 0]` for ReLU
    /// (so the slope at exactly zero is zero).
    pub fn backward(
        &self,
        trace: &ForwardTrace,
        grad_out: &Tensor2D,
        want_input_grad: bool,
    ) -> Result<Gradients> {
        let batch = trace.batch_len();
        if grad_out.rows() != batch || grad_out.cols() != self.d_out {
            return Err(Error::shape(format!(
                "upstream gradient is {}x{}, expected {batch}x{}",
                grad_out.rows(),
                grad_out.cols(),
                self.d_out
            )));
        }
        if trace.hidden.len() != self.layers.len() - 1
            || trace.encoded.cols() != self.layers[0].fan_in()
        {
            return Err(Error::shape("trace was not produced by this backbone"));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = grad_out.clone();
        let mut input_features = None;
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let prev = if l == 0 {
                &trace.encoded
            } else {
                &trace.hidden[l - 1]
            };
            let mut g = Layer::zeros(layer.fan_out(), layer.fan_in());
            matmul_into(
                &delta,
                Transpose::Yes,
                prev,
                Transpose::No,
                0.0,
                &mut g.weight,
            );
            for r in 0..batch {
                for (b, d) in g.bias.iter_mut().zip(delta.row(r)) {
                    *b += d;
                }
            }
            grads.push(g);
            if l > 0 || want_input_grad {
                let mut dprev = Tensor2D::zeros(batch, layer.fan_in());
                matmul_into(
                    &delta,
                    Transpose::No,
                    &layer.weight,
                    Transpose::No,
                    0.0,
                    &mut dprev,
                );
                if l > 0 {
                    for (d, s) in dprev
                        .as_mut_slice()
                        .iter_mut()
                        .zip(trace.slopes[l - 1].as_slice())
                    {
                        *d *= s;
                    }
                    delta = dprev;
                } else {
                    input_features = Some(dprev);
                }
            }
        }
        grads.reverse();
        let input =
            input_features.map(|gf| self.encoding.backward_batch(&trace.encoded, &gf, self.d_in));
        Ok(Gradients {
            layers: grads,
            input,
        })
    }
}

fn validate_activation(a: &Activation) -> Result<()> {
    match *a {
        Activation::Sine { omega0 } if !(omega0 > 0.0 && omega0.is_finite()) => Err(Error::config(
            format!("sine frequency must be positive, got {omega0}"),
        )),
        _ => Ok(()),
    }
}

fn validate_encoding(e: &Encoding) -> Result<()> {
    match *e {
        Encoding::Fourier { octaves: 0 } => {
            Err(Error::config("Fourier encoding needs at least one octave"))
        }
        Encoding::Fourier { octaves } if octaves > 52 => Err(Error::config(format!(
            "{octaves} octaves exceed f64 resolution"
        ))),
        _ => Ok(()),
    }
}

/// `prev · Wᵀ + b`, one row per sample.
fn affine(layer: &Layer, prev: &Tensor2D) -> Tensor2D {
    let mut out = Tensor2D::zeros(prev.rows(), layer.fan_out());
    for r in 0..prev.rows() {
        out.row_mut(r).copy_from_slice(&layer.bias);
    }
    matmul_into(
        prev,
        Transpose::No,
        &layer.weight,
        Transpose::Yes,
        1.0,
        &mut out,
    );
    out
}

fn apply_activation(act: Activation, a: &mut Tensor2D, slope: &mut Tensor2D) {
    match act {
        Activation::Relu => {
            for (v, s) in a.as_mut_slice().iter_mut().zip(slope.as_mut_slice()) {
                if *v > 0.0 {
                    *s = 1.0;
                } else {
                    *v = 0.0;
                    *s = 0.0;
                }
            }
        }
        Activation::Sine { omega0 } => {
            sine_activation(a.as_mut_slice(), slope.as_mut_slice(), omega0)
        }
    }
}

/// Dense Adam over every backbone parameter, one state per weight/bias
/// buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct BackboneOptimizer {
    pub config: AdamConfig,
    states: Vec<AdamState>,
}

impl BackboneOptimizer {
    pub fn new(bk: &Backbone, config: AdamConfig) -> Self {
        let states = bk
            .layers
            .iter()
            .flat_map(|l| {
                [
                    AdamState::new(l.weight.as_slice().len()),
                    AdamState::new(l.bias.len()),
                ]
            })
            .collect();
        Self { config, states }
    }

    /// Weight state then bias state, per layer.
    pub fn states(&self) -> &[AdamState] {
        &self.states
    }

    pub fn from_states(config: AdamConfig, states: Vec<AdamState>) -> Self {
        Self { config, states }
    }

    pub fn step(&mut self, bk: &mut Backbone, grads: &Gradients, lr: f64) -> Result<()> {
        if grads.layers.len() != bk.layers.len() || self.states.len() != 2 * bk.layers.len() {
            return Err(Error::shape(
                "gradient or optimizer layout differs from backbone",
            ));
        }
        // Validate everything first so a bad gradient leaves the model intact.
        let mut offset = 0;
        for g in &grads.layers {
            for buf in [g.weight.as_slice(), g.bias.as_slice()] {
                if let Some(i) = first_non_finite(buf) {
                    return Err(Error::non_finite(offset + i, "backbone gradient"));
                }
                offset += buf.len();
            }
        }
        for ((layer, g), st) in bk
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(self.states.chunks_exact_mut(2))
        {
            adam_step(
                layer.weight.as_mut_slice(),
                g.weight.as_slice(),
                &mut st[0],
                lr,
                &self.config,
            )?;
            adam_step(&mut layer.bias, &g.bias, &mut st[1], lr, &self.config)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
