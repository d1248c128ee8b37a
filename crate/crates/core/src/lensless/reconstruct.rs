use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{peak_psnr, MeasurementSet, OpticsConfig, Propagator};
use crate::error::{Error, Result};
use crate::network::BackboneSpec;
use crate::numerics::{ComplexGrid, Tensor2D};
use crate::training::{train, MetricsLog, Model, Objective, TrainConfig};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Maps network outputs `(o0, o1)` per pixel to `sigmoid(o0)·exp(iπ·o1)`.
pub fn field_from_outputs(outputs: &Tensor2D, height: usize, width: usize) -> Result<ComplexGrid> {
    if outputs.cols() != 2 || outputs.rows() != height * width {
        return Err(Error::shape(format!(
            "{}x{} outputs cannot form a {height}x{width} field",
            outputs.rows(),
            outputs.cols()
        )));
    }
    let data = (0..outputs.rows())
        .map(|i| Complex64::from_polar(sigmoid(outputs.get(i, 0)), PI * outputs.get(i, 1)))
        .collect();
    ComplexGrid::from_vec(height, width, data)
}

/// `L = Σ_z ‖|A_z(P ⊙ O)|² − I_z‖²` over network outputs parameterizing `O`.
pub struct LenslessObjective {
    height: usize,
    width: usize,
    propagators: Vec<Propagator>,
    illumination: Vec<Complex64>,
    measured: Vec<Vec<f64>>,
    peak: f64,
}

impl LenslessObjective {
    pub fn new(meas: &MeasurementSet, optics: &OpticsConfig) -> Result<Self> {
        optics.validate()?;
        if meas.heights() != optics.heights.as_slice() {
            return Err(Error::config(
                "measurement heights differ from the optics heights",
            ));
        }
        let (height, width) = meas.extent();
        let propagators = optics
            .heights
            .iter()
            .map(|&z| Propagator::new(height, width, z, optics))
            .collect::<Result<_>>()?;
        Ok(Self {
            height,
            width,
            propagators,
            illumination: optics.illumination_for(height, width)?,
            measured: meas
                .intensities()
                .iter()
                .map(|g| g.as_slice().to_vec())
                .collect(),
            peak: meas.peak(),
        })
    }

    fn exit_field(&self, object: &ComplexGrid) -> ComplexGrid {
        let data = object
            .as_slice()
            .iter()
            .zip(&self.illumination)
            .map(|(o, p)| o * p)
            .collect();
        ComplexGrid::from_vec(self.height, self.width, data).expect("finite by construction")
    }

    /// Per-height predicted fields at the sensor.
    fn sensor_fields(&self, object: &ComplexGrid) -> Result<Vec<ComplexGrid>> {
        let exit = self.exit_field(object);
        self.propagators
            .par_iter()
            .map(|p| {
                let mut u = exit.clone();
                p.forward(&mut u)?;
                Ok(u)
            })
            .collect()
    }

    fn sse(&self, fields: &[ComplexGrid]) -> f64 {
        let mut sse = 0.0;
        for (u, m) in fields.iter().zip(&self.measured) {
            for (v, y) in u.as_slice().iter().zip(m) {
                let r = v.norm_sqr() - y;
                sse += r * r;
            }
        }
        sse
    }

    /// Loss and Wirtinger-style gradient `∂L/∂Re O + i ∂L/∂Im O`.
    pub fn field_loss_and_grad(&self, object: &ComplexGrid) -> Result<(f64, ComplexGrid)> {
        let fields = self.sensor_fields(object)?;
        let loss = self.sse(&fields);
        let back = fields
            .into_par_iter()
            .zip(self.propagators.par_iter().zip(&self.measured))
            .map(|(mut u, (p, m))| {
                for (v, y) in u.as_mut_slice().iter_mut().zip(m) {
                    *v *= 4.0 * (v.norm_sqr() - y);
                }
                p.adjoint(&mut u)?;
                Ok(u)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut grad = vec![Complex64::new(0.0, 0.0); self.height * self.width];
        for g in &back {
            for (a, b) in grad.iter_mut().zip(g.as_slice()) {
                *a += b;
            }
        }
        for (a, p) in grad.iter_mut().zip(&self.illumination) {
            *a *= p.conj();
        }
        Ok((loss, ComplexGrid::from_vec(self.height, self.width, grad)?))
    }

    /// Measurement PSNR of the field, with the measured peak as maximum.
    pub fn field_psnr(&self, object: &ComplexGrid) -> Result<f64> {
        let fields = self.sensor_fields(object)?;
        let n = fields.len() * self.height * self.width;
        Ok(peak_psnr(self.sse(&fields) / n as f64, self.peak))
    }
}

impl Objective for LenslessObjective {
    fn num_samples(&self) -> usize {
        self.height * self.width
    }

    fn d_out(&self) -> usize {
        2
    }

    fn reduction_order(&self) -> Vec<usize> {
        (0..self.num_samples()).collect()
    }

    fn evaluate(&self, outputs: &Tensor2D) -> Result<(f64, Tensor2D)> {
        let object = field_from_outputs(outputs, self.height, self.width)?;
        let (loss, g) = self.field_loss_and_grad(&object)?;
        let mut grad = Tensor2D::zeros(outputs.rows(), 2);
        for (i, g) in g.as_slice().iter().enumerate() {
            let a = sigmoid(outputs.get(i, 0));
            let e = Complex64::from_polar(1.0, PI * outputs.get(i, 1));
            let d_amp = (g * e.conj()).re;
            let d_phase = (g * (Complex64::i() * a * e).conj()).re;
            grad.set(i, 0, d_amp * a * (1.0 - a));
            grad.set(i, 1, d_phase * PI);
        }
        Ok((loss, grad))
    }

    fn psnr(&self, outputs: &Tensor2D) -> f64 {
        field_from_outputs(outputs, self.height, self.width)
            .and_then(|o| self.field_psnr(&o))
            .unwrap_or(f64::NAN)
    }
}

/// Result of fitting a table-backed network to multi-height measurements.
pub struct Reconstruction {
    pub field: ComplexGrid,
    pub model: Model,
    pub log: MetricsLog,
    pub warnings: Vec<String>,
}

/// Recovers the complex object from intensity measurements with a
/// table-backed network whose two outputs are amplitude and phase.
pub fn reconstruct(
    meas: &MeasurementSet,
    optics: &OpticsConfig,
    spec: &BackboneSpec,
    cfg: &TrainConfig,
) -> Result<Reconstruction> {
    if !cfg.use_table {
        return Err(Error::config(
            "reconstruction uses a coordinate table; set use_table",
        ));
    }
    if spec.d_in != 2 || spec.d_out != 2 {
        return Err(Error::config(format!(
            "reconstruction needs a 2 -> 2 backbone, got {} -> {}",
            spec.d_in, spec.d_out
        )));
    }
    let mut warnings = Vec::new();
    if meas.heights().len() < 2 {
        warnings.push(format!(
            "only {} measurement height; phase retrieval is ill-posed and the result may not be unique",
            meas.heights().len()
        ));
    }
    let objective = LenslessObjective::new(meas, optics)?;
    let (h, w) = meas.extent();
    let shape = [h, w];
    let mut model = Model::init(spec, &shape, cfg)?;
    let log = train(&mut model, &objective, &shape, cfg)?;
    let field = field_from_outputs(&model.predict(&shape)?, h, w)?;
    Ok(Reconstruction {
        field,
        model,
        log,
        warnings,
    })
}
