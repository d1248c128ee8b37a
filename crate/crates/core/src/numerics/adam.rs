use serde::{Deserialize, Serialize};

use crate::error::{first_non_finite, Error, Result};

/// Adam hyperparameters other than the learning rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates shadowing one parameter buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

/// Applies one bias-corrected Adam step in place and advances `state.t`.
///
/// Gradients are validated before anything is written, so a non-finite
/// entry leaves both `params` and `state` untouched.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
    cfg: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.len() {
        return Err(Error::shape(format!(
            "params {}, grads {}, optimizer state {}",
            params.len(),
            grads.len(),
            state.len()
        )));
    }
    if let Some(i) = first_non_finite(grads) {
        return Err(Error::non_finite(i, "gradient"));
    }
    state.t += 1;
    adam_update(params, grads, &mut state.m, &mut state.v, state.t, lr, cfg);
    Ok(())
}

/// Raw Adam update with an explicit step count `t ≥ 1`; no validation.
///
/// Shared by the dense optimizer and the per-row lazy table optimizer.
#[inline]
pub fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    t: u64,
    lr: f64,
    cfg: &AdamConfig,
) {
    let bc1 = 1.0 - cfg.beta1.powf(t as f64);
    let bc2 = 1.0 - cfg.beta2.powf(t as f64);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(m.iter_mut())
        .zip(v.iter_mut())
    {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_has_magnitude_lr() {
        let mut p = [1.0];
        let mut s = AdamState::new(1);
        adam_step(&mut p, &[5.0], &mut s, 0.01, &AdamConfig::default()).unwrap();
        assert!(((p[0] - 1.0) + 0.01).abs() < 1e-6);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = [0.3, -2.0, 7.5];
        let mut s = AdamState::new(3);
        adam_step(&mut p, &[0.0; 3], &mut s, 0.1, &AdamConfig::default()).unwrap();
        assert_eq!(p, [0.3, -2.0, 7.5]);
    }

    #[test]
    fn quadratic_descent() {
        // f(p) = p², ∇f = 2p
        let mut p = [1.0];
        let mut s = AdamState::new(1);
        let cfg = AdamConfig::default();
        for _ in 0..100 {
            let g = [2.0 * p[0]];
            adam_step(&mut p, &g, &mut s, 0.1, &cfg).unwrap();
        }
        assert!(p[0].abs() < 0.1, "p = {}", p[0]);
        assert_eq!(s.t, 100);
        assert!(s.v.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn non_finite_gradient_names_index_and_leaves_state() {
        let mut p = [1.0, 2.0, 3.0];
        let mut s = AdamState::new(3);
        let err = adam_step(
            &mut p,
            &[0.0, 1.0, f64::NAN],
            &mut s,
            0.1,
            &AdamConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 2, .. }));
        assert_eq!(p, [1.0, 2.0, 3.0]);
        assert_eq!(s.t, 0);
    }

    #[test]
    fn length_mismatch_is_shape_error() {
        let mut s = AdamState::new(2);
        assert!(matches!(
            adam_step(
                &mut [0.0; 2],
                &[0.0; 3],
                &mut s,
                0.1,
                &AdamConfig::default()
            ),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn bit_reproducible() {
        let run = || {
            let mut p: Vec<f64> = (0..16).map(|i| i as f64 * 0.1).collect();
            let mut s = AdamState::new(16);
            for k in 0..50 {
                let g: Vec<f64> = p.iter().map(|x| (x * k as f64).sin()).collect();
                adam_step(&mut p, &g, &mut s, 0.01, &AdamConfig::default()).unwrap();
            }
            p
        };
        let (a, b) = (run(), run());
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
