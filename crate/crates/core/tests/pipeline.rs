use std::f64::consts::PI;

use diner_core::lensless::{
    reconstruct, simulate, synthetic_phantom, LenslessObjective, OpticsConfig,
};
use diner_core::network::{Activation, Backbone, BackboneSpec, Encoding};
use diner_core::numerics::{fft2, ComplexGrid, Grid, Rng, Tensor2D};
use diner_core::spectral::band_ratios;
use diner_core::synthetic::dead_leaves;
use diner_core::training::{
    fit, invariance_report, rearrange, Arrangement, Model, SampleSet, TableInitKind, TrainConfig,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn dft2(g: &ComplexGrid) -> Vec<Complex64> {
    let (h, w) = (g.height(), g.width());
    let x = g.as_slice();
    let mut out = vec![Complex64::new(0.0, 0.0); h * w];
    for ky in 0..h {
        for kx in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for y in 0..h {
                for xx in 0..w {
                    let ang =
                        -2.0 * PI * ((ky * y) as f64 / h as f64 + (kx * xx) as f64 / w as f64);
                    acc += x[y * w + xx] * Complex64::from_polar(1.0, ang);
                }
            }
            out[ky * w + kx] = acc;
        }
    }
    out
}

#[test]
fn fft_matches_direct_transform() {
    let mut rng = Rng::new(4);
    let (h, w) = (8, 16);
    let data = (0..h * w)
        .map(|_| Complex64::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)))
        .collect();
    let g = ComplexGrid::from_vec(h, w, data).unwrap();
    let fast = fft2(&g, false).unwrap();
    for (a, b) in fast.as_slice().iter().zip(dft2(&g)) {
        assert!((a - b).norm() < 1e-10);
    }
    let back = fft2(&fast, true).unwrap();
    for (a, b) in back.as_slice().iter().zip(g.as_slice()) {
        assert!((a - b).norm() < 1e-12);
    }
}

fn loss(bk: &Backbone, x: &Tensor2D) -> f64 {
    let y = bk.forward(x, None).unwrap();
    y.as_slice()
        .iter()
        .enumerate()
        .map(|(i, v)| 0.5 * v * v * (1.0 + i as f64 * 0.1))
        .sum()
}

#[test]
fn backbone_gradients_match_finite_differences() {
    let configs = [
        (Activation::Relu, Encoding::None),
        (Activation::Relu, Encoding::Fourier { octaves: 2 }),
        (Activation::Sine { omega0: 3.0 }, Encoding::None),
        (
            Activation::Sine { omega0: 3.0 },
            Encoding::Fourier { octaves: 2 },
        ),
    ];
    for (k, (activation, encoding)) in configs.into_iter().enumerate() {
        let spec = BackboneSpec {
            d_in: 2,
            d_out: 2,
            width: 6,
            depth: 2,
            activation,
            encoding,
        };
        let mut rng = Rng::new(k as u64);
        let bk = Backbone::init(&spec, &mut rng).unwrap();
        let x = Tensor2D::from_vec(3, 2, (0..6).map(|_| rng.uniform(-0.9, 0.9)).collect()).unwrap();
        let (y, trace) = bk.forward_traced(&x).unwrap();
        let g_out = Tensor2D::from_vec(
            3,
            2,
            y.as_slice()
                .iter()
                .enumerate()
                .map(|(i, v)| v * (1.0 + i as f64 * 0.1))
                .collect(),
        )
        .unwrap();
        let grads = bk.backward(&trace, &g_out, true).unwrap();
        let h = 1e-6;
        for (li, layer) in grads.layers.iter().enumerate() {
            for (pi, analytic) in layer.weight.as_slice().iter().enumerate().step_by(5) {
                let mut plus = bk.clone();
                plus.layers_mut()[li].weight.as_mut_slice()[pi] += h;
                let mut minus = bk.clone();
                minus.layers_mut()[li].weight.as_mut_slice()[pi] -= h;
                let fd = (loss(&plus, &x) - loss(&minus, &x)) / (2.0 * h);
                assert!(
                    (fd - analytic).abs() <= 1e-5 * fd.abs().max(1e-2),
                    "{k} layer {li} w{pi}: {fd} vs {analytic}"
                );
            }
        }
        let gin = grads.input.unwrap();
        for i in 0..6 {
            let mut xp = x.clone();
            xp.as_mut_slice()[i] += h;
            let mut xm = x.clone();
            xm.as_mut_slice()[i] -= h;
            let fd = (loss(&bk, &xp) - loss(&bk, &xm)) / (2.0 * h);
            let a = gin.as_slice()[i];
            assert!(
                (fd - a).abs() <= 1e-5 * fd.abs().max(1e-2),
                "{k} input {i}: {fd} vs {a}"
            );
        }
    }
}

fn optics() -> OpticsConfig {
    OpticsConfig::new(532e-9, 1e-5, vec![1e-3, 2e-3]).unwrap()
}

#[test]
fn physics_gradient_matches_finite_differences() {
    let truth = synthetic_phantom(16);
    let optics = optics();
    let meas = simulate(&truth, &optics).unwrap();
    let obj = LenslessObjective::new(&meas, &optics).unwrap();
    let guess = ComplexGrid::from_polar(16, 16, &vec![0.5; 256], &vec![0.2; 256]).unwrap();
    let (_, grad) = obj.field_loss_and_grad(&guess).unwrap();
    let h = 1e-6;
    for idx in [0, 37, 129, 255] {
        for dir in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
            let bump = |s: f64| {
                let mut g = guess.clone();
                g.as_mut_slice()[idx] += dir * s;
                obj.field_loss_and_grad(&g).unwrap().0
            };
            let fd = (bump(h) - bump(-h)) / (2.0 * h);
            let a = if dir.re == 1.0 {
                grad.as_slice()[idx].re
            } else {
                grad.as_slice()[idx].im
            };
            assert!(
                (fd - a).abs() <= 1e-4 * fd.abs().max(1e-3),
                "pixel {idx}: {fd} vs {a}"
            );
        }
    }
}

#[test]
fn table_beats_plain_coordinates_on_texture() {
    let img = dead_leaves(16, 16, 2).channel_mean();
    let data = SampleSet::new(img);
    let spec = BackboneSpec {
        d_in: 2,
        d_out: 1,
        width: 32,
        depth: 2,
        activation: Activation::Relu,
        encoding: Encoding::None,
    };
    let run = |use_table| {
        let cfg = TrainConfig {
            epochs: 400,
            use_table,
            ..TrainConfig::for_activation(spec.activation)
        };
        let mut model = Model::init(&spec, &[16, 16], &cfg).unwrap();
        fit(&mut model, &data, &cfg).unwrap().final_psnr()
    };
    let (plain, table) = (run(false), run(true));
    assert!(table > plain + 5.0, "table {table} dB vs plain {plain} dB");
}

#[test]
fn arrangements_train_identically() {
    let data = SampleSet::new(dead_leaves(12, 12, 8).channel_mean());
    let spec = BackboneSpec {
        d_in: 2,
        d_out: 1,
        width: 16,
        depth: 2,
        activation: Activation::Relu,
        encoding: Encoding::None,
    };
    let cfg = TrainConfig {
        epochs: 60,
        table_init: TableInitKind::Zero,
        ..TrainConfig::default()
    };
    let orders = [
        Arrangement::Identity,
        Arrangement::SortedByIntensity,
        Arrangement::Random { seed: 5 },
    ];
    let r = invariance_report(&data, &spec, &cfg, &orders).unwrap();
    assert_eq!(r.orders.len(), 3);
    assert_eq!(r.max_gap_db, 0.0);
    assert_eq!(r.table_residual, 0.0);
    assert_eq!(r.network_residual, 0.0);
}

#[test]
fn measurements_are_explained_after_reconstruction() {
    let optics = optics();
    let truth = synthetic_phantom(16);
    let meas = simulate(&truth, &optics).unwrap();
    let spec = BackboneSpec {
        d_in: 2,
        d_out: 2,
        width: 32,
        depth: 2,
        activation: Activation::sine(),
        encoding: Encoding::None,
    };
    let cfg = TrainConfig {
        epochs: 400,
        lr_net: 1e-3,
        ..TrainConfig::for_activation(spec.activation)
    };
    let rec = reconstruct(&meas, &optics, &spec, &cfg).unwrap();
    let first = rec.log.rows.first().unwrap().psnr_db;
    let last = rec.log.final_psnr();
    assert!(rec.warnings.is_empty());
    assert!(last > 30.0 && last > first, "{first} -> {last}");
}

proptest! {
    #[test]
    fn band_ratios_form_a_distribution(seed in any::<u64>(), n in 3usize..12) {
        let mut rng = Rng::new(seed);
        let img = Grid::new(vec![n, n + 1], 1, (0..n * (n + 1)).map(|_| rng.next_f64()).collect()).unwrap();
        let r = band_ratios(&img, 4).unwrap();
        prop_assert!(r.band_ratios.iter().all(|&v| v >= 0.0));
        prop_assert!((r.band_ratios.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rearrangement_is_a_permutation(seed in any::<u64>(), n in 2usize..9) {
        let mut rng = Rng::new(seed);
        let img = Grid::new(vec![n, n], 1, (0..n * n).map(|_| rng.next_f64()).collect()).unwrap();
        let data = SampleSet::new(img.clone());
        for order in [Arrangement::Identity, Arrangement::SortedByIntensity, Arrangement::Random { seed }] {
            let (moved, perm) = rearrange(&data, order);
            let mut seen = perm.clone();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..n * n).collect::<Vec<_>>());
            for (i, &p) in perm.iter().enumerate() {
                prop_assert_eq!(moved.value(i), data.value(p));
            }
        }
    }
}
