use super::*;
use crate::network::{Activation, Encoding};
use crate::numerics::{Grid, Rng};

fn mlp(d_in: usize, d_out: usize, encoding: Encoding) -> BackboneSpec {
    BackboneSpec {
        d_in,
        d_out,
        width: 64,
        depth: 2,
        activation: Activation::Relu,
        encoding,
    }
}

fn random_image(h: usize, w: usize, c: usize, seed: u64) -> SampleSet {
    let mut rng = Rng::new(seed);
    let data = (0..h * w * c).map(|_| rng.next_f64()).collect();
    SampleSet::new(Grid::new(vec![h, w], c, data).unwrap())
}

fn losses(log: &MetricsLog) -> Vec<u64> {
    log.rows.iter().map(|r| r.loss.to_bits()).collect()
}

#[test]
fn constant_image_is_representable_by_output_bias() {
    let data = SampleSet::new(Grid::filled(vec![16, 16], 1, 0.5).unwrap());
    let cfg = TrainConfig {
        use_table: false,
        ..TrainConfig::default()
    };
    let mut model = Model::init(&mlp(2, 1, Encoding::None), data.shape(), &cfg).unwrap();
    let last = model.backbone.layers_mut().last_mut().unwrap();
    last.weight.fill(0.0);
    last.bias[0] = 0.5;
    let out = model.predict(data.shape()).unwrap();
    let pred = Grid::new(vec![16, 16], 1, out.into_vec()).unwrap();
    assert_eq!(psnr(&pred, data.grid()).unwrap(), f64::INFINITY);
}

// Adam at a fixed rate dithers around the optimum with an amplitude set by
// the rate, so 50 epochs lands in the tens of dB rather than near exact.
#[test]
fn constant_image_fits_quickly() {
    let data = SampleSet::new(Grid::filled(vec![16, 16], 1, 0.5).unwrap());
    let cfg = TrainConfig {
        epochs: 50,
        use_table: false,
        log_every: 10,
        ..TrainConfig::default()
    };
    let mut model = Model::init(&mlp(2, 1, Encoding::None), data.shape(), &cfg).unwrap();
    let log = fit(&mut model, &data, &cfg).unwrap();
    assert!(log.rows[0].psnr_db < 15.0);
    assert!(log.final_psnr() > 25.0, "psnr {}", log.final_psnr());
}

#[test]
fn small_random_image_is_overfit_with_a_table() {
    let data = random_image(4, 4, 1, 3);
    let cfg = TrainConfig {
        epochs: 2000,
        ..TrainConfig::default()
    };
    let mut model = Model::init(&mlp(2, 1, Encoding::None), data.shape(), &cfg).unwrap();
    let log = fit(&mut model, &data, &cfg).unwrap();
    assert!(log.final_psnr() > 40.0, "psnr {}", log.final_psnr());
}

#[test]
fn frozen_grid_table_matches_baseline_bitwise() {
    let data = random_image(8, 8, 3, 5);
    let spec = mlp(2, 3, Encoding::None);
    let base_cfg = TrainConfig {
        epochs: 40,
        use_table: false,
        log_every: 1,
        ..TrainConfig::default()
    };
    let table_cfg = TrainConfig {
        use_table: true,
        table_init: TableInitKind::Grid,
        freeze_table: true,
        ..base_cfg.clone()
    };
    let mut base = Model::init(&spec, data.shape(), &base_cfg).unwrap();
    let mut diner = Model::init(&spec, data.shape(), &table_cfg).unwrap();
    let a = fit(&mut base, &data, &base_cfg).unwrap();
    let b = fit(&mut diner, &data, &table_cfg).unwrap();
    assert_eq!(losses(&a), losses(&b));
    assert_eq!(base.backbone, diner.backbone);
}

#[test]
fn full_batch_is_bit_reproducible() {
    let data = random_image(20, 20, 1, 9);
    let spec = BackboneSpec {
        activation: Activation::sine(),
        ..mlp(2, 1, Encoding::None)
    };
    let cfg = TrainConfig {
        epochs: 30,
        log_every: 1,
        ..TrainConfig::for_activation(spec.activation)
    };
    let run = || {
        let mut m = Model::init(&spec, data.shape(), &cfg).unwrap();
        let log = fit(&mut m, &data, &cfg).unwrap();
        (losses(&log), m)
    };
    let (la, ma) = run();
    let (lb, mb) = run();
    assert_eq!(la, lb);
    assert_eq!(ma, mb);
}

#[test]
fn reproducible_regardless_of_worker_count() {
    // Over CHUNK elements so the work actually splits.
    let data = random_image(24, 24, 1, 13);
    let spec = mlp(2, 1, Encoding::Fourier { octaves: 3 });
    let cfg = TrainConfig {
        epochs: 5,
        log_every: 1,
        ..TrainConfig::default()
    };
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            let mut m = Model::init(&spec, data.shape(), &cfg).unwrap();
            losses(&fit(&mut m, &data, &cfg).unwrap())
        })
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn loss_mostly_decreases() {
    let data = random_image(16, 16, 1, 21);
    let cfg = TrainConfig {
        epochs: 600,
        log_every: 1,
        ..TrainConfig::default()
    };
    let mut model = Model::init(&mlp(2, 1, Encoding::None), data.shape(), &cfg).unwrap();
    let log = fit(&mut model, &data, &cfg).unwrap();
    let l: Vec<f64> = log.rows.iter().map(|r| r.loss).collect();
    let windows: Vec<bool> = l.windows(101).map(|w| w[100] <= w[0]).collect();
    let bad = windows.iter().filter(|ok| !**ok).count();
    assert!(
        bad * 20 <= windows.len(),
        "{bad} of {} windows increased",
        windows.len()
    );
    assert!(l.last().unwrap().is_finite());
}

#[test]
fn mini_batches_train_too() {
    let data = random_image(8, 8, 1, 2);
    let cfg = TrainConfig {
        epochs: 300,
        batch_size: 16,
        ..TrainConfig::default()
    };
    let mut model = Model::init(&mlp(2, 1, Encoding::None), data.shape(), &cfg).unwrap();
    let log = fit(&mut model, &data, &cfg).unwrap();
    assert!(log.final_psnr() > log.rows[0].psnr_db);
    assert!(model.table.unwrap().steps().iter().all(|&s| s == 300));
}

#[test]
fn final_row_matches_prediction() {
    let data = random_image(6, 5, 2, 4);
    let cfg = TrainConfig {
        epochs: 7,
        log_every: 3,
        ..TrainConfig::default()
    };
    let mut model = Model::init(&mlp(2, 2, Encoding::None), data.shape(), &cfg).unwrap();
    let log = fit(&mut model, &data, &cfg).unwrap();
    let epochs: Vec<usize> = log.rows.iter().map(|r| r.epoch).collect();
    assert_eq!(epochs, vec![0, 3, 6, 7]);
    let out = model.predict(data.shape()).unwrap();
    let pred = Grid::new(data.shape().to_vec(), 2, out.into_vec()).unwrap();
    let p = psnr(&pred, data.grid()).unwrap();
    assert_eq!(p, log.final_psnr());
}

#[test]
fn rejects_mismatches() {
    let data = random_image(4, 4, 1, 1);
    let cfg = TrainConfig::default();
    let mut wrong_out = Model::init(&mlp(2, 3, Encoding::None), data.shape(), &cfg).unwrap();
    assert!(matches!(
        fit(&mut wrong_out, &data, &cfg),
        Err(Error::Config(_))
    ));

    let no_table = TrainConfig {
        use_table: false,
        ..cfg.clone()
    };
    let mut m = Model::init(&mlp(2, 1, Encoding::None), data.shape(), &no_table).unwrap();
    assert!(matches!(fit(&mut m, &data, &cfg), Err(Error::Config(_))));

    let other = random_image(5, 4, 1, 1);
    let mut m = Model::init(&mlp(2, 1, Encoding::None), data.shape(), &cfg).unwrap();
    assert!(matches!(fit(&mut m, &other, &cfg), Err(Error::Config(_))));

    for bad in [
        TrainConfig {
            epochs: 0,
            ..cfg.clone()
        },
        TrainConfig {
            lr_net: 0.0,
            ..cfg.clone()
        },
        TrainConfig {
            lr_table: Some(-1.0),
            ..cfg.clone()
        },
    ] {
        let mut m = Model::init(&mlp(2, 1, Encoding::None), data.shape(), &bad).unwrap();
        assert!(matches!(fit(&mut m, &data, &bad), Err(Error::Config(_))));
    }
}

#[test]
fn divergence_reports_epoch() {
    let data = random_image(4, 4, 1, 1);
    let cfg = TrainConfig {
        epochs: 50,
        lr_net: 1e300,
        ..TrainConfig::default()
    };
    let mut m = Model::init(&mlp(2, 1, Encoding::None), data.shape(), &cfg).unwrap();
    match fit(&mut m, &data, &cfg) {
        Err(Error::Diverged { epoch, loss }) => {
            assert!(epoch < 50);
            assert!(!loss.is_finite());
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn generic_and_fused_paths_agree() {
    struct Global<'a>(L2Fit<'a>);
    impl Objective for Global<'_> {
        fn num_samples(&self) -> usize {
            self.0.num_samples()
        }
        fn d_out(&self) -> usize {
            self.0.d_out()
        }
        fn reduction_order(&self) -> Vec<usize> {
            self.0.reduction_order()
        }
        fn evaluate(&self, o: &Tensor2D) -> Result<(f64, Tensor2D)> {
            self.0.evaluate(o)
        }
        fn psnr(&self, o: &Tensor2D) -> f64 {
            self.0.psnr(o)
        }
    }
    let data = random_image(10, 10, 1, 8);
    let spec = mlp(2, 1, Encoding::None);
    let cfg = TrainConfig {
        epochs: 20,
        log_every: 1,
        ..TrainConfig::default()
    };
    let mut a = Model::init(&spec, data.shape(), &cfg).unwrap();
    let mut b = a.clone();
    let la = fit(&mut a, &data, &cfg).unwrap();
    let lb = train(&mut b, &Global(L2Fit::new(&data)), data.shape(), &cfg).unwrap();
    assert_eq!(losses(&la), losses(&lb));
    for (x, y) in la.rows.iter().zip(&lb.rows) {
        assert!((x.psnr_db - y.psnr_db).abs() < 1e-9);
    }
    assert_eq!(a.backbone, b.backbone);
}

#[test]
fn single_order_has_no_gap() {
    let data = random_image(6, 6, 1, 2);
    let cfg = TrainConfig {
        epochs: 20,
        ..TrainConfig::default()
    };
    let r = invariance_report(
        &data,
        &mlp(2, 1, Encoding::None),
        &cfg,
        &[Arrangement::Identity],
    )
    .unwrap();
    assert_eq!(r.max_gap_db, 0.0);
    assert_eq!(r.table_residual, 0.0);
    assert!(r.pairwise_gaps_db.is_empty());
}

#[test]
fn arrangements_train_identically() {
    // Repeated values exercise the tie handling.
    let mut data = random_image(20, 20, 1, 6);
    {
        let g = data.clone().into_grid();
        let v: Vec<f64> = g
            .as_slice()
            .iter()
            .map(|x| (x * 8.0).floor() / 8.0)
            .collect();
        data = SampleSet::new(Grid::new(vec![20, 20], 1, v).unwrap());
    }
    let cfg = TrainConfig {
        epochs: 60,
        ..TrainConfig::default()
    };
    let orders = [
        Arrangement::Identity,
        Arrangement::SortedByIntensity,
        Arrangement::Random { seed: 77 },
    ];
    let r = invariance_report(&data, &mlp(2, 1, Encoding::None), &cfg, &orders).unwrap();
    assert_eq!(r.max_gap_db, 0.0);
    assert_eq!(r.table_residual, 0.0);
    assert_eq!(r.network_residual, 0.0);
    assert_eq!(r.pairwise_gaps_db.len(), 3);
}

#[test]
fn invariance_preconditions() {
    let data = random_image(4, 4, 1, 1);
    let spec = mlp(2, 1, Encoding::None);
    let no_table = TrainConfig {
        use_table: false,
        ..TrainConfig::default()
    };
    assert!(invariance_report(&data, &spec, &no_table, &[Arrangement::Identity]).is_err());
    let batched = TrainConfig {
        batch_size: 4,
        ..TrainConfig::default()
    };
    assert!(invariance_report(&data, &spec, &batched, &[Arrangement::Identity]).is_err());
    assert!(invariance_report(&data, &spec, &TrainConfig::default(), &[]).is_err());
}

#[test]
fn config_json_rejects_unknown_keys() {
    let ok: TrainConfig =
        serde_json::from_str(r#"{"epochs": 5, "table_init": {"kind": "zero"}}"#).unwrap();
    assert_eq!(ok.epochs, 5);
    assert_eq!(ok.table_init, TableInitKind::Zero);
    assert!(serde_json::from_str::<TrainConfig>(r#"{"epoch": 5}"#).is_err());
}
