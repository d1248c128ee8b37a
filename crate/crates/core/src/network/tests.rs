use proptest::prelude::*;

use super::*;
use crate::numerics::Rng;

fn spec(
    act: Activation,
    enc: Encoding,
    d_in: usize,
    d_out: usize,
    width: usize,
    depth: usize,
) -> BackboneSpec {
    BackboneSpec {
        d_in,
        d_out,
        width,
        depth,
        activation: act,
        encoding: enc,
    }
}

fn random_batch(rows: usize, cols: usize, rng: &mut Rng) -> Tensor2D {
    Tensor2D::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.uniform(-1.0, 1.0)).collect(),
    )
    .unwrap()
}

#[test]
fn layer_shapes_for_2x64() {
    let bk = Backbone::init(
        &spec(Activation::Relu, Encoding::None, 2, 3, 64, 2),
        &mut Rng::new(0),
    )
    .unwrap();
    let shapes: Vec<_> = bk
        .layers()
        .iter()
        .map(|l| (l.fan_out(), l.fan_in()))
        .collect();
    assert_eq!(shapes, vec![(64, 2), (64, 64), (3, 64)]);
}

#[test]
fn init_is_deterministic() {
    let s = spec(Activation::sine(), Encoding::None, 2, 3, 16, 2);
    let a = Backbone::init(&s, &mut Rng::new(9)).unwrap();
    let b = Backbone::init(&s, &mut Rng::new(9)).unwrap();
    for (la, lb) in a.layers().iter().zip(b.layers()) {
        assert!(la
            .weight
            .as_slice()
            .iter()
            .zip(lb.weight.as_slice())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        assert!(la
            .bias
            .iter()
            .zip(&lb.bias)
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn sine_hidden_weights_respect_bound() {
    let bk = Backbone::init(
        &spec(Activation::sine(), Encoding::None, 2, 3, 64, 2),
        &mut Rng::new(1),
    )
    .unwrap();
    let bound = (6.0f64 / 64.0).sqrt() / 30.0;
    assert!((bound - 0.0102).abs() < 1e-4);
    for l in &bk.layers()[1..] {
        assert!(l.weight.as_slice().iter().all(|w| w.abs() <= bound));
    }
    assert!(bk.layers()[0]
        .weight
        .as_slice()
        .iter()
        .all(|w| w.abs() <= 0.5));
}

#[test]
fn zero_config_rejected() {
    for (w, d) in [(0, 2), (64, 0)] {
        let r = Backbone::init(
            &spec(Activation::Relu, Encoding::None, 2, 3, w, d),
            &mut Rng::new(0),
        );
        assert!(matches!(r, Err(Error::Config(_))));
    }
    let r = Backbone::init(
        &spec(Activation::Sine { omega0: 0.0 }, Encoding::None, 2, 3, 4, 2),
        &mut Rng::new(0),
    );
    assert!(matches!(r, Err(Error::Config(_))));
}

#[test]
fn zero_weights_output_final_bias() {
    let mut bk = Backbone::init(
        &spec(Activation::Relu, Encoding::None, 2, 3, 8, 2),
        &mut Rng::new(0),
    )
    .unwrap();
    for l in bk.layers_mut() {
        l.weight.fill(0.0);
        l.bias.fill(0.0);
    }
    bk.layers_mut()[2].bias = vec![0.5, 0.5, 0.5];
    let x = random_batch(5, 2, &mut Rng::new(3));
    let y = bk.forward(&x, None).unwrap();
    assert!(y.as_slice().iter().all(|&v| v == 0.5));
}

#[test]
fn single_hidden_sine_at_origin() {
    let layers = vec![
        Layer {
            weight: Tensor2D::identity(1),
            bias: vec![0.0],
        },
        Layer {
            weight: Tensor2D::identity(1),
            bias: vec![0.0],
        },
    ];
    let bk = Backbone::from_layers(layers, Activation::Sine { omega0: 30.0 }, Encoding::None, 1)
        .unwrap();
    assert_eq!(bk.eval(&[0.0]).unwrap(), vec![0.0]);
}

#[test]
fn from_layers_rejects_broken_chain() {
    let layers = vec![Layer::zeros(4, 2), Layer::zeros(1, 3)];
    assert!(matches!(
        Backbone::from_layers(layers, Activation::Relu, Encoding::None, 2),
        Err(Error::Shape(_))
    ));
}

#[test]
fn forward_rejects_bad_input() {
    let bk = Backbone::init(
        &spec(Activation::Relu, Encoding::None, 2, 1, 4, 1),
        &mut Rng::new(0),
    )
    .unwrap();
    assert!(matches!(
        bk.eval(&[0.0, f64::NAN]),
        Err(Error::NonFinite { index: 1, .. })
    ));
    assert!(matches!(bk.eval(&[0.0]), Err(Error::Shape(_))));
}

/// Scalar, layer-by-layer evaluation written independently of the batched
/// kernels.
fn scalar_oracle(bk: &Backbone, x: &[f64]) -> Vec<f64> {
    let mut z = bk.encoding().encode(x);
    let n = bk.layers().len();
    for (i, l) in bk.layers().iter().enumerate() {
        let mut next = Vec::with_capacity(l.fan_out());
        for r in 0..l.fan_out() {
            let mut a = l.bias[r];
            for (c, zc) in z.iter().enumerate() {
                a += l.weight.get(r, c) * zc;
            }
            if i + 1 < n {
                a = match bk.activation() {
                    Activation::Relu => a.max(0.0),
                    Activation::Sine { omega0 } => (omega0 * a).sin(),
                };
            }
            next.push(a);
        }
        z = next;
    }
    z
}

#[test]
fn forward_matches_scalar_oracle() {
    for (act, enc) in [
        (Activation::Relu, Encoding::None),
        (Activation::sine(), Encoding::None),
        (Activation::Relu, Encoding::Fourier { octaves: 3 }),
    ] {
        let bk = Backbone::init(&spec(act, enc, 2, 3, 8, 2), &mut Rng::new(4)).unwrap();
        let mut rng = Rng::new(8);
        for _ in 0..10 {
            let x = [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)];
            let fast = bk.eval(&x).unwrap();
            let slow = scalar_oracle(&bk, &x);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }
}

#[test]
fn zero_upstream_gives_zero_gradients() {
    let bk = Backbone::init(
        &spec(Activation::sine(), Encoding::None, 2, 3, 8, 2),
        &mut Rng::new(2),
    )
    .unwrap();
    let x = random_batch(4, 2, &mut Rng::new(5));
    let (_, trace) = bk.forward_traced(&x).unwrap();
    let g = bk.backward(&trace, &Tensor2D::zeros(4, 3), true).unwrap();
    assert!(g
        .layers
        .iter()
        .all(|l| l.weight.as_slice().iter().chain(&l.bias).all(|&v| v == 0.0)));
    assert!(g.input.unwrap().as_slice().iter().all(|&v| v == 0.0));
}

#[test]
fn output_bias_gradient_is_residual() {
    // L = ½‖f(x) − y‖²  ⇒  ∂L/∂b_out = f(x) − y
    let bk = Backbone::init(
        &spec(Activation::Relu, Encoding::None, 2, 2, 6, 1),
        &mut Rng::new(6),
    )
    .unwrap();
    let x = Tensor2D::from_vec(1, 2, vec![0.3, -0.4]).unwrap();
    let (out, trace) = bk.forward_traced(&x).unwrap();
    let y = [0.1, 0.9];
    let resid: Vec<f64> = out.as_slice().iter().zip(y).map(|(f, y)| f - y).collect();
    let g = bk
        .backward(
            &trace,
            &Tensor2D::from_vec(1, 2, resid.clone()).unwrap(),
            false,
        )
        .unwrap();
    assert_eq!(g.layers.last().unwrap().bias, resid);
    assert!(g.input.is_none());
}

#[test]
fn backward_rejects_mismatched_upstream() {
    let bk = Backbone::init(
        &spec(Activation::Relu, Encoding::None, 2, 2, 4, 1),
        &mut Rng::new(0),
    )
    .unwrap();
    let (_, trace) = bk
        .forward_traced(&random_batch(3, 2, &mut Rng::new(1)))
        .unwrap();
    assert!(matches!(
        bk.backward(&trace, &Tensor2D::zeros(2, 2), false),
        Err(Error::Shape(_))
    ));
}

/// Loss used for gradient checks: `L = Σ c ⊙ f(x)` with fixed random `c`.
fn projected_loss(bk: &Backbone, x: &Tensor2D, c: &Tensor2D) -> f64 {
    let y = bk.forward(x, None).unwrap();
    y.as_slice()
        .iter()
        .zip(c.as_slice())
        .map(|(a, b)| a * b)
        .sum()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

fn param_mut(bk: &mut Backbone, layer: usize, k: usize) -> &mut f64 {
    let l = &mut bk.layers_mut()[layer];
    let n_w = l.weight.as_slice().len();
    if k < n_w {
        &mut l.weight.as_mut_slice()[k]
    } else {
        &mut l.bias[k - n_w]
    }
}

fn gradient_check(act: Activation, enc: Encoding, seed: u64) {
    const H: f64 = 1e-6;
    let mut rng = Rng::new(seed);
    let mut bk = Backbone::init(&spec(act, enc, 2, 3, 16, 2), &mut rng).unwrap();
    let x = random_batch(4, 2, &mut rng);
    let c = random_batch(4, 3, &mut rng);
    let (_, trace) = bk.forward_traced(&x).unwrap();
    let g = bk.backward(&trace, &c, true).unwrap();

    let mut worst: f64 = 0.0;
    for li in 0..bk.layers().len() {
        let n_w = bk.layers()[li].weight.as_slice().len();
        let n_b = bk.layers()[li].bias.len();
        for k in 0..n_w + n_b {
            let orig = *param_mut(&mut bk, li, k);
            *param_mut(&mut bk, li, k) = orig + H;
            let lp = projected_loss(&bk, &x, &c);
            *param_mut(&mut bk, li, k) = orig - H;
            let lm = projected_loss(&bk, &x, &c);
            *param_mut(&mut bk, li, k) = orig;
            let fd = (lp - lm) / (2.0 * H);
            let an = if k < n_w {
                g.layers[li].weight.as_slice()[k]
            } else {
                g.layers[li].bias[k - n_w]
            };
            worst = worst.max(rel_err(an, fd));
        }
    }
    let gin = g.input.unwrap();
    for k in 0..x.as_slice().len() {
        let mut xp = x.clone();
        xp.as_mut_slice()[k] += H;
        let mut xm = x.clone();
        xm.as_mut_slice()[k] -= H;
        let fd = (projected_loss(&bk, &xp, &c) - projected_loss(&bk, &xm, &c)) / (2.0 * H);
        worst = worst.max(rel_err(gin.as_slice()[k], fd));
    }
    assert!(
        worst < 1e-5,
        "{act:?}/{enc:?}: worst relative error {worst:e}"
    );
}

#[test]
fn gradients_match_finite_differences() {
    for (i, act) in [Activation::Relu, Activation::sine()]
        .into_iter()
        .enumerate()
    {
        for (j, enc) in [Encoding::None, Encoding::Fourier { octaves: 3 }]
            .into_iter()
            .enumerate()
        {
            gradient_check(act, enc, 100 + (2 * i + j) as u64);
        }
    }
}

#[test]
fn optimizer_reduces_projected_loss() {
    let mut rng = Rng::new(12);
    let mut bk = Backbone::init(
        &spec(Activation::Relu, Encoding::None, 2, 1, 8, 2),
        &mut rng,
    )
    .unwrap();
    let x = random_batch(8, 2, &mut rng);
    let mut opt = BackboneOptimizer::new(&bk, AdamConfig::default());
    let ones = Tensor2D::from_vec(8, 1, vec![1.0; 8]).unwrap();
    let before = projected_loss(&bk, &x, &ones);
    for _ in 0..20 {
        let (_, tr) = bk.forward_traced(&x).unwrap();
        let g = bk.backward(&tr, &ones, false).unwrap();
        opt.step(&mut bk, &g, 1e-2).unwrap();
    }
    assert!(projected_loss(&bk, &x, &ones) < before);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn valid_specs_chain(
        d_in in 1usize..4, d_out in 1usize..4, width in 1usize..12, depth in 1usize..4,
        sine in any::<bool>(), octaves in 0usize..4, batch in 1usize..6, seed in any::<u64>()
    ) {
        let act = if sine { Activation::sine() } else { Activation::Relu };
        let enc = if octaves == 0 { Encoding::None } else { Encoding::Fourier { octaves } };
        let mut rng = Rng::new(seed);
        let bk = Backbone::init(&spec(act, enc, d_in, d_out, width, depth), &mut rng).unwrap();
        let x = random_batch(batch, d_in, &mut rng);
        let (y, trace) = bk.forward_traced(&x).unwrap();
        prop_assert_eq!((y.rows(), y.cols()), (batch, d_out));
        let g = bk.backward(&trace, &y, true).unwrap();
        prop_assert_eq!(g.input.unwrap().cols(), d_in);
    }
}
