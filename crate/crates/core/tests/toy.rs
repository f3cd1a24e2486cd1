use posefuse_core::toy::soft_hist::{soft_histogram, soft_kl_with_grad};
use posefuse_core::toy::{gen_procedural_sample, train_toy_tagan, Activation, Layer, TinyNet, ToyConfig, ToyError};
use posefuse_core::image::blur_average;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn straight_line_forward(net: &TinyNet, x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    for layer in net.layers() {
        let mut next = vec![0.0; layer.outputs];
        for (o, slot) in next.iter_mut().enumerate() {
            let mut z = layer.bias[o];
            for i in 0..layer.inputs {
                z += layer.weights[o * layer.inputs + i] * v[i];
            }
            *slot = match layer.activation {
                Activation::Tanh => z.tanh(),
                Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
                Activation::Identity => z,
            };
        }
        v = next;
    }
    v
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-7)
}

#[test]
fn forward_matches_direct_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let net = TinyNet::random(&[7, 5, 3], &[Activation::Tanh, Activation::Sigmoid], |_| 0.5, &mut rng).unwrap();
    let x: Vec<f64> = (0..7).map(|_| rng.random::<f64>()).collect();
    let got = net.forward(&x).unwrap();
    for (a, b) in got.output().iter().zip(straight_line_forward(&net, &x)) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn identity_and_zero_networks() {
    let mut id = Layer::zeros(3, 3, Activation::Identity);
    for i in 0..3 {
        id.weights[i * 3 + i] = 1.0;
    }
    let net = TinyNet::new(vec![id]).unwrap();
    assert_eq!(net.forward(&[0.1, -2.0, 3.0]).unwrap().output(), &[0.1, -2.0, 3.0]);
    let zero = TinyNet::new(vec![Layer::zeros(4, 2, Activation::Tanh)]).unwrap();
    assert_eq!(zero.forward(&[1.0; 4]).unwrap().output(), &[0.0, 0.0]);
    assert!(matches!(zero.forward(&[1.0; 3]), Err(ToyError::DimMismatch { expected: 4, got: 3 })));
}

#[test]
fn linear_regression_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let net = TinyNet::random(&[4, 3], &[Activation::Identity], |_| 1.0, &mut rng).unwrap();
    let x = [0.5, -1.0, 2.0, 0.25];
    let t = [1.0, 0.0, -1.0];
    let cache = net.forward(&x).unwrap();
    let r: Vec<f64> = cache.output().iter().zip(&t).map(|(o, t)| 2.0 * (o - t)).collect();
    let (grads, _) = net.backward(&cache, &r).unwrap();
    for o in 0..3 {
        for i in 0..4 {
            assert!((grads.layers[0].0[o * 4 + i] - r[o] * x[i]).abs() < 1e-12);
        }
        assert!((grads.layers[0].1[o] - r[o]).abs() < 1e-12);
    }
}

#[test]
fn zero_seed_gives_zero_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = TinyNet::random(&[5, 4, 2], &[Activation::Tanh, Activation::Sigmoid], |_| 0.3, &mut rng).unwrap();
    let cache = net.forward(&[0.2; 5]).unwrap();
    let (grads, input) = net.backward(&cache, &[0.0, 0.0]).unwrap();
    assert_eq!(grads.max_abs(), 0.0);
    assert!(input.iter().all(|v| *v == 0.0));
}

#[test]
fn stale_cache_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut net = TinyNet::random(&[3, 2], &[Activation::Tanh], |_| 0.3, &mut rng).unwrap();
    let cache = net.forward(&[0.1, 0.2, 0.3]).unwrap();
    net.layers_mut()[0].bias[0] += 1.0;
    assert!(matches!(net.backward(&cache, &[1.0, 1.0]), Err(ToyError::StaleCache)));
    let other = net.clone();
    let cache = net.forward(&[0.1, 0.2, 0.3]).unwrap();
    assert!(matches!(other.backward(&cache, &[1.0, 1.0]), Err(ToyError::StaleCache)));
}

#[test]
fn finite_difference_on_small_net() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut net = TinyNet::random(&[6, 5, 4], &[Activation::Tanh, Activation::Sigmoid], |_| 0.1f64.sqrt(), &mut rng).unwrap();
    let x: Vec<f64> = (0..6).map(|_| rng.random::<f64>()).collect();
    let r: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
    let loss = |net: &TinyNet| net.forward(&x).unwrap().output().iter().zip(&r).map(|(o, r)| o * r).sum::<f64>();
    let cache = net.forward(&x).unwrap();
    let (grads, input_grad) = net.backward(&cache, &r).unwrap();
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for l in 0..2 {
        for p in 0..net.layers()[l].weights.len() {
            net.layers_mut()[l].weights[p] += h;
            let up = loss(&net);
            net.layers_mut()[l].weights[p] -= 2.0 * h;
            let down = loss(&net);
            net.layers_mut()[l].weights[p] += h;
            worst = worst.max(rel_err(grads.layers[l].0[p], (up - down) / (2.0 * h)));
        }
        for p in 0..net.layers()[l].bias.len() {
            net.layers_mut()[l].bias[p] += h;
            let up = loss(&net);
            net.layers_mut()[l].bias[p] -= 2.0 * h;
            let down = loss(&net);
            net.layers_mut()[l].bias[p] += h;
            worst = worst.max(rel_err(grads.layers[l].1[p], (up - down) / (2.0 * h)));
        }
    }
    for i in 0..6 {
        let mut xp = x.clone();
        xp[i] += h;
        let up: f64 = net.forward(&xp).unwrap().output().iter().zip(&r).map(|(o, r)| o * r).sum();
        xp[i] -= 2.0 * h;
        let down: f64 = net.forward(&xp).unwrap().output().iter().zip(&r).map(|(o, r)| o * r).sum();
        worst = worst.max(rel_err(input_grad[i], (up - down) / (2.0 * h)));
    }
    assert!(worst < 1e-4, "{worst}");
}

#[test]
fn soft_kl_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let values: Vec<f64> = (0..48).map(|_| rng.random::<f64>()).collect();
    let reference = soft_histogram(&(0..48).map(|_| rng.random::<f64>()).collect::<Vec<_>>(), 3, 8);
    let (_, grad) = soft_kl_with_grad(&values, 3, 8, &reference);
    let h = 1e-5;
    for i in 0..48 {
        let mut v = values.clone();
        v[i] += h;
        let up = soft_kl_with_grad(&v, 3, 8, &reference).0;
        v[i] -= 2.0 * h;
        let down = soft_kl_with_grad(&v, 3, 8, &reference).0;
        assert!(rel_err(grad[i], (up - down) / (2.0 * h)) < 1e-4);
    }
}

#[test]
fn procedural_samples() {
    let a = gen_procedural_sample(9, 16);
    assert_eq!(a, gen_procedural_sample(9, 16));
    assert_eq!(a.color_map, blur_average(&a.x, 2));
    assert_eq!(a.shape_map.channels(), 1);
    assert!(a.mask.data().iter().any(|v| *v == 1.0));
    assert_ne!(a, gen_procedural_sample(10, 16));
}

#[test]
fn training_config_contract() {
    let cfg = ToyConfig::default();
    assert_eq!(cfg.generator_dims(), [16 * 16 * 4 + 8, 128, 16 * 16 * 3]);
    assert_eq!(cfg.discriminator_dims(), [16 * 16 * 7, 128, 1]);
    let small = ToyConfig { steps: 3, g_hidden: 8, d_hidden: 8, batch: 2, train_pool: 4, heldout: 2, ..ToyConfig::with_seed(7) };
    let report = train_toy_tagan(&small).unwrap();
    assert_eq!(report.records.len(), 3);
    assert_eq!(report.seed, 7);
    assert!(matches!(train_toy_tagan(&ToyConfig { batch: 0, ..small }), Err(ToyError::InvalidConfig(_))));
}
