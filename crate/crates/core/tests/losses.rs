use posefuse_core::image::{ColorHistogram, HistogramMode, Image};
use posefuse_core::loss::{color_loss, gan_objective, shape_loss, ta_loss, LossError, LossWeights};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn hist(values: Vec<f64>) -> ColorHistogram {
    ColorHistogram { bins_per_channel: values.len(), channels: 1, mode: HistogramMode::Marginal, values }
}

fn random_hist(rng: &mut ChaCha8Rng, bins: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..bins).map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random::<f64>() }).collect();
    let total: f64 = raw.iter().sum::<f64>().max(1e-300);
    raw.iter().map(|v| v / total).collect()
}

fn random_image(rng: &mut ChaCha8Rng) -> Image {
    let data = (0..8 * 8 * 3).map(|_| rng.random::<f64>()).collect();
    Image::new(8, 8, 3, data).unwrap()
}

fn kl_oracle(p: &[f64], q: &[f64]) -> f64 {
    let ps: f64 = p.iter().map(|v| v + 1e-8).sum();
    let qs: f64 = q.iter().map(|v| v + 1e-8).sum();
    p.iter()
        .zip(q)
        .map(|(a, b)| {
            let (a, b) = ((a + 1e-8) / ps, (b + 1e-8) / qs);
            -a * (b / a).ln()
        })
        .sum()
}

#[test]
fn hand_computed_kl() {
    let expected = 0.5 * (0.5f64 / 0.25).ln() + 0.5 * (0.5f64 / 0.75).ln();
    let got = color_loss(&hist(vec![0.5, 0.5]), &hist(vec![0.25, 0.75])).unwrap();
    assert!((got - expected).abs() < 1e-4);
    assert!((got - 0.143841).abs() < 1e-4);
}

#[test]
fn kl_matches_oracle_and_is_asymmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut asymmetric = false;
    for _ in 0..1000 {
        let p = random_hist(&mut rng, 16);
        let q = random_hist(&mut rng, 16);
        let a = color_loss(&hist(p.clone()), &hist(q.clone())).unwrap();
        let b = color_loss(&hist(q.clone()), &hist(p.clone())).unwrap();
        assert!(a >= 0.0);
        assert!((a - kl_oracle(&p, &q)).abs() < 1e-9 * (1.0 + a));
        assert!(color_loss(&hist(p.clone()), &hist(p.clone())).unwrap().abs() < 1e-9);
        if (a - b).abs() > 1e-6 {
            asymmetric = true;
        }
    }
    assert!(asymmetric);
}

#[test]
fn layout_mismatch_is_an_error() {
    assert_eq!(color_loss(&hist(vec![1.0]), &hist(vec![0.5, 0.5])), Err(LossError::LayoutMismatch));
}

#[test]
fn marginal_channels_add() {
    let a = ColorHistogram { bins_per_channel: 2, channels: 2, mode: HistogramMode::Marginal, values: vec![0.5, 0.5, 0.9, 0.1] };
    let b = ColorHistogram { bins_per_channel: 2, channels: 2, mode: HistogramMode::Marginal, values: vec![0.25, 0.75, 0.5, 0.5] };
    let sum = kl_oracle(&[0.5, 0.5], &[0.25, 0.75]) + kl_oracle(&[0.9, 0.1], &[0.5, 0.5]);
    assert!((color_loss(&a, &b).unwrap() - sum).abs() < 1e-12);
}

#[test]
fn shape_loss_examples() {
    let a = Image::filled(3, 3, 3, 0.2);
    let b = Image::filled(3, 3, 3, 0.7);
    assert!((shape_loss(&a, &b).unwrap() - 0.5).abs() < 1e-15);
    assert_eq!(shape_loss(&a, &a).unwrap(), 0.0);
    assert_eq!(shape_loss(&a, &Image::filled(2, 3, 3, 0.2)), Err(LossError::DimMismatch));
}

#[test]
fn shape_loss_metric_axioms() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let (x, y, z) = (random_image(&mut rng), random_image(&mut rng), random_image(&mut rng));
        let xy = shape_loss(&x, &y).unwrap();
        assert!(xy > 0.0);
        assert_eq!(shape_loss(&x, &x).unwrap(), 0.0);
        assert_eq!(xy, shape_loss(&y, &x).unwrap());
        assert!(shape_loss(&x, &z).unwrap() <= xy + shape_loss(&y, &z).unwrap() + 1e-12);
    }
}

#[test]
fn ta_is_linear_in_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let (y, g, xb) = (random_image(&mut rng), random_image(&mut rng), random_image(&mut rng));
        let (l1, l2) = (rng.random_range(0.0..50.0), rng.random_range(0.0..200.0));
        let color = ta_loss(LossWeights::new(1.0, 0.0).unwrap(), &y, &g, &xb, 32).unwrap().ta;
        let shape = ta_loss(LossWeights::new(0.0, 1.0).unwrap(), &y, &g, &xb, 32).unwrap().ta;
        let r = ta_loss(LossWeights::new(l1, l2).unwrap(), &y, &g, &xb, 32).unwrap();
        assert!((r.ta - (l1 * color + l2 * shape)).abs() < 1e-9);
        assert_eq!(r.color, color);
        assert_eq!(r.shape, shape);
    }
}

#[test]
fn default_weights() {
    let w = LossWeights::default();
    assert_eq!((w.lambda1, w.lambda2), (10.0, 100.0));
    assert!(LossWeights::new(-1.0, 0.0).is_err());
}

#[test]
fn gan_objective_values() {
    assert!((gan_objective(0.5, 0.5).unwrap() - 2.0 * 0.5f64.ln()).abs() < 1e-15);
    assert!((gan_objective(1.0, 0.0).unwrap()).abs() < 1e-15);
    assert!((gan_objective(0.0, 1.0).unwrap() - 2.0 * 1e-12f64.ln()).abs() < 1e-9);
    assert_eq!(gan_objective(1.5, 0.0), Err(LossError::OutOfRange(1.5)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn kl_nonnegative(p in prop::collection::vec(0.0f64..1.0, 8), q in prop::collection::vec(0.0f64..1.0, 8)) {
        let norm = |v: Vec<f64>| { let s: f64 = v.iter().sum::<f64>() + 1e-12; v.iter().map(|x| x / s).collect::<Vec<_>>() };
        let (p, q) = (norm(p), norm(q));
        prop_assert!(color_loss(&hist(p), &hist(q)).unwrap() >= 0.0);
    }
}
