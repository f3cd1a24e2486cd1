use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::net::{Activation, Gradients, TinyNet};
use super::sample::{gen_procedural_sample, ShapeSample};
use super::soft_hist::{soft_histogram, soft_kl_with_grad};
use super::ToyError;
use crate::image::{color_histogram, ColorHistogram, Image};
use crate::loss::{color_loss, gan_objective, shape_loss, LossWeights, PROB_FLOOR};

/// Training configuration. Every field has a default except `seed`, which
/// must be supplied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyConfig {
    pub image_side: usize,
    pub z_dim: usize,
    pub g_hidden: usize,
    pub d_hidden: usize,
    pub learning_rate: f64,
    pub steps: usize,
    pub batch: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub bins: usize,
    pub seed: Option<u64>,
    /// Skip discriminator updates.
    pub freeze_d: bool,
    /// Reuse the same examples and noise every step.
    pub fixed_batch: bool,
    pub train_pool: usize,
    pub heldout: usize,
    /// Emit a generated sample every this many steps (0 = never).
    pub dump_every: usize,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            image_side: 16,
            z_dim: 8,
            g_hidden: 128,
            d_hidden: 128,
            learning_rate: 0.005,
            steps: 200,
            batch: 32,
            lambda1: 10.0,
            lambda2: 100.0,
            bins: 32,
            seed: None,
            freeze_d: false,
            fixed_batch: false,
            train_pool: 512,
            heldout: 16,
            dump_every: 0,
        }
    }
}

impl ToyConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed: Some(seed), ..Self::default() }
    }

    pub fn weights(&self) -> Result<LossWeights, ToyError> {
        LossWeights::new(self.lambda1, self.lambda2).map_err(|e| ToyError::InvalidConfig(e.to_string()))
    }

    pub fn validate(&self) -> Result<u64, ToyError> {
        let seed = self.seed.ok_or_else(|| ToyError::InvalidConfig("seed is mandatory".into()))?;
        if self.image_side < 8 {
            return Err(ToyError::InvalidConfig("image_side must be at least 8".into()));
        }
        for (name, v) in [
            ("z_dim", self.z_dim),
            ("g_hidden", self.g_hidden),
            ("d_hidden", self.d_hidden),
            ("batch", self.batch),
            ("bins", self.bins),
            ("train_pool", self.train_pool),
            ("heldout", self.heldout),
        ] {
            if v == 0 {
                return Err(ToyError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.fixed_batch && self.batch > self.train_pool {
            return Err(ToyError::InvalidConfig("fixed batch larger than the training pool".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(ToyError::InvalidConfig("learning_rate must be positive".into()));
        }
        self.weights()?;
        Ok(seed)
    }

    fn pixels(&self) -> usize {
        self.image_side * self.image_side
    }

    pub fn generator_dims(&self) -> [usize; 3] {
        [4 * self.pixels() + self.z_dim, self.g_hidden, 3 * self.pixels()]
    }

    pub fn discriminator_dims(&self) -> [usize; 3] {
        [7 * self.pixels(), self.d_hidden, 1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// Adversarial objective value, batch mean.
    pub gan: f64,
    pub shape: f64,
    pub color: f64,
    pub ta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub seed: u64,
    pub config: ToyConfig,
    pub records: Vec<StepRecord>,
    pub initial_heldout_ta: f64,
    pub final_heldout_ta: f64,
}

/// Generator and discriminator.
#[derive(Debug, Clone)]
pub struct Models {
    pub generator: TinyNet,
    pub discriminator: TinyNet,
}

/// Default networks for `config`: one tanh hidden layer each, sigmoid
/// outputs, weights from `N(0, 1/fan_in)`.
pub fn build_models(config: &ToyConfig, rng: &mut ChaCha8Rng) -> Result<Models, ToyError> {
    let xavier = |fan_in: usize| 1.0 / (fan_in as f64).sqrt();
    let acts = [Activation::Tanh, Activation::Sigmoid];
    Ok(Models {
        generator: TinyNet::random(&config.generator_dims(), &acts, xavier, rng)?,
        discriminator: TinyNet::random(&config.discriminator_dims(), &acts, xavier, rng)?,
    })
}

struct Example {
    sample: ShapeSample,
    reference_soft: Vec<f64>,
    reference_hard: ColorHistogram,
}

impl Example {
    fn new(seed: u64, config: &ToyConfig) -> Self {
        let sample = gen_procedural_sample(seed, config.image_side);
        let reference_soft = soft_histogram(sample.color_map.data(), 3, config.bins);
        let reference_hard = color_histogram(&sample.color_map, config.bins, None).expect("unmasked histogram");
        Self { sample, reference_soft, reference_hard }
    }

    /// The color map enters centered on zero.
    fn generator_input(&self, z: &[f64]) -> Vec<f64> {
        let s = &self.sample;
        let mut v = Vec::with_capacity(s.shape_map.data().len() + s.color_map.data().len() + z.len());
        v.extend_from_slice(s.shape_map.data());
        v.extend(s.color_map.data().iter().map(|c| c - 0.5));
        v.extend_from_slice(z);
        v
    }

    /// The discriminator sees `x_b` on both the real and the fake branch.
    fn discriminator_input(&self, y: &[f64]) -> Vec<f64> {
        let s = &self.sample;
        let mut v = Vec::with_capacity(s.shape_map.data().len() + s.color_map.data().len() + y.len());
        v.extend_from_slice(s.shape_map.data());
        v.extend_from_slice(s.color_map.data());
        v.extend_from_slice(y);
        v
    }
}

fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    // splitmix64 over a mixed key.
    let mut z = seed ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03) ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn noise(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn as_image(config: &ToyConfig, values: &[f64]) -> Image {
    Image::new(config.image_side, config.image_side, 3, values.to_vec()).expect("sigmoid outputs lie in [0, 1]")
}

/// Hard (reported) losses of one generated image.
fn hard_losses(example: &Example, generated: &Image, config: &ToyConfig) -> (f64, f64) {
    let shape = shape_loss(&example.sample.x, generated).expect("same shape");
    let h_g = color_histogram(generated, config.bins, None).expect("unmasked histogram");
    let color = color_loss(&h_g, &example.reference_hard).expect("same layout");
    (shape, color)
}

fn heldout_ta(models: &Models, heldout: &[(Example, Vec<f64>)], config: &ToyConfig, weights: &LossWeights) -> Result<f64, ToyError> {
    let mut total = 0.0;
    for (ex, z) in heldout {
        let out = models.generator.forward(&ex.generator_input(z))?;
        let (shape, color) = hard_losses(ex, &as_image(config, out.output()), config);
        total += weights.combine(color, shape);
    }
    Ok(total / heldout.len() as f64)
}

pub fn train_toy_tagan(config: &ToyConfig) -> Result<TrainingReport, ToyError> {
    train_toy_tagan_observed(config, |_, _| {})
}

/// Alternating training. Each step optionally takes one ascent step for the
/// discriminator on `log D(real) + log(1 - D(fake))`, then one descent step
/// for the generator on `log(1 - D(fake)) + λ1 · soft-KL + λ2 · L1`.
/// Recorded losses use the hard histogram. `observe` receives the generated
/// image for the first held-out example every `dump_every` steps.
pub fn train_toy_tagan_observed(config: &ToyConfig, mut observe: impl FnMut(usize, &Image)) -> Result<TrainingReport, ToyError> {
    let seed = config.validate()?;
    let weights = config.weights()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut models = build_models(config, &mut rng)?;

    let pool: Vec<Example> = (0..config.train_pool)
        .map(|i| Example::new(derive_seed(seed, 1, i as u64), config))
        .collect();
    let mut heldout_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2, u64::MAX));
    let heldout: Vec<(Example, Vec<f64>)> = (0..config.heldout)
        .map(|i| (Example::new(derive_seed(seed, 2, i as u64), config), noise(&mut heldout_rng, config.z_dim)))
        .collect();
    let fixed: Vec<(usize, Vec<f64>)> = (0..config.batch).map(|i| (i, noise(&mut rng, config.z_dim))).collect();

    let initial = heldout_ta(&models, &heldout, config, &weights)?;
    let mut report = TrainingReport {
        seed,
        config: config.clone(),
        records: Vec::with_capacity(config.steps),
        initial_heldout_ta: initial,
        final_heldout_ta: initial,
    };
    let lr = config.learning_rate;
    let batch_scale = 1.0 / config.batch as f64;
    let pixels3 = 3 * config.image_side * config.image_side;

    for step in 0..config.steps {
        let batch: Vec<(usize, Vec<f64>)> = if config.fixed_batch {
            fixed.clone()
        } else {
            (0..config.batch)
                .map(|_| {
                    let i = rand::Rng::random_range(&mut rng, 0..config.train_pool);
                    (i, noise(&mut rng, config.z_dim))
                })
                .collect()
        };

        if !config.freeze_d {
            let mut acc = Gradients::zeros_like(&models.discriminator);
            for (i, z) in &batch {
                let ex = &pool[*i];
                let fake = models.generator.forward(&ex.generator_input(z))?;
                let real_cache = models.discriminator.forward(&ex.discriminator_input(ex.sample.x.data()))?;
                let fake_cache = models.discriminator.forward(&ex.discriminator_input(fake.output()))?;
                let d_real = real_cache.output()[0];
                let d_fake = fake_cache.output()[0];
                let g_real = if d_real > PROB_FLOOR { 1.0 / d_real } else { 0.0 };
                let g_fake = if 1.0 - d_fake > PROB_FLOOR { -1.0 / (1.0 - d_fake) } else { 0.0 };
                acc.add_assign(&models.discriminator.backward(&real_cache, &[g_real])?.0);
                acc.add_assign(&models.discriminator.backward(&fake_cache, &[g_fake])?.0);
            }
            if !acc.is_finite() {
                return Err(ToyError::DivergenceDetected { step, report: Box::new(report) });
            }
            models.discriminator.apply(&acc, lr * batch_scale);
        }

        let mut acc = Gradients::zeros_like(&models.generator);
        let (mut gan, mut shape, mut color) = (0.0, 0.0, 0.0);
        for (i, z) in &batch {
            let ex = &pool[*i];
            let g_cache = models.generator.forward(&ex.generator_input(z))?;
            let out = g_cache.output();
            let d_cache = models.discriminator.forward(&ex.discriminator_input(out))?;
            let d_fake = d_cache.output()[0];
            let d_real = models.discriminator.forward(&ex.discriminator_input(ex.sample.x.data()))?.output()[0];

            let adv_grad = if 1.0 - d_fake > PROB_FLOOR { -1.0 / (1.0 - d_fake) } else { 0.0 };
            let (_, d_input_grad) = models.discriminator.backward(&d_cache, &[adv_grad])?;
            let (_, kl_grad) = soft_kl_with_grad(out, 3, config.bins, &ex.reference_soft);
            let y = ex.sample.x.data();
            let inv_n = 1.0 / pixels3 as f64;
            let out_grad: Vec<f64> = (0..pixels3)
                .map(|k| {
                    let l1 = match out[k].partial_cmp(&y[k]) {
                        Some(std::cmp::Ordering::Greater) => inv_n,
                        Some(std::cmp::Ordering::Less) => -inv_n,
                        _ => 0.0,
                    };
                    d_input_grad[d_input_grad.len() - pixels3 + k] + weights.lambda1 * kl_grad[k] + weights.lambda2 * l1
                })
                .collect();
            acc.add_assign(&models.generator.backward(&g_cache, &out_grad)?.0);

            let (s, c) = hard_losses(ex, &as_image(config, out), config);
            shape += s;
            color += c;
            gan += gan_objective(d_real, d_fake).unwrap_or(f64::NAN);
        }
        let record = StepRecord {
            step,
            gan: gan * batch_scale,
            shape: shape * batch_scale,
            color: color * batch_scale,
            ta: weights.combine(color * batch_scale, shape * batch_scale),
        };
        let finite = [record.gan, record.shape, record.color, record.ta].iter().all(|v| v.is_finite());
        report.records.push(record);
        if !finite || !acc.is_finite() {
            return Err(ToyError::DivergenceDetected { step, report: Box::new(report) });
        }
        models.generator.apply(&acc, -lr * batch_scale);

        if config.dump_every > 0 && (step + 1) % config.dump_every == 0 {
            let (ex, z) = &heldout[0];
            let out = models.generator.forward(&ex.generator_input(z))?;
            observe(step + 1, &as_image(config, out.output()));
        }
    }
    report.final_heldout_ta = heldout_ta(&models, &heldout, config, &weights)?;
    if !report.final_heldout_ta.is_finite() {
        let step = config.steps;
        return Err(ToyError::DivergenceDetected { step, report: Box::new(report) });
    }
    Ok(report)
}
