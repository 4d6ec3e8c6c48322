//! The variational autoencoder: convolutional encoder to a small Gaussian
//! latent, reparameterized sampling, mirrored decoder, summed-BCE + KL loss,
//! and a training loop with patience-based early stopping that returns the
//! best-validation weights.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{split_indices, UnitCellImage};
use crate::error::{Error, Result};
use crate::latent::LatentStats;
use crate::nn::{
    relative_error, Activation, AdamHyper, AdamState, LayerParams, LayerSpec, LayerStack, Tensor,
};
use crate::rng;

/// Reconstruction probabilities are clamped to [EPS, 1 - EPS] inside the
/// cross-entropy so the loss stays finite at saturated pixels.
const BCE_CLAMP: f64 = 1e-7;

const SEED_TAG_SPLIT: u64 = 1;
const SEED_TAG_INIT: u64 = 2;
const SEED_TAG_SHUFFLE: u64 = 3;
const SEED_TAG_NOISE: u64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeConfig {
    pub image_size: usize,
    pub latent_dim: usize,
    pub batch_size: usize,
    pub train_fraction: f64,
    pub patience_epochs: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub adam: AdamHyper,
    /// Filter counts of the two strided convolutions.
    pub conv_filters: [usize; 2],
    /// Width of the dense bottleneck between the conv stack and the heads.
    pub bottleneck_units: usize,
}

impl Default for VaeConfig {
    fn default() -> Self {
        VaeConfig {
            image_size: 28,
            latent_dim: 4,
            batch_size: 32,
            train_fraction: 0.85,
            patience_epochs: 10,
            max_epochs: 500,
            seed: 0,
            adam: AdamHyper::default(),
            conv_filters: [16, 32],
            bottleneck_units: 16,
        }
    }
}

impl VaeConfig {
    /// Small architecture for fast tests: 8x8 images, 2-dimensional latent.
    pub fn test_scale(seed: u64) -> Self {
        VaeConfig {
            image_size: 8,
            latent_dim: 2,
            batch_size: 8,
            max_epochs: 30,
            seed,
            conv_filters: [4, 8],
            bottleneck_units: 8,
            ..VaeConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::Config("latent_dim must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.patience_epochs == 0 {
            return Err(Error::Config("patience_epochs must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        if self.image_size < 8 || self.image_size % 4 != 0 {
            return Err(Error::Config(format!(
                "image_size must be >= 8 and divisible by 4 (two stride-2 stages), got {}",
                self.image_size
            )));
        }
        if self.conv_filters.iter().any(|&f| f == 0) || self.bottleneck_units == 0 {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        Ok(())
    }
}

/// A point in the learned latent space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentPoint {
    pub coords: Vec<f64>,
}

impl LatentPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        LatentPoint { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainingMeta {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub seed: u64,
}

/// Encoder/decoder parameters plus the architecture manifest.
#[derive(Debug, Clone)]
pub struct ModelWeights {
    pub image_size: usize,
    pub latent_dim: usize,
    pub trunk: LayerStack,
    pub mu_head: LayerStack,
    pub logvar_head: LayerStack,
    pub decoder: LayerStack,
    pub metadata: TrainingMeta,
    /// Per-dimension statistics of the encoded training corpus, embedded at
    /// train time so downstream sweeps need no corpus access.
    pub latent_stats: Option<LatentStats>,
}

impl ModelWeights {
    /// Freshly initialized weights for the configured architecture.
    pub fn init(config: &VaeConfig) -> Result<Self> {
        config.validate()?;
        let g = config.image_size;
        let [f0, f1] = config.conv_filters;
        let reduced = g / 4;
        let conv_out = f1 * reduced * reduced;
        let bottleneck = config.bottleneck_units;
        let latent = config.latent_dim;

        let mut init_rng = rng::stream(config.seed, SEED_TAG_INIT);
        let trunk = LayerStack::init(
            vec![
                LayerSpec::Conv {
                    in_channels: 1,
                    out_channels: f0,
                    kernel: 3,
                    stride: 2,
                },
                LayerSpec::Activation {
                    function: Activation::Relu,
                },
                LayerSpec::Conv {
                    in_channels: f0,
                    out_channels: f1,
                    kernel: 3,
                    stride: 2,
                },
                LayerSpec::Activation {
                    function: Activation::Relu,
                },
                LayerSpec::Flatten,
                LayerSpec::Dense {
                    in_dim: conv_out,
                    out_dim: bottleneck,
                },
                LayerSpec::Activation {
                    function: Activation::Relu,
                },
            ],
            &mut init_rng,
        )?;
        let mu_head = LayerStack::init(
            vec![LayerSpec::Dense {
                in_dim: bottleneck,
                out_dim: latent,
            }],
            &mut init_rng,
        )?;
        let logvar_head = LayerStack::init(
            vec![LayerSpec::Dense {
                in_dim: bottleneck,
                out_dim: latent,
            }],
            &mut init_rng,
        )?;
        let decoder = LayerStack::init(
            vec![
                LayerSpec::Dense {
                    in_dim: latent,
                    out_dim: bottleneck,
                },
                LayerSpec::Activation {
                    function: Activation::Relu,
                },
                LayerSpec::Dense {
                    in_dim: bottleneck,
                    out_dim: conv_out,
                },
                LayerSpec::Activation {
                    function: Activation::Relu,
                },
                LayerSpec::Reshape {
                    shape: vec![f1, reduced, reduced],
                },
                LayerSpec::TransposedConv {
                    in_channels: f1,
                    out_channels: f0,
                    kernel: 3,
                    stride: 2,
                },
                LayerSpec::Activation {
                    function: Activation::Relu,
                },
                LayerSpec::TransposedConv {
                    in_channels: f0,
                    out_channels: 1,
                    kernel: 3,
                    stride: 2,
                },
                LayerSpec::Activation {
                    function: Activation::Sigmoid,
                },
            ],
            &mut init_rng,
        )?;

        Ok(ModelWeights {
            image_size: g,
            latent_dim: latent,
            trunk,
            mu_head,
            logvar_head,
            decoder,
            metadata: TrainingMeta {
                seed: config.seed,
                ..TrainingMeta::default()
            },
            latent_stats: None,
        })
    }

    pub fn param_count(&self) -> usize {
        self.stacks().iter().map(|s| s.param_count()).sum()
    }

    fn stacks(&self) -> [&LayerStack; 4] {
        [&self.trunk, &self.mu_head, &self.logvar_head, &self.decoder]
    }

    fn stacks_mut(&mut self) -> [&mut LayerStack; 4] {
        [
            &mut self.trunk,
            &mut self.mu_head,
            &mut self.logvar_head,
            &mut self.decoder,
        ]
    }

    fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (stack_name, stack) in ["encoder", "mu_head", "logvar_head", "decoder"]
            .iter()
            .zip(self.stacks())
        {
            for (li, tensors) in stack.params.iter().enumerate() {
                for ti in 0..tensors.len() {
                    let part = if ti == 0 { "weight" } else { "bias" };
                    names.push(format!("{stack_name}.{li}.{part}"));
                }
            }
        }
        names
    }
}

fn image_tensor(image: &UnitCellImage) -> Tensor {
    let g = image.size();
    Tensor::new(vec![1, g, g], image.pixels().to_vec()).expect("image buffer matches its size")
}

/// Maps an image to its Gaussian posterior parameters (mu, log-variance).
pub fn encode(weights: &ModelWeights, image: &UnitCellImage) -> Result<(LatentPoint, LatentPoint)> {
    if image.size() != weights.image_size {
        return Err(Error::Validation(format!(
            "image size {} does not match model size {}",
            image.size(),
            weights.image_size
        )));
    }
    let (trunk_out, _) = weights.trunk.forward(&image_tensor(image))?;
    let (mu, _) = weights.mu_head.forward(&trunk_out)?;
    let (logvar, _) = weights.logvar_head.forward(&trunk_out)?;
    Ok((
        LatentPoint::new(mu.data().to_vec()),
        LatentPoint::new(logvar.data().to_vec()),
    ))
}

/// z = mu + exp(logvar / 2) * noise, element-wise.
pub fn reparameterize(mu: &LatentPoint, logvar: &LatentPoint, noise: &[f64]) -> Result<LatentPoint> {
    if mu.dim() != logvar.dim() || mu.dim() != noise.len() {
        return Err(Error::Validation(format!(
            "reparameterize dimensions disagree: mu {}, logvar {}, noise {}",
            mu.dim(),
            logvar.dim(),
            noise.len()
        )));
    }
    let coords = mu
        .coords
        .iter()
        .zip(&logvar.coords)
        .zip(noise)
        .map(|((m, lv), n)| m + (lv / 2.0).exp() * n)
        .collect();
    Ok(LatentPoint::new(coords))
}

/// Decodes a latent point to an image; the final sigmoid keeps every pixel
/// in [0, 1].
pub fn decode(weights: &ModelWeights, z: &LatentPoint) -> Result<UnitCellImage> {
    if !z.is_finite() {
        return Err(Error::Validation("latent point has non-finite coordinates".into()));
    }
    if z.dim() != weights.latent_dim {
        return Err(Error::Validation(format!(
            "latent point has {} coordinates, model expects {}",
            z.dim(),
            weights.latent_dim
        )));
    }
    let input = Tensor::new(vec![z.dim()], z.coords.clone())?;
    let (out, _) = weights.decoder.forward(&input)?;
    UnitCellImage::new(weights.image_size, out.data().to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

fn bce_sum(recon: &[f64], target: &[f64]) -> f64 {
    recon
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum()
}

fn kl_divergence(mu: &[f64], logvar: &[f64]) -> f64 {
    -0.5 * mu
        .iter()
        .zip(logvar)
        .map(|(&m, &lv)| 1.0 + lv - m * m - lv.exp())
        .sum::<f64>()
}

/// Per-image loss: summed binary cross-entropy plus the KL divergence of the
/// posterior against the unit Gaussian prior.
pub fn vae_loss(
    recon: &[f64],
    target: &[f64],
    mu: &LatentPoint,
    logvar: &LatentPoint,
) -> LossBreakdown {
    let recon_term = bce_sum(recon, target);
    let kl_term = kl_divergence(&mu.coords, &logvar.coords);
    LossBreakdown {
        total: recon_term + kl_term,
        recon: recon_term,
        kl: kl_term,
    }
}

/// Parameter gradients for every stack, shaped like the model parameters.
#[derive(Debug, Clone)]
struct ModelGrads {
    trunk: LayerParams,
    mu_head: LayerParams,
    logvar_head: LayerParams,
    decoder: LayerParams,
}

impl ModelGrads {
    fn zeros(weights: &ModelWeights) -> Self {
        ModelGrads {
            trunk: weights.trunk.zero_grads(),
            mu_head: weights.mu_head.zero_grads(),
            logvar_head: weights.logvar_head.zero_grads(),
            decoder: weights.decoder.zero_grads(),
        }
    }

    fn accumulate_scaled(&mut self, other: &ModelGrads, factor: f64) {
        for (dst_stack, src_stack) in [
            (&mut self.trunk, &other.trunk),
            (&mut self.mu_head, &other.mu_head),
            (&mut self.logvar_head, &other.logvar_head),
            (&mut self.decoder, &other.decoder),
        ] {
            for (dst_layer, src_layer) in dst_stack.iter_mut().zip(src_stack) {
                for (dst, src) in dst_layer.iter_mut().zip(src_layer) {
                    for (d, s) in dst.data_mut().iter_mut().zip(src.data()) {
                        *d += factor * s;
                    }
                }
            }
        }
    }

    fn tensors(&self) -> Vec<&Tensor> {
        [&self.trunk, &self.mu_head, &self.logvar_head, &self.decoder]
            .into_iter()
            .flatten()
            .flatten()
            .collect()
    }
}

/// Gradient of the clamped binary cross-entropy with respect to the
/// reconstruction probability. Zero in the clamped (saturated) region.
fn bce_grad(p: f64, t: f64) -> f64 {
    if p <= BCE_CLAMP || p >= 1.0 - BCE_CLAMP {
        0.0
    } else {
        (p - t) / (p * (1.0 - p))
    }
}

/// Loss and full parameter gradients for one image under fixed noise.
fn forward_backward(
    weights: &ModelWeights,
    x: &Tensor,
    noise: &[f64],
) -> Result<(LossBreakdown, ModelGrads)> {
    let (trunk_out, trunk_cache) = weights.trunk.forward(x)?;
    let (mu_t, mu_cache) = weights.mu_head.forward(&trunk_out)?;
    let (lv_t, lv_cache) = weights.logvar_head.forward(&trunk_out)?;
    let mu = mu_t.data();
    let lv = lv_t.data();

    let z: Vec<f64> = mu
        .iter()
        .zip(lv)
        .zip(noise)
        .map(|((m, l), n)| m + (l / 2.0).exp() * n)
        .collect();
    let z_t = Tensor::new(vec![z.len()], z)?;
    let (recon, dec_cache) = weights.decoder.forward(&z_t)?;

    let recon_term = bce_sum(recon.data(), x.data());
    let kl_term = kl_divergence(mu, lv);
    let loss = LossBreakdown {
        total: recon_term + kl_term,
        recon: recon_term,
        kl: kl_term,
    };

    let g_recon = Tensor::new(
        recon.shape().to_vec(),
        recon
            .data()
            .iter()
            .zip(x.data())
            .map(|(&p, &t)| bce_grad(p, t))
            .collect(),
    )?;
    let (dec_grads, g_z) = weights.decoder.backward(&dec_cache, &g_recon)?;

    // d z / d mu = 1; d z / d logvar = exp(logvar/2) * noise / 2.
    // KL contributes mu and (exp(logvar) - 1) / 2 directly.
    let g_mu = Tensor::new(
        vec![mu.len()],
        g_z.data()
            .iter()
            .zip(mu)
            .map(|(&gz, &m)| gz + m)
            .collect(),
    )?;
    let g_lv = Tensor::new(
        vec![lv.len()],
        g_z.data()
            .iter()
            .zip(lv)
            .zip(noise)
            .map(|((&gz, &l), &n)| gz * (l / 2.0).exp() * n / 2.0 + (l.exp() - 1.0) / 2.0)
            .collect(),
    )?;

    let (mu_grads, g_trunk_a) = weights.mu_head.backward(&mu_cache, &g_mu)?;
    let (lv_grads, g_trunk_b) = weights.logvar_head.backward(&lv_cache, &g_lv)?;
    let mut g_trunk = g_trunk_a;
    g_trunk.add_assign(&g_trunk_b);
    let (trunk_grads, _) = weights.trunk.backward(&trunk_cache, &g_trunk)?;

    Ok((
        loss,
        ModelGrads {
            trunk: trunk_grads,
            mu_head: mu_grads,
            logvar_head: lv_grads,
            decoder: dec_grads,
        },
    ))
}

/// Loss only, under fixed noise; the finite-difference side of the checker.
fn forward_loss(weights: &ModelWeights, x: &Tensor, noise: &[f64]) -> Result<f64> {
    let (trunk_out, _) = weights.trunk.forward(x)?;
    let (mu_t, _) = weights.mu_head.forward(&trunk_out)?;
    let (lv_t, _) = weights.logvar_head.forward(&trunk_out)?;
    let z: Vec<f64> = mu_t
        .data()
        .iter()
        .zip(lv_t.data())
        .zip(noise)
        .map(|((m, l), n)| m + (l / 2.0).exp() * n)
        .collect();
    let (recon, _) = weights.decoder.forward(&Tensor::new(vec![z.len()], z)?)?;
    Ok(bce_sum(recon.data(), x.data()) + kl_divergence(mu_t.data(), lv_t.data()))
}

/// Validation loss of one image: deterministic, evaluated at z = mu.
fn validation_loss(weights: &ModelWeights, x: &Tensor) -> Result<f64> {
    forward_loss(weights, x, &vec![0.0; weights.latent_dim])
}

/// Smallest |preactivation| entering any ReLU in the full pipeline (trunk
/// and decoder) for one image under fixed noise. Central finite differences
/// are only a valid oracle when this margin comfortably exceeds the probe
/// step, since a probe that crosses the kink measures a blended slope.
pub fn vae_relu_margin(weights: &ModelWeights, image: &UnitCellImage, noise: &[f64]) -> Result<f64> {
    let x = image_tensor(image);
    let (trunk_out, trunk_cache) = weights.trunk.forward(&x)?;
    let (mu_t, _) = weights.mu_head.forward(&trunk_out)?;
    let (lv_t, _) = weights.logvar_head.forward(&trunk_out)?;
    let z: Vec<f64> = mu_t
        .data()
        .iter()
        .zip(lv_t.data())
        .zip(noise)
        .map(|((m, l), n)| m + (l / 2.0).exp() * n)
        .collect();
    let (_, dec_cache) = weights.decoder.forward(&Tensor::new(vec![z.len()], z)?)?;
    Ok(weights
        .trunk
        .relu_margin(&trunk_cache)
        .min(weights.decoder.relu_margin(&dec_cache)))
}

/// Exhaustive finite-difference check of the full loss gradient (trunk,
/// both heads, decoder) under fixed reparameterization noise. Returns the
/// worst relative error over every parameter scalar.
pub fn check_vae_gradients(
    weights: &ModelWeights,
    image: &UnitCellImage,
    noise: &[f64],
    epsilon: f64,
) -> Result<f64> {
    if epsilon <= 0.0 {
        return Err(Error::Validation(format!(
            "finite-difference epsilon must be positive, got {epsilon}"
        )));
    }
    let x = image_tensor(image);
    let (_, analytic) = forward_backward(weights, &x, noise)?;
    let analytic_tensors = analytic.tensors();

    let mut work = weights.clone();
    let mut max_rel: f64 = 0.0;
    let mut flat_index = 0;
    for stack_idx in 0..4 {
        let n_layers = work.stacks()[stack_idx].params.len();
        for li in 0..n_layers {
            let n_tensors = work.stacks()[stack_idx].params[li].len();
            for ti in 0..n_tensors {
                let len = work.stacks()[stack_idx].params[li][ti].len();
                for ei in 0..len {
                    let original = work.stacks()[stack_idx].params[li][ti].data()[ei];
                    work.stacks_mut()[stack_idx].params[li][ti].data_mut()[ei] =
                        original + epsilon;
                    let plus = forward_loss(&work, &x, noise)?;
                    work.stacks_mut()[stack_idx].params[li][ti].data_mut()[ei] =
                        original - epsilon;
                    let minus = forward_loss(&work, &x, noise)?;
                    work.stacks_mut()[stack_idx].params[li][ti].data_mut()[ei] = original;
                    let numerical = (plus - minus) / (2.0 * epsilon);
                    let a = analytic_tensors[flat_index].data()[ei];
                    max_rel = max_rel.max(relative_error(a, numerical));
                }
                flat_index += 1;
            }
        }
    }
    Ok(max_rel)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Trains on the corpus and returns the weights from the epoch with the best
/// validation loss, together with the per-epoch history.
pub fn train(corpus: &[UnitCellImage], config: &VaeConfig) -> Result<(ModelWeights, Vec<EpochStats>)> {
    train_with_observer(corpus, config, |_| {})
}

/// [`train`] with a per-epoch callback for progress reporting.
pub fn train_with_observer(
    corpus: &[UnitCellImage],
    config: &VaeConfig,
    mut observer: impl FnMut(&EpochStats),
) -> Result<(ModelWeights, Vec<EpochStats>)> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::Validation("training corpus is empty".into()));
    }
    if let Some(bad) = corpus.iter().find(|img| img.size() != config.image_size) {
        return Err(Error::Validation(format!(
            "corpus image size {} does not match configured size {}",
            bad.size(),
            config.image_size
        )));
    }

    let (train_idx, val_idx) = split_indices(
        corpus.len(),
        config.train_fraction,
        rng::derive_seed(config.seed, SEED_TAG_SPLIT),
    )?;
    if val_idx.is_empty() {
        return Err(Error::Config(
            "validation split is empty; corpus too small for the train fraction".into(),
        ));
    }

    let train_tensors: Vec<Tensor> = train_idx.iter().map(|&i| image_tensor(&corpus[i])).collect();
    let val_tensors: Vec<Tensor> = val_idx.iter().map(|&i| image_tensor(&corpus[i])).collect();

    let mut weights = ModelWeights::init(config)?;
    let names = weights.param_names();
    let mut adam = {
        let stacks = weights.stacks();
        let tensors: Vec<&Tensor> = stacks.iter().flat_map(|s| s.params.iter().flatten()).collect();
        AdamState::new(&tensors, names, config.adam)
    };

    let mut shuffle_rng = rng::stream(config.seed, SEED_TAG_SHUFFLE);
    let mut noise_rng = rng::stream(config.seed, SEED_TAG_NOISE);

    let mut history = Vec::new();
    let mut best: Option<(f64, usize, ModelWeights)> = None;
    let mut epochs_since_best = 0usize;
    let mut order: Vec<usize> = (0..train_tensors.len()).collect();

    for epoch in 1..=config.max_epochs {
        use rand::seq::SliceRandom;
        order.shuffle(&mut shuffle_rng);

        let mut epoch_loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut batch_grads = ModelGrads::zeros(&weights);
            let scale = 1.0 / batch.len() as f64;
            for &idx in batch {
                let noise: Vec<f64> = (0..config.latent_dim)
                    .map(|_| StandardNormal.sample(&mut noise_rng))
                    .collect();
                let (loss, grads) = forward_backward(&weights, &train_tensors[idx], &noise)?;
                if !loss.total.is_finite() {
                    return Err(Error::Training(format!(
                        "non-finite loss at epoch {epoch}"
                    )));
                }
                epoch_loss_sum += loss.total;
                batch_grads.accumulate_scaled(&grads, scale);
            }
            let grad_tensors = batch_grads.tensors();
            let mut stacks = weights.stacks_mut();
            let mut param_tensors: Vec<&mut Tensor> = stacks
                .iter_mut()
                .flat_map(|s| s.params.iter_mut().flatten())
                .collect();
            adam.step(&mut param_tensors, &grad_tensors)?;
        }
        let train_loss = epoch_loss_sum / train_tensors.len() as f64;

        let mut val_sum = 0.0;
        for x in &val_tensors {
            val_sum += validation_loss(&weights, x)?;
        }
        let val_loss = val_sum / val_tensors.len() as f64;
        if !val_loss.is_finite() {
            return Err(Error::Training(format!(
                "non-finite validation loss at epoch {epoch}"
            )));
        }
        let stats = EpochStats {
            epoch,
            train_loss,
            val_loss,
        };
        observer(&stats);
        history.push(stats);

        let improved = best.as_ref().is_none_or(|(b, _, _)| val_loss < *b);
        if improved {
            best = Some((val_loss, epoch, weights.clone()));
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
            if epochs_since_best >= config.patience_epochs {
                break;
            }
        }
    }

    let (best_val_loss, best_epoch, mut best_weights) =
        best.expect("at least one epoch ran, so a best snapshot exists");
    best_weights.metadata = TrainingMeta {
        epochs_run: history.len(),
        best_epoch,
        best_val_loss,
        seed: config.seed,
    };
    Ok((best_weights, history))
}

/// Mean absolute per-pixel reconstruction error of `decode(encode(x).mu)`
/// over the given images.
pub fn reconstruction_mae(weights: &ModelWeights, images: &[UnitCellImage]) -> Result<f64> {
    if images.is_empty() {
        return Err(Error::Validation("no images to evaluate".into()));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for img in images {
        let (mu, _) = encode(weights, img)?;
        let recon = decode(weights, &mu)?;
        total += recon
            .pixels()
            .iter()
            .zip(img.pixels())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>();
        count += img.pixels().len();
    }
    Ok(total / count as f64)
}

/// Mean validation-style loss of the model over a set of images (z = mu).
pub fn mean_loss(weights: &ModelWeights, images: &[UnitCellImage]) -> Result<f64> {
    if images.is_empty() {
        return Err(Error::Validation("no images to evaluate".into()));
    }
    let mut sum = 0.0;
    for img in images {
        sum += validation_loss(weights, &image_tensor(img))?;
    }
    Ok(sum / images.len() as f64)
}
