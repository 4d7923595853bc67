//! Encoder/decoder networks with diagonal-Gaussian posteriors, Bernoulli
//! likelihood, prior KL, and the plain beta-VAE objective.

use std::collections::BTreeMap;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::factor::ImageShape;
use crate::nn::{NetCache, Network, OpSpec};

/// Log-variances are clamped to this symmetric range to keep KL and
/// reparameterization finite.
pub const LOG_VAR_CLAMP: f64 = 12.0;

#[derive(Debug, Error)]
pub enum VaeError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("pixel values must lie in [0, 1]")]
    PixelRange,
    #[error("beta must be at least 1, got {0}")]
    InvalidBeta(f64),
    #[error("bad model config: {0}")]
    Config(String),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint format: {0}")]
    Format(String),
}

/// Batched diagonal Gaussian: rows are examples, columns latent coordinates.
/// Log-variances are clamped to [-LOG_VAR_CLAMP, LOG_VAR_CLAMP].
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalGaussian {
    pub mean: Array2<f64>,
    pub log_var: Array2<f64>,
}

impl DiagonalGaussian {
    pub fn new(mean: Array2<f64>, log_var: Array2<f64>) -> Result<Self, VaeError> {
        if mean.dim() != log_var.dim() {
            return Err(VaeError::ShapeMismatch(format!(
                "mean {:?} vs log_var {:?}",
                mean.dim(),
                log_var.dim()
            )));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(VaeError::NonFinite("mean"));
        }
        if log_var.iter().any(|v| !v.is_finite()) {
            return Err(VaeError::NonFinite("log_var"));
        }
        Ok(Self {
            mean,
            log_var: log_var.mapv(|v| v.clamp(-LOG_VAR_CLAMP, LOG_VAR_CLAMP)),
        })
    }

    /// One-example convenience constructor.
    pub fn single(mean: Vec<f64>, log_var: Vec<f64>) -> Result<Self, VaeError> {
        let d = mean.len();
        Self::new(
            Array2::from_shape_vec((1, d), mean).expect("shape"),
            Array2::from_shape_vec((1, log_var.len()), log_var)
                .map_err(|e| VaeError::ShapeMismatch(e.to_string()))?,
        )
    }

    pub fn batch(&self) -> usize {
        self.mean.nrows()
    }

    pub fn dim(&self) -> usize {
        self.mean.ncols()
    }

    pub fn variance(&self) -> Array2<f64> {
        self.log_var.mapv(f64::exp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Architecture {
    /// Two 256-unit ReLU hidden layers each way; desk-scale default.
    MlpSmall,
    /// Four 4x4 stride-2 conv layers (32, 32, 64, 64) with a 256-unit dense
    /// head, mirrored with transposed convs in the decoder.
    ConvStandard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderDecoderConfig {
    pub architecture: Architecture,
    pub latent_dim: usize,
    pub image_shape: ImageShape,
}

impl EncoderDecoderConfig {
    pub fn mlp_small(image_shape: ImageShape, latent_dim: usize) -> Self {
        Self {
            architecture: Architecture::MlpSmall,
            latent_dim,
            image_shape,
        }
    }

    pub fn conv_standard(image_shape: ImageShape, latent_dim: usize) -> Self {
        Self {
            architecture: Architecture::ConvStandard,
            latent_dim,
            image_shape,
        }
    }
}

/// Encoder + decoder over one flat parameter vector (encoder first).
#[derive(Debug, Clone)]
pub struct VaeModel {
    config: EncoderDecoderConfig,
    encoder: Network,
    decoder: Network,
}

impl VaeModel {
    pub fn new(config: EncoderDecoderConfig) -> Result<Self, VaeError> {
        let ImageShape {
            height,
            width,
            channels,
        } = config.image_shape;
        let pixels = config.image_shape.num_pixels();
        let d_z = config.latent_dim;
        if d_z == 0 {
            return Err(VaeError::Config("latent_dim must be positive".into()));
        }
        let (encoder, decoder) = match config.architecture {
            Architecture::MlpSmall => {
                let encoder = Network::new(
                    vec![
                        OpSpec::Dense {
                            in_dim: pixels,
                            out_dim: 256,
                        },
                        OpSpec::Relu,
                        OpSpec::Dense {
                            in_dim: 256,
                            out_dim: 256,
                        },
                        OpSpec::Relu,
                        OpSpec::Dense {
                            in_dim: 256,
                            out_dim: 2 * d_z,
                        },
                    ],
                    pixels,
                );
                let decoder = Network::new(
                    vec![
                        OpSpec::Dense {
                            in_dim: d_z,
                            out_dim: 256,
                        },
                        OpSpec::Relu,
                        OpSpec::Dense {
                            in_dim: 256,
                            out_dim: 256,
                        },
                        OpSpec::Relu,
                        OpSpec::Dense {
                            in_dim: 256,
                            out_dim: pixels,
                        },
                    ],
                    d_z,
                );
                (encoder, decoder)
            }
            Architecture::ConvStandard => {
                if height % 16 != 0 || width % 16 != 0 {
                    return Err(VaeError::Config(format!(
                        "conv architecture needs height and width divisible by 16, got {height}x{width}"
                    )));
                }
                let (h16, w16) = (height / 16, width / 16);
                let encoder = Network::new(
                    vec![
                        OpSpec::Conv {
                            in_ch: channels,
                            out_ch: 32,
                            in_h: height,
                            in_w: width,
                        },
                        OpSpec::Relu,
                        OpSpec::Conv {
                            in_ch: 32,
                            out_ch: 32,
                            in_h: height / 2,
                            in_w: width / 2,
                        },
                        OpSpec::Relu,
                        OpSpec::Conv {
                            in_ch: 32,
                            out_ch: 64,
                            in_h: height / 4,
                            in_w: width / 4,
                        },
                        OpSpec::Relu,
                        OpSpec::Conv {
                            in_ch: 64,
                            out_ch: 64,
                            in_h: height / 8,
                            in_w: width / 8,
                        },
                        OpSpec::Relu,
                        OpSpec::Dense {
                            in_dim: 64 * h16 * w16,
                            out_dim: 256,
                        },
                        OpSpec::Relu,
                        OpSpec::Dense {
                            in_dim: 256,
                            out_dim: 2 * d_z,
                        },
                    ],
                    pixels,
                );
                let decoder = Network::new(
                    vec![
                        OpSpec::Dense {
                            in_dim: d_z,
                            out_dim: 256,
                        },
                        OpSpec::Relu,
                        OpSpec::Dense {
                            in_dim: 256,
                            out_dim: 64 * h16 * w16,
                        },
                        OpSpec::Relu,
                        OpSpec::Deconv {
                            in_ch: 64,
                            out_ch: 64,
                            in_h: h16,
                            in_w: w16,
                        },
                        OpSpec::Relu,
                        OpSpec::Deconv {
                            in_ch: 64,
                            out_ch: 32,
                            in_h: height / 8,
                            in_w: width / 8,
                        },
                        OpSpec::Relu,
                        OpSpec::Deconv {
                            in_ch: 32,
                            out_ch: 32,
                            in_h: height / 4,
                            in_w: width / 4,
                        },
                        OpSpec::Relu,
                        OpSpec::Deconv {
                            in_ch: 32,
                            out_ch: channels,
                            in_h: height / 2,
                            in_w: width / 2,
                        },
                    ],
                    d_z,
                );
                (encoder, decoder)
            }
        };
        Ok(Self {
            config,
            encoder,
            decoder,
        })
    }

    pub fn config(&self) -> &EncoderDecoderConfig {
        &self.config
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    pub fn num_params(&self) -> usize {
        self.encoder.num_params() + self.decoder.num_params()
    }

    fn encoder_params<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[..self.encoder.num_params()]
    }

    fn decoder_params<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[self.encoder.num_params()..]
    }

    pub fn init_params<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut params = self.encoder.init_params(rng);
        params.extend(self.decoder.init_params(rng));
        params
    }

    /// Named parameter slots, prefixed `encoder.` / `decoder.`, with offsets
    /// into the flat vector.
    pub fn param_slots(&self) -> Vec<(String, usize, Vec<usize>)> {
        let mut slots = Vec::new();
        for s in self.encoder.slots() {
            slots.push((format!("encoder.{}", s.name), s.offset, s.shape.clone()));
        }
        let base = self.encoder.num_params();
        for s in self.decoder.slots() {
            slots.push((
                format!("decoder.{}", s.name),
                base + s.offset,
                s.shape.clone(),
            ));
        }
        slots
    }

    /// Approximate posterior for a batch of flattened images.
    pub fn encode(&self, params: &[f64], x: &Array2<f64>) -> Result<DiagonalGaussian, VaeError> {
        self.check_params(params)?;
        if x.ncols() != self.config.image_shape.num_pixels() {
            return Err(VaeError::ShapeMismatch(format!(
                "expected {} pixels, got {}",
                self.config.image_shape.num_pixels(),
                x.ncols()
            )));
        }
        let (out, _) = self.encoder.forward(self.encoder_params(params), x);
        let d_z = self.config.latent_dim;
        let mean = out.slice(ndarray::s![.., ..d_z]).to_owned();
        let log_var = out.slice(ndarray::s![.., d_z..]).to_owned();
        DiagonalGaussian::new(mean, log_var)
    }

    /// Pixel logits for a batch of latent vectors; probabilities are
    /// sigmoid(logits).
    pub fn decode(&self, params: &[f64], z: &Array2<f64>) -> Result<Array2<f64>, VaeError> {
        self.check_params(params)?;
        if z.ncols() != self.config.latent_dim {
            return Err(VaeError::ShapeMismatch(format!(
                "expected latent dim {}, got {}",
                self.config.latent_dim,
                z.ncols()
            )));
        }
        let (out, _) = self.decoder.forward(self.decoder_params(params), z);
        Ok(out)
    }

    pub(crate) fn check_params(&self, params: &[f64]) -> Result<(), VaeError> {
        if params.len() != self.num_params() {
            return Err(VaeError::ShapeMismatch(format!(
                "expected {} params, got {}",
                self.num_params(),
                params.len()
            )));
        }
        Ok(())
    }

    pub(crate) fn encode_cached(
        &self,
        params: &[f64],
        x: &Array2<f64>,
    ) -> (DiagonalGaussian, EncodeCache) {
        let (out, cache) = self.encoder.forward(self.encoder_params(params), x);
        let d_z = self.config.latent_dim;
        let mean = out.slice(ndarray::s![.., ..d_z]).to_owned();
        let raw_log_var = out.slice(ndarray::s![.., d_z..]).to_owned();
        let q = DiagonalGaussian {
            mean,
            log_var: raw_log_var.mapv(|v| v.clamp(-LOG_VAR_CLAMP, LOG_VAR_CLAMP)),
        };
        (
            q,
            EncodeCache {
                net: cache,
                raw_log_var,
            },
        )
    }

    /// Backward through the encoder given gradients on (mean, log_var).
    /// Clamped coordinates receive zero gradient.
    pub(crate) fn encode_backward(
        &self,
        params: &[f64],
        cache: &EncodeCache,
        grad_mean: &Array2<f64>,
        grad_log_var: &Array2<f64>,
        grad_params: &mut [f64],
    ) {
        let d_z = self.config.latent_dim;
        let batch = grad_mean.nrows();
        let mut grad_out = Array2::zeros((batch, 2 * d_z));
        grad_out.slice_mut(ndarray::s![.., ..d_z]).assign(grad_mean);
        {
            let mut gl = grad_out.slice_mut(ndarray::s![.., d_z..]);
            gl.assign(grad_log_var);
            gl.zip_mut_with(&cache.raw_log_var, |g, &raw| {
                if raw.abs() > LOG_VAR_CLAMP {
                    *g = 0.0;
                }
            });
        }
        self.encoder.backward(
            self.encoder_params(params),
            &cache.net,
            &grad_out,
            &mut grad_params[..self.encoder.num_params()],
        );
    }

    pub(crate) fn decode_cached(&self, params: &[f64], z: &Array2<f64>) -> (Array2<f64>, NetCache) {
        self.decoder.forward(self.decoder_params(params), z)
    }

    /// Backward through the decoder; returns the gradient on z.
    pub(crate) fn decode_backward(
        &self,
        params: &[f64],
        cache: &NetCache,
        grad_logits: &Array2<f64>,
        grad_params: &mut [f64],
    ) -> Array2<f64> {
        let enc = self.encoder.num_params();
        self.decoder.backward(
            self.decoder_params(params),
            cache,
            grad_logits,
            &mut grad_params[enc..],
        )
    }
}

pub(crate) struct EncodeCache {
    net: NetCache,
    raw_log_var: Array2<f64>,
}

/// z = mean + exp(log_var / 2) * eps with standard-normal eps.
pub fn reparameterize_sample<R: Rng>(q: &DiagonalGaussian, rng: &mut R) -> Array2<f64> {
    let eps = standard_normal_like(q, rng);
    sample_with_noise(q, &eps)
}

/// Deterministic reparameterization given explicit noise.
pub fn sample_with_noise(q: &DiagonalGaussian, eps: &Array2<f64>) -> Array2<f64> {
    let mut z = q.log_var.mapv(|lv| (lv / 2.0).exp());
    z *= eps;
    z += &q.mean;
    z
}

pub fn standard_normal_like<R: Rng>(q: &DiagonalGaussian, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_fn((q.batch(), q.dim()), |_| rng.sample(StandardNormal))
}

/// Per-example Bernoulli log likelihood from logits, computed in the
/// numerically stable cross-entropy form
/// sum_p x log sigmoid(l) + (1 - x) log(1 - sigmoid(l)).
pub fn bernoulli_log_likelihood(
    logits: &Array2<f64>,
    x: &Array2<f64>,
) -> Result<Array1<f64>, VaeError> {
    if logits.dim() != x.dim() {
        return Err(VaeError::ShapeMismatch(format!(
            "logits {:?} vs x {:?}",
            logits.dim(),
            x.dim()
        )));
    }
    if x.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(VaeError::PixelRange);
    }
    let mut out = Array1::zeros(logits.nrows());
    for (i, (lrow, xrow)) in logits
        .axis_iter(Axis(0))
        .zip(x.axis_iter(Axis(0)))
        .enumerate()
    {
        let mut ll = 0.0;
        for (&l, &xv) in lrow.iter().zip(xrow.iter()) {
            ll -= l.max(0.0) - l * xv + (-l.abs()).exp().ln_1p();
        }
        out[i] = ll;
    }
    Ok(out)
}

/// d LL / d logits = x - sigmoid(logits), elementwise.
pub(crate) fn bernoulli_ll_grad(logits: &Array2<f64>, x: &Array2<f64>) -> Array2<f64> {
    let mut g = logits.mapv(sigmoid);
    g.zip_mut_with(x, |s, &xv| *s = xv - *s);
    g
}

pub(crate) fn sigmoid(l: f64) -> f64 {
    if l >= 0.0 {
        1.0 / (1.0 + (-l).exp())
    } else {
        let e = l.exp();
        e / (1.0 + e)
    }
}

/// Per-example KL(q || N(0, I)) = 1/2 sum_i (mu_i^2 + var_i - log var_i - 1).
pub fn kl_to_standard_normal(q: &DiagonalGaussian) -> Array1<f64> {
    let mut out = Array1::zeros(q.batch());
    for (i, (mrow, lrow)) in q
        .mean
        .axis_iter(Axis(0))
        .zip(q.log_var.axis_iter(Axis(0)))
        .enumerate()
    {
        let mut kl = 0.0;
        for (&m, &lv) in mrow.iter().zip(lrow.iter()) {
            kl += 0.5 * (m * m + lv.exp() - lv - 1.0);
        }
        out[i] = kl;
    }
    out
}

/// Gradients of sum KL: d/d mean = mean, d/d log_var = (var - 1) / 2.
pub(crate) fn kl_grads(q: &DiagonalGaussian) -> (Array2<f64>, Array2<f64>) {
    (q.mean.clone(), q.log_var.mapv(|lv| 0.5 * (lv.exp() - 1.0)))
}

/// Batch-mean terms of the beta-VAE objective; loss = -recon + beta * kl.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaVaeTerms {
    pub loss: f64,
    pub recon: f64,
    pub kl: f64,
}

/// Evaluate the beta-VAE objective with explicit reparameterization noise,
/// optionally accumulating parameter gradients.
pub fn beta_vae_loss_with_noise(
    model: &VaeModel,
    params: &[f64],
    x: &Array2<f64>,
    beta: f64,
    eps: &Array2<f64>,
    mut grad_params: Option<&mut [f64]>,
) -> Result<BetaVaeTerms, VaeError> {
    if beta < 1.0 {
        return Err(VaeError::InvalidBeta(beta));
    }
    model.check_params(params)?;
    let batch = x.nrows() as f64;
    let (q, enc_cache) = model.encode_cached(params, x);
    let z = sample_with_noise(&q, eps);
    let (logits, dec_cache) = model.decode_cached(params, &z);
    let recon = bernoulli_log_likelihood(&logits, x)?.mean().unwrap();
    let kl = kl_to_standard_normal(&q).mean().unwrap();
    let loss = -recon + beta * kl;

    if let Some(grad) = grad_params.as_deref_mut() {
        // d loss / d logits = (sigmoid - x) / B
        let grad_logits = bernoulli_ll_grad(&logits, x).mapv(|v| -v / batch);
        let grad_z = model.decode_backward(params, &dec_cache, &grad_logits, grad);
        // through z = mu + exp(lv/2) eps
        let grad_mean = grad_z.clone();
        let mut grad_log_var = grad_z;
        grad_log_var.zip_mut_with(&q.log_var, |g, &lv| *g *= 0.5 * (lv / 2.0).exp());
        grad_log_var *= eps;
        // KL terms
        let (kl_mean, kl_log_var) = kl_grads(&q);
        let mut grad_mean = grad_mean;
        grad_mean.scaled_add(beta / batch, &kl_mean);
        grad_log_var.scaled_add(beta / batch, &kl_log_var);
        model.encode_backward(params, &enc_cache, &grad_mean, &grad_log_var, grad);
    }
    Ok(BetaVaeTerms { loss, recon, kl })
}

/// beta-VAE objective with freshly sampled reparameterization noise.
pub fn beta_vae_loss<R: Rng>(
    model: &VaeModel,
    params: &[f64],
    x: &Array2<f64>,
    beta: f64,
    rng: &mut R,
    grad_params: Option<&mut [f64]>,
) -> Result<BetaVaeTerms, VaeError> {
    let d_z = model.latent_dim();
    let eps = Array2::from_shape_fn((x.nrows(), d_z), |_| rng.sample(StandardNormal));
    beta_vae_loss_with_noise(model, params, x, beta, &eps, grad_params)
}

// --- checkpoints ---------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct LayerBlob {
    shape: Vec<usize>,
    data: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    schema_version: u32,
    architecture: Architecture,
    latent_dim: usize,
    image_shape: [usize; 3],
    seed: u64,
    step: u64,
    layers: BTreeMap<String, LayerBlob>,
}

/// Training provenance stored alongside the weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckpointHeader {
    pub seed: u64,
    pub step: u64,
}

/// Write weights as JSON with base64 little-endian f64 blobs keyed by layer.
pub fn save_checkpoint(
    path: &Path,
    model: &VaeModel,
    params: &[f64],
    header: CheckpointHeader,
) -> Result<(), VaeError> {
    model.check_params(params)?;
    let mut layers = BTreeMap::new();
    for (name, offset, shape) in model.param_slots() {
        let len: usize = shape.iter().product();
        let mut bytes = Vec::with_capacity(len * 8);
        for &v in &params[offset..offset + len] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        layers.insert(
            name,
            LayerBlob {
                shape,
                data: B64.encode(&bytes),
            },
        );
    }
    let shape = model.config.image_shape;
    let file = CheckpointFile {
        schema_version: 1,
        architecture: model.config.architecture,
        latent_dim: model.config.latent_dim,
        image_shape: [shape.height, shape.width, shape.channels],
        seed: header.seed,
        step: header.step,
        layers,
    };
    let json = serde_json::to_vec(&file).map_err(|e| VaeError::Format(e.to_string()))?;
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(VaeModel, Vec<f64>, CheckpointHeader), VaeError> {
    let bytes = std::fs::read(path)?;
    let file: CheckpointFile =
        serde_json::from_slice(&bytes).map_err(|e| VaeError::Format(e.to_string()))?;
    if file.schema_version != 1 {
        return Err(VaeError::Format(format!(
            "unsupported checkpoint schema {}",
            file.schema_version
        )));
    }
    let config = EncoderDecoderConfig {
        architecture: file.architecture,
        latent_dim: file.latent_dim,
        image_shape: ImageShape {
            height: file.image_shape[0],
            width: file.image_shape[1],
            channels: file.image_shape[2],
        },
    };
    let model = VaeModel::new(config)?;
    let mut params = vec![0.0; model.num_params()];
    for (name, offset, shape) in model.param_slots() {
        let blob = file
            .layers
            .get(&name)
            .ok_or_else(|| VaeError::Format(format!("missing layer {name}")))?;
        if blob.shape != shape {
            return Err(VaeError::Format(format!(
                "layer {name}: shape {:?} does not match model {:?}",
                blob.shape, shape
            )));
        }
        let bytes = B64
            .decode(&blob.data)
            .map_err(|e| VaeError::Format(format!("layer {name}: {e}")))?;
        let len: usize = shape.iter().product();
        if bytes.len() != len * 8 {
            return Err(VaeError::Format(format!(
                "layer {name}: {} bytes for {len} values",
                bytes.len()
            )));
        }
        for (i, chunk) in bytes.chunks_exact(8).enumerate() {
            params[offset + i] = f64::from_le_bytes(chunk.try_into().unwrap());
        }
    }
    Ok((
        model,
        params,
        CheckpointHeader {
            seed: file.seed,
            step: file.step,
        },
    ))
}
