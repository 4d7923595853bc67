//! Weakly-supervised paired objectives: per-dimension posterior KL, shared-
//! set inference (elbow threshold or known k), GVAE / ML-VAE posterior
//! averaging, the paired beta-VAE objective, vanilla group-supervised
//! variants, and the label-free model-selection scalar.

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::factor::GroundTruthDataset;
use crate::pairs::{make_pair_batch, PairBatch, PairError, SharingMode};
use crate::vae::{
    bernoulli_ll_grad, bernoulli_log_likelihood, kl_grads, kl_to_standard_normal,
    sample_with_noise, DiagonalGaussian, VaeError, VaeModel,
};

#[derive(Debug, Error)]
pub enum WeakError {
    #[error("posteriors have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("delta vector is empty")]
    EmptyDelta,
    #[error("known-k = {k} out of range [1, {max}]")]
    KnownKOutOfRange { k: usize, max: usize },
    #[error("variance must be positive, found {0}")]
    NonPositiveVariance(f64),
    #[error("supervision {0} needs pair annotations, none available")]
    MissingAnnotations(&'static str),
    #[error("factor assignment overlaps on latent dim {0}")]
    OverlappingAssignment(usize),
    #[error("factor assignment references latent dim {dim} >= d_z {d_z}")]
    AssignmentOutOfRange { dim: usize, d_z: usize },
    #[error("{0}")]
    Vae(#[from] VaeError),
    #[error("{0}")]
    Pair(#[from] PairError),
}

/// Posterior-averaging rule applied on estimated-shared coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Aggregation {
    /// Arithmetic mean of means and variances.
    Gvae,
    /// Precision-weighted product of the two Gaussians.
    Mlvae,
}

/// How the shared set is obtained for each pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Supervision {
    /// Elbow threshold on per-dimension KL; no side information.
    Adaptive,
    /// The d_z - k coordinates with the smallest KL are treated as shared.
    KnownK(usize),
    /// Group annotations mark the changed factors. `complete: false` only
    /// reveals the lowest-index changed factor, the incomplete-knowledge
    /// setting.
    Annotated { complete: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregationVariant {
    pub aggregation: Aggregation,
    pub supervision: Supervision,
    /// Symmetrize the per-dimension KL before thresholding (off by default;
    /// the standard direction is KL(q(.|x1) || q(.|x2))).
    pub symmetric_delta: bool,
}

impl AggregationVariant {
    pub fn new(aggregation: Aggregation, supervision: Supervision) -> Self {
        Self {
            aggregation,
            supervision,
            symmetric_delta: false,
        }
    }
}

/// Per-pair shared-set decision.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedSetEstimate {
    /// true = treated as shared (averaged).
    pub mask: Vec<bool>,
    pub delta: Vec<f64>,
    /// Threshold used by the adaptive rule; absent for known-k.
    pub tau: Option<f64>,
}

/// Per-dimension KL(q1_i || q2_i) for diagonal Gaussians:
/// delta_i = log(s2/s1) + (s1^2 + (m1-m2)^2) / (2 s2^2) - 1/2.
pub fn per_dim_kl(q1: &DiagonalGaussian, q2: &DiagonalGaussian) -> Result<Array2<f64>, WeakError> {
    if q1.dim() != q2.dim() || q1.batch() != q2.batch() {
        return Err(WeakError::LengthMismatch(q1.dim(), q2.dim()));
    }
    let mut delta = Array2::zeros(q1.mean.dim());
    for ((out, (&m1, &lv1)), (&m2, &lv2)) in delta
        .iter_mut()
        .zip(q1.mean.iter().zip(q1.log_var.iter()))
        .zip(q2.mean.iter().zip(q2.log_var.iter()))
    {
        let v1 = lv1.exp();
        let v2 = lv2.exp();
        *out = 0.5 * (lv2 - lv1) + (v1 + (m1 - m2).powi(2)) / (2.0 * v2) - 0.5;
    }
    Ok(delta)
}

/// 0.5 * (KL(q1||q2) + KL(q2||q1)) per dimension.
pub fn per_dim_kl_symmetrized(
    q1: &DiagonalGaussian,
    q2: &DiagonalGaussian,
) -> Result<Array2<f64>, WeakError> {
    let mut a = per_dim_kl(q1, q2)?;
    let b = per_dim_kl(q2, q1)?;
    a += &b;
    a *= 0.5;
    Ok(a)
}

/// Elbow threshold: tau = (max_i delta_i + min_i delta_i) / 2.
pub fn estimate_threshold(delta: &[f64]) -> Result<f64, WeakError> {
    if delta.is_empty() {
        return Err(WeakError::EmptyDelta);
    }
    let max = delta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = delta.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(0.5 * (max + min))
}

/// Shared-set estimate from one pair's per-dimension KL vector.
///
/// Adaptive marks coordinates with delta_i strictly below tau, so an
/// all-equal delta averages nothing (the pair is treated as fully
/// differing). Known-k marks exactly d_z - k coordinates, ties broken by
/// lower index. Annotated supervision does not use delta; see
/// [`annotated_shared_set`].
pub fn infer_shared_set(
    delta: &[f64],
    supervision: Supervision,
) -> Result<SharedSetEstimate, WeakError> {
    match supervision {
        Supervision::Adaptive => {
            let tau = estimate_threshold(delta)?;
            Ok(SharedSetEstimate {
                mask: delta.iter().map(|&d| d < tau).collect(),
                delta: delta.to_vec(),
                tau: Some(tau),
            })
        }
        Supervision::KnownK(k) => {
            let d_z = delta.len();
            if k == 0 || k >= d_z {
                return Err(WeakError::KnownKOutOfRange { k, max: d_z - 1 });
            }
            let mut order: Vec<usize> = (0..d_z).collect();
            // stable sort keeps lower indices first among ties
            order.sort_by(|&a, &b| delta[a].partial_cmp(&delta[b]).unwrap());
            let mut mask = vec![false; d_z];
            for &i in order.iter().take(d_z - k) {
                mask[i] = true;
            }
            Ok(SharedSetEstimate {
                mask,
                delta: delta.to_vec(),
                tau: None,
            })
        }
        Supervision::Annotated { .. } => Err(WeakError::MissingAnnotations("infer_shared_set")),
    }
}

/// Maps each factor to a disjoint group of latent coordinates; used by the
/// vanilla annotated variants.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorAssignment {
    groups: Vec<Vec<usize>>,
}

impl FactorAssignment {
    pub fn new(groups: Vec<Vec<usize>>, d_z: usize) -> Result<Self, WeakError> {
        let mut seen = vec![false; d_z];
        for group in &groups {
            for &dim in group {
                if dim >= d_z {
                    return Err(WeakError::AssignmentOutOfRange { dim, d_z });
                }
                if seen[dim] {
                    return Err(WeakError::OverlappingAssignment(dim));
                }
                seen[dim] = true;
            }
        }
        Ok(Self { groups })
    }

    /// Factor i -> latent dim i for the first d_f dims; the assignment
    /// when d_z exceeds d_f is a free choice, so identity is used.
    pub fn identity(d_f: usize, d_z: usize) -> Result<Self, WeakError> {
        Self::new((0..d_f).map(|i| vec![i]).collect(), d_z)
    }

    pub fn dims_of(&self, factor: usize) -> &[usize] {
        &self.groups[factor]
    }

    pub fn num_factors(&self) -> usize {
        self.groups.len()
    }
}

/// Mask from group annotations: false exactly on the coordinates assigned
/// to annotated changed factors; everything else is averaged.
pub fn annotated_shared_set(
    changed_factors: &[usize],
    assignment: &FactorAssignment,
    d_z: usize,
) -> Result<Vec<bool>, WeakError> {
    let mut mask = vec![true; d_z];
    for &f in changed_factors {
        for &dim in assignment.dims_of(f) {
            if dim >= d_z {
                return Err(WeakError::AssignmentOutOfRange { dim, d_z });
            }
            mask[dim] = false;
        }
    }
    Ok(mask)
}

fn check_pair_shapes(
    q1: &DiagonalGaussian,
    q2: &DiagonalGaussian,
    mask: &Array2<bool>,
) -> Result<(), WeakError> {
    if q1.dim() != q2.dim() || q1.batch() != q2.batch() || mask.dim() != q1.mean.dim() {
        return Err(WeakError::LengthMismatch(q1.dim(), q2.dim()));
    }
    Ok(())
}

/// GVAE averaging on masked coordinates: mu = (mu1 + mu2) / 2 and
/// var = (var1 + var2) / 2 (variances, not log-variances); unmasked
/// coordinates pass through untouched.
pub fn average_gvae(
    q1: &DiagonalGaussian,
    q2: &DiagonalGaussian,
    mask: &Array2<bool>,
) -> Result<(DiagonalGaussian, DiagonalGaussian), WeakError> {
    check_pair_shapes(q1, q2, mask)?;
    let mut out1 = q1.clone();
    let mut out2 = q2.clone();
    for ((b, i), &shared) in mask.indexed_iter() {
        if !shared {
            continue;
        }
        let m = 0.5 * (q1.mean[[b, i]] + q2.mean[[b, i]]);
        let v = 0.5 * (q1.log_var[[b, i]].exp() + q2.log_var[[b, i]].exp());
        let lv = v.ln();
        out1.mean[[b, i]] = m;
        out2.mean[[b, i]] = m;
        out1.log_var[[b, i]] = lv;
        out2.log_var[[b, i]] = lv;
    }
    Ok((out1, out2))
}

/// ML-VAE averaging on masked coordinates: precision-weighted product of
/// the two Gaussians (1/var = 1/var1 + 1/var2).
pub fn average_mlvae(
    q1: &DiagonalGaussian,
    q2: &DiagonalGaussian,
    mask: &Array2<bool>,
) -> Result<(DiagonalGaussian, DiagonalGaussian), WeakError> {
    check_pair_shapes(q1, q2, mask)?;
    let mut out1 = q1.clone();
    let mut out2 = q2.clone();
    for ((b, i), &shared) in mask.indexed_iter() {
        if !shared {
            continue;
        }
        let v1 = q1.log_var[[b, i]].exp();
        let v2 = q2.log_var[[b, i]].exp();
        if v1 <= 0.0 {
            return Err(WeakError::NonPositiveVariance(v1));
        }
        if v2 <= 0.0 {
            return Err(WeakError::NonPositiveVariance(v2));
        }
        let v = v1 * v2 / (v1 + v2);
        let m = v * (q1.mean[[b, i]] / v1 + q2.mean[[b, i]] / v2);
        let lv = v.ln();
        out1.mean[[b, i]] = m;
        out2.mean[[b, i]] = m;
        out1.log_var[[b, i]] = lv;
        out2.log_var[[b, i]] = lv;
    }
    Ok((out1, out2))
}

pub fn average(
    aggregation: Aggregation,
    q1: &DiagonalGaussian,
    q2: &DiagonalGaussian,
    mask: &Array2<bool>,
) -> Result<(DiagonalGaussian, DiagonalGaussian), WeakError> {
    match aggregation {
        Aggregation::Gvae => average_gvae(q1, q2, mask),
        Aggregation::Mlvae => average_mlvae(q1, q2, mask),
    }
}

/// Backward through the averaging: upstream gradients arrive on the two
/// averaged posteriors, gradients leave on the raw posteriors. The shared-
/// set decision itself is treated as a constant.
#[allow(clippy::too_many_arguments)]
fn average_backward(
    aggregation: Aggregation,
    q1: &DiagonalGaussian,
    q2: &DiagonalGaussian,
    mask: &Array2<bool>,
    grad_out1: (&Array2<f64>, &Array2<f64>),
    grad_out2: (&Array2<f64>, &Array2<f64>),
) -> (Array2<f64>, Array2<f64>, Array2<f64>, Array2<f64>) {
    let (gm1_up, glv1_up) = grad_out1;
    let (gm2_up, glv2_up) = grad_out2;
    let mut gm1 = gm1_up.clone();
    let mut glv1 = glv1_up.clone();
    let mut gm2 = gm2_up.clone();
    let mut glv2 = glv2_up.clone();
    for ((b, i), &shared) in mask.indexed_iter() {
        if !shared {
            continue;
        }
        // both outputs carry the same averaged value on this coordinate
        let dm = gm1_up[[b, i]] + gm2_up[[b, i]];
        let dlv = glv1_up[[b, i]] + glv2_up[[b, i]];
        let v1 = q1.log_var[[b, i]].exp();
        let v2 = q2.log_var[[b, i]].exp();
        match aggregation {
            Aggregation::Gvae => {
                let vsum = v1 + v2;
                gm1[[b, i]] = 0.5 * dm;
                gm2[[b, i]] = 0.5 * dm;
                // d ln((v1+v2)/2) / d lv1 = v1 / (v1+v2)
                glv1[[b, i]] = dlv * v1 / vsum;
                glv2[[b, i]] = dlv * v2 / vsum;
            }
            Aggregation::Mlvae => {
                let p = v1 + v2;
                let m1 = q1.mean[[b, i]];
                let m2 = q2.mean[[b, i]];
                let v = v1 * v2 / p;
                let m = v * (m1 / v1 + m2 / v2);
                // d m~/d m_j = v_other / p; d m~/d lv_j = (v_other/p)(m~ - m_j)
                gm1[[b, i]] = dm * v2 / p;
                gm2[[b, i]] = dm * v1 / p;
                // d lv~/d lv_j = v_other / p
                glv1[[b, i]] = dlv * v2 / p + dm * (v2 / p) * (m - m1);
                glv2[[b, i]] = dlv * v1 / p + dm * (v1 / p) * (m - m2);
            }
        }
    }
    (gm1, glv1, gm2, glv2)
}

/// Per-example shared-set masks for a batch.
fn batch_masks(
    delta: &Array2<f64>,
    batch: &PairBatch,
    variant: &AggregationVariant,
    d_f: usize,
) -> Result<(Array2<bool>, Vec<Option<f64>>), WeakError> {
    let (b, d_z) = delta.dim();
    let mut mask = Array2::from_elem((b, d_z), false);
    let mut taus = vec![None; b];
    match variant.supervision {
        Supervision::Adaptive | Supervision::KnownK(_) => {
            for (row, delta_row) in delta.axis_iter(Axis(0)).enumerate() {
                let est = infer_shared_set(delta_row.as_slice().unwrap(), variant.supervision)?;
                taus[row] = est.tau;
                for (i, &m) in est.mask.iter().enumerate() {
                    mask[[row, i]] = m;
                }
            }
        }
        Supervision::Annotated { complete } => {
            let diag = batch
                .diagnostics()
                .ok_or(WeakError::MissingAnnotations("annotated training"))?;
            let assignment = FactorAssignment::identity(d_f, d_z)?;
            let changed_mask = diag.changed_mask();
            for row in 0..b {
                let mut changed: Vec<usize> = (0..d_f).filter(|&f| changed_mask[[row, f]]).collect();
                if !complete {
                    // incomplete knowledge reveals only one changed factor
                    changed.truncate(1);
                }
                let m = annotated_shared_set(&changed, &assignment, d_z)?;
                for (i, &mi) in m.iter().enumerate() {
                    mask[[row, i]] = mi;
                }
            }
        }
    }
    Ok((mask, taus))
}

/// Batch-mean terms of the paired objective:
/// loss = -(recon1 + recon2) + beta * (kl1 + kl2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakElboTerms {
    pub loss: f64,
    pub recon1: f64,
    pub recon2: f64,
    pub kl1: f64,
    pub kl2: f64,
    /// Mean fraction of coordinates treated as shared.
    pub shared_fraction: f64,
}

impl WeakElboTerms {
    /// The label-free selection scalar: -(recon1 + recon2); lower is better.
    pub fn reconstruction_loss(&self) -> f64 {
        -(self.recon1 + self.recon2)
    }
}

/// Paired objective with explicit reparameterization noise; optionally
/// accumulates parameter gradients. `d_f` is the factor count used by
/// annotated supervision to map factors onto latent coordinates.
#[allow(clippy::too_many_arguments)]
pub fn weak_elbo_with_noise(
    model: &VaeModel,
    params: &[f64],
    batch: &PairBatch,
    beta: f64,
    variant: &AggregationVariant,
    d_f: usize,
    eps1: &Array2<f64>,
    eps2: &Array2<f64>,
    mut grad_params: Option<&mut [f64]>,
) -> Result<WeakElboTerms, WeakError> {
    if beta < 1.0 {
        return Err(WeakError::Vae(VaeError::InvalidBeta(beta)));
    }
    model.check_params(params)?;
    let b = batch.len() as f64;
    let (q1, cache1) = model.encode_cached(params, &batch.x1);
    let (q2, cache2) = model.encode_cached(params, &batch.x2);
    let delta = if variant.symmetric_delta {
        per_dim_kl_symmetrized(&q1, &q2)?
    } else {
        per_dim_kl(&q1, &q2)?
    };
    let (mask, _) = batch_masks(&delta, batch, variant, d_f)?;
    let (qt1, qt2) = average(variant.aggregation, &q1, &q2, &mask)?;

    let z1 = sample_with_noise(&qt1, eps1);
    let z2 = sample_with_noise(&qt2, eps2);
    let (logits1, dec_cache1) = model.decode_cached(params, &z1);
    let (logits2, dec_cache2) = model.decode_cached(params, &z2);
    let recon1 = bernoulli_log_likelihood(&logits1, &batch.x1)?.mean().unwrap();
    let recon2 = bernoulli_log_likelihood(&logits2, &batch.x2)?.mean().unwrap();
    let kl1 = kl_to_standard_normal(&qt1).mean().unwrap();
    let kl2 = kl_to_standard_normal(&qt2).mean().unwrap();
    let loss = -(recon1 + recon2) + beta * (kl1 + kl2);
    let shared_fraction =
        mask.iter().filter(|&&m| m).count() as f64 / mask.len() as f64;

    if let Some(grad) = grad_params.as_deref_mut() {
        let mut grads_tilde = Vec::with_capacity(2);
        for (x, eps, qt, logits, dec_cache) in [
            (&batch.x1, eps1, &qt1, &logits1, &dec_cache1),
            (&batch.x2, eps2, &qt2, &logits2, &dec_cache2),
        ] {
            let grad_logits = bernoulli_ll_grad(logits, x).mapv(|v| -v / b);
            let grad_z = model.decode_backward(params, dec_cache, &grad_logits, grad);
            let mut grad_mean = grad_z.clone();
            let mut grad_log_var = grad_z;
            grad_log_var.zip_mut_with(&qt.log_var, |g, &lv| *g *= 0.5 * (lv / 2.0).exp());
            grad_log_var *= eps;
            let (kl_mean, kl_log_var) = kl_grads(qt);
            grad_mean.scaled_add(beta / b, &kl_mean);
            grad_log_var.scaled_add(beta / b, &kl_log_var);
            grads_tilde.push((grad_mean, grad_log_var));
        }
        let (gm1, glv1, gm2, glv2) = average_backward(
            variant.aggregation,
            &q1,
            &q2,
            &mask,
            (&grads_tilde[0].0, &grads_tilde[0].1),
            (&grads_tilde[1].0, &grads_tilde[1].1),
        );
        model.encode_backward(params, &cache1, &gm1, &glv1, grad);
        model.encode_backward(params, &cache2, &gm2, &glv2, grad);
    }

    Ok(WeakElboTerms {
        loss,
        recon1,
        recon2,
        kl1,
        kl2,
        shared_fraction,
    })
}

/// Paired objective with freshly sampled noise.
#[allow(clippy::too_many_arguments)]
pub fn weak_elbo<R: Rng>(
    model: &VaeModel,
    params: &[f64],
    batch: &PairBatch,
    beta: f64,
    variant: &AggregationVariant,
    d_f: usize,
    rng: &mut R,
    grad_params: Option<&mut [f64]>,
) -> Result<WeakElboTerms, WeakError> {
    let d_z = model.latent_dim();
    let eps1 = Array2::from_shape_fn((batch.len(), d_z), |_| {
        rng.sample(rand_distr::StandardNormal)
    });
    let eps2 = Array2::from_shape_fn((batch.len(), d_z), |_| {
        rng.sample(rand_distr::StandardNormal)
    });
    weak_elbo_with_noise(
        model,
        params,
        batch,
        beta,
        variant,
        d_f,
        &eps1,
        &eps2,
        grad_params,
    )
}

/// Mean over `n_pairs` of -(recon1 + recon2) under the trained aggregation.
/// Deterministic given the seed; lower is better. Diagnostics are only
/// drawn when the supervision itself requires annotations.
pub fn weak_reconstruction_loss(
    model: &VaeModel,
    params: &[f64],
    dataset: &GroundTruthDataset,
    mode: SharingMode,
    variant: &AggregationVariant,
    n_pairs: usize,
    seed: u64,
) -> Result<f64, WeakError> {
    assert!(n_pairs >= 1, "n_pairs must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let needs_annotations = matches!(variant.supervision, Supervision::Annotated { .. });
    let d_f = dataset.space().num_factors();
    let d_z = model.latent_dim();
    let mut total = 0.0;
    let mut remaining = n_pairs;
    while remaining > 0 {
        let chunk = remaining.min(256);
        let batch = make_pair_batch(dataset, mode, chunk, needs_annotations, &mut rng)?;
        let eps1 = Array2::from_shape_fn((chunk, d_z), |_| {
            rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let eps2 = Array2::from_shape_fn((chunk, d_z), |_| {
            rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let terms = weak_elbo_with_noise(
            model, params, &batch, 1.0, variant, d_f, &eps1, &eps2, None,
        )?;
        total += terms.reconstruction_loss() * chunk as f64;
        remaining -= chunk;
    }
    Ok(total / n_pairs as f64)
}

/// Fraction of pairs with exactly `k` effectively changed factors whose
/// changed set the adaptive rule recovers exactly, using the identity
/// factor-to-coordinate assignment. `posterior` plays the encoder.
pub fn adaptive_recovery_rate<R, F>(
    dataset: &GroundTruthDataset,
    k: usize,
    n_pairs: usize,
    mut posterior: F,
    rng: &mut R,
) -> Result<f64, WeakError>
where
    R: Rng,
    F: FnMut(&crate::factor::FactorVector, &mut R) -> DiagonalGaussian,
{
    let mut hits = 0usize;
    let mut tested = 0usize;
    while tested < n_pairs {
        let pair = crate::pairs::sample_pair(dataset, SharingMode::FixedK(k), rng)?;
        let changed = pair.changed_set().clone();
        if changed.len() != k {
            // resampling collided; the pair carries fewer changes than k
            continue;
        }
        tested += 1;
        let q1 = posterior(pair.z1(), rng);
        let q2 = posterior(pair.z2(), rng);
        let delta = per_dim_kl(&q1, &q2)?;
        let est = infer_shared_set(delta.row(0).as_slice().unwrap(), Supervision::Adaptive)?;
        let recovered: std::collections::BTreeSet<usize> = est
            .mask
            .iter()
            .enumerate()
            .filter_map(|(i, &shared)| (!shared).then_some(i))
            .collect();
        if recovered == changed {
            hits += 1;
        }
    }
    Ok(hits as f64 / n_pairs as f64)
}

/// Convenience: sum of per-example means for the two KL terms of a batch.
pub fn batch_kl_sum(q: &DiagonalGaussian) -> Array1<f64> {
    kl_to_standard_normal(q)
}
