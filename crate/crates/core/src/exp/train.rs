//! Training loop, sweeps, evaluation, and label-free model selection.

use std::path::Path;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::factor::GroundTruthDataset;
use crate::learn::GbtConfig;
use crate::metrics::{
    beta_vae_score, compute_representation, dci_scores, factor_vae_score, mig_score,
    modularity_score, sap_score, MetricError, Provenance, VaeRepresenter,
};
use crate::nn::Adam;
use crate::pairs::make_pair_batch;
use crate::vae::{
    beta_vae_loss, save_checkpoint, CheckpointHeader, EncoderDecoderConfig, VaeModel,
};
use crate::weak::{weak_elbo, weak_reconstruction_loss, AggregationVariant, Supervision};

use super::{
    ExpError, ExperimentConfig, MetricScores, ModelVariant, RunRecord, TracePoint, SCHEMA_VERSION,
};

/// Sentinel selection loss for diverged runs: they sort last.
pub const DIVERGED_LOSS: f64 = f64::MAX;

/// Train one model. Deterministic given the config seed. A non-finite loss
/// aborts training and flags the partial record instead of failing.
pub fn run_training(
    config: &ExperimentConfig,
    out_dir: Option<&Path>,
) -> Result<RunRecord, ExpError> {
    config.validate()?;
    let dataset = config.dataset.load()?;
    let d_f = dataset.space().num_factors();
    let model = VaeModel::new(EncoderDecoderConfig {
        architecture: config.architecture,
        latent_dim: config.latent_dim,
        image_shape: dataset.shape(),
    })?;
    let supervision = config.effective_supervision()?;
    let variant = supervision.and_then(|s| {
        config.model.aggregation().map(|aggregation| AggregationVariant {
            aggregation,
            supervision: s,
            symmetric_delta: config.symmetric_delta,
        })
    });
    let needs_annotations = matches!(
        supervision,
        Some(Supervision::Annotated { .. })
    );

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = model.init_params(&mut rng);
    let mut optimizer = Adam::new(config.learning_rate, model.num_params());
    let mut grads = vec![0.0; model.num_params()];
    let mut trace = Vec::new();
    let mut diverged = false;

    for step in 1..=config.steps {
        grads.iter_mut().for_each(|g| *g = 0.0);
        let point = match &variant {
            None => {
                // unsupervised baseline: singleton observations
                let vs = dataset.space().sample_uniform(config.batch_size, &mut rng)?;
                let mut x = Array2::zeros((config.batch_size, dataset.shape().num_pixels()));
                for (i, v) in vs.iter().enumerate() {
                    x.row_mut(i).assign(&dataset.image_flat(v)?);
                }
                let terms =
                    beta_vae_loss(&model, &params, &x, config.beta, &mut rng, Some(&mut grads))?;
                TracePoint {
                    step,
                    loss: terms.loss,
                    elbo: terms.recon - terms.kl,
                    recon1: terms.recon,
                    recon2: 0.0,
                    kl1: terms.kl,
                    kl2: 0.0,
                    shared_fraction: 0.0,
                }
            }
            Some(variant) => {
                let batch = make_pair_batch(
                    &dataset,
                    config.sharing,
                    config.batch_size,
                    needs_annotations,
                    &mut rng,
                )?;
                let terms = weak_elbo(
                    &model,
                    &params,
                    &batch,
                    config.beta,
                    variant,
                    d_f,
                    &mut rng,
                    Some(&mut grads),
                )?;
                TracePoint {
                    step,
                    loss: terms.loss,
                    elbo: (terms.recon1 + terms.recon2) - (terms.kl1 + terms.kl2),
                    recon1: terms.recon1,
                    recon2: terms.recon2,
                    kl1: terms.kl1,
                    kl2: terms.kl2,
                    shared_fraction: terms.shared_fraction,
                }
            }
        };
        if !point.loss.is_finite() {
            diverged = true;
            trace.push(point);
            break;
        }
        optimizer.step(&mut params, &grads);
        if step % config.log_every == 0 || step == config.steps {
            trace.push(point);
        }
    }

    let selection_variant = variant.unwrap_or(AggregationVariant::new(
        crate::weak::Aggregation::Gvae,
        Supervision::Adaptive,
    ));
    let final_weak_recon_loss = if diverged {
        DIVERGED_LOSS
    } else {
        weak_reconstruction_loss(
            &model,
            &params,
            &dataset,
            config.sharing,
            &selection_variant,
            config.eval.selection_pairs,
            config.seed.wrapping_add(0x5e1ec7),
        )?
    };

    let run_id = config.run_id();
    let checkpoint_path = match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("{run_id}.ckpt.json"));
            save_checkpoint(
                &path,
                &model,
                &params,
                CheckpointHeader {
                    seed: config.seed,
                    step: trace.last().map_or(0, |p| p.step),
                },
            )?;
            Some(path)
        }
        None => None,
    };

    let metrics = if config.eval.metrics && !diverged {
        Some(evaluate_model(&model, &params, &dataset, config)?)
    } else {
        None
    };

    let record = RunRecord {
        schema_version: SCHEMA_VERSION,
        run_id,
        config: config.clone(),
        seed: config.seed,
        trace,
        final_weak_recon_loss,
        metrics,
        downstream: None,
        checkpoint_path,
        diverged,
    };
    if let Some(dir) = out_dir {
        record.save(&dir.join(format!("{}.record.json", record.run_id)))?;
    }
    Ok(record)
}

/// All six disentanglement scores for a trained model.
pub fn evaluate_model(
    model: &VaeModel,
    params: &[f64],
    dataset: &GroundTruthDataset,
    config: &ExperimentConfig,
) -> Result<MetricScores, ExpError> {
    let representer = VaeRepresenter {
        model,
        params,
        dataset,
    };
    let eval_seed = config.seed.wrapping_add(0xe7a1);
    let table = compute_representation(
        &representer,
        dataset,
        config.eval.representation_points,
        eval_seed,
        Provenance {
            model_id: config.run_id(),
            dataset_id: config.dataset.id(),
            seed: eval_seed,
        },
    )?;
    let gbt = GbtConfig {
        n_estimators: config.eval.gbt_estimators,
        ..Default::default()
    };
    let dci = dci_scores(&table, gbt, eval_seed)?;
    let factor_vae = match factor_vae_score(
        &representer,
        dataset,
        config.eval.score_train_points,
        config.eval.score_test_points,
        config.eval.score_batch,
        0.05,
        eval_seed,
    ) {
        Ok(score) => Some(score),
        Err(MetricError::AllDimsPruned) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(MetricScores {
        mig: mig_score(&table, config.eval.bins)?,
        dci_disentanglement: dci.disentanglement,
        dci_completeness: dci.completeness,
        dci_informativeness: dci.informativeness,
        sap: sap_score(&table, eval_seed)?,
        modularity: modularity_score(&table, config.eval.bins)?.score,
        beta_vae: beta_vae_score(
            &representer,
            dataset,
            config.eval.score_train_points,
            config.eval.score_test_points,
            config.eval.score_batch,
            eval_seed,
        )?,
        factor_vae,
    })
}

/// Recompute metric scores for a stored record from its checkpoint.
pub fn evaluate_record(record: &RunRecord) -> Result<MetricScores, ExpError> {
    let path = record.checkpoint_path.as_ref().ok_or_else(|| {
        ExpError::Config(format!("record {} has no checkpoint", record.run_id))
    })?;
    let (model, params, _) = crate::vae::load_checkpoint(path)?;
    let dataset = record.config.dataset.load()?;
    evaluate_model(&model, &params, &dataset, &record.config)
}

/// Train a batch of configs; runs are independent and parallelized.
pub fn run_sweep(
    configs: &[ExperimentConfig],
    out_dir: Option<&Path>,
) -> Result<Vec<RunRecord>, ExpError> {
    configs
        .par_iter()
        .map(|config| run_training(config, out_dir))
        .collect()
}

/// The record with the minimal weakly-supervised reconstruction loss, ties
/// broken by lower seed. Reads nothing but the recorded scalar.
pub fn select_model(records: &[RunRecord]) -> Result<&RunRecord, ExpError> {
    records
        .iter()
        .min_by(|a, b| {
            let la = if a.final_weak_recon_loss.is_nan() {
                DIVERGED_LOSS
            } else {
                a.final_weak_recon_loss
            };
            let lb = if b.final_weak_recon_loss.is_nan() {
                DIVERGED_LOSS
            } else {
                b.final_weak_recon_loss
            };
            la.partial_cmp(&lb)
                .unwrap()
                .then_with(|| a.seed.cmp(&b.seed))
        })
        .ok_or(ExpError::EmptySelection)
}

/// Smoke helper: a small, fast config for tests and examples.
pub fn desk_config(model: ModelVariant, beta: f64, seed: u64, steps: u64) -> ExperimentConfig {
    ExperimentConfig {
        model,
        beta,
        seed,
        steps,
        batch_size: 16,
        learning_rate: 1e-3,
        eval: super::EvalConfig {
            metrics: false,
            representation_points: 2000,
            gbt_estimators: 20,
            score_train_points: 600,
            score_test_points: 300,
            score_batch: 32,
            selection_pairs: 512,
            ..Default::default()
        },
        ..Default::default()
    }
}
