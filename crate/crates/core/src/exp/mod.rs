//! Experiment harness: configuration, training loop, sweeps, model
//! selection, run records, and report emission.

mod report;
mod train;

pub use report::emit_report;
pub use train::{desk_config, evaluate_record, run_sweep, run_training, select_model, DIVERGED_LOSS};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{EvalError, EvalOutcome};
use crate::factor::{DataIoError, FactorError, GroundTruthDataset, SpriteSize};
use crate::metrics::MetricError;
use crate::pairs::{PairError, SharingMode};
use crate::vae::{Architecture, VaeError};
use crate::weak::{Aggregation, Supervision, WeakError};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ExpError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Vae(#[from] VaeError),
    #[error("{0}")]
    Weak(#[from] WeakError),
    #[error("{0}")]
    Pair(#[from] PairError),
    #[error("{0}")]
    Factor(#[from] FactorError),
    #[error("{0}")]
    Data(#[from] DataIoError),
    #[error("{0}")]
    Metric(#[from] MetricError),
    #[error("{0}")]
    Eval(#[from] EvalError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("no runs to select from")]
    EmptySelection,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetSpec {
    /// Procedural sprites; resolution 32 or 64.
    ToySprites { resolution: usize },
    /// On-disk container directory.
    Container { path: PathBuf },
}

impl DatasetSpec {
    pub fn load(&self) -> Result<GroundTruthDataset, ExpError> {
        match self {
            DatasetSpec::ToySprites { resolution } => {
                let size = match resolution {
                    32 => SpriteSize::S32,
                    64 => SpriteSize::S64,
                    other => {
                        return Err(ExpError::Config(format!(
                            "toy-sprites resolution must be 32 or 64, got {other}"
                        )))
                    }
                };
                Ok(crate::factor::toy_sprites(size).materialize())
            }
            DatasetSpec::Container { path } => Ok(crate::factor::load_dataset(path)?),
        }
    }

    pub fn id(&self) -> String {
        match self {
            DatasetSpec::ToySprites { resolution } => format!("toy-sprites-{resolution}"),
            DatasetSpec::Container { path } => format!("container:{}", path.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelVariant {
    /// Unsupervised baseline; trains on single observations.
    BetaVae,
    /// Vanilla group-supervised averaging (arithmetic mean).
    Gvae,
    /// Vanilla group-supervised averaging (precision-weighted product).
    MlVae,
    /// Adaptive shared-set inference with GVAE averaging.
    AdaGvae,
    /// Adaptive shared-set inference with ML-VAE averaging.
    AdaMlVae,
}

impl ModelVariant {
    pub fn name(&self) -> &'static str {
        match self {
            ModelVariant::BetaVae => "beta-vae",
            ModelVariant::Gvae => "gvae",
            ModelVariant::MlVae => "ml-vae",
            ModelVariant::AdaGvae => "ada-gvae",
            ModelVariant::AdaMlVae => "ada-ml-vae",
        }
    }

    pub fn aggregation(&self) -> Option<Aggregation> {
        match self {
            ModelVariant::BetaVae => None,
            ModelVariant::Gvae | ModelVariant::AdaGvae => Some(Aggregation::Gvae),
            ModelVariant::MlVae | ModelVariant::AdaMlVae => Some(Aggregation::Mlvae),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum SupervisionConfig {
    Adaptive,
    KnownK { k: usize },
    Annotated { complete: bool },
}

impl SupervisionConfig {
    pub fn to_supervision(self) -> Supervision {
        match self {
            SupervisionConfig::Adaptive => Supervision::Adaptive,
            SupervisionConfig::KnownK { k } => Supervision::KnownK(k),
            SupervisionConfig::Annotated { complete } => Supervision::Annotated { complete },
        }
    }
}

/// Evaluation sizes; defaults follow the adopted protocol, desk runs pass
/// smaller numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub metrics: bool,
    pub representation_points: usize,
    pub bins: usize,
    pub gbt_estimators: usize,
    pub score_train_points: usize,
    pub score_test_points: usize,
    pub score_batch: usize,
    /// Pairs used for the weakly-supervised reconstruction loss.
    pub selection_pairs: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            metrics: true,
            representation_points: crate::metrics::DEFAULT_REPRESENTATION_POINTS,
            bins: crate::metrics::DEFAULT_BINS,
            gbt_estimators: 100,
            score_train_points: crate::metrics::DEFAULT_EVAL_TRAIN,
            score_test_points: crate::metrics::DEFAULT_EVAL_TEST,
            score_batch: 64,
            selection_pairs: 2048,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub model: ModelVariant,
    pub supervision: Option<SupervisionConfig>,
    pub beta: f64,
    pub sharing: SharingMode,
    pub architecture: Architecture,
    pub latent_dim: usize,
    pub steps: u64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub log_every: u64,
    pub symmetric_delta: bool,
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSpec::ToySprites { resolution: 32 },
            model: ModelVariant::AdaGvae,
            supervision: None,
            beta: 1.0,
            sharing: SharingMode::RandomK,
            architecture: Architecture::MlpSmall,
            latent_dim: 10,
            steps: 300_000,
            batch_size: 64,
            learning_rate: 1e-4,
            seed: 0,
            log_every: 100,
            symmetric_delta: false,
            eval: EvalConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Resolve the effective supervision for the variant, validating the
    /// combination.
    pub fn effective_supervision(&self) -> Result<Option<Supervision>, ExpError> {
        match self.model {
            ModelVariant::BetaVae => Ok(None),
            ModelVariant::Gvae | ModelVariant::MlVae => match self.supervision {
                None => Ok(Some(Supervision::Annotated { complete: true })),
                Some(SupervisionConfig::Annotated { complete }) => {
                    Ok(Some(Supervision::Annotated { complete }))
                }
                Some(other) => Err(ExpError::Config(format!(
                    "{} is group-supervised; supervision {other:?} is not annotated",
                    self.model.name()
                ))),
            },
            ModelVariant::AdaGvae | ModelVariant::AdaMlVae => match self.supervision {
                None | Some(SupervisionConfig::Adaptive) => Ok(Some(Supervision::Adaptive)),
                Some(SupervisionConfig::KnownK { k }) => {
                    if k == 0 || k >= self.latent_dim {
                        Err(ExpError::Config(format!(
                            "known-k = {k} out of range [1, {}]",
                            self.latent_dim - 1
                        )))
                    } else {
                        Ok(Some(Supervision::KnownK(k)))
                    }
                }
                Some(SupervisionConfig::Annotated { .. }) => Err(ExpError::Config(format!(
                    "{} infers the shared set; annotated supervision belongs to the vanilla variants",
                    self.model.name()
                ))),
            },
        }
    }

    pub fn validate(&self) -> Result<(), ExpError> {
        if self.beta < 1.0 {
            return Err(ExpError::Config(format!(
                "beta must be at least 1, got {}",
                self.beta
            )));
        }
        if self.steps == 0 {
            return Err(ExpError::Config("steps must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(ExpError::Config("batch size must be positive".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(ExpError::Config("learning rate must be positive".into()));
        }
        if self.latent_dim == 0 {
            return Err(ExpError::Config("latent_dim must be positive".into()));
        }
        if let SharingMode::FixedK(k) = self.sharing {
            if k == 0 {
                return Err(ExpError::Config("fixed k must be at least 1".into()));
            }
        }
        self.effective_supervision()?;
        Ok(())
    }

    pub fn run_id(&self) -> String {
        let sharing = match self.sharing {
            SharingMode::FixedK(k) => format!("k{k}"),
            SharingMode::RandomK => "krnd".into(),
        };
        format!(
            "{}-b{}-{}-s{}",
            self.model.name(),
            self.beta,
            sharing,
            self.seed
        )
    }
}

/// One logged training step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub step: u64,
    pub loss: f64,
    /// Unweighted ELBO: recon - kl (both halves summed for paired models).
    pub elbo: f64,
    pub recon1: f64,
    pub recon2: f64,
    pub kl1: f64,
    pub kl2: f64,
    pub shared_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricScores {
    pub mig: f64,
    pub dci_disentanglement: f64,
    pub dci_completeness: f64,
    pub dci_informativeness: f64,
    pub sap: f64,
    pub modularity: f64,
    pub beta_vae: f64,
    /// None when every latent dim was pruned (collapsed representation).
    pub factor_vae: Option<f64>,
}

/// One trained model: config, trace, selection scalar, scores, artifacts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub run_id: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub trace: Vec<TracePoint>,
    /// The label-free selection scalar; lower is better.
    pub final_weak_recon_loss: f64,
    pub metrics: Option<MetricScores>,
    pub downstream: Option<EvalOutcome>,
    pub checkpoint_path: Option<PathBuf>,
    pub diverged: bool,
}

impl RunRecord {
    pub fn save(&self, path: &std::path::Path) -> Result<(), ExpError> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ExpError> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}
