//! Supervised disentanglement metrics over frozen representations, plus
//! representation extraction and discretization utilities.

mod scores;
pub mod synthetic;

pub use scores::{
    beta_vae_score, dci_scores, factor_vae_score, mig_score, mig_score_binned, modularity_score,
    modularity_score_binned, sap_score, DciScores, ModularityOutcome,
};

use ndarray::{Array2, Axis};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit;
use crate::factor::{FactorError, FactorVector, GroundTruthDataset};
use crate::vae::{VaeError, VaeModel};

/// Evaluation-set sizes of the adopted protocol; desk runs scale them down
/// through function arguments.
pub const DEFAULT_REPRESENTATION_POINTS: usize = 10_000;
pub const DEFAULT_EVAL_TRAIN: usize = 10_000;
pub const DEFAULT_EVAL_TEST: usize = 5_000;
/// Histogram bins for discretizing continuous codes.
pub const DEFAULT_BINS: usize = 20;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("table rows disagree: {0} codes vs {1} factor rows")]
    RowMismatch(usize, usize),
    #[error("representation codes must be finite")]
    NonFinite,
    #[error("empty input")]
    Empty,
    #[error("factor {0} has zero empirical entropy")]
    ZeroEntropyFactor(usize),
    #[error("all latent dims pruned (global std below threshold)")]
    AllDimsPruned,
    #[error("need at least {need} latent dims, table has {got}")]
    TooFewDims { need: usize, got: usize },
    #[error("{0}")]
    Factor(#[from] FactorError),
    #[error("{0}")]
    Vae(#[from] VaeError),
}

/// Identifies which model/dataset/seed produced a table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Provenance {
    pub model_id: String,
    pub dataset_id: String,
    pub seed: u64,
}

/// N x d_z posterior means aligned with N x d_f ground-truth factor codes.
#[derive(Debug, Clone)]
pub struct RepresentationTable {
    codes: Array2<f64>,
    factors: Array2<usize>,
    pub provenance: Provenance,
}

impl RepresentationTable {
    pub fn new(
        codes: Array2<f64>,
        factors: Array2<usize>,
        provenance: Provenance,
    ) -> Result<Self, MetricError> {
        if codes.nrows() != factors.nrows() {
            return Err(MetricError::RowMismatch(codes.nrows(), factors.nrows()));
        }
        if codes.iter().any(|v| !v.is_finite()) {
            return Err(MetricError::NonFinite);
        }
        if codes.nrows() == 0 {
            return Err(MetricError::Empty);
        }
        Ok(Self {
            codes,
            factors,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.codes.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn latent_dim(&self) -> usize {
        self.codes.ncols()
    }

    pub fn num_factors(&self) -> usize {
        self.factors.ncols()
    }

    pub fn codes(&self) -> &Array2<f64> {
        &self.codes
    }

    /// Ground-truth factor codes (label access; audited).
    pub fn factors(&self) -> &Array2<usize> {
        audit::record_label_access();
        &self.factors
    }

    /// Observed cardinality (max + 1) per factor column.
    pub fn factor_cardinalities(&self) -> Vec<usize> {
        let factors = self.factors();
        (0..factors.ncols())
            .map(|f| factors.column(f).iter().max().map_or(1, |&m| m + 1))
            .collect()
    }
}

/// Anything that maps a factor vector to a representation vector. Trained
/// encoders render the observation internally; synthetic representers map
/// factors directly.
pub trait Representer {
    fn dim(&self) -> usize;
    fn represent(&self, v: &FactorVector, rng: &mut dyn RngCore) -> Vec<f64>;

    fn represent_batch(&self, vs: &[FactorVector], rng: &mut dyn RngCore) -> Array2<f64> {
        let mut out = Array2::zeros((vs.len(), self.dim()));
        for (i, v) in vs.iter().enumerate() {
            let row = self.represent(v, rng);
            out.row_mut(i).assign(&ndarray::Array1::from_vec(row));
        }
        out
    }
}

/// Posterior-mean representation of a trained model: r(x) = mean of q(z|x).
pub struct VaeRepresenter<'a> {
    pub model: &'a VaeModel,
    pub params: &'a [f64],
    pub dataset: &'a GroundTruthDataset,
}

impl Representer for VaeRepresenter<'_> {
    fn dim(&self) -> usize {
        self.model.latent_dim()
    }

    fn represent(&self, v: &FactorVector, rng: &mut dyn RngCore) -> Vec<f64> {
        self.represent_batch(std::slice::from_ref(v), rng)
            .row(0)
            .to_vec()
    }

    fn represent_batch(&self, vs: &[FactorVector], _rng: &mut dyn RngCore) -> Array2<f64> {
        let pixels = self.dataset.shape().num_pixels();
        let mut x = Array2::zeros((vs.len(), pixels));
        for (i, v) in vs.iter().enumerate() {
            let img = self.dataset.image_flat(v).expect("valid factor vector");
            x.row_mut(i).assign(&img);
        }
        let q = self
            .model
            .encode(self.params, &x)
            .expect("matching shapes");
        q.mean
    }
}

/// Sample `n` factor vectors, represent them, and record codes alongside
/// factor labels. Deterministic given the seed.
pub fn compute_representation(
    representer: &dyn Representer,
    dataset: &GroundTruthDataset,
    n: usize,
    seed: u64,
    provenance: Provenance,
) -> Result<RepresentationTable, MetricError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = dataset.space();
    let vs = space.sample_uniform(n, &mut rng)?;
    let mut factors = Array2::zeros((n, space.num_factors()));
    for (i, v) in vs.iter().enumerate() {
        for (j, &code) in v.codes().iter().enumerate() {
            factors[[i, j]] = code;
        }
    }
    let codes = representer.represent_batch(&vs, &mut rng);
    RepresentationTable::new(codes, factors, provenance)
}

/// Discretization strategy for continuous codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Binning {
    /// Equal-width bins between the per-dimension min and max.
    EqualWidth,
    /// Rank-based bins (invariant to strictly monotone transforms).
    EqualFrequency,
}

/// Discretize one dimension; constant inputs map to bin 0.
pub fn discretize(values: &[f64], bins: usize, strategy: Binning) -> Vec<usize> {
    assert!(bins >= 2, "need at least 2 bins");
    let n = values.len();
    if n == 0 {
        return Vec::new();
    }
    match strategy {
        Binning::EqualWidth => {
            let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if max <= min {
                return vec![0; n];
            }
            let width = (max - min) / bins as f64;
            values
                .iter()
                .map(|&v| (((v - min) / width) as usize).min(bins - 1))
                .collect()
        }
        Binning::EqualFrequency => {
            // bin by the count of strictly smaller elements, so ties share a
            // bin and any strictly monotone transform leaves bins unchanged
            let mut sorted = values.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            values
                .iter()
                .map(|&v| {
                    let less = sorted.partition_point(|&s| s < v);
                    (less * bins / n).min(bins - 1)
                })
                .collect()
        }
    }
}

/// Per-column discretization of a code matrix.
pub fn discretize_codes(codes: &Array2<f64>, bins: usize, strategy: Binning) -> Array2<usize> {
    let mut out = Array2::zeros(codes.dim());
    for (j, col) in codes.axis_iter(Axis(1)).enumerate() {
        let vals: Vec<f64> = col.to_vec();
        for (i, b) in discretize(&vals, bins, strategy).into_iter().enumerate() {
            out[[i, j]] = b;
        }
    }
    out
}

/// Plug-in entropy of a discrete sequence, in nats.
pub fn entropy(labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let mut counts = std::collections::BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0usize) += 1;
    }
    let n = labels.len() as f64;
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Plug-in mutual information of two paired discrete sequences, in nats.
/// Symmetric, nonnegative, bounded by min(H(a), H(b)).
pub fn discrete_mutual_information(a: &[usize], b: &[usize]) -> Result<f64, MetricError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricError::Empty);
    }
    assert_eq!(a.len(), b.len(), "paired sequences must align");
    let n = a.len() as f64;
    let mut joint = std::collections::BTreeMap::new();
    let mut pa = std::collections::BTreeMap::new();
    let mut pb = std::collections::BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_insert(0usize) += 1;
        *pa.entry(x).or_insert(0usize) += 1;
        *pb.entry(y).or_insert(0usize) += 1;
    }
    let mut mi = 0.0;
    for (&(x, y), &c) in &joint {
        let pxy = c as f64 / n;
        let px = pa[&x] as f64 / n;
        let py = pb[&y] as f64 / n;
        mi += pxy * (pxy / (px * py)).ln();
    }
    Ok(mi.max(0.0))
}
