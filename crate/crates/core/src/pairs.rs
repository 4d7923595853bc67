//! Weakly-supervised observation pairs.
//!
//! A pair is generated by sampling a factor vector, drawing a sharing set S
//! of size d-k, resampling the complement coordinates from their marginals,
//! and rendering both factor vectors. Resampling may reproduce the old
//! value, so the effective number of changed factors can be below k and
//! some pairs are identical.
//!
//! Only (x1, x2) are learner-visible; factor vectors and the realized
//! changed set ride along as diagnostics behind audited accessors.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2};
use rand::seq::index::sample as index_sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audit;
use crate::factor::{FactorError, FactorVector, GroundTruthDataset};

#[derive(Debug, Error)]
pub enum PairError {
    #[error("pair sampling needs at least 2 factors, dataset has {d}")]
    TooFewFactors { d: usize },
    #[error("k = {k} out of range [1, {max}]")]
    InvalidK { k: usize, max: usize },
    #[error("batch size must be at least 1")]
    EmptyBatch,
    #[error("{0}")]
    Factor(#[from] FactorError),
}

/// How many factors are resampled per pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SharingMode {
    /// Fixed k in [1, d-1].
    FixedK(usize),
    /// k drawn uniformly from {1, .., d-1} for every pair.
    RandomK,
}

impl SharingMode {
    fn draw_k<R: Rng>(self, d: usize, rng: &mut R) -> Result<usize, PairError> {
        if d < 2 {
            return Err(PairError::TooFewFactors { d });
        }
        match self {
            SharingMode::FixedK(k) => {
                if k == 0 || k > d - 1 {
                    Err(PairError::InvalidK { k, max: d - 1 })
                } else {
                    Ok(k)
                }
            }
            SharingMode::RandomK => Ok(rng.random_range(1..d)),
        }
    }
}

/// Sharing set S: the factor indices kept equal across the pair,
/// |S| = d - k, uniform over all subsets of that size.
pub fn sample_sharing_set<R: Rng>(
    d: usize,
    mode: SharingMode,
    rng: &mut R,
) -> Result<BTreeSet<usize>, PairError> {
    let k = mode.draw_k(d, rng)?;
    let changed: BTreeSet<usize> = index_sample(rng, d, k).into_iter().collect();
    Ok((0..d).filter(|i| !changed.contains(i)).collect())
}

/// Two observations plus generation diagnostics.
#[derive(Debug, Clone)]
pub struct PairExample {
    x1: Array1<f64>,
    x2: Array1<f64>,
    z1: FactorVector,
    z2: FactorVector,
    changed_set: BTreeSet<usize>,
    k_nominal: usize,
}

impl PairExample {
    pub fn x1(&self) -> &Array1<f64> {
        &self.x1
    }

    pub fn x2(&self) -> &Array1<f64> {
        &self.x2
    }

    /// Ground-truth factors of x1 (diagnostic; audited).
    pub fn z1(&self) -> &FactorVector {
        audit::record_label_access();
        &self.z1
    }

    /// Ground-truth factors of x2 (diagnostic; audited).
    pub fn z2(&self) -> &FactorVector {
        audit::record_label_access();
        &self.z2
    }

    /// Indices actually resampled to a different value (diagnostic; audited).
    /// A subset of the k_nominal resampled indices.
    pub fn changed_set(&self) -> &BTreeSet<usize> {
        audit::record_label_access();
        &self.changed_set
    }

    pub fn k_nominal(&self) -> usize {
        self.k_nominal
    }
}

/// Draw one pair from the generative model.
pub fn sample_pair<R: Rng>(
    dataset: &GroundTruthDataset,
    mode: SharingMode,
    rng: &mut R,
) -> Result<PairExample, PairError> {
    let space = dataset.space();
    let d = space.num_factors();
    let shared = sample_sharing_set(d, mode, rng)?;
    let k_nominal = d - shared.len();

    let z1 = space.sample_one(rng);
    let mut z2 = z1.clone();
    for i in 0..d {
        if !shared.contains(&i) {
            // fresh draw from the marginal; may reproduce the old value
            z2.set_code(i, rng.random_range(0..space.cardinalities()[i]));
        }
    }
    let changed_set: BTreeSet<usize> = (0..d).filter(|&i| z1.code(i) != z2.code(i)).collect();

    let x1 = dataset.image_flat(&z1)?;
    let x2 = dataset.image_flat(&z2)?;
    Ok(PairExample {
        x1,
        x2,
        z1,
        z2,
        changed_set,
        k_nominal,
    })
}

/// Per-pair diagnostics, stacked.
#[derive(Debug, Clone)]
pub struct PairDiagnostics {
    z1: Vec<FactorVector>,
    z2: Vec<FactorVector>,
    /// (B, d_f) mask, true where the factor actually changed.
    changed_mask: Array2<bool>,
    k_nominal: Vec<usize>,
}

impl PairDiagnostics {
    pub fn z1(&self) -> &[FactorVector] {
        audit::record_label_access();
        &self.z1
    }

    pub fn z2(&self) -> &[FactorVector] {
        audit::record_label_access();
        &self.z2
    }

    pub fn changed_mask(&self) -> &Array2<bool> {
        audit::record_label_access();
        &self.changed_mask
    }

    pub fn k_nominal(&self) -> &[usize] {
        &self.k_nominal
    }
}

/// A batch of pairs; observations are (B, pixels) with rows aligned.
#[derive(Debug, Clone)]
pub struct PairBatch {
    pub x1: Array2<f64>,
    pub x2: Array2<f64>,
    diagnostics: Option<PairDiagnostics>,
}

impl PairBatch {
    /// Wrap externally produced observation pairs (no diagnostics).
    pub fn from_observations(x1: Array2<f64>, x2: Array2<f64>) -> Result<Self, PairError> {
        if x1.dim() != x2.dim() {
            return Err(PairError::Factor(FactorError::WrongLength {
                got: x2.nrows(),
                expected: x1.nrows(),
            }));
        }
        Ok(Self {
            x1,
            x2,
            diagnostics: None,
        })
    }

    pub fn len(&self) -> usize {
        self.x1.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn diagnostics(&self) -> Option<&PairDiagnostics> {
        self.diagnostics.as_ref()
    }
}

/// Stack `batch_size` independent pairs. Diagnostics are carried only when
/// requested; the learner-facing batch is (x1, x2) alone.
pub fn make_pair_batch<R: Rng>(
    dataset: &GroundTruthDataset,
    mode: SharingMode,
    batch_size: usize,
    with_diagnostics: bool,
    rng: &mut R,
) -> Result<PairBatch, PairError> {
    if batch_size == 0 {
        return Err(PairError::EmptyBatch);
    }
    let d = dataset.space().num_factors();
    let pixels = dataset.shape().num_pixels();
    let mut x1 = Array2::zeros((batch_size, pixels));
    let mut x2 = Array2::zeros((batch_size, pixels));
    let mut z1 = Vec::with_capacity(batch_size);
    let mut z2 = Vec::with_capacity(batch_size);
    let mut changed_mask = Array2::from_elem((batch_size, d), false);
    let mut k_nominal = Vec::with_capacity(batch_size);

    for b in 0..batch_size {
        let pair = sample_pair(dataset, mode, rng)?;
        x1.row_mut(b).assign(&pair.x1);
        x2.row_mut(b).assign(&pair.x2);
        for &i in &pair.changed_set {
            changed_mask[[b, i]] = true;
        }
        z1.push(pair.z1);
        z2.push(pair.z2);
        k_nominal.push(pair.k_nominal);
    }

    Ok(PairBatch {
        x1,
        x2,
        diagnostics: with_diagnostics.then_some(PairDiagnostics {
            z1,
            z2,
            changed_mask,
            k_nominal,
        }),
    })
}

/// Monte-Carlo report on whether the sharing-set distribution observes
/// every factor individually.
///
/// Factor i counts as observed through either of two direct events:
/// `pinned_rate[i]` estimates the probability that two independent draws
/// are distinct sharing sets intersecting exactly in {i}, and
/// `lone_change_rate[i]` the probability that a draw changes factor i
/// alone. A factor with both rates zero is only ever seen entangled with
/// others, so the sampler cannot vouch for it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SharingCoverage {
    pub pinned_rate: Vec<f64>,
    pub lone_change_rate: Vec<f64>,
    pub all_factors_observed: bool,
    pub n_draws: usize,
}

pub fn sharing_coverage<R: Rng>(
    d: usize,
    mode: SharingMode,
    n_draws: usize,
    rng: &mut R,
) -> Result<SharingCoverage, PairError> {
    let mut pinned = vec![0u64; d];
    let mut lone = vec![0u64; d];
    for _ in 0..n_draws {
        let s1 = sample_sharing_set(d, mode, rng)?;
        let s2 = sample_sharing_set(d, mode, rng)?;
        for s in [&s1, &s2] {
            if s.len() == d - 1 {
                let changed = (0..d).find(|i| !s.contains(i)).expect("one missing");
                lone[changed] += 1;
            }
        }
        if s1 == s2 {
            continue;
        }
        let inter: Vec<usize> = s1.intersection(&s2).copied().collect();
        if let [only] = inter.as_slice() {
            pinned[*only] += 1;
        }
    }
    let pinned_rate: Vec<f64> = pinned.iter().map(|&h| h as f64 / n_draws as f64).collect();
    let lone_change_rate: Vec<f64> = lone
        .iter()
        .map(|&h| h as f64 / (2 * n_draws) as f64)
        .collect();
    let all_factors_observed = (0..d).all(|i| pinned_rate[i] > 0.0 || lone_change_rate[i] > 0.0);
    Ok(SharingCoverage {
        pinned_rate,
        lone_change_rate,
        all_factors_observed,
        n_draws,
    })
}
