//! The six supervised disentanglement scores.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::factor::GroundTruthDataset;
use crate::learn::{select_rows, GbtConfig, GradientBoostedClassifier, SoftmaxRegression};

use super::{
    discrete_mutual_information, discretize_codes, entropy, Binning, MetricError, Representer,
    RepresentationTable,
};

/// Mutual Information Gap: mean over factors of the normalized gap between
/// the two largest per-dimension mutual informations.
pub fn mig_score(table: &RepresentationTable, bins: usize) -> Result<f64, MetricError> {
    mig_score_binned(table, bins, Binning::EqualWidth)
}

pub fn mig_score_binned(
    table: &RepresentationTable,
    bins: usize,
    binning: Binning,
) -> Result<f64, MetricError> {
    if table.latent_dim() < 2 {
        return Err(MetricError::TooFewDims {
            need: 2,
            got: table.latent_dim(),
        });
    }
    let discretized = discretize_codes(table.codes(), bins, binning);
    let factors = table.factors();
    let mut total = 0.0;
    for f in 0..table.num_factors() {
        let fcol: Vec<usize> = factors.column(f).to_vec();
        let h = entropy(&fcol);
        if h <= 0.0 {
            return Err(MetricError::ZeroEntropyFactor(f));
        }
        let mut mis: Vec<f64> = (0..table.latent_dim())
            .map(|i| {
                let dcol: Vec<usize> = discretized.column(i).to_vec();
                discrete_mutual_information(&dcol, &fcol).expect("non-empty")
            })
            .collect();
        mis.sort_by(|a, b| b.partial_cmp(a).unwrap());
        total += (mis[0] - mis[1]) / h;
    }
    Ok(total / table.num_factors() as f64)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DciScores {
    pub disentanglement: f64,
    pub completeness: f64,
    pub informativeness: f64,
    /// d_z x d_f nonnegative importances.
    pub importance: Vec<Vec<f64>>,
    /// True when every importance came out zero; scores are 0 then.
    pub degenerate: bool,
}

/// DCI from per-factor tree-ensemble predictors: disentanglement weights
/// per-dimension row entropies, completeness per-factor column entropies,
/// informativeness is mean held-out accuracy (80/20 split).
pub fn dci_scores(
    table: &RepresentationTable,
    gbt: GbtConfig,
    seed: u64,
) -> Result<DciScores, MetricError> {
    let n = table.len();
    let d_z = table.latent_dim();
    let d_f = table.num_factors();
    if n < 10 {
        return Err(MetricError::Empty);
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_train = (n * 8) / 10;
    let (train_idx, test_idx) = order.split_at(n_train);

    let x_train = select_rows(table.codes(), train_idx);
    let x_test = select_rows(table.codes(), test_idx);
    let factors = table.factors();
    let cards = table.factor_cardinalities();

    let mut importance = vec![vec![0.0; d_f]; d_z];
    let mut informativeness = 0.0;
    for f in 0..d_f {
        let y_train: Vec<usize> = train_idx.iter().map(|&i| factors[[i, f]]).collect();
        let y_test: Vec<usize> = test_idx.iter().map(|&i| factors[[i, f]]).collect();
        let model = GradientBoostedClassifier::fit(&x_train, &y_train, cards[f].max(2), gbt);
        informativeness += model.accuracy(&x_test, &y_test);
        for (i, &imp) in model.feature_importances().iter().enumerate() {
            importance[i][f] = imp;
        }
    }
    informativeness /= d_f as f64;

    let total: f64 = importance.iter().flatten().sum();
    if total <= 0.0 {
        return Ok(DciScores {
            disentanglement: 0.0,
            completeness: 0.0,
            informativeness,
            importance,
            degenerate: true,
        });
    }

    // disentanglement: rho-weighted (1 - H(row) / ln d_f)
    let mut disentanglement = 0.0;
    for row in &importance {
        let row_sum: f64 = row.iter().sum();
        if row_sum <= 0.0 {
            continue;
        }
        let h: f64 = row
            .iter()
            .filter(|&&v| v > 0.0)
            .map(|&v| {
                let p = v / row_sum;
                -p * p.ln()
            })
            .sum();
        let norm = if d_f > 1 { (d_f as f64).ln() } else { 1.0 };
        let d_i = if d_f > 1 {
            (1.0 - h / norm).clamp(0.0, 1.0)
        } else {
            1.0
        };
        disentanglement += (row_sum / total) * d_i;
    }

    // completeness: mean over factors of (1 - H(column) / ln d_z)
    let mut completeness = 0.0;
    for f in 0..d_f {
        let col_sum: f64 = importance.iter().map(|row| row[f]).sum();
        if col_sum <= 0.0 {
            continue;
        }
        let h: f64 = importance
            .iter()
            .map(|row| row[f])
            .filter(|&v| v > 0.0)
            .map(|v| {
                let p = v / col_sum;
                -p * p.ln()
            })
            .sum();
        let norm = if d_z > 1 { (d_z as f64).ln() } else { 1.0 };
        completeness += if d_z > 1 {
            (1.0 - h / norm).clamp(0.0, 1.0)
        } else {
            1.0
        };
    }
    completeness /= d_f as f64;

    Ok(DciScores {
        disentanglement,
        completeness,
        informativeness,
        importance,
        degenerate: false,
    })
}

/// Balanced accuracy of the best single-threshold classifier for the
/// binarized factor, rescaled to [0, 1] as 2*acc - 1 (chance maps to 0).
fn threshold_cell_score(
    dim_train: &[f64],
    y_train: &[bool],
    dim_test: &[f64],
    y_test: &[bool],
) -> f64 {
    let pos: usize = y_train.iter().filter(|&&b| b).count();
    let neg = y_train.len() - pos;
    if pos == 0 || neg == 0 {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..dim_train.len()).collect();
    order.sort_by(|&a, &b| dim_train[a].partial_cmp(&dim_train[b]).unwrap());
    // scan candidate thresholds between distinct consecutive values
    let mut below_pos = 0usize;
    let mut below_neg = 0usize;
    let mut best = (0.5f64, f64::NEG_INFINITY, true); // (balanced acc, threshold, predict_pos_above)
    for s in 1..order.len() {
        let i = order[s - 1];
        if y_train[i] {
            below_pos += 1;
        } else {
            below_neg += 1;
        }
        let (prev, cur) = (dim_train[i], dim_train[order[s]]);
        if prev == cur {
            continue;
        }
        let threshold = 0.5 * (prev + cur);
        // polarity A: predict positive above the threshold
        let tpr_a = (pos - below_pos) as f64 / pos as f64;
        let tnr_a = below_neg as f64 / neg as f64;
        let bal_a = 0.5 * (tpr_a + tnr_a);
        // polarity B: predict positive below
        let bal_b = 1.0 - bal_a;
        if bal_a > best.0 {
            best = (bal_a, threshold, true);
        }
        if bal_b > best.0 {
            best = (bal_b, threshold, false);
        }
    }
    if best.1 == f64::NEG_INFINITY {
        return 0.0; // constant dimension
    }
    // held-out balanced accuracy
    let (mut tp, mut fp, mut tn, mut fnn) = (0usize, 0usize, 0usize, 0usize);
    for (&v, &y) in dim_test.iter().zip(y_test) {
        let pred = if best.2 { v > best.1 } else { v <= best.1 };
        match (pred, y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fnn += 1,
        }
    }
    if tp + fnn == 0 || tn + fp == 0 {
        return 0.0;
    }
    let bal = 0.5 * (tp as f64 / (tp + fnn) as f64 + tn as f64 / (tn + fp) as f64);
    (2.0 * bal - 1.0).max(0.0)
}

/// SAP: mean over factors of the difference between the two largest
/// per-dimension prediction scores. Factors are binarized at their median
/// code; the per-cell predictor is the best single threshold, scored by
/// held-out balanced accuracy rescaled so chance is 0.
pub fn sap_score(table: &RepresentationTable, seed: u64) -> Result<f64, MetricError> {
    let n = table.len();
    let d_z = table.latent_dim();
    let d_f = table.num_factors();
    if d_z < 2 {
        return Err(MetricError::TooFewDims { need: 2, got: d_z });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let (train_idx, test_idx) = order.split_at(n / 2);
    let factors = table.factors();
    let codes = table.codes();

    let mut total = 0.0;
    for f in 0..d_f {
        // binarize at the factor's empirical median on the training half
        let mut train_codes: Vec<f64> = train_idx.iter().map(|&i| factors[[i, f]] as f64).collect();
        train_codes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = {
            let m = train_codes.len();
            if m % 2 == 1 {
                train_codes[m / 2]
            } else {
                0.5 * (train_codes[m / 2 - 1] + train_codes[m / 2])
            }
        };
        let y_train: Vec<bool> = train_idx.iter().map(|&i| factors[[i, f]] as f64 > median).collect();
        let y_test: Vec<bool> = test_idx.iter().map(|&i| factors[[i, f]] as f64 > median).collect();

        let mut cell_scores: Vec<f64> = (0..d_z)
            .map(|dim| {
                let dim_train: Vec<f64> = train_idx.iter().map(|&i| codes[[i, dim]]).collect();
                let dim_test: Vec<f64> = test_idx.iter().map(|&i| codes[[i, dim]]).collect();
                threshold_cell_score(&dim_train, &y_train, &dim_test, &y_test)
            })
            .collect();
        cell_scores.sort_by(|a, b| b.partial_cmp(a).unwrap());
        total += cell_scores[0] - cell_scores[1];
    }
    Ok(total / d_f as f64)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModularityOutcome {
    pub score: f64,
    /// Dims whose mutual information with every factor was zero are skipped;
    /// when none are informative the score is 1 by convention.
    pub all_uninformative: bool,
}

/// Modularity: per informative dimension, 1 minus the squared-MI mass on
/// non-principal factors relative to the worst case; averaged.
pub fn modularity_score(
    table: &RepresentationTable,
    bins: usize,
) -> Result<ModularityOutcome, MetricError> {
    modularity_score_binned(table, bins, Binning::EqualWidth)
}

pub fn modularity_score_binned(
    table: &RepresentationTable,
    bins: usize,
    binning: Binning,
) -> Result<ModularityOutcome, MetricError> {
    let d_z = table.latent_dim();
    let d_f = table.num_factors();
    let discretized = discretize_codes(table.codes(), bins, binning);
    let factors = table.factors();

    let mut per_dim = Vec::new();
    for i in 0..d_z {
        let dcol: Vec<usize> = discretized.column(i).to_vec();
        let mis: Vec<f64> = (0..d_f)
            .map(|f| {
                let fcol: Vec<usize> = factors.column(f).to_vec();
                discrete_mutual_information(&dcol, &fcol).expect("non-empty")
            })
            .collect();
        let principal = mis.iter().cloned().fold(0.0f64, f64::max);
        if principal <= 0.0 {
            continue;
        }
        if d_f == 1 {
            per_dim.push(1.0);
            continue;
        }
        let off_sum: f64 = mis.iter().map(|&m| m * m).sum::<f64>() - principal * principal;
        per_dim.push(1.0 - off_sum / (principal * principal * (d_f as f64 - 1.0)));
    }
    if per_dim.is_empty() {
        return Ok(ModularityOutcome {
            score: 1.0,
            all_uninformative: true,
        });
    }
    Ok(ModularityOutcome {
        score: per_dim.iter().sum::<f64>() / per_dim.len() as f64,
        all_uninformative: false,
    })
}

/// Interventional-pair score with a linear classifier: fix one factor
/// across a batch of pairs, average |r(x1) - r(x2)|, predict which factor
/// was fixed. Returns held-out accuracy.
#[allow(clippy::too_many_arguments)]
pub fn beta_vae_score(
    representer: &dyn Representer,
    dataset: &GroundTruthDataset,
    train_points: usize,
    test_points: usize,
    batch_per_point: usize,
    seed: u64,
) -> Result<f64, MetricError> {
    let space = dataset.space();
    let d_f = space.num_factors();
    let d_z = representer.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let make_points = |count: usize, rng: &mut ChaCha8Rng| -> (Array2<f64>, Vec<usize>) {
        let mut x = Array2::zeros((count, d_z));
        let mut y = Vec::with_capacity(count);
        for p in 0..count {
            let f = rng.random_range(0..d_f);
            let value = rng.random_range(0..space.cardinalities()[f]);
            let mut diff = Array1::zeros(d_z);
            for _ in 0..batch_per_point {
                let mut v1 = space.sample_one(rng);
                let mut v2 = space.sample_one(rng);
                v1.set_code(f, value);
                v2.set_code(f, value);
                let r1 = representer.represent(&v1, rng);
                let r2 = representer.represent(&v2, rng);
                for (d, (a, b)) in r1.iter().zip(&r2).enumerate() {
                    diff[d] += (a - b).abs();
                }
            }
            diff /= batch_per_point as f64;
            x.row_mut(p).assign(&diff);
            y.push(f);
        }
        (x, y)
    };

    let (x_train, y_train) = make_points(train_points, &mut rng);
    let (x_test, y_test) = make_points(test_points, &mut rng);
    let model = SoftmaxRegression::fit(&x_train, &y_train, d_f, 1e-3, 200);
    Ok(model.accuracy(&x_test, &y_test))
}

/// Variance-argmin score with a majority-vote classifier. Dimensions whose
/// global standard deviation falls below `prune_std` are pruned; if nothing
/// survives (a collapsed representation) this is an error.
#[allow(clippy::too_many_arguments)]
pub fn factor_vae_score(
    representer: &dyn Representer,
    dataset: &GroundTruthDataset,
    train_points: usize,
    test_points: usize,
    batch_per_point: usize,
    prune_std: f64,
    seed: u64,
) -> Result<f64, MetricError> {
    let space = dataset.space();
    let d_f = space.num_factors();
    let d_z = representer.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // global per-dimension scale from a random sample
    let sample = space.sample_uniform(1000, &mut rng)?;
    let reps = representer.represent_batch(&sample, &mut rng);
    let mut global_std = vec![0.0; d_z];
    for (d, s) in global_std.iter_mut().enumerate() {
        let col = reps.column(d);
        let mean = col.mean().unwrap();
        *s = (col.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / col.len() as f64).sqrt();
    }
    let active: Vec<usize> = (0..d_z).filter(|&d| global_std[d] >= prune_std).collect();
    if active.is_empty() {
        return Err(MetricError::AllDimsPruned);
    }

    let vote = |rng: &mut ChaCha8Rng| -> (usize, usize) {
        let f = rng.random_range(0..d_f);
        let value = rng.random_range(0..space.cardinalities()[f]);
        let mut batch = Vec::with_capacity(batch_per_point);
        for _ in 0..batch_per_point {
            let mut v = space.sample_one(rng);
            v.set_code(f, value);
            batch.push(v);
        }
        let reps = representer.represent_batch(&batch, rng);
        let mut best = (f64::INFINITY, active[0]);
        for &d in &active {
            let col = reps.column(d);
            let mean = col.mean().unwrap();
            let var = col.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>()
                / (col.len() as f64 * global_std[d] * global_std[d]);
            if var < best.0 {
                best = (var, d);
            }
        }
        (best.1, f)
    };

    // majority table from training votes
    let mut counts = Array2::<u64>::zeros((d_z, d_f));
    for _ in 0..train_points {
        let (dim, f) = vote(&mut rng);
        counts[[dim, f]] += 1;
    }
    let classify: Vec<usize> = (0..d_z)
        .map(|dim| {
            (0..d_f)
                .max_by_key(|&f| counts[[dim, f]])
                .unwrap_or(0)
        })
        .collect();

    let mut correct = 0usize;
    for _ in 0..test_points {
        let (dim, f) = vote(&mut rng);
        if classify[dim] == f {
            correct += 1;
        }
    }
    Ok(correct as f64 / test_points as f64)
}
