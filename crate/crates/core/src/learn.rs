//! Small supervised learners: cross-validated multinomial logistic
//! regression and gradient-boosted decision trees. These back the metric
//! and downstream evaluations; both are deterministic given their inputs.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Column-wise z-scoring fitted on training data.
#[derive(Debug, Clone)]
pub struct Standardizer {
    mean: Array1<f64>,
    std: Array1<f64>,
}

impl Standardizer {
    pub fn fit(x: &Array2<f64>) -> Self {
        let mean = x.mean_axis(Axis(0)).unwrap();
        let mut std = Array1::zeros(x.ncols());
        for (j, s) in std.iter_mut().enumerate() {
            let col = x.column(j);
            let m = mean[j];
            let var = col.iter().map(|&v| (v - m) * (v - m)).sum::<f64>() / col.len() as f64;
            *s = var.sqrt().max(1e-12);
        }
        Self { mean, std }
    }

    pub fn transform(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = x.clone();
        for mut row in out.rows_mut() {
            for j in 0..row.len() {
                row[j] = (row[j] - self.mean[j]) / self.std[j];
            }
        }
        out
    }
}

/// Multinomial logistic regression with L2 penalty, trained full-batch.
#[derive(Debug, Clone)]
pub struct SoftmaxRegression {
    /// (classes, features + 1); last column is the bias.
    weights: Array2<f64>,
    scaler: Standardizer,
    n_classes: usize,
}

fn softmax_rows(scores: &mut Array2<f64>) {
    for mut row in scores.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

impl SoftmaxRegression {
    /// `l2` multiplies 0.5 ||W||^2 (bias excluded).
    pub fn fit(x: &Array2<f64>, y: &[usize], n_classes: usize, l2: f64, epochs: usize) -> Self {
        assert_eq!(x.nrows(), y.len());
        assert!(n_classes >= 2);
        let scaler = Standardizer::fit(x);
        let xs = scaler.transform(x);
        let n = xs.nrows() as f64;
        let d = xs.ncols();
        let mut weights = Array2::zeros((n_classes, d + 1));
        // Adam state
        let mut m = Array2::<f64>::zeros((n_classes, d + 1));
        let mut v = Array2::<f64>::zeros((n_classes, d + 1));
        let (b1, b2, eps, lr) = (0.9, 0.999, 1e-8, 0.1);
        for t in 1..=epochs {
            // scores = X W_feat^T + bias
            let mut scores = xs.dot(&weights.slice(ndarray::s![.., ..d]).t());
            for (mut row, _) in scores.rows_mut().into_iter().zip(0..) {
                for (c, s) in row.iter_mut().enumerate() {
                    *s += weights[[c, d]];
                }
            }
            softmax_rows(&mut scores);
            // grad = (P - Y)^T X / n + l2 W
            for (i, &yi) in y.iter().enumerate() {
                scores[[i, yi]] -= 1.0;
            }
            let mut grad = Array2::zeros((n_classes, d + 1));
            let gfeat = scores.t().dot(&xs);
            grad.slice_mut(ndarray::s![.., ..d]).assign(&(&gfeat / n));
            for c in 0..n_classes {
                grad[[c, d]] = scores.column(c).sum() / n;
            }
            grad.slice_mut(ndarray::s![.., ..d])
                .zip_mut_with(&weights.slice(ndarray::s![.., ..d]), |g, &w| *g += l2 * w);
            // Adam update
            let bc1 = 1.0 - b1_pow(b1, t);
            let bc2 = 1.0 - b1_pow(b2, t);
            for ((w, mm), (vv, g)) in weights
                .iter_mut()
                .zip(m.iter_mut())
                .zip(v.iter_mut().zip(grad.iter()))
            {
                *mm = b1 * *mm + (1.0 - b1) * g;
                *vv = b2 * *vv + (1.0 - b2) * g * g;
                *w -= lr * (*mm / bc1) / ((*vv / bc2).sqrt() + eps);
            }
        }
        Self {
            weights,
            scaler,
            n_classes,
        }
    }

    /// 5-fold cross-validation over a grid of inverse regularization values
    /// (10 log-spaced, 1e-4 to 1e4), refit on the full data at the best.
    pub fn fit_cv(x: &Array2<f64>, y: &[usize], n_classes: usize, seed: u64) -> Self {
        let folds = 5;
        let cs: Vec<f64> = (0..10)
            .map(|i| 10f64.powf(-4.0 + 8.0 * i as f64 / 9.0))
            .collect();
        let n = x.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);

        let mut best = (f64::NEG_INFINITY, cs[0]);
        for &c in &cs {
            let l2 = 1.0 / c;
            let mut correct = 0usize;
            let mut total = 0usize;
            for fold in 0..folds {
                let val: Vec<usize> = order
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| i % folds == fold)
                    .map(|(_, &idx)| idx)
                    .collect();
                let train: Vec<usize> = order
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| i % folds != fold)
                    .map(|(_, &idx)| idx)
                    .collect();
                if train.is_empty() || val.is_empty() {
                    continue;
                }
                let xt = select_rows(x, &train);
                let yt: Vec<usize> = train.iter().map(|&i| y[i]).collect();
                let xv = select_rows(x, &val);
                let yv: Vec<usize> = val.iter().map(|&i| y[i]).collect();
                let model = Self::fit(&xt, &yt, n_classes, l2, 150);
                correct += model
                    .predict(&xv)
                    .iter()
                    .zip(&yv)
                    .filter(|(a, b)| a == b)
                    .count();
                total += yv.len();
            }
            let acc = correct as f64 / total.max(1) as f64;
            if acc > best.0 {
                best = (acc, c);
            }
        }
        Self::fit(x, y, n_classes, 1.0 / best.1, 300)
    }

    pub fn predict(&self, x: &Array2<f64>) -> Vec<usize> {
        let xs = self.scaler.transform(x);
        let d = xs.ncols();
        let mut scores = xs.dot(&self.weights.slice(ndarray::s![.., ..d]).t());
        for mut row in scores.rows_mut() {
            for (c, s) in row.iter_mut().enumerate() {
                *s += self.weights[[c, d]];
            }
        }
        scores
            .rows()
            .into_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap()
                    .0
            })
            .collect()
    }

    pub fn accuracy(&self, x: &Array2<f64>, y: &[usize]) -> f64 {
        let pred = self.predict(x);
        pred.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }
}

fn b1_pow(b: f64, t: usize) -> f64 {
    b.powi(t as i32)
}

pub fn select_rows(x: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((idx.len(), x.ncols()));
    for (row, &i) in idx.iter().enumerate() {
        out.row_mut(row).assign(&x.row(i));
    }
    out
}

// --- regression trees and gradient boosting ------------------------------

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        value: f64,
        /// dense leaf index used for terminal-region updates
        leaf_id: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// CART regression tree with exact variance-reduction splits.
#[derive(Debug, Clone)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    n_leaves: usize,
    /// total squared-error reduction contributed by each feature
    gains: Vec<f64>,
}

impl RegressionTree {
    pub fn fit(
        x: &Array2<f64>,
        targets: &[f64],
        max_depth: usize,
        min_samples_leaf: usize,
    ) -> Self {
        let mut tree = Self {
            nodes: Vec::new(),
            n_leaves: 0,
            gains: vec![0.0; x.ncols()],
        };
        let idx: Vec<usize> = (0..x.nrows()).collect();
        tree.build(x, targets, idx, max_depth, min_samples_leaf);
        tree
    }

    fn build(
        &mut self,
        x: &Array2<f64>,
        t: &[f64],
        idx: Vec<usize>,
        depth: usize,
        min_leaf: usize,
    ) -> usize {
        let sum: f64 = idx.iter().map(|&i| t[i]).sum();
        let n = idx.len() as f64;
        let mean = sum / n;
        if depth == 0 || idx.len() < 2 * min_leaf || idx.len() < 2 {
            return self.push_leaf(mean);
        }
        let sq: f64 = idx.iter().map(|&i| t[i] * t[i]).sum();
        let sse_parent = sq - sum * sum / n;

        let mut best: Option<(f64, usize, f64, Vec<usize>, Vec<usize>)> = None;
        let mut order = idx.clone();
        for feature in 0..x.ncols() {
            order.sort_by(|&a, &b| x[[a, feature]].partial_cmp(&x[[b, feature]]).unwrap());
            // prefix scan over sorted targets
            let mut left_sum = 0.0;
            let mut left_sq = 0.0;
            for split in 1..order.len() {
                let i = order[split - 1];
                left_sum += t[i];
                left_sq += t[i] * t[i];
                let (prev, cur) = (x[[i, feature]], x[[order[split], feature]]);
                if prev == cur {
                    continue;
                }
                let nl = split as f64;
                let nr = n - nl;
                if (split < min_leaf) || (order.len() - split < min_leaf) {
                    continue;
                }
                let right_sum = sum - left_sum;
                let right_sq = sq - left_sq;
                let sse = (left_sq - left_sum * left_sum / nl)
                    + (right_sq - right_sum * right_sum / nr);
                let gain = sse_parent - sse;
                if best.as_ref().map_or(gain > 1e-12, |b| gain > b.0) {
                    let threshold = 0.5 * (prev + cur);
                    best = Some((
                        gain,
                        feature,
                        threshold,
                        order[..split].to_vec(),
                        order[split..].to_vec(),
                    ));
                }
            }
        }

        match best {
            None => self.push_leaf(mean),
            Some((gain, feature, threshold, left_idx, right_idx)) => {
                self.gains[feature] += gain;
                let node = self.nodes.len();
                self.nodes.push(Node::Split {
                    feature,
                    threshold,
                    left: usize::MAX,
                    right: usize::MAX,
                });
                let left = self.build(x, t, left_idx, depth - 1, min_leaf);
                let right = self.build(x, t, right_idx, depth - 1, min_leaf);
                if let Node::Split {
                    left: l, right: r, ..
                } = &mut self.nodes[node]
                {
                    *l = left;
                    *r = right;
                }
                node
            }
        }
    }

    fn push_leaf(&mut self, value: f64) -> usize {
        let leaf_id = self.n_leaves;
        self.n_leaves += 1;
        self.nodes.push(Node::Leaf { value, leaf_id });
        self.nodes.len() - 1
    }

    fn root(&self) -> usize {
        // the root is the first node pushed on a split tree, or the only leaf
        if self.nodes.len() == 1 {
            0
        } else {
            match self.nodes[0] {
                Node::Split { .. } => 0,
                Node::Leaf { .. } => 0,
            }
        }
    }

    pub fn leaf_of(&self, row: ndarray::ArrayView1<f64>) -> usize {
        let mut at = self.root();
        loop {
            match self.nodes[at] {
                Node::Leaf { leaf_id, .. } => return leaf_id,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict_row(&self, row: ndarray::ArrayView1<f64>) -> f64 {
        let mut at = self.root();
        loop {
            match self.nodes[at] {
                Node::Leaf { value, .. } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    /// Replace each leaf value with `values[leaf_id]`.
    pub fn set_leaf_values(&mut self, values: &[f64]) {
        for node in &mut self.nodes {
            if let Node::Leaf { value, leaf_id } = node {
                *value = values[*leaf_id];
            }
        }
    }

    pub fn feature_gains(&self) -> &[f64] {
        &self.gains
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbtConfig {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for GbtConfig {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            learning_rate: 0.1,
            max_depth: 3,
            min_samples_leaf: 1,
        }
    }
}

/// Multiclass gradient boosting on the softmax deviance: one tree per class
/// per stage, terminal regions updated with a Newton step.
#[derive(Debug, Clone)]
pub struct GradientBoostedClassifier {
    trees: Vec<Vec<RegressionTree>>,
    base_scores: Vec<f64>,
    n_classes: usize,
    n_features: usize,
    config: GbtConfig,
}

impl GradientBoostedClassifier {
    pub fn fit(x: &Array2<f64>, y: &[usize], n_classes: usize, config: GbtConfig) -> Self {
        assert_eq!(x.nrows(), y.len());
        assert!(n_classes >= 2);
        let n = x.nrows();
        // log-prior initialization
        let mut counts = vec![0usize; n_classes];
        for &yi in y {
            counts[yi] += 1;
        }
        let base_scores: Vec<f64> = counts
            .iter()
            .map(|&c| ((c.max(1)) as f64 / n as f64).ln())
            .collect();

        let mut scores = Array2::zeros((n, n_classes));
        for mut row in scores.rows_mut() {
            for (c, s) in row.iter_mut().enumerate() {
                *s = base_scores[c];
            }
        }

        let k = n_classes as f64;
        let mut trees: Vec<Vec<RegressionTree>> = Vec::with_capacity(config.n_estimators);
        for _ in 0..config.n_estimators {
            let mut probs = scores.clone();
            softmax_rows(&mut probs);
            let mut stage = Vec::with_capacity(n_classes);
            for c in 0..n_classes {
                let residual: Vec<f64> = (0..n)
                    .map(|i| (if y[i] == c { 1.0 } else { 0.0 }) - probs[[i, c]])
                    .collect();
                let mut tree =
                    RegressionTree::fit(x, &residual, config.max_depth, config.min_samples_leaf);
                // Newton update per terminal region:
                // value = (K-1)/K * sum(r) / sum(p (1 - p))
                let mut num = vec![0.0; tree.n_leaves()];
                let mut den = vec![0.0; tree.n_leaves()];
                for i in 0..n {
                    let leaf = tree.leaf_of(x.row(i));
                    num[leaf] += residual[i];
                    den[leaf] += probs[[i, c]] * (1.0 - probs[[i, c]]);
                }
                let values: Vec<f64> = num
                    .iter()
                    .zip(&den)
                    .map(|(&nu, &de)| {
                        if de.abs() < 1e-150 {
                            0.0
                        } else {
                            (k - 1.0) / k * nu / de
                        }
                    })
                    .collect();
                tree.set_leaf_values(&values);
                for i in 0..n {
                    scores[[i, c]] += config.learning_rate * tree.predict_row(x.row(i));
                }
                stage.push(tree);
            }
            trees.push(stage);
        }
        Self {
            trees,
            base_scores,
            n_classes,
            n_features: x.ncols(),
            config,
        }
    }

    pub fn decision_scores(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut scores = Array2::zeros((x.nrows(), self.n_classes));
        for mut row in scores.rows_mut() {
            for (c, s) in row.iter_mut().enumerate() {
                *s = self.base_scores[c];
            }
        }
        for stage in &self.trees {
            for (c, tree) in stage.iter().enumerate() {
                for (i, row) in x.rows().into_iter().enumerate() {
                    scores[[i, c]] += self.config.learning_rate * tree.predict_row(row);
                }
            }
        }
        scores
    }

    pub fn predict(&self, x: &Array2<f64>) -> Vec<usize> {
        self.decision_scores(x)
            .rows()
            .into_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap()
                    .0
            })
            .collect()
    }

    pub fn accuracy(&self, x: &Array2<f64>, y: &[usize]) -> f64 {
        let pred = self.predict(x);
        pred.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
    }

    /// Total squared-error reduction per feature over all trees, normalized
    /// to sum to one (all zeros if no split was ever made).
    pub fn feature_importances(&self) -> Vec<f64> {
        let mut gains = vec![0.0; self.n_features];
        for stage in &self.trees {
            for tree in stage {
                for (f, &g) in tree.feature_gains().iter().enumerate() {
                    gains[f] += g;
                }
            }
        }
        let total: f64 = gains.iter().sum();
        if total > 0.0 {
            for g in &mut gains {
                *g /= total;
            }
        }
        gains
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }
}
