//! Desk-scale empirical verification of the identifiability mechanics:
//! candidate inverse maps either satisfy the pairwise sharing constraints
//! and show (permuted-)diagonal Jacobians, or they violate them.
//!
//! Axis-aligned candidates are permutations composed with coordinate-wise
//! strictly monotone warps of [0,1]; entangling candidates are rotations
//! applied in a box-preserving reparameterized space (logit in, sigmoid
//! out). Both families are numerically invertible on the open box.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;
use rand::seq::index::sample as index_sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IdentError {
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("k = {k} out of range [1, {max}]")]
    InvalidK { k: usize, max: usize },
    #[error("fixed sharing set has {got} indices, need d - k = {want}")]
    WrongFixedSetSize { got: usize, want: usize },
    #[error("map failed the numerical invertibility check: round-trip error {0:e}")]
    NotInvertible(f64),
    #[error("point {index} is within {eps} of the box boundary")]
    PointNearBoundary { index: usize, eps: f64 },
    #[error("permutation search supports up to 8 dims, got {0}")]
    TooManyDims(usize),
    #[error("tolerance must be positive")]
    BadTolerance,
}

/// Strictly increasing cubic warp of [0, 1]:
/// w(t) = (t + a t^2 + b t^3) / (1 + a + b) with a, b >= 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotoneWarp {
    a: f64,
    b: f64,
}

impl MonotoneWarp {
    pub fn identity() -> Self {
        Self { a: 0.0, b: 0.0 }
    }

    pub fn random<R: Rng>(rng: &mut R) -> Self {
        Self {
            a: rng.random::<f64>() * 2.0,
            b: rng.random::<f64>() * 2.0,
        }
    }

    pub fn apply(&self, t: f64) -> f64 {
        (t + self.a * t * t + self.b * t * t * t) / (1.0 + self.a + self.b)
    }

    /// Newton iteration with bisection safeguarding; the warp is strictly
    /// increasing so the root is unique.
    pub fn invert(&self, y: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut t = y.clamp(0.0, 1.0);
        for _ in 0..200 {
            let f = self.apply(t) - y;
            if f.abs() < 1e-15 {
                return t;
            }
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let df = (1.0 + 2.0 * self.a * t + 3.0 * self.b * t * t) / (1.0 + self.a + self.b);
            let newton = t - f / df;
            t = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MapKind {
    PermutationMonotone,
    Rotation,
    /// Monotone warps followed by a rotation; entangling.
    Composite,
}

/// A candidate inverse map h^-1 on [0,1]^d.
#[derive(Debug, Clone)]
pub struct CandidateMap {
    kind: MapKind,
    d: usize,
    perm: Vec<usize>,
    warps: Vec<MonotoneWarp>,
    rotation: Option<Array2<f64>>,
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl CandidateMap {
    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    /// h^-1(z): the candidate representation of a latent point.
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.d);
        let warped: Vec<f64> = (0..self.d)
            .map(|i| self.warps[i].apply(z[self.perm[i]]))
            .collect();
        match &self.rotation {
            None => warped,
            Some(q) => {
                let u: Vec<f64> = warped.iter().map(|&p| logit(p)).collect();
                (0..self.d)
                    .map(|i| sigmoid((0..self.d).map(|j| q[[i, j]] * u[j]).sum()))
                    .collect()
            }
        }
    }

    pub fn invert(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.d);
        let warped: Vec<f64> = match &self.rotation {
            None => y.to_vec(),
            Some(q) => {
                let u: Vec<f64> = y.iter().map(|&p| logit(p)).collect();
                // Q is orthogonal: inverse is the transpose
                (0..self.d)
                    .map(|i| sigmoid((0..self.d).map(|j| q[[j, i]] * u[j]).sum()))
                    .collect()
            }
        };
        let mut z = vec![0.0; self.d];
        for i in 0..self.d {
            z[self.perm[i]] = self.warps[i].invert(warped[i]);
        }
        z
    }
}

/// Identity candidate: the trivially disentangled map.
pub fn identity_map(d: usize) -> CandidateMap {
    CandidateMap {
        kind: MapKind::PermutationMonotone,
        d,
        perm: (0..d).collect(),
        warps: vec![MonotoneWarp::identity(); d],
        rotation: None,
    }
}

/// Rotation by `angle` in the (i, j) plane, identity elsewhere, applied in
/// the logit-reparameterized space.
pub fn plane_rotation_map(d: usize, i: usize, j: usize, angle: f64) -> CandidateMap {
    let mut q = Array2::eye(d);
    q[[i, i]] = angle.cos();
    q[[j, j]] = angle.cos();
    q[[i, j]] = -angle.sin();
    q[[j, i]] = angle.sin();
    CandidateMap {
        kind: MapKind::Rotation,
        d,
        perm: (0..d).collect(),
        warps: vec![MonotoneWarp::identity(); d],
        rotation: Some(q),
    }
}

/// Sample a candidate map of the requested family and verify numerical
/// invertibility (round-trip error < 1e-8 over 1000 points).
pub fn make_candidate_map<R: Rng>(
    kind: MapKind,
    d: usize,
    rng: &mut R,
) -> Result<CandidateMap, IdentError> {
    if d < 2 {
        return Err(IdentError::DimensionTooSmall(d));
    }
    let mut perm: Vec<usize> = (0..d).collect();
    // Fisher-Yates
    for i in (1..d).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    let warps: Vec<MonotoneWarp> = (0..d).map(|_| MonotoneWarp::random(rng)).collect();
    let map = match kind {
        MapKind::PermutationMonotone => CandidateMap {
            kind,
            d,
            perm,
            warps,
            rotation: None,
        },
        MapKind::Rotation => CandidateMap {
            kind,
            d,
            perm: (0..d).collect(),
            warps: vec![MonotoneWarp::identity(); d],
            rotation: Some(random_dense_rotation(d, rng)),
        },
        MapKind::Composite => CandidateMap {
            kind,
            d,
            perm,
            warps,
            rotation: Some(random_dense_rotation(d, rng)),
        },
    };
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let z: Vec<f64> = (0..d).map(|_| 0.001 + 0.998 * rng.random::<f64>()).collect();
        let back = map.invert(&map.apply(&z));
        for (a, b) in z.iter().zip(&back) {
            worst = worst.max((a - b).abs());
        }
    }
    if worst >= 1e-8 {
        return Err(IdentError::NotInvertible(worst));
    }
    Ok(map)
}

/// Orthogonal matrix at least 10 degrees away from every axis alignment
/// (no row dominated by a single entry).
fn random_dense_rotation<R: Rng>(d: usize, rng: &mut R) -> Array2<f64> {
    let limit = (10f64).to_radians().cos();
    loop {
        let q = crate::metrics::synthetic::random_rotation(d, rng);
        let dense = (0..d).all(|i| {
            let row_max = (0..d).map(|j| q[[i, j]].abs()).fold(0.0, f64::max);
            row_max < limit
        });
        if dense {
            return q;
        }
    }
}

/// How the sharing set is drawn for continuous pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SharingDistribution {
    /// Uniform over all subsets of size d - k.
    UniformSubsets,
    /// A single fixed sharing set (used for coverage-violation witnesses).
    FixedSet(BTreeSet<usize>),
}

/// A latent pair with its realized sharing set; shared coordinates are
/// bit-equal by construction.
#[derive(Debug, Clone)]
pub struct LatentPair {
    pub z1: Vec<f64>,
    pub z2: Vec<f64>,
    pub shared: BTreeSet<usize>,
}

/// Continuous-uniform pairs from the generative model: z uniform on the
/// box, the complement of S resampled (almost surely distinct).
pub fn continuous_pair_sample<R: Rng>(
    d: usize,
    k: usize,
    p_s: &SharingDistribution,
    n: usize,
    rng: &mut R,
) -> Result<Vec<LatentPair>, IdentError> {
    if d < 2 {
        return Err(IdentError::DimensionTooSmall(d));
    }
    if k == 0 || k >= d {
        return Err(IdentError::InvalidK { k, max: d - 1 });
    }
    if let SharingDistribution::FixedSet(s) = p_s {
        if s.len() != d - k {
            return Err(IdentError::WrongFixedSetSize {
                got: s.len(),
                want: d - k,
            });
        }
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let shared: BTreeSet<usize> = match p_s {
            SharingDistribution::UniformSubsets => {
                let changed: BTreeSet<usize> = index_sample(rng, d, k).into_iter().collect();
                (0..d).filter(|i| !changed.contains(i)).collect()
            }
            SharingDistribution::FixedSet(s) => s.clone(),
        };
        let z1: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let mut z2 = z1.clone();
        for (i, slot) in z2.iter_mut().enumerate() {
            if !shared.contains(&i) {
                *slot = rng.random::<f64>();
            }
        }
        out.push(LatentPair { z1, z2, shared });
    }
    Ok(out)
}

/// Outcome of the pairwise residual constraints over a pair sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintReport {
    /// Fraction of checked pairs admitting exactly one size-(d-k) set of
    /// coordinates with equal images while all others differ.
    pub pass_fraction_shared: f64,
    /// Fraction where some coordinate outside every admissible set also
    /// coincides (the distinctness constraint is violated).
    pub violation_fraction_distinct: f64,
    /// Whether the matched coordinate set is constant across pairs that
    /// share the same S.
    pub t_consistent_across_s: bool,
    /// Identical pairs (collided z) are flagged and excluded.
    pub n_degenerate: usize,
    pub n_checked: usize,
}

/// Check the sharing constraints of the generative model on mapped pairs:
/// a candidate passes a pair when exactly d - k output coordinates agree
/// (within `tol`) and all remaining coordinates differ by more than `tol`.
pub fn residual_constraint_check(
    map: &CandidateMap,
    pairs: &[LatentPair],
    k: usize,
    tol: f64,
) -> Result<ConstraintReport, IdentError> {
    if tol <= 0.0 {
        return Err(IdentError::BadTolerance);
    }
    let d = map.dimension();
    if k == 0 || k >= d {
        return Err(IdentError::InvalidK { k, max: d - 1 });
    }
    let mut pass = 0usize;
    let mut violation = 0usize;
    let mut degenerate = 0usize;
    let mut checked = 0usize;
    let mut per_s: BTreeMap<Vec<usize>, BTreeSet<Vec<usize>>> = BTreeMap::new();
    for pair in pairs {
        if pair.z1 == pair.z2 {
            degenerate += 1;
            continue;
        }
        checked += 1;
        let y1 = map.apply(&pair.z1);
        let y2 = map.apply(&pair.z2);
        let equal: Vec<usize> = (0..d)
            .filter(|&i| (y1[i] - y2[i]).abs() < tol)
            .collect();
        if equal.len() == d - k {
            pass += 1;
            per_s
                .entry(pair.shared.iter().copied().collect())
                .or_default()
                .insert(equal);
        } else if equal.len() > d - k {
            violation += 1;
        }
    }
    let t_consistent_across_s = per_s.values().all(|sets| sets.len() <= 1);
    Ok(ConstraintReport {
        pass_fraction_shared: pass as f64 / checked.max(1) as f64,
        violation_fraction_distinct: violation as f64 / checked.max(1) as f64,
        t_consistent_across_s,
        n_degenerate: degenerate,
        n_checked: checked,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JacobianReport {
    pub is_diagonal_up_to_permutation: bool,
    /// Largest |entry| outside the best permutation-matched diagonal over
    /// all points.
    pub offdiag_max: f64,
}

fn permutations(d: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..d).collect();
    heap_permute(&mut items, d, &mut out);
    out
}

fn heap_permute(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == 1 {
        out.push(items.clone());
        return;
    }
    for i in 0..k {
        heap_permute(items, k - 1, out);
        if k % 2 == 0 {
            items.swap(i, k - 1);
        } else {
            items.swap(0, k - 1);
        }
    }
}

/// Central finite-difference Jacobian at each point; reports the largest
/// entry left over after removing the best permutation-matched diagonal.
pub fn jacobian_structure(
    map: &CandidateMap,
    points: &[Vec<f64>],
    eps: f64,
    tol: f64,
) -> Result<JacobianReport, IdentError> {
    let d = map.dimension();
    if d > 8 {
        return Err(IdentError::TooManyDims(d));
    }
    if tol <= 0.0 || eps <= 0.0 {
        return Err(IdentError::BadTolerance);
    }
    for (index, p) in points.iter().enumerate() {
        if p.iter().any(|&v| v < eps || v > 1.0 - eps) {
            return Err(IdentError::PointNearBoundary { index, eps });
        }
    }
    let perms = permutations(d);
    let mut offdiag_max = 0.0f64;
    for p in points {
        let mut jac = Array2::zeros((d, d));
        for j in 0..d {
            let mut hi = p.clone();
            hi[j] += eps;
            let mut lo = p.clone();
            lo[j] -= eps;
            let yh = map.apply(&hi);
            let yl = map.apply(&lo);
            for i in 0..d {
                jac[[i, j]] = (yh[i] - yl[i]) / (2.0 * eps);
            }
        }
        let best = perms
            .iter()
            .map(|perm| {
                let mut m = 0.0f64;
                for i in 0..d {
                    for j in 0..d {
                        if perm[i] != j {
                            m = m.max(jac[[i, j]].abs());
                        }
                    }
                }
                m
            })
            .fold(f64::INFINITY, f64::min);
        offdiag_max = offdiag_max.max(best);
    }
    Ok(JacobianReport {
        is_diagonal_up_to_permutation: offdiag_max < tol,
        offdiag_max,
    })
}

/// Coverage report for a continuous sharing distribution: factor i counts
/// as observed when two draws form distinct sets intersecting exactly in
/// {i}, or when a draw changes factor i alone.
pub fn continuous_sharing_coverage<R: Rng>(
    d: usize,
    k: usize,
    p_s: &SharingDistribution,
    n_draws: usize,
    rng: &mut R,
) -> Result<crate::pairs::SharingCoverage, IdentError> {
    if d < 2 {
        return Err(IdentError::DimensionTooSmall(d));
    }
    let draw = |rng: &mut R| -> BTreeSet<usize> {
        match p_s {
            SharingDistribution::UniformSubsets => {
                let changed: BTreeSet<usize> = index_sample(rng, d, k).into_iter().collect();
                (0..d).filter(|i| !changed.contains(i)).collect()
            }
            SharingDistribution::FixedSet(s) => s.clone(),
        }
    };
    let mut pinned = vec![0u64; d];
    let mut lone = vec![0u64; d];
    for _ in 0..n_draws {
        let s1 = draw(rng);
        let s2 = draw(rng);
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
    let all_factors_observed =
        (0..d).all(|i| pinned_rate[i] > 0.0 || lone_change_rate[i] > 0.0);
    Ok(crate::pairs::SharingCoverage {
        pinned_rate,
        lone_change_rate,
        all_factors_observed,
        n_draws,
    })
}
