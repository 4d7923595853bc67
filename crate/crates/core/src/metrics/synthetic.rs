//! Synthetic representers for metric calibration: ideal axis-aligned
//! encoders, linear mixtures of them, and random rotations. These construct
//! the reference representations that the score implementations are
//! exercised against.

use ndarray::Array2;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::factor::{FactorSpace, FactorVector};
use crate::vae::DiagonalGaussian;

use super::Representer;

/// Ideal disentangled encoder: factor i lands in coordinate i, scaled to
/// [0, 1]; remaining coordinates carry zero-mean Gaussian noise.
#[derive(Debug, Clone)]
pub struct OracleRepresenter {
    space: FactorSpace,
    d_z: usize,
    noise_std: f64,
}

impl OracleRepresenter {
    pub fn new(space: FactorSpace, d_z: usize, noise_std: f64) -> Self {
        assert!(d_z >= space.num_factors());
        Self {
            space,
            d_z,
            noise_std,
        }
    }

    pub fn noiseless(space: FactorSpace, d_z: usize) -> Self {
        Self::new(space, d_z, 0.0)
    }

    /// With mild noise on the spare coordinates (the usual test setting).
    pub fn noisy(space: FactorSpace, d_z: usize) -> Self {
        Self::new(space, d_z, 0.02)
    }

    pub fn space(&self) -> &FactorSpace {
        &self.space
    }

    /// Posterior view of the oracle: tight Gaussians around the factor
    /// coordinates, used where an encoder (not just a point map) is needed.
    pub fn posterior(&self, v: &FactorVector, rng: &mut dyn RngCore) -> DiagonalGaussian {
        let mean = self.point(v, rng);
        let log_var = vec![(0.01f64).ln(); self.d_z];
        DiagonalGaussian::single(mean, log_var).expect("finite oracle posterior")
    }

    fn point(&self, v: &FactorVector, rng: &mut dyn RngCore) -> Vec<f64> {
        let d_f = self.space.num_factors();
        let cards = self.space.cardinalities();
        let mut out = vec![0.0; self.d_z];
        for i in 0..d_f {
            out[i] = v.code(i) as f64 / (cards[i] - 1) as f64;
        }
        if self.noise_std > 0.0 {
            for slot in out.iter_mut().skip(d_f) {
                let z: f64 = rng.sample(StandardNormal);
                *slot = self.noise_std * z;
            }
        }
        out
    }
}

impl Representer for OracleRepresenter {
    fn dim(&self) -> usize {
        self.d_z
    }

    fn represent(&self, v: &FactorVector, rng: &mut dyn RngCore) -> Vec<f64> {
        self.point(v, rng)
    }
}

/// Applies a fixed linear map to another representer's output; rotations
/// and rank-deficient mixes are built this way.
pub struct LinearMapRepresenter<R> {
    pub inner: R,
    /// (d_out, d_in)
    pub matrix: Array2<f64>,
}

impl<R: Representer> Representer for LinearMapRepresenter<R> {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn represent(&self, v: &FactorVector, rng: &mut dyn RngCore) -> Vec<f64> {
        let base = self.inner.represent(v, rng);
        self.matrix
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(&base).map(|(&a, &b)| a * b).sum())
            .collect()
    }
}

/// Representation that ignores the factors entirely.
#[derive(Debug, Clone)]
pub struct NoiseRepresenter {
    pub d_z: usize,
    pub std: f64,
}

impl Representer for NoiseRepresenter {
    fn dim(&self) -> usize {
        self.d_z
    }

    fn represent(&self, _v: &FactorVector, rng: &mut dyn RngCore) -> Vec<f64> {
        (0..self.d_z)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                self.std * z
            })
            .collect()
    }
}

/// Constant representation (degenerate input for pruning paths).
#[derive(Debug, Clone)]
pub struct ConstantRepresenter {
    pub d_z: usize,
    pub value: f64,
}

impl Representer for ConstantRepresenter {
    fn dim(&self) -> usize {
        self.d_z
    }

    fn represent(&self, _v: &FactorVector, _rng: &mut dyn RngCore) -> Vec<f64> {
        vec![self.value; self.d_z]
    }
}

/// Random orthogonal matrix via Gram-Schmidt on a Gaussian matrix.
pub fn random_rotation(d: usize, rng: &mut dyn RngCore) -> Array2<f64> {
    loop {
        let mut m = Array2::from_shape_fn((d, d), |_| {
            let z: f64 = rng.sample(StandardNormal);
            z
        });
        let mut ok = true;
        for i in 0..d {
            for j in 0..i {
                let dot: f64 = (0..d).map(|k| m[[i, k]] * m[[j, k]]).sum();
                for k in 0..d {
                    let sub = dot * m[[j, k]];
                    m[[i, k]] -= sub;
                }
            }
            let norm: f64 = (0..d).map(|k| m[[i, k]] * m[[i, k]]).sum::<f64>().sqrt();
            if norm < 1e-6 {
                ok = false;
                break;
            }
            for k in 0..d {
                m[[i, k]] /= norm;
            }
        }
        if ok {
            return m;
        }
    }
}

/// Plane rotation by `angle` in coordinates (i, j) of a d-dim identity.
pub fn plane_rotation(d: usize, i: usize, j: usize, angle: f64) -> Array2<f64> {
    let mut m = Array2::eye(d);
    m[[i, i]] = angle.cos();
    m[[j, j]] = angle.cos();
    m[[i, j]] = -angle.sin();
    m[[j, i]] = angle.sin();
    m
}
