//! Ground-truth-factor datasets: factor spaces, a deterministic procedural
//! sprite renderer, an on-disk container, and an import adapter for
//! named-array archives.

mod container;
mod npz;
mod sprites;

pub use container::{load_dataset, save_dataset, DataIoError};
pub use npz::{import_factor_archive, read_npz, write_npz, NpyArray, NpyData, NpzError};
pub use sprites::{render_toy_sprites, toy_sprites, toy_sprites_space, SpriteSize};

use std::sync::Arc;

use ndarray::{Array1, Array3};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FactorError {
    #[error("factor names and cardinalities have different lengths ({names} vs {cards})")]
    MismatchedLengths { names: usize, cards: usize },
    #[error("a factor space needs at least one factor")]
    Empty,
    #[error("factor {index} has cardinality {cardinality}; every factor needs at least 2 values")]
    CardinalityTooSmall { index: usize, cardinality: usize },
    #[error("factor vector has {got} codes, space has {expected} factors")]
    WrongLength { got: usize, expected: usize },
    #[error("code {code} out of range for factor {index} (cardinality {cardinality})")]
    CodeOutOfRange {
        index: usize,
        code: usize,
        cardinality: usize,
    },
    #[error("flat index {index} out of range for dataset of size {size}")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("sample count must be at least 1")]
    EmptySample,
    #[error("dataset does not use the expected factor space: {0}")]
    WrongSpace(String),
}

/// Names and cardinalities of the ground-truth factors of variation,
/// with a row-major bijection between factor vectors and flat indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorSpace {
    names: Vec<String>,
    cardinalities: Vec<usize>,
}

impl FactorSpace {
    pub fn new<S: Into<String>>(
        names: Vec<S>,
        cardinalities: Vec<usize>,
    ) -> Result<Self, FactorError> {
        if names.len() != cardinalities.len() {
            return Err(FactorError::MismatchedLengths {
                names: names.len(),
                cards: cardinalities.len(),
            });
        }
        if names.is_empty() {
            return Err(FactorError::Empty);
        }
        for (index, &cardinality) in cardinalities.iter().enumerate() {
            if cardinality < 2 {
                return Err(FactorError::CardinalityTooSmall { index, cardinality });
            }
        }
        Ok(Self {
            names: names.into_iter().map(Into::into).collect(),
            cardinalities,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    /// Number of factors d_f.
    pub fn num_factors(&self) -> usize {
        self.cardinalities.len()
    }

    /// Total number of distinct factor vectors (product of cardinalities).
    pub fn size(&self) -> usize {
        self.cardinalities.iter().product()
    }

    pub fn validate(&self, v: &FactorVector) -> Result<(), FactorError> {
        if v.codes.len() != self.num_factors() {
            return Err(FactorError::WrongLength {
                got: v.codes.len(),
                expected: self.num_factors(),
            });
        }
        for (index, (&code, &cardinality)) in
            v.codes.iter().zip(&self.cardinalities).enumerate()
        {
            if code >= cardinality {
                return Err(FactorError::CodeOutOfRange {
                    index,
                    code,
                    cardinality,
                });
            }
        }
        Ok(())
    }

    /// Row-major flat index of a factor vector.
    pub fn index_of(&self, v: &FactorVector) -> Result<usize, FactorError> {
        self.validate(v)?;
        let mut index = 0usize;
        for (&code, &cardinality) in v.codes.iter().zip(&self.cardinalities) {
            index = index * cardinality + code;
        }
        Ok(index)
    }

    /// Inverse of [`index_of`](Self::index_of).
    pub fn factors_at(&self, index: usize) -> Result<FactorVector, FactorError> {
        if index >= self.size() {
            return Err(FactorError::IndexOutOfRange {
                index,
                size: self.size(),
            });
        }
        let mut rem = index;
        let mut codes = vec![0usize; self.num_factors()];
        for (slot, &cardinality) in codes.iter_mut().zip(&self.cardinalities).rev() {
            *slot = rem % cardinality;
            rem /= cardinality;
        }
        FactorVector::new(codes, self)
    }

    /// `n` factor vectors with coordinates drawn independently and uniformly
    /// over each factor's range.
    pub fn sample_uniform<R: Rng>(
        &self,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<FactorVector>, FactorError> {
        if n == 0 {
            return Err(FactorError::EmptySample);
        }
        Ok((0..n).map(|_| self.sample_one(rng)).collect())
    }

    pub fn sample_one<R: Rng>(&self, rng: &mut R) -> FactorVector {
        FactorVector {
            codes: self
                .cardinalities
                .iter()
                .map(|&c| rng.random_range(0..c))
                .collect(),
        }
    }
}

/// One assignment of a code to every factor of a space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FactorVector {
    codes: Vec<usize>,
}

impl FactorVector {
    pub fn new(codes: Vec<usize>, space: &FactorSpace) -> Result<Self, FactorError> {
        let v = Self { codes };
        space.validate(&v)?;
        Ok(v)
    }

    /// Construct without range checks; callers must know the codes are valid.
    pub fn from_codes(codes: Vec<usize>) -> Self {
        Self { codes }
    }

    pub fn codes(&self) -> &[usize] {
        &self.codes
    }

    pub fn code(&self, factor: usize) -> usize {
        self.codes[factor]
    }

    pub(crate) fn set_code(&mut self, factor: usize, code: usize) {
        self.codes[factor] = code;
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Number of coordinates in which the two vectors differ.
    pub fn hamming(&self, other: &FactorVector) -> usize {
        self.codes
            .iter()
            .zip(&other.codes)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// Image dimensions in (height, width, channels) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl ImageShape {
    pub fn num_pixels(&self) -> usize {
        self.height * self.width * self.channels
    }
}

#[derive(Debug, Clone)]
enum ImageSource {
    /// Procedural sprite renderer; images are rendered on demand.
    Sprites(SpriteSize),
    /// Materialized 8-bit pixels, N x H x W x C in flat-index order.
    Stored(Arc<Vec<u8>>),
}

/// A dataset where every observation is a deterministic function of its
/// ground-truth factor vector.
///
/// Rendering the same factor vector twice yields bit-identical images, and
/// distinct factor vectors yield distinct images.
#[derive(Debug, Clone)]
pub struct GroundTruthDataset {
    space: FactorSpace,
    shape: ImageShape,
    source: ImageSource,
}

impl GroundTruthDataset {
    pub(crate) fn from_sprites(size: SpriteSize) -> Self {
        let px = size.pixels();
        Self {
            space: toy_sprites_space(),
            shape: ImageShape {
                height: px,
                width: px,
                channels: 1,
            },
            source: ImageSource::Sprites(size),
        }
    }

    /// Wrap stored 8-bit pixel data (length must equal size * pixels).
    pub fn from_stored(
        space: FactorSpace,
        shape: ImageShape,
        pixels: Vec<u8>,
    ) -> Result<Self, FactorError> {
        if pixels.len() != space.size() * shape.num_pixels() {
            return Err(FactorError::WrongSpace(format!(
                "pixel buffer length {} does not match size {} x {} pixels",
                pixels.len(),
                space.size(),
                shape.num_pixels()
            )));
        }
        Ok(Self {
            space,
            shape,
            source: ImageSource::Stored(Arc::new(pixels)),
        })
    }

    pub fn space(&self) -> &FactorSpace {
        &self.space
    }

    pub fn shape(&self) -> ImageShape {
        self.shape
    }

    pub fn size(&self) -> usize {
        self.space.size()
    }

    /// Raw 8-bit pixels (H*W*C, row-major) for a factor vector.
    pub fn image_u8(&self, v: &FactorVector) -> Result<Vec<u8>, FactorError> {
        self.space.validate(v)?;
        match &self.source {
            ImageSource::Sprites(size) => Ok(sprites::render_sprite(*size, v.codes())),
            ImageSource::Stored(data) => {
                let n = self.shape.num_pixels();
                let index = self.space.index_of(v)?;
                Ok(data[index * n..(index + 1) * n].to_vec())
            }
        }
    }

    /// Flattened image with pixel values in [0, 1].
    pub fn image_flat(&self, v: &FactorVector) -> Result<Array1<f64>, FactorError> {
        let raw = self.image_u8(v)?;
        Ok(Array1::from_iter(raw.iter().map(|&b| b as f64 / 255.0)))
    }

    /// Image as an (H, W, C) array with pixel values in [0, 1].
    pub fn image(&self, v: &FactorVector) -> Result<Array3<f64>, FactorError> {
        let flat = self.image_flat(v)?;
        Ok(flat
            .into_shape_with_order((self.shape.height, self.shape.width, self.shape.channels))
            .expect("pixel count matches shape"))
    }

    /// Pre-render every image into memory (no-op for stored datasets).
    pub fn materialize(&self) -> Self {
        match &self.source {
            ImageSource::Stored(_) => self.clone(),
            ImageSource::Sprites(size) => {
                let n = self.shape.num_pixels();
                let mut pixels = Vec::with_capacity(self.size() * n);
                for index in 0..self.size() {
                    let v = self.space.factors_at(index).expect("index in range");
                    pixels.extend_from_slice(&sprites::render_sprite(*size, v.codes()));
                }
                Self {
                    space: self.space.clone(),
                    shape: self.shape,
                    source: ImageSource::Stored(Arc::new(pixels)),
                }
            }
        }
    }

    pub(crate) fn stored_pixels(&self) -> Option<&[u8]> {
        match &self.source {
            ImageSource::Stored(data) => Some(data),
            ImageSource::Sprites(_) => None,
        }
    }
}
