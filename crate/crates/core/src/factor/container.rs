//! Portable on-disk dataset container.
//!
//! Layout: a directory with `meta.json` (factor names, cardinalities, image
//! shape, dtype, byte order), `images.bin` (row-major 8-bit tensor
//! N x H x W x C in flat-index order) and `factors.bin` (row-major 32-bit
//! little-endian signed integers, N x d_f).

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{FactorError, FactorSpace, GroundTruthDataset, ImageShape};

#[derive(Debug, Error)]
pub enum DataIoError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed meta.json: {0}")]
    Meta(#[from] serde_json::Error),
    #[error("{0}")]
    Factor(#[from] FactorError),
    #[error("unsupported container: {0}")]
    Unsupported(String),
    #[error("{file} has {got} bytes, expected {expected}")]
    SizeMismatch {
        file: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("factor matrix does not cover the declared space: {0}")]
    Coverage(String),
}

fn io_err(path: &Path, source: std::io::Error) -> DataIoError {
    DataIoError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    schema_version: u32,
    factor_names: Vec<String>,
    cardinalities: Vec<usize>,
    /// (height, width, channels)
    image_shape: [usize; 3],
    dtype: String,
    byte_order: String,
}

pub fn save_dataset(dataset: &GroundTruthDataset, dir: &Path) -> Result<(), DataIoError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let space = dataset.space();
    let shape = dataset.shape();
    let meta = Meta {
        schema_version: 1,
        factor_names: space.names().to_vec(),
        cardinalities: space.cardinalities().to_vec(),
        image_shape: [shape.height, shape.width, shape.channels],
        dtype: "u8".into(),
        byte_order: "little".into(),
    };
    let meta_path = dir.join("meta.json");
    fs::write(&meta_path, serde_json::to_vec_pretty(&meta)?).map_err(|e| io_err(&meta_path, e))?;

    let images_path = dir.join("images.bin");
    let mut images = fs::File::create(&images_path).map_err(|e| io_err(&images_path, e))?;
    match dataset.stored_pixels() {
        Some(pixels) => images.write_all(pixels).map_err(|e| io_err(&images_path, e))?,
        None => {
            for index in 0..dataset.size() {
                let v = space.factors_at(index)?;
                images
                    .write_all(&dataset.image_u8(&v)?)
                    .map_err(|e| io_err(&images_path, e))?;
            }
        }
    }

    let factors_path = dir.join("factors.bin");
    let mut factors = fs::File::create(&factors_path).map_err(|e| io_err(&factors_path, e))?;
    let mut buf = Vec::with_capacity(dataset.size() * space.num_factors() * 4);
    for index in 0..dataset.size() {
        let v = space.factors_at(index)?;
        for &code in v.codes() {
            buf.extend_from_slice(&(code as i32).to_le_bytes());
        }
    }
    factors.write_all(&buf).map_err(|e| io_err(&factors_path, e))?;
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<GroundTruthDataset, DataIoError> {
    let meta_path = dir.join("meta.json");
    let meta_bytes = fs::read(&meta_path).map_err(|e| io_err(&meta_path, e))?;
    let meta: Meta = serde_json::from_slice(&meta_bytes)?;
    if meta.dtype != "u8" {
        return Err(DataIoError::Unsupported(format!("dtype {}", meta.dtype)));
    }
    if meta.byte_order != "little" {
        return Err(DataIoError::Unsupported(format!(
            "byte order {}",
            meta.byte_order
        )));
    }
    let space = FactorSpace::new(meta.factor_names.clone(), meta.cardinalities.clone())?;
    let shape = ImageShape {
        height: meta.image_shape[0],
        width: meta.image_shape[1],
        channels: meta.image_shape[2],
    };

    let images_path = dir.join("images.bin");
    let mut pixels = Vec::new();
    fs::File::open(&images_path)
        .map_err(|e| io_err(&images_path, e))?
        .read_to_end(&mut pixels)
        .map_err(|e| io_err(&images_path, e))?;
    let expected = space.size() * shape.num_pixels();
    if pixels.len() != expected {
        return Err(DataIoError::SizeMismatch {
            file: "images.bin",
            got: pixels.len(),
            expected,
        });
    }

    let factors_path = dir.join("factors.bin");
    let factor_bytes = fs::read(&factors_path).map_err(|e| io_err(&factors_path, e))?;
    let expected = space.size() * space.num_factors() * 4;
    if factor_bytes.len() != expected {
        return Err(DataIoError::SizeMismatch {
            file: "factors.bin",
            got: factor_bytes.len(),
            expected,
        });
    }
    // the factor matrix must enumerate the space in flat-index order
    let d = space.num_factors();
    for index in 0..space.size() {
        let expected_v = space.factors_at(index)?;
        for (j, &want) in expected_v.codes().iter().enumerate() {
            let off = (index * d + j) * 4;
            let got = i32::from_le_bytes(factor_bytes[off..off + 4].try_into().unwrap());
            if got != want as i32 {
                return Err(DataIoError::Coverage(format!(
                    "row {index} column {j}: found {got}, expected {want}"
                )));
            }
        }
    }

    Ok(GroundTruthDataset::from_stored(space, shape, pixels)?)
}
