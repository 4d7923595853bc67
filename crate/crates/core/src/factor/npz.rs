//! Import adapter for named-array archives (zip-of-npy, the layout used by
//! the common benchmark factor datasets).
//!
//! The reader handles stored and deflate entries and the npy dtypes that
//! appear in these archives. The writer emits stored entries only; it exists
//! so fixtures and exports stay self-contained.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::DeflateDecoder;
use flate2::Crc;
use thiserror::Error;

use super::{FactorError, FactorSpace, FactorVector, GroundTruthDataset, ImageShape};

#[derive(Debug, Error)]
pub enum NpzError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("not a zip archive: {0}")]
    Zip(String),
    #[error("entry {name}: {reason}")]
    Entry { name: String, reason: String },
    #[error("malformed npy in {name}: {reason}")]
    Npy { name: String, reason: String },
    #[error("archive layout: {0}")]
    Layout(String),
    #[error("{0}")]
    Factor(#[from] FactorError),
}

#[derive(Debug, Clone)]
pub enum NpyData {
    U8(Vec<u8>),
    I32(Vec<i32>),
    I64(Vec<i64>),
    F64(Vec<f64>),
}

impl NpyData {
    pub fn len(&self) -> usize {
        match self {
            NpyData::U8(v) => v.len(),
            NpyData::I32(v) => v.len(),
            NpyData::I64(v) => v.len(),
            NpyData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn as_i64(&self, i: usize) -> i64 {
        match self {
            NpyData::U8(v) => v[i] as i64,
            NpyData::I32(v) => v[i] as i64,
            NpyData::I64(v) => v[i],
            NpyData::F64(v) => v[i] as i64,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub data: NpyData,
}

fn u16le(b: &[u8], off: usize) -> u16 {
    u16::from_le_bytes([b[off], b[off + 1]])
}

fn u32le(b: &[u8], off: usize) -> u32 {
    u32::from_le_bytes([b[off], b[off + 1], b[off + 2], b[off + 3]])
}

/// Read every `.npy` member of a zip archive, keyed by member name without
/// the extension.
pub fn read_npz(path: &Path) -> Result<BTreeMap<String, NpyArray>, NpzError> {
    let bytes = fs::read(path).map_err(|e| NpzError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    read_npz_bytes(&bytes)
}

pub fn read_npz_bytes(bytes: &[u8]) -> Result<BTreeMap<String, NpyArray>, NpzError> {
    const EOCD_SIG: u32 = 0x0605_4b50;
    const CD_SIG: u32 = 0x0201_4b50;
    const LOCAL_SIG: u32 = 0x0403_4b50;

    if bytes.len() < 22 {
        return Err(NpzError::Zip("file shorter than an empty archive".into()));
    }
    // end-of-central-directory record: scan backwards over the comment area
    let mut eocd = None;
    let lo = bytes.len().saturating_sub(22 + 65_536);
    for off in (lo..=bytes.len() - 22).rev() {
        if u32le(bytes, off) == EOCD_SIG {
            eocd = Some(off);
            break;
        }
    }
    let eocd = eocd.ok_or_else(|| NpzError::Zip("end-of-central-directory not found".into()))?;
    let entries = u16le(bytes, eocd + 10) as usize;
    let cd_offset = u32le(bytes, eocd + 16) as usize;

    let mut out = BTreeMap::new();
    let mut off = cd_offset;
    for _ in 0..entries {
        if u32le(bytes, off) != CD_SIG {
            return Err(NpzError::Zip("bad central directory signature".into()));
        }
        let method = u16le(bytes, off + 10);
        let crc = u32le(bytes, off + 16);
        let csize = u32le(bytes, off + 20) as usize;
        let usize_ = u32le(bytes, off + 24) as usize;
        let name_len = u16le(bytes, off + 28) as usize;
        let extra_len = u16le(bytes, off + 30) as usize;
        let comment_len = u16le(bytes, off + 32) as usize;
        let local_off = u32le(bytes, off + 42) as usize;
        let name = String::from_utf8_lossy(&bytes[off + 46..off + 46 + name_len]).into_owned();
        off += 46 + name_len + extra_len + comment_len;

        if u32le(bytes, local_off) != LOCAL_SIG {
            return Err(NpzError::Entry {
                name,
                reason: "bad local header signature".into(),
            });
        }
        let local_name_len = u16le(bytes, local_off + 26) as usize;
        let local_extra_len = u16le(bytes, local_off + 28) as usize;
        let data_off = local_off + 30 + local_name_len + local_extra_len;
        let compressed = &bytes[data_off..data_off + csize];

        let raw = match method {
            0 => compressed.to_vec(),
            8 => {
                let mut decoder = DeflateDecoder::new(compressed);
                let mut raw = Vec::with_capacity(usize_);
                decoder.read_to_end(&mut raw).map_err(|e| NpzError::Entry {
                    name: name.clone(),
                    reason: format!("deflate: {e}"),
                })?;
                raw
            }
            m => {
                return Err(NpzError::Entry {
                    name,
                    reason: format!("unsupported compression method {m}"),
                })
            }
        };
        if raw.len() != usize_ {
            return Err(NpzError::Entry {
                name,
                reason: format!("decompressed to {} bytes, expected {usize_}", raw.len()),
            });
        }
        let mut hasher = Crc::new();
        hasher.update(&raw);
        if hasher.sum() != crc {
            return Err(NpzError::Entry {
                name,
                reason: "crc mismatch".into(),
            });
        }

        let key = name.strip_suffix(".npy").unwrap_or(&name).to_string();
        out.insert(key.clone(), parse_npy(&key, &raw)?);
    }
    Ok(out)
}

fn parse_npy(name: &str, raw: &[u8]) -> Result<NpyArray, NpzError> {
    let err = |reason: &str| NpzError::Npy {
        name: name.to_string(),
        reason: reason.to_string(),
    };
    if raw.len() < 10 || &raw[..6] != b"\x93NUMPY" {
        return Err(err("missing magic"));
    }
    let major = raw[6];
    let (header_len, header_start) = match major {
        1 => (u16le(raw, 8) as usize, 10),
        2 | 3 => (u32le(raw, 8) as usize, 12),
        _ => return Err(err("unsupported npy version")),
    };
    let header = std::str::from_utf8(&raw[header_start..header_start + header_len])
        .map_err(|_| err("header is not utf-8"))?;
    let descr = extract_quoted(header, "descr").ok_or_else(|| err("missing descr"))?;
    if header.contains("'fortran_order': True") {
        return Err(err("fortran order not supported"));
    }
    let shape = extract_shape(header).ok_or_else(|| err("missing shape"))?;
    let count: usize = shape.iter().product();
    let body = &raw[header_start + header_len..];

    let data = match descr.as_str() {
        "|u1" | "|b1" => {
            if body.len() < count {
                return Err(err("body too short"));
            }
            NpyData::U8(body[..count].to_vec())
        }
        "<i4" => NpyData::I32(read_scalars(body, count, i32::from_le_bytes).ok_or_else(|| err("body too short"))?),
        "<i8" => NpyData::I64(read_scalars(body, count, i64::from_le_bytes).ok_or_else(|| err("body too short"))?),
        "<f8" => NpyData::F64(read_scalars(body, count, f64::from_le_bytes).ok_or_else(|| err("body too short"))?),
        other => return Err(err(&format!("unsupported dtype {other}"))),
    };
    Ok(NpyArray { shape, data })
}

fn read_scalars<T, const N: usize>(
    body: &[u8],
    count: usize,
    from_le: fn([u8; N]) -> T,
) -> Option<Vec<T>> {
    if body.len() < count * N {
        return None;
    }
    Some(
        body.chunks_exact(N)
            .take(count)
            .map(|c| from_le(c.try_into().unwrap()))
            .collect(),
    )
}

fn extract_quoted(header: &str, key: &str) -> Option<String> {
    let pat = format!("'{key}':");
    let at = header.find(&pat)? + pat.len();
    let rest = header[at..].trim_start();
    let rest = rest.strip_prefix('\'')?;
    let end = rest.find('\'')?;
    Some(rest[..end].to_string())
}

fn extract_shape(header: &str) -> Option<Vec<usize>> {
    let at = header.find("'shape':")? + "'shape':".len();
    let rest = header[at..].trim_start();
    let rest = rest.strip_prefix('(')?;
    let end = rest.find(')')?;
    let inner = &rest[..end];
    let mut shape = Vec::new();
    for part in inner.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        shape.push(part.parse().ok()?);
    }
    Some(shape)
}

/// Write arrays as an uncompressed zip-of-npy archive.
pub fn write_npz(path: &Path, arrays: &[(&str, NpyArray)]) -> Result<(), NpzError> {
    let mut file = Vec::new();
    let mut central = Vec::new();
    let mut count = 0u16;
    for (key, array) in arrays {
        let name = format!("{key}.npy");
        let body = encode_npy(array);
        let mut hasher = Crc::new();
        hasher.update(&body);
        let crc = hasher.sum();
        let local_off = file.len() as u32;

        file.extend_from_slice(&0x0403_4b50u32.to_le_bytes());
        file.extend_from_slice(&20u16.to_le_bytes()); // version needed
        file.extend_from_slice(&0u16.to_le_bytes()); // flags
        file.extend_from_slice(&0u16.to_le_bytes()); // stored
        file.extend_from_slice(&0u32.to_le_bytes()); // time+date
        file.extend_from_slice(&crc.to_le_bytes());
        file.extend_from_slice(&(body.len() as u32).to_le_bytes());
        file.extend_from_slice(&(body.len() as u32).to_le_bytes());
        file.extend_from_slice(&(name.len() as u16).to_le_bytes());
        file.extend_from_slice(&0u16.to_le_bytes()); // extra
        file.extend_from_slice(name.as_bytes());
        file.extend_from_slice(&body);

        central.extend_from_slice(&0x0201_4b50u32.to_le_bytes());
        central.extend_from_slice(&20u16.to_le_bytes()); // made by
        central.extend_from_slice(&20u16.to_le_bytes()); // needed
        central.extend_from_slice(&0u16.to_le_bytes()); // flags
        central.extend_from_slice(&0u16.to_le_bytes()); // stored
        central.extend_from_slice(&0u32.to_le_bytes()); // time+date
        central.extend_from_slice(&crc.to_le_bytes());
        central.extend_from_slice(&(body.len() as u32).to_le_bytes());
        central.extend_from_slice(&(body.len() as u32).to_le_bytes());
        central.extend_from_slice(&(name.len() as u16).to_le_bytes());
        central.extend_from_slice(&0u16.to_le_bytes()); // extra
        central.extend_from_slice(&0u16.to_le_bytes()); // comment
        central.extend_from_slice(&0u16.to_le_bytes()); // disk
        central.extend_from_slice(&0u16.to_le_bytes()); // internal attrs
        central.extend_from_slice(&0u32.to_le_bytes()); // external attrs
        central.extend_from_slice(&local_off.to_le_bytes());
        central.extend_from_slice(name.as_bytes());
        count += 1;
    }
    let cd_offset = file.len() as u32;
    file.extend_from_slice(&central);
    file.extend_from_slice(&0x0605_4b50u32.to_le_bytes());
    file.extend_from_slice(&0u16.to_le_bytes());
    file.extend_from_slice(&0u16.to_le_bytes());
    file.extend_from_slice(&count.to_le_bytes());
    file.extend_from_slice(&count.to_le_bytes());
    file.extend_from_slice(&(central.len() as u32).to_le_bytes());
    file.extend_from_slice(&cd_offset.to_le_bytes());
    file.extend_from_slice(&0u16.to_le_bytes());

    fs::write(path, file).map_err(|e| NpzError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn encode_npy(array: &NpyArray) -> Vec<u8> {
    let (descr, body): (&str, Vec<u8>) = match &array.data {
        NpyData::U8(v) => ("|u1", v.clone()),
        NpyData::I32(v) => ("<i4", v.iter().flat_map(|x| x.to_le_bytes()).collect()),
        NpyData::I64(v) => ("<i8", v.iter().flat_map(|x| x.to_le_bytes()).collect()),
        NpyData::F64(v) => ("<f8", v.iter().flat_map(|x| x.to_le_bytes()).collect()),
    };
    let shape = array
        .shape
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    let trailing = if array.shape.len() == 1 { "," } else { "" };
    let mut header = format!(
        "{{'descr': '{descr}', 'fortran_order': False, 'shape': ({shape}{trailing}), }}"
    );
    // pad so that magic + length fields + header is a multiple of 64
    while (10 + header.len() + 1) % 64 != 0 {
        header.push(' ');
    }
    header.push('\n');

    let mut out = Vec::with_capacity(10 + header.len() + body.len());
    out.extend_from_slice(b"\x93NUMPY");
    out.push(1);
    out.push(0);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&body);
    out
}

const IMAGE_KEYS: [&str; 4] = ["imgs", "images", "x", "observations"];
const FACTOR_KEYS: [&str; 4] = ["latents_classes", "factor_classes", "labels", "factors"];

/// Import a named-array archive holding an image tensor and a per-image
/// factor-class matrix.
///
/// Factor columns with a single observed value are dropped (with a warning)
/// rather than rejected, since published archives ship constant columns.
/// Returns the dataset plus human-readable warnings.
pub fn import_factor_archive(
    path: &Path,
) -> Result<(GroundTruthDataset, Vec<String>), NpzError> {
    let arrays = read_npz(path)?;
    let mut warnings = Vec::new();

    let image_key = IMAGE_KEYS
        .iter()
        .find(|k| arrays.contains_key(**k))
        .ok_or_else(|| {
            NpzError::Layout(format!(
                "no image array among keys {:?}",
                arrays.keys().collect::<Vec<_>>()
            ))
        })?;
    let factor_key = FACTOR_KEYS
        .iter()
        .find(|k| arrays.contains_key(**k))
        .ok_or_else(|| {
            NpzError::Layout(format!(
                "no factor-class array among keys {:?}",
                arrays.keys().collect::<Vec<_>>()
            ))
        })?;
    let images = &arrays[*image_key];
    let factors = &arrays[*factor_key];

    let (n, shape) = match images.shape.as_slice() {
        [n, h, w] => (
            *n,
            ImageShape {
                height: *h,
                width: *w,
                channels: 1,
            },
        ),
        [n, h, w, c] => (
            *n,
            ImageShape {
                height: *h,
                width: *w,
                channels: *c,
            },
        ),
        other => {
            return Err(NpzError::Layout(format!(
                "image array must be (N,H,W) or (N,H,W,C), found {other:?}"
            )))
        }
    };
    let mut pixels = match &images.data {
        NpyData::U8(v) => v.clone(),
        _ => return Err(NpzError::Layout("image array must be 8-bit".into())),
    };
    // binary-mask archives store {0, 1}: stretch to the full 8-bit range
    if pixels.iter().all(|&p| p <= 1) {
        for p in pixels.iter_mut() {
            *p *= 255;
        }
        warnings.push("binary image values scaled from {0,1} to {0,255}".into());
    }

    let [rows, d_raw] = match factors.shape.as_slice() {
        [r, d] => [*r, *d],
        other => {
            return Err(NpzError::Layout(format!(
                "factor array must be (N, d), found {other:?}"
            )))
        }
    };
    if rows != n {
        return Err(NpzError::Layout(format!(
            "image count {n} does not match factor rows {rows}"
        )));
    }

    // per-column cardinalities; drop columns that carry no variation
    let mut kept = Vec::new();
    let mut cards = Vec::new();
    for col in 0..d_raw {
        let mut max = 0i64;
        for row in 0..rows {
            let v = factors.data.as_i64(row * d_raw + col);
            if v < 0 {
                return Err(NpzError::Layout(format!(
                    "negative factor code {v} in column {col}"
                )));
            }
            max = max.max(v);
        }
        let card = (max + 1) as usize;
        if card < 2 {
            warnings.push(format!(
                "dropped factor column {col}: cardinality 1 carries no variation"
            ));
        } else {
            kept.push(col);
            cards.push(card);
        }
    }
    if kept.is_empty() {
        return Err(NpzError::Layout("no varying factor columns".into()));
    }
    let names: Vec<String> = kept.iter().map(|c| format!("f{c}")).collect();
    let space = FactorSpace::new(names, cards)?;
    if space.size() != n {
        return Err(NpzError::Layout(format!(
            "factor matrix does not cover the declared space: {} rows vs {} combinations",
            n,
            space.size()
        )));
    }

    // reorder rows into flat-index order, verifying full coverage
    let px = shape.num_pixels();
    if pixels.len() != n * px {
        return Err(NpzError::Layout(format!(
            "image buffer has {} bytes, expected {}",
            pixels.len(),
            n * px
        )));
    }
    let mut ordered = vec![0u8; n * px];
    let mut seen = vec![false; n];
    for row in 0..rows {
        let codes: Vec<usize> = kept
            .iter()
            .map(|&c| factors.data.as_i64(row * d_raw + c) as usize)
            .collect();
        let v = FactorVector::new(codes, &space)?;
        let index = space.index_of(&v)?;
        if seen[index] {
            return Err(NpzError::Layout(format!(
                "factor matrix does not cover the declared space: duplicate combination at row {row}"
            )));
        }
        seen[index] = true;
        ordered[index * px..(index + 1) * px].copy_from_slice(&pixels[row * px..(row + 1) * px]);
    }

    let dataset = GroundTruthDataset::from_stored(space, shape, ordered)?;
    Ok((dataset, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Fixture in the published archive layout: binary images (N, 4, 4),
    /// factor classes (N, 6) with a constant first column.
    fn fixture() -> (Vec<(&'static str, NpyArray)>, usize) {
        let cards = [1usize, 2, 3, 2, 2, 2];
        let n: usize = cards.iter().product();
        let mut factor_rows = Vec::new();
        for idx in 0..n {
            let mut rem = idx;
            let mut codes = vec![0i64; 6];
            for (j, &c) in cards.iter().enumerate().rev() {
                codes[j] = (rem % c) as i64;
                rem /= c;
            }
            factor_rows.push((idx, codes));
        }
        // shuffle rows deterministically to exercise the reorder path
        factor_rows.reverse();
        let mut imgs = Vec::with_capacity(n * 16);
        let mut classes = Vec::with_capacity(n * 6);
        for (idx, codes) in &factor_rows {
            for bit in 0..16 {
                imgs.push(((idx >> bit) & 1) as u8);
            }
            classes.extend_from_slice(codes);
        }
        (
            vec![
                (
                    "imgs",
                    NpyArray {
                        shape: vec![n, 4, 4],
                        data: NpyData::U8(imgs),
                    },
                ),
                (
                    "latents_classes",
                    NpyArray {
                        shape: vec![n, 6],
                        data: NpyData::I64(classes),
                    },
                ),
            ],
            n,
        )
    }

    #[test]
    fn npz_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fixture.npz");
        let (arrays, _) = fixture();
        write_npz(&path, &arrays).unwrap();
        let back = read_npz(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back["imgs"].shape, vec![48, 4, 4]);
        match (&back["imgs"].data, &arrays[0].1.data) {
            (NpyData::U8(a), NpyData::U8(b)) => assert_eq!(a, b),
            _ => panic!("dtype changed in round trip"),
        }
    }

    #[test]
    fn import_drops_constant_column_with_warning() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fixture.npz");
        let (arrays, n) = fixture();
        write_npz(&path, &arrays).unwrap();
        let (ds, warnings) = import_factor_archive(&path).unwrap();
        assert_eq!(ds.space().num_factors(), 5);
        assert_eq!(ds.space().cardinalities(), &[2, 3, 2, 2, 2]);
        assert_eq!(ds.size(), n);
        assert!(
            warnings.iter().any(|w| w.contains("dropped factor column 0")),
            "missing drop warning: {warnings:?}"
        );
        // binary pixels were stretched, so values come back as exactly 0 or 1
        let v = ds.space().factors_at(5).unwrap();
        let img = ds.image_flat(&v).unwrap();
        assert!(img.iter().all(|&p| p == 0.0 || p == 1.0));
        // row 5 encodes flat index 5 in its pixel bits
        let decoded: usize = (0..16).map(|b| (img[b] as usize) << b).sum();
        assert_eq!(decoded, 5);
    }

    #[test]
    fn incomplete_factor_grid_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.npz");
        let (mut arrays, _) = fixture();
        // duplicate the first factor row: coverage must fail
        if let NpyData::I64(classes) = &mut arrays[1].1.data {
            let first: Vec<i64> = classes[..6].to_vec();
            classes.splice(6..12, first);
        }
        write_npz(&path, &arrays).unwrap();
        assert!(matches!(
            import_factor_archive(&path),
            Err(NpzError::Layout(_))
        ));
    }

    #[test]
    fn deflate_entries_are_supported() {
        // compress one entry by hand and read it back
        use flate2::write::DeflateEncoder;
        use flate2::Compression;
        use std::io::Write as _;

        let array = NpyArray {
            shape: vec![3],
            data: NpyData::F64(vec![1.0, -2.5, 3.25]),
        };
        let body = encode_npy(&array);
        let mut hasher = Crc::new();
        hasher.update(&body);
        let crc = hasher.sum();
        let mut enc = DeflateEncoder::new(Vec::new(), Compression::default());
        enc.write_all(&body).unwrap();
        let compressed = enc.finish().unwrap();

        let name = b"vals.npy";
        let mut file = Vec::new();
        file.extend_from_slice(&0x0403_4b50u32.to_le_bytes());
        file.extend_from_slice(&20u16.to_le_bytes());
        file.extend_from_slice(&0u16.to_le_bytes());
        file.extend_from_slice(&8u16.to_le_bytes()); // deflate
        file.extend_from_slice(&0u32.to_le_bytes());
        file.extend_from_slice(&crc.to_le_bytes());
        file.extend_from_slice(&(compressed.len() as u32).to_le_bytes());
        file.extend_from_slice(&(body.len() as u32).to_le_bytes());
        file.extend_from_slice(&(name.len() as u16).to_le_bytes());
        file.extend_from_slice(&0u16.to_le_bytes());
        file.extend_from_slice(name);
        file.extend_from_slice(&compressed);

        let cd_off = file.len() as u32;
        let mut central = Vec::new();
        central.extend_from_slice(&0x0201_4b50u32.to_le_bytes());
        central.extend_from_slice(&20u16.to_le_bytes());
        central.extend_from_slice(&20u16.to_le_bytes());
        central.extend_from_slice(&0u16.to_le_bytes());
        central.extend_from_slice(&8u16.to_le_bytes());
        central.extend_from_slice(&0u32.to_le_bytes());
        central.extend_from_slice(&crc.to_le_bytes());
        central.extend_from_slice(&(compressed.len() as u32).to_le_bytes());
        central.extend_from_slice(&(body.len() as u32).to_le_bytes());
        central.extend_from_slice(&(name.len() as u16).to_le_bytes());
        central.extend_from_slice(&[0u8; 12]);
        central.extend_from_slice(&0u32.to_le_bytes());
        central.extend_from_slice(name);
        file.extend_from_slice(&central);
        file.extend_from_slice(&0x0605_4b50u32.to_le_bytes());
        file.extend_from_slice(&0u16.to_le_bytes());
        file.extend_from_slice(&0u16.to_le_bytes());
        file.extend_from_slice(&1u16.to_le_bytes());
        file.extend_from_slice(&1u16.to_le_bytes());
        file.extend_from_slice(&(central.len() as u32).to_le_bytes());
        file.extend_from_slice(&cd_off.to_le_bytes());
        file.extend_from_slice(&0u16.to_le_bytes());

        let arrays = read_npz_bytes(&file).unwrap();
        match &arrays["vals"].data {
            NpyData::F64(v) => assert_eq!(v, &vec![1.0, -2.5, 3.25]),
            _ => panic!("wrong dtype"),
        }
    }
}
