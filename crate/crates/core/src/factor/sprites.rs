//! Deterministic procedural sprite renderer.
//!
//! Five factors: shape in {square, ellipse, triangle}, 6 scales, 8 x
//! positions, 8 y positions, 4 intensity levels (4608 combinations). All
//! geometry is integer arithmetic so rendering is bit-exact, and shapes
//! never touch the frame border, which keeps the factor-to-image map
//! injective: translation, scale, shape and intensity each leave a visible
//! footprint.

use ndarray::Array3;

use super::{FactorError, FactorSpace, FactorVector, GroundTruthDataset};

/// Rendered resolution; the 32 px variant is the desk-scale default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpriteSize {
    S32,
    S64,
}

impl SpriteSize {
    pub fn pixels(self) -> usize {
        match self {
            SpriteSize::S32 => 32,
            SpriteSize::S64 => 64,
        }
    }

    /// Geometry multiplier relative to the 32 px layout.
    fn unit(self) -> i64 {
        match self {
            SpriteSize::S32 => 1,
            SpriteSize::S64 => 2,
        }
    }
}

/// Intensity levels chosen so that u8 storage divides back to exact
/// fractions: 102/255 = 0.4, 153/255 = 0.6, 204/255 = 0.8, 255/255 = 1.0.
const INTENSITY: [u8; 4] = [102, 153, 204, 255];

pub fn toy_sprites_space() -> FactorSpace {
    FactorSpace::new(
        vec!["shape", "scale", "pos_x", "pos_y", "intensity"],
        vec![3, 6, 8, 8, 4],
    )
    .expect("fixed space is valid")
}

/// The procedural sprite dataset at the given resolution.
pub fn toy_sprites(size: SpriteSize) -> GroundTruthDataset {
    GroundTruthDataset::from_sprites(size)
}

/// Render one sprite for the fixed toy-sprites space.
///
/// Fails if `space` is not the toy-sprites space.
pub fn render_toy_sprites(
    space: &FactorSpace,
    v: &FactorVector,
) -> Result<Array3<f64>, FactorError> {
    let expected = toy_sprites_space();
    if space != &expected {
        return Err(FactorError::WrongSpace(
            "render_toy_sprites requires the fixed 5-factor sprite space".into(),
        ));
    }
    space.validate(v)?;
    let px = SpriteSize::S32.pixels();
    let raw = render_sprite(SpriteSize::S32, v.codes());
    let flat: Vec<f64> = raw.iter().map(|&b| b as f64 / 255.0).collect();
    Ok(Array3::from_shape_vec((px, px, 1), flat).expect("shape matches"))
}

/// Integer-exact rasterization; codes must already be validated.
pub(crate) fn render_sprite(size: SpriteSize, codes: &[usize]) -> Vec<u8> {
    let (shape, scale, pos_x, pos_y, intensity) =
        (codes[0], codes[1], codes[2], codes[3], codes[4]);
    let u = size.unit();
    let px = size.pixels();
    // half extent 2..=7 (times unit), centers 8, 10, .., 22 (times unit)
    let hs = (2 + scale as i64) * u;
    let cx = (8 + 2 * pos_x as i64) * u;
    let cy = (8 + 2 * pos_y as i64) * u;
    let value = INTENSITY[intensity];

    let mut img = vec![0u8; px * px];
    for row in 0..px as i64 {
        let dy = row - cy;
        if dy < -hs || dy > hs {
            continue;
        }
        for col in 0..px as i64 {
            let dx = col - cx;
            if dx < -hs || dx > hs {
                continue;
            }
            let inside = match shape {
                // square: the full bounding box
                0 => true,
                // ellipse with 0.7 vertical axis ratio: dx^2/hs^2 + dy^2/(0.49 hs^2) <= 1
                1 => 49 * dx * dx + 100 * dy * dy <= 49 * hs * hs,
                // upward triangle, apex at dy = -hs
                2 => 2 * dx.abs() <= dy + hs,
                _ => unreachable!("shape code validated"),
            };
            if inside {
                img[(row * px as i64 + col) as usize] = value;
            }
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn rendering_is_deterministic() {
        let ds = toy_sprites(SpriteSize::S32);
        let v = FactorVector::new(vec![0, 5, 3, 3, 3], ds.space()).unwrap();
        let a = ds.image_u8(&v).unwrap();
        let b = ds.image_u8(&v).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn large_bright_square_near_center() {
        let ds = toy_sprites(SpriteSize::S32);
        let v = FactorVector::new(vec![0, 5, 3, 3, 3], ds.space()).unwrap();
        let img = ds.image_u8(&v).unwrap();
        // brightest level present
        assert_eq!(img.iter().max(), Some(&255));
        // the square covers the central pixel block: center (14, 14), half extent 7
        for row in 7..=21usize {
            for col in 7..=21usize {
                assert_eq!(img[row * 32 + col], 255, "pixel ({row},{col})");
            }
        }
        // area matches a 15x15 square exactly
        assert_eq!(img.iter().filter(|&&p| p > 0).count(), 15 * 15);
    }

    #[test]
    fn all_4608_images_pairwise_distinct() {
        // exhaustive render + hash-set check
        let ds = toy_sprites(SpriteSize::S32);
        let mut seen = HashSet::new();
        for index in 0..ds.size() {
            let v = ds.space().factors_at(index).unwrap();
            let img = ds.image_u8(&v).unwrap();
            assert!(seen.insert(img), "duplicate image at index {index}");
        }
        assert_eq!(seen.len(), 4608);
    }

    #[test]
    fn x_translation_only_touches_the_shape_rows() {
        // pixel-diff localization oracle: moving pos_x leaves rows outside
        // the sprite's vertical band untouched
        let ds = toy_sprites(SpriteSize::S32);
        let a = ds
            .image_u8(&FactorVector::new(vec![0, 0, 0, 0, 0], ds.space()).unwrap())
            .unwrap();
        let b = ds
            .image_u8(&FactorVector::new(vec![0, 0, 1, 0, 0], ds.space()).unwrap())
            .unwrap();
        assert_ne!(a, b);
        // scale 0 -> half extent 2, pos_y 0 -> center row 8: band rows 6..=10
        for row in 0..32usize {
            let row_differs = (0..32).any(|col| a[row * 32 + col] != b[row * 32 + col]);
            let in_band = (6..=10).contains(&row);
            assert_eq!(
                row_differs, in_band,
                "row {row}: differs={row_differs}, in_band={in_band}"
            );
        }
    }

    #[test]
    fn wrong_space_is_rejected() {
        let other = FactorSpace::new(vec!["a", "b"], vec![3, 6]).unwrap();
        let v = FactorVector::new(vec![0, 0], &other).unwrap();
        assert!(matches!(
            render_toy_sprites(&other, &v),
            Err(FactorError::WrongSpace(_))
        ));
    }

    #[test]
    fn sprite_64_doubles_geometry() {
        let ds = toy_sprites(SpriteSize::S64);
        assert_eq!(ds.shape().height, 64);
        let v = FactorVector::new(vec![0, 5, 3, 3, 3], ds.space()).unwrap();
        let img = ds.image_u8(&v).unwrap();
        assert_eq!(img.len(), 64 * 64);
        // half extent 14 around center (28, 28): a 29x29 square
        assert_eq!(img.iter().filter(|&&p| p > 0).count(), 29 * 29);
    }

    #[test]
    fn materialize_preserves_images() {
        let ds = toy_sprites(SpriteSize::S32);
        let stored = ds.materialize();
        for index in [0usize, 17, 4607, 1234] {
            let v = ds.space().factors_at(index).unwrap();
            assert_eq!(ds.image_u8(&v).unwrap(), stored.image_u8(&v).unwrap());
        }
    }
}
