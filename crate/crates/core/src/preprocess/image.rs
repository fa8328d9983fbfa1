use std::path::Path;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageTensorSpec {
    /// Output side length in pixels.
    pub side: usize,
    /// Scale to `[0, 1]`; otherwise values stay on the 0–255 grid.
    pub normalize: bool,
}

impl ImageTensorSpec {
    pub const CHANNELS: usize = 3;

    pub fn new(side: usize, normalize: bool) -> Result<Self> {
        let s = ImageTensorSpec { side, normalize };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.side < 8 {
            return Err(Error::Config(format!("image side {} below 8", self.side)));
        }
        Ok(())
    }
}

/// Bilinear resample of an interleaved RGB buffer to `side × side` with
/// half-pixel-centre alignment and edge clamping. Output is channel-major
/// `[3, side, side]` on the 0–255 scale, unrounded.
pub fn resize_bilinear(rgb: &[u8], width: usize, height: usize, side: usize) -> Vec<f64> {
    let map = |dst: usize, src_len: usize| -> (usize, usize, f64) {
        let scale = src_len as f64 / side as f64;
        let x = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
        let x0 = x.floor() as usize;
        let x1 = (x0 + 1).min(src_len - 1);
        (x0, x1, x - x0 as f64)
    };
    let cols: Vec<_> = (0..side).map(|x| map(x, width)).collect();
    let rows: Vec<_> = (0..side).map(|y| map(y, height)).collect();
    let px = |x: usize, y: usize, c: usize| f64::from(rgb[(y * width + x) * 3 + c]);
    let mut out = vec![0.0; 3 * side * side];
    for c in 0..3 {
        for (y, &(y0, y1, fy)) in rows.iter().enumerate() {
            for (x, &(x0, x1, fx)) in cols.iter().enumerate() {
                let top = px(x0, y0, c) * (1.0 - fx) + px(x1, y0, c) * fx;
                let bottom = px(x0, y1, c) * (1.0 - fx) + px(x1, y1, c) * fx;
                out[(c * side + y) * side + x] = top * (1.0 - fy) + bottom * fy;
            }
        }
    }
    out
}

pub fn image_to_tensor(img: &RgbImage, spec: ImageTensorSpec) -> Result<Tensor> {
    spec.validate()?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::Data("empty image".into()));
    }
    let mut values = resize_bilinear(img.as_raw(), w, h, spec.side);
    for v in &mut values {
        *v = if spec.normalize { *v / 255.0 } else { v.round() };
    }
    Tensor::new(vec![3, spec.side, spec.side], values)
}

/// Decodes a JPEG or PNG file into a `[3, S, S]` tensor in R, G, B order.
pub fn load_image(path: &Path, spec: ImageTensorSpec) -> Result<Tensor> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = image::load_from_memory(&bytes).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    image_to_tensor(&img.to_rgb8(), spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checkerboard() -> RgbImage {
        RgbImage::from_fn(2, 2, |x, y| {
            let v = if (x + y) % 2 == 0 { 0 } else { 255 };
            image::Rgb([v, v, v])
        })
    }

    #[test]
    fn gray_normalizes_to_128_over_255() {
        let img = RgbImage::from_pixel(64, 64, image::Rgb([128, 128, 128]));
        let t = image_to_tensor(&img, ImageTensorSpec::new(16, true).unwrap()).unwrap();
        assert_eq!(t.shape(), &[3, 16, 16]);
        assert!(t.data().iter().all(|&v| (v - 0.501961).abs() < 1e-6));
    }

    #[test]
    fn checkerboard_upsample_matches_hand_bilinear() {
        // Destination centres map to source coordinates -0.25, 0.25, 0.75, 1.25,
        // clamped to 0, 0.25, 0.75, 1. With P(x,y) = 255·(x + y − 2xy) on the
        // unit square the hand values follow directly.
        let coords = [0.0, 0.25, 0.75, 1.0];
        let mut expected = Vec::new();
        for &y in &coords {
            for &x in &coords {
                expected.push(255.0 * (x + y - 2.0 * x * y));
            }
        }
        let img = checkerboard();
        let got = resize_bilinear(img.as_raw(), 2, 2, 4);
        for c in 0..3 {
            for (g, e) in got[c * 16..(c + 1) * 16].iter().zip(&expected) {
                assert!((g - e).abs() < 1e-9, "{g} vs {e}");
            }
        }
    }

    #[test]
    fn unnormalized_values_are_integers() {
        let img = RgbImage::from_fn(5, 7, |x, y| image::Rgb([(x * 40) as u8, (y * 30) as u8, 200]));
        let t = image_to_tensor(&img, ImageTensorSpec::new(9, false).unwrap()).unwrap();
        assert!(t.data().iter().all(|&v| v.fract() == 0.0 && (0.0..=255.0).contains(&v)));
    }

    #[test]
    fn same_size_resize_is_identity() {
        let img = RgbImage::from_fn(8, 8, |x, y| image::Rgb([(x * 31) as u8, (y * 17) as u8, (x * y) as u8]));
        let t = image_to_tensor(&img, ImageTensorSpec::new(8, false).unwrap()).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                let p = img.get_pixel(x as u32, y as u32);
                for c in 0..3 {
                    assert_eq!(t.data()[(c * 8 + y) * 8 + x], f64::from(p[c]));
                }
            }
        }
    }

    #[test]
    fn side_below_eight_rejected() {
        assert!(ImageTensorSpec::new(4, true).is_err());
    }

    #[test]
    fn missing_and_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        let spec = ImageTensorSpec::new(8, true).unwrap();
        assert!(matches!(load_image(&dir.path().join("nope.jpg"), spec), Err(Error::Io { .. })));
        let bad = dir.path().join("bad.jpg");
        std::fs::write(&bad, b"not an image").unwrap();
        assert!(matches!(load_image(&bad, spec), Err(Error::Format { .. })));
        let good = dir.path().join("good.png");
        checkerboard().save(&good).unwrap();
        assert_eq!(load_image(&good, spec).unwrap().shape(), &[3, 8, 8]);
    }
}
