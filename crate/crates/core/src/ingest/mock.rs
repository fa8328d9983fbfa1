//! An offline stand-in for the catalog and cutout services.
//!
//! Galaxies render as extended elliptical blobs, stars as compact white
//! points and quasars as compact bluish points. Catalog features follow
//! rough class-dependent magnitudes, colours and redshifts.

use image::codecs::jpeg::JpegEncoder;
use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::preprocess::{write_catalog, CatalogRecord, Class};

use super::transport::Transport;

pub const MOCK_SCHEME: &str = "mock://";

pub fn is_mock_url(url: &str) -> bool {
    url.starts_with(MOCK_SCHEME)
}

pub struct MockSky {
    records: Vec<CatalogRecord>,
    seed: u64,
}

fn normal(rng: &mut ChaCha8Rng, mean: f64, sd: f64) -> f64 {
    Normal::new(mean, sd).expect("positive sd").sample(rng)
}

fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

/// Class for the i-th synthetic object: 40% galaxies, 10% quasars, 50% stars.
fn synthetic_class(i: usize) -> Class {
    match i % 10 {
        0..=3 => Class::Galaxy,
        4 => Class::Qso,
        _ => Class::Star,
    }
}

impl MockSky {
    pub fn new(records: Vec<CatalogRecord>, seed: u64) -> Self {
        MockSky { records, seed }
    }

    pub fn synthetic(n: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut records = Vec::with_capacity(n);
        for i in 0..n {
            let class = synthetic_class(i);
            // r magnitude, colours u−g, g−r, r−i, i−z, redshift
            let (r, colours, z) = match class {
                Class::Galaxy => (17.5, [1.6, 0.8, 0.4, 0.3], normal(&mut rng, 0.1, 0.04).max(0.01)),
                Class::Qso => (18.5, [0.2, 0.2, 0.15, 0.05], normal(&mut rng, 1.5, 0.5).max(0.3)),
                Class::Star => (17.0, [1.2, 0.5, 0.2, 0.1], normal(&mut rng, 0.0, 0.0005)),
            };
            let r = normal(&mut rng, r, 0.8);
            let c: Vec<f64> = colours.iter().map(|&m| normal(&mut rng, m, 0.15)).collect();
            let g = r + c[1];
            let u = g + c[0];
            let i_mag = r - c[2];
            let z_mag = i_mag - c[3];
            let ra = round6(rng.gen_range(0.0..359.0));
            let dec = round6(rng.gen_range(-60.0..60.0));
            records.push(CatalogRecord::new(format!("mock{i:05}"), ra, dec, [u, g, r, i_mag, z_mag, z], class)?);
        }
        Ok(MockSky { records, seed })
    }

    pub fn records(&self) -> &[CatalogRecord] {
        &self.records
    }

    /// Deterministic cutout of the `index`-th object.
    pub fn render(&self, index: usize, side: u32) -> RgbImage {
        let rec = &self.records[index];
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let s = f64::from(side);
        let cx = s / 2.0 + rng.gen_range(-s / 20.0..=s / 20.0);
        let cy = s / 2.0 + rng.gen_range(-s / 20.0..=s / 20.0);
        let point = (s / 40.0).max(1.0);
        let (sx, sy, amp, colour) = match rec.label {
            Class::Galaxy => (s / 8.0, s / 12.0, 170.0, [1.0, 0.8, 0.6]),
            Class::Qso => (point, point, 230.0, [0.6, 0.7, 1.0]),
            Class::Star => (point, point, 250.0, [1.0, 1.0, 0.95]),
        };
        let theta: f64 = rng.gen_range(0.0..std::f64::consts::PI);
        let (sin, cos) = theta.sin_cos();
        let noise = Normal::new(12.0, 5.0).expect("positive sd");
        RgbImage::from_fn(side, side, |x, y| {
            let dx = f64::from(x) + 0.5 - cx;
            let dy = f64::from(y) + 0.5 - cy;
            let u = dx * cos + dy * sin;
            let v = -dx * sin + dy * cos;
            let profile = amp * (-0.5 * ((u / sx).powi(2) + (v / sy).powi(2))).exp();
            let mut px = [0u8; 3];
            for (c, p) in px.iter_mut().enumerate() {
                let value = noise.sample(&mut rng) + profile * colour[c];
                *p = value.round().clamp(0.0, 255.0) as u8;
            }
            image::Rgb(px)
        })
    }

    pub fn render_jpeg(&self, index: usize, side: u32) -> Result<Vec<u8>> {
        let img = self.render(index, side);
        let mut out = Vec::new();
        JpegEncoder::new_with_quality(&mut out, 92)
            .encode_image(&img)
            .map_err(|e| Error::Data(format!("jpeg encoding: {e}")))?;
        Ok(out)
    }

    fn find(&self, ra: f64, dec: f64) -> Option<usize> {
        self.records
            .iter()
            .position(|r| (r.ra - ra).abs() < 1e-6 && (r.dec - dec).abs() < 1e-6)
    }
}

fn query_value<'a>(url: &'a str, key: &str) -> Option<&'a str> {
    let (_, query) = url.split_once('?')?;
    query
        .split('&')
        .filter_map(|kv| kv.split_once('='))
        .find(|(k, _)| *k == key)
        .map(|(_, v)| v)
}

impl Transport for MockSky {
    /// A URL carrying `cmd=` returns the whole catalog as CSV; anything else
    /// is treated as a cutout request.
    fn get(&self, url: &str) -> Result<Vec<u8>> {
        if query_value(url, "cmd").is_some() {
            return Ok(write_catalog(&self.records)?.into_bytes());
        }
        let num = |key: &str| -> Result<f64> {
            query_value(url, key)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Transport(format!("{url}: missing or bad '{key}'")))
        };
        let (ra, dec, width) = (num("ra")?, num("dec")?, num("width")?);
        let index = self
            .find(ra, dec)
            .ok_or_else(|| Error::Transport(format!("no mock object at ra={ra} dec={dec}")))?;
        self.render_jpeg(index, width as u32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{build_cutout_url, CutoutRequest};
    use crate::preprocess::read_catalog;

    #[test]
    fn catalog_round_trips_through_csv() {
        let sky = MockSky::synthetic(20, 3).unwrap();
        let bytes = sky.get("mock://catalog?cmd=SELECT&format=csv").unwrap();
        assert_eq!(read_catalog(bytes.as_slice()).unwrap(), sky.records());
    }

    #[test]
    fn cutout_is_deterministic_jpeg() {
        let sky = MockSky::synthetic(5, 3).unwrap();
        let r = &sky.records()[2];
        let url = build_cutout_url("mock://cutout", &CutoutRequest::square(r.ra, r.dec, 0.1, 64)).unwrap();
        let a = sky.get(&url).unwrap();
        assert_eq!(a, sky.get(&url).unwrap());
        let img = image::load_from_memory(&a).unwrap();
        assert_eq!((img.width(), img.height()), (64, 64));
    }

    #[test]
    fn galaxy_is_more_extended_than_star() {
        let sky = MockSky::synthetic(10, 1).unwrap();
        let bright = |i: usize| {
            sky.render(i, 64)
                .pixels()
                .filter(|p| p[0] > 60)
                .count()
        };
        assert_eq!(sky.records()[0].label, Class::Galaxy);
        assert_eq!(sky.records()[5].label, Class::Star);
        assert!(bright(0) > 4 * bright(5));
    }

    #[test]
    fn unknown_position() {
        let sky = MockSky::synthetic(3, 1).unwrap();
        assert!(matches!(
            sky.get("mock://c?ra=1.000000&dec=2.000000&scale=0.10&width=64&height=64"),
            Err(Error::Transport(_))
        ));
    }
}
