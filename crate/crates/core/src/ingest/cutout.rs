use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::check_coordinates;

pub const MIN_SCALE: f64 = 0.01;
pub const MAX_SCALE: f64 = 1.0;
pub const MIN_SIDE: u32 = 64;
pub const MAX_SIDE: u32 = 2048;

/// A square sky cutout centred on `(ra, dec)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoutRequest {
    pub ra: f64,
    pub dec: f64,
    /// Zoom factor.
    pub scale: f64,
    pub width: u32,
    pub height: u32,
}

impl CutoutRequest {
    pub fn square(ra: f64, dec: f64, scale: f64, side: u32) -> Self {
        CutoutRequest {
            ra,
            dec,
            scale,
            width: side,
            height: side,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_coordinates(self.ra, self.dec).map_err(|e| Error::Validation(e.to_string()))?;
        if !(MIN_SCALE..=MAX_SCALE).contains(&self.scale) {
            return Err(Error::Validation(format!(
                "scale {} outside [{MIN_SCALE}, {MAX_SCALE}]",
                self.scale
            )));
        }
        if self.width != self.height {
            return Err(Error::Validation(format!(
                "cutouts are square, got {}x{}",
                self.width, self.height
            )));
        }
        if !(MIN_SIDE..=MAX_SIDE).contains(&self.width) {
            return Err(Error::Validation(format!(
                "cutout side {} outside [{MIN_SIDE}, {MAX_SIDE}]",
                self.width
            )));
        }
        Ok(())
    }
}

/// `<base>?ra=…&dec=…&scale=…&width=…&height=…` with ra/dec to six decimals
/// and scale to two.
pub fn build_cutout_url(base_url: &str, req: &CutoutRequest) -> Result<String> {
    req.validate()?;
    Ok(format!(
        "{base_url}?ra={:.6}&dec={:.6}&scale={:.2}&width={}&height={}",
        req.ra, req.dec, req.scale, req.width, req.height
    ))
}
