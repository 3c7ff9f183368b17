//! Matching an N-channel source to the 3-channel RGB target.
//!
//! For training, the target's last channel (B) is repeated until the target
//! is as wide as the source. At inference the extra channels are dropped.

use crate::error::{Error, Result};
use crate::imaging::{Plane, RgbImage};

/// `[0, 1]` float to 8 bits, clamped and rounded half up.
#[inline]
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

/// `(R, G, B, B, ..., B)` as `n` planes scaled to `[0, 1]`.
pub fn expand_target(rgb: &RgbImage, n: usize) -> Result<Vec<Plane>> {
    if n < 3 {
        return Err(Error::Parameter(format!(
            "target expansion needs at least 3 channels, got {n}"
        )));
    }
    let (h, w) = rgb.dims();
    let scaled: Vec<Plane> = rgb
        .planes
        .iter()
        .map(|p| Plane {
            height: h,
            width: w,
            data: p.iter().map(|&v| (v as f64 / 255.0) as f32).collect(),
        })
        .collect();
    let mut out = scaled.clone();
    while out.len() < n {
        out.push(scaled[2].clone());
    }
    Ok(out)
}

/// Keep the first three planes and quantize them to RGB.
pub fn collapse_output(planes: &[Plane]) -> Result<RgbImage> {
    if planes.len() < 3 {
        return Err(Error::Parameter(format!(
            "output collapse needs at least 3 channels, got {}",
            planes.len()
        )));
    }
    let (h, w) = planes[0].dims();
    if planes[..3].iter().any(|p| p.dims() != (h, w)) {
        return Err(Error::Shape("output planes differ in size".into()));
    }
    let rgb = std::array::from_fn(|c| planes[c].data.iter().map(|&v| quantize(v as f64)).collect());
    RgbImage::new(h, w, rgb)
}
