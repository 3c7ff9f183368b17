use crate::error::{Error, Result};
use crate::imaging::Plane;

/// Result of [`preprocess`].
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub plane: Plane,
    /// Set when the clip bounds coincided and the plane was mapped to zeros.
    pub constant: bool,
}

/// Quantile with linear interpolation between order statistics of `sorted`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Saturate the lowest and highest `clip_fraction` of values, stretch to
/// `[0, 1]`, and optionally reverse (`v -> 1 - v`).
pub fn preprocess(plane: &Plane, clip_fraction: f64, invert: bool) -> Result<Preprocessed> {
    if !(0.0..0.5).contains(&clip_fraction) {
        return Err(Error::Parameter(format!(
            "clip_fraction must lie in [0, 0.5), got {clip_fraction}"
        )));
    }
    if plane.data.is_empty() {
        return Err(Error::Shape("cannot preprocess an empty plane".into()));
    }
    if plane.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("plane contains non-finite values".into()));
    }
    let mut sorted = plane.to_f64();
    sorted.sort_by(f64::total_cmp);
    let low = quantile_sorted(&sorted, clip_fraction);
    let high = quantile_sorted(&sorted, 1.0 - clip_fraction);
    if high <= low {
        log::warn!("constant plane ({low}); normalized to zeros");
        return Ok(Preprocessed {
            plane: Plane::filled(plane.height, plane.width, 0.0),
            constant: true,
        });
    }
    let span = high - low;
    let data = plane
        .data
        .iter()
        .map(|&v| {
            let u = ((v as f64).clamp(low, high) - low) / span;
            let u = if invert { 1.0 - u } else { u };
            u as f32
        })
        .collect();
    Ok(Preprocessed {
        plane: Plane::new(plane.height, plane.width, data)?,
        constant: false,
    })
}
