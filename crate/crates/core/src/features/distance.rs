use crate::error::{Error, Result};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Sine of the angle between two nonzero vectors.
///
/// Zero for vectors that are scaled or inverted copies of each other, one for
/// orthogonal vectors.
pub fn angular_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "vectors of length {} and {} cannot be compared",
            x.len(),
            y.len()
        )));
    }
    let (nx, ny) = (norm(x), norm(y));
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::Degenerate("angle undefined for a zero-norm vector".into()));
    }
    let cos = dot(x, y) / (nx * ny);
    Ok(sin_from_cos(cos))
}

#[inline]
pub(crate) fn sin_from_cos(cos: f64) -> f64 {
    (1.0 - cos * cos).max(0.0).sqrt()
}

/// Squared sine between two unit vectors.
#[inline]
pub(crate) fn unit_sin2(u: &[f64], v: &[f64]) -> f64 {
    let c = dot(u, v);
    (1.0 - c * c).max(0.0)
}
