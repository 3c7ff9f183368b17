use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seeded Poisson-disk placement of elliptical blobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlobLayout {
    pub max_blobs: usize,
    pub min_radius: f64,
    pub max_radius: f64,
    /// Minimum distance between blob centers.
    pub spacing: f64,
    pub attempts: usize,
}

impl BlobLayout {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_radius > 0.0 && self.min_radius <= self.max_radius && self.max_radius.is_finite()) {
            return Err(Error::Parameter(format!(
                "blob radii must satisfy 0 < min <= max, got {} and {}",
                self.min_radius, self.max_radius
            )));
        }
        if !(self.spacing >= 0.0 && self.spacing.is_finite()) {
            return Err(Error::Parameter(format!("blob spacing must be >= 0, got {}", self.spacing)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blob {
    pub cy: f64,
    pub cx: f64,
    pub ry: f64,
    pub rx: f64,
    pub angle: f64,
    pub class: usize,
}

impl Blob {
    pub fn contains(&self, y: f64, x: f64) -> bool {
        let (s, c) = self.angle.sin_cos();
        let (dy, dx) = (y - self.cy, x - self.cx);
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.rx).powi(2) + (v / self.ry).powi(2) <= 1.0
    }
}

/// Dart throwing; accepted blobs cycle through `classes` in order.
pub fn place_blobs(layout: &BlobLayout, height: usize, width: usize, classes: &[usize], seed: u64) -> Result<Vec<Blob>> {
    layout.validate()?;
    if classes.is_empty() {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut blobs: Vec<Blob> = Vec::new();
    let min_d2 = layout.spacing * layout.spacing;
    for _ in 0..layout.attempts {
        if blobs.len() >= layout.max_blobs {
            break;
        }
        let cy = rng.random_range(0.0..height as f64);
        let cx = rng.random_range(0.0..width as f64);
        let ry = rng.random_range(layout.min_radius..=layout.max_radius);
        let rx = rng.random_range(layout.min_radius..=layout.max_radius);
        let angle = rng.random_range(0.0..std::f64::consts::PI);
        if blobs.iter().all(|b| (b.cy - cy).powi(2) + (b.cx - cx).powi(2) >= min_d2) {
            let class = classes[blobs.len() % classes.len()];
            blobs.push(Blob { cy, cx, ry, rx, angle, class });
        }
    }
    Ok(blobs)
}

/// Class of every pixel (row-major); later blobs paint over earlier ones.
pub fn class_map(blobs: &[Blob], height: usize, width: usize, background: usize) -> Vec<u8> {
    let rows = crate::par::map_range(height, |y| {
        (0..width)
            .map(|x| {
                let (py, px) = (y as f64 + 0.5, x as f64 + 0.5);
                blobs
                    .iter()
                    .rev()
                    .find(|b| {
                        let r = b.rx.max(b.ry);
                        (py - b.cy).abs() <= r && (px - b.cx).abs() <= r && b.contains(py, px)
                    })
                    .map_or(background, |b| b.class) as u8
            })
            .collect::<Vec<u8>>()
    });
    rows.concat()
}
