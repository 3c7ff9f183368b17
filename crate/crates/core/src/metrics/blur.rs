use crate::error::{Error, Result};

/// Single-channel `f64` image used by the metric code.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatImage {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FloatImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Shape(format!(
                "{height}x{width} image needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }
}

/// Mirror index `i` into `0..n`, repeating the edge sample
/// (`d c b a | a b c d | d c b a`).
pub fn reflect_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m >= n { period - 1 - m } else { m }) as usize
}

/// Normalized 1-D Gaussian taps over `-radius..=radius`.
pub fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f64> {
    let mut k: Vec<f64> = (-(radius as isize)..=radius as isize)
        .map(|x| (-((x * x) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

fn convolve_rows(data: &[f64], h: usize, w: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let mut out = vec![0.0; h * w];
    crate::par::for_each_chunk_mut(&mut out, w, |y, row| {
        let src = &data[y * w..(y + 1) * w];
        for (x, o) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (t, &k) in kernel.iter().enumerate() {
                acc += k * src[reflect_index(x as isize + t as isize - r, w)];
            }
            *o = acc;
        }
    });
    out
}

fn convolve_cols(data: &[f64], h: usize, w: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let mut out = vec![0.0; h * w];
    crate::par::for_each_chunk_mut(&mut out, w, |y, row| {
        for (x, o) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (t, &k) in kernel.iter().enumerate() {
                acc += k * data[reflect_index(y as isize + t as isize - r, h) * w + x];
            }
            *o = acc;
        }
    });
    out
}

/// Separable Gaussian blur with radius `ceil(3 sigma)` and reflected edges.
/// `sigma == 0` returns the input unchanged.
pub fn gaussian_blur(image: &FloatImage, sigma: f64) -> Result<FloatImage> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Parameter(format!("blur sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(image.clone());
    }
    let radius = (3.0 * sigma).ceil() as usize;
    let kernel = gaussian_kernel(sigma, radius);
    let (h, w) = image.dims();
    let rows = convolve_rows(&image.data, h, w, &kernel);
    let data = convolve_cols(&rows, h, w, &kernel);
    FloatImage::new(h, w, data)
}
