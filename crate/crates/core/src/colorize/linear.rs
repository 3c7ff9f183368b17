//! Closed-form affine colorizer: each RGB channel is a least-squares affine
//! function of the input channels.

use nalgebra::{DMatrix, DVector};

use crate::colorize::adapt::quantize;
use crate::colorize::model::{check_labels, common_labels, ColorizerBackend, TrainingPair, TranslationModel};
use crate::error::{Error, Result};
use crate::imaging::{ChannelLabel, ChannelStack, RgbImage};

/// Diagonal loading of the (pixel-averaged) normal equations.
pub const RIDGE: f64 = 1e-8;
const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearColorizer {
    labels: Vec<ChannelLabel>,
    /// Per output channel: one weight per input channel, then the bias.
    /// Outputs are on the `[0, 1]` scale.
    weights: [Vec<f64>; 3],
}

impl LinearColorizer {
    pub fn from_weights(labels: Vec<ChannelLabel>, weights: [Vec<f64>; 3]) -> Result<Self> {
        let n = labels.len();
        if n == 0 || weights.iter().any(|w| w.len() != n + 1) {
            return Err(Error::Shape(format!(
                "linear colorizer over {n} channels needs {} weights per output",
                n + 1
            )));
        }
        if weights.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite colorizer weight".into()));
        }
        Ok(Self { labels, weights })
    }

    pub fn labels(&self) -> &[ChannelLabel] {
        &self.labels
    }

    pub fn weights(&self) -> &[Vec<f64>; 3] {
        &self.weights
    }

    /// Unquantized `[0, 1]`-scale output for one pixel's channel values.
    pub fn apply(&self, x: &[f64]) -> [f64; 3] {
        std::array::from_fn(|c| {
            let w = &self.weights[c];
            let n = x.len();
            let mut acc = w[n];
            for (wi, xi) in w[..n].iter().zip(x) {
                acc += wi * xi;
            }
            acc
        })
    }
}

/// Partial sums `X^T X` and `X^T Y` over one run of pixels, bias column last.
fn accumulate(stack: &ChannelStack, target: &RgbImage, range: std::ops::Range<usize>, d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xtx = vec![0.0; d * d];
    let mut xty = vec![0.0; d * 3];
    let mut x = Vec::with_capacity(d);
    for idx in range {
        x.clear();
        stack.pixel_into(idx, &mut x);
        x.push(1.0);
        let y = [0, 1, 2].map(|c| target.planes[c][idx] as f64 / 255.0);
        for i in 0..d {
            let xi = x[i];
            for j in i..d {
                xtx[i * d + j] += xi * x[j];
            }
            for c in 0..3 {
                xty[i * 3 + c] += xi * y[c];
            }
        }
    }
    (xtx, xty)
}

/// Fit the affine map by least squares over every training pixel.
pub fn fit_linear_colorizer(pairs: &[TrainingPair]) -> Result<LinearColorizer> {
    let labels = common_labels(pairs)?;
    let d = labels.len() + 1;
    let mut xtx = vec![0.0; d * d];
    let mut xty = vec![0.0; d * 3];
    let mut count = 0usize;
    for pair in pairs {
        let pixels = pair.source.height() * pair.source.width();
        if pair.source.dims() != pair.target.dims() {
            return Err(Error::Shape("training pair source and target differ in size".into()));
        }
        // Fixed chunking and in-order reduction keep the sums independent of
        // the thread count.
        let chunks = pixels.div_ceil(CHUNK);
        let partial = crate::par::map_range(chunks, |c| {
            let start = c * CHUNK;
            accumulate(&pair.source, &pair.target, start..(start + CHUNK).min(pixels), d)
        });
        for (pa, pb) in partial {
            xtx.iter_mut().zip(&pa).for_each(|(a, b)| *a += b);
            xty.iter_mut().zip(&pb).for_each(|(a, b)| *a += b);
        }
        count += pixels;
    }
    if count == 0 {
        return Err(Error::Data("training pairs contain no pixels".into()));
    }
    let m = count as f64;
    let a = DMatrix::from_fn(d, d, |i, j| {
        let v = if i <= j { xtx[i * d + j] } else { xtx[j * d + i] } / m;
        if i == j {
            v + RIDGE
        } else {
            v
        }
    });
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Numerical("normal equations are not positive definite".into()))?;
    let weights = std::array::from_fn(|c| {
        let rhs = DVector::from_fn(d, |i, _| xty[i * 3 + c] / m);
        chol.solve(&rhs).iter().copied().collect::<Vec<f64>>()
    });
    LinearColorizer::from_weights(labels, weights)
}

impl TranslationModel for LinearColorizer {
    fn input_labels(&self) -> &[ChannelLabel] {
        &self.labels
    }

    fn predict(&self, patch: &ChannelStack) -> Result<RgbImage> {
        check_labels(&self.labels, patch)?;
        let (h, w) = patch.dims();
        let mut planes: [Vec<u8>; 3] = std::array::from_fn(|_| Vec::with_capacity(h * w));
        let mut x = Vec::with_capacity(self.labels.len());
        for idx in 0..h * w {
            x.clear();
            patch.pixel_into(idx, &mut x);
            let y = self.apply(&x);
            for c in 0..3 {
                planes[c].push(quantize(y[c]));
            }
        }
        RgbImage::new(h, w, planes)
    }

    fn backend_name(&self) -> &'static str {
        "linear"
    }
}

/// Backend handle for the linear colorizer.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearBackend;

impl ColorizerBackend for LinearBackend {
    fn name(&self) -> &'static str {
        "linear"
    }

    fn fit(&self, pairs: &[TrainingPair]) -> Result<Box<dyn TranslationModel>> {
        Ok(Box::new(fit_linear_colorizer(pairs)?))
    }
}
