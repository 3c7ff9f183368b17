use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::centroid::canonicalize_sign;
use crate::features::distance::norm;
use crate::imaging::{ChannelLabel, ChannelStack, Plane};
use crate::signal::SignalCube;

/// How a feature set was learned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnMeta {
    pub seed: u64,
    pub iterations: u32,
    pub distortion: f64,
}

/// K unit-norm time-domain shapes (the columns of the feature matrix) and the
/// cached pseudo-inverse used to read their amplitudes out of a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    centroids: Vec<Vec<f64>>,
    /// K x n, row-major.
    pinv: Vec<f64>,
    meta: LearnMeta,
}

/// Moore-Penrose pseudo-inverse of the n x K matrix whose columns are
/// `columns`, returned K x n row-major.
pub fn pseudo_inverse_columns(columns: &[Vec<f64>]) -> Result<Vec<f64>> {
    let k = columns.len();
    let n = columns.first().map(|c| c.len()).unwrap_or(0);
    if k == 0 || n == 0 {
        return Err(Error::Shape("empty feature matrix".into()));
    }
    let f = DMatrix::from_fn(n, k, |r, c| columns[c][r]);
    let svd = f.svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * (n.max(k) as f64) * f64::EPSILON;
    let pinv = svd
        .pseudo_inverse(eps)
        .map_err(|e| Error::Numerical(format!("pseudo-inverse failed: {e}")))?;
    let mut out = Vec::with_capacity(k * n);
    for r in 0..k {
        for c in 0..n {
            out.push(pinv[(r, c)]);
        }
    }
    Ok(out)
}

impl FeatureSet {
    /// Normalize and sign-canonicalize `centroids`, then cache the
    /// pseudo-inverse.
    pub fn from_centroids(mut centroids: Vec<Vec<f64>>, meta: LearnMeta) -> Result<Self> {
        let n = centroids.first().map(|c| c.len()).unwrap_or(0);
        if centroids.is_empty() || n == 0 || centroids.iter().any(|c| c.len() != n) {
            return Err(Error::Shape("centroids must be nonempty and of equal length".into()));
        }
        for (i, c) in centroids.iter_mut().enumerate() {
            let nm = norm(c);
            if !(nm > 0.0 && nm.is_finite()) {
                return Err(Error::Degenerate(format!("centroid {i} has zero norm")));
            }
            c.iter_mut().for_each(|v| *v /= nm);
            canonicalize_sign(c);
        }
        let pinv = pseudo_inverse_columns(&centroids)?;
        Ok(Self {
            centroids,
            pinv,
            meta,
        })
    }

    /// Assemble from stored parts without recomputing the pseudo-inverse.
    /// Norms are checked loosely since stored values may be single precision.
    pub fn from_parts(centroids: Vec<Vec<f64>>, pinv: Vec<f64>, meta: LearnMeta) -> Result<Self> {
        let k = centroids.len();
        let n = centroids.first().map(|c| c.len()).unwrap_or(0);
        if k == 0 || n == 0 || centroids.iter().any(|c| c.len() != n) || pinv.len() != k * n {
            return Err(Error::Shape(format!(
                "feature set parts disagree: {k} centroids of length {n}, pinv of {}",
                pinv.len()
            )));
        }
        for (i, c) in centroids.iter().enumerate() {
            if (norm(c) - 1.0).abs() > 1e-5 {
                return Err(Error::Data(format!("centroid {i} is not unit norm")));
            }
        }
        if pinv.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("pseudo-inverse contains non-finite values".into()));
        }
        Ok(Self {
            centroids,
            pinv,
            meta,
        })
    }

    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Length of each feature shape.
    pub fn n(&self) -> usize {
        self.centroids[0].len()
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    /// K x n row-major pseudo-inverse.
    pub fn pinv(&self) -> &[f64] {
        &self.pinv
    }

    pub fn meta(&self) -> LearnMeta {
        self.meta
    }

    /// Feature amplitudes `pinv * s` of one trace.
    pub fn amplitudes<T: Copy + Into<f64>>(&self, signal: &[T]) -> Vec<f64> {
        let n = self.n();
        self.pinv
            .chunks_exact(n)
            .map(|row| {
                let mut acc = 0.0;
                for (p, &s) in row.iter().zip(signal) {
                    acc += p * s.into();
                }
                acc
            })
            .collect()
    }

    /// `F * a`: the trace described by amplitudes `a`.
    pub fn synthesize(&self, amplitudes: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        for (c, &a) in self.centroids.iter().zip(amplitudes) {
            for (o, v) in out.iter_mut().zip(c) {
                *o += a * v;
            }
        }
        out
    }

    /// Dense n x K feature matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n(), self.k(), |r, c| self.centroids[c][r])
    }

    pub fn pinv_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.k(), self.n(), &self.pinv)
    }

    pub fn apply_pinv(&self, s: &DVector<f64>) -> DVector<f64> {
        self.pinv_matrix() * s
    }
}

/// One amplitude image per learned feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureImages {
    pub planes: Vec<Plane>,
}

impl FeatureImages {
    pub fn k(&self) -> usize {
        self.planes.len()
    }

    /// Planes labeled `m_f1..m_fK`, as a stack.
    pub fn to_stack(&self) -> Result<ChannelStack> {
        ChannelStack::from_channels(
            self.planes
                .iter()
                .enumerate()
                .map(|(i, p)| (ChannelLabel::Feature(i as u8 + 1), p.clone()))
                .collect(),
        )
    }
}

/// Project every pixel trace onto the feature shapes.
pub fn extract_features(cube: &SignalCube, fs: &FeatureSet) -> Result<FeatureImages> {
    if cube.n() != fs.n() {
        return Err(Error::Shape(format!(
            "cube traces have {} samples, features have {}",
            cube.n(),
            fs.n()
        )));
    }
    if fs.k() > u8::MAX as usize {
        return Err(Error::Parameter("too many features to label".into()));
    }
    let amps = crate::par::map_range(cube.pixel_count(), |idx| fs.amplitudes(cube.pixel(idx)));
    let (h, w) = (cube.height(), cube.width());
    let planes = (0..fs.k())
        .map(|i| Plane::new(h, w, amps.iter().map(|a| a[i] as f32).collect()))
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureImages { planes })
}

/// Uniform sample without replacement of the cube's nonzero traces.
///
/// The subset holds `round(fraction * eligible)` traces, in pixel order.
pub fn learning_subset(cube: &SignalCube, fraction: f64, seed: u64) -> Result<Vec<Vec<f64>>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Parameter(format!(
            "subset fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let eligible: Vec<usize> = (0..cube.pixel_count())
        .filter(|&i| cube.pixel(i).iter().any(|&v| v != 0.0))
        .collect();
    let count = (fraction * eligible.len() as f64).round() as usize;
    if count == 0 {
        return Err(Error::Parameter(format!(
            "fraction {fraction} of {} nonzero traces leaves an empty subset",
            eligible.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, eligible.len(), count).into_vec();
    picked.sort_unstable();
    Ok(picked
        .into_iter()
        .map(|i| cube.pixel_f64(eligible[i]))
        .collect())
}
