//! Overlapping patch extraction and ramp-weighted stitching.

use crate::error::{Error, Result};
use crate::imaging::{ChannelLabel, ChannelStack, Plane, RgbImage};

/// Images that can be cut into patches and reassembled from float
/// accumulators.
pub trait Patchable: Sized {
    fn dims(&self) -> (usize, usize);
    fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Self;
    fn plane_count(&self) -> usize;
    /// Sample of plane `c` at row-major index `idx`, as `f64`.
    fn sample(&self, c: usize, idx: usize) -> f64;
    /// Build an image shaped like `template` from per-plane values.
    fn assemble(template: &Self, height: usize, width: usize, planes: Vec<Vec<f64>>) -> Self;
}

impl Patchable for Plane {
    fn dims(&self) -> (usize, usize) {
        Plane::dims(self)
    }
    fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Self {
        Plane::crop(self, y0, x0, h, w)
    }
    fn plane_count(&self) -> usize {
        1
    }
    fn sample(&self, _c: usize, idx: usize) -> f64 {
        self.data[idx] as f64
    }
    fn assemble(_t: &Self, height: usize, width: usize, mut planes: Vec<Vec<f64>>) -> Self {
        let data = planes.remove(0).into_iter().map(|v| v as f32).collect();
        Plane {
            height,
            width,
            data,
        }
    }
}

impl Patchable for ChannelStack {
    fn dims(&self) -> (usize, usize) {
        ChannelStack::dims(self)
    }
    fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Self {
        ChannelStack::crop(self, y0, x0, h, w)
    }
    fn plane_count(&self) -> usize {
        self.len()
    }
    fn sample(&self, c: usize, idx: usize) -> f64 {
        self.plane(c).data[idx] as f64
    }
    fn assemble(t: &Self, height: usize, width: usize, planes: Vec<Vec<f64>>) -> Self {
        let labels: Vec<ChannelLabel> = t.labels();
        let channels = labels
            .into_iter()
            .zip(planes)
            .map(|(l, p)| {
                let data = p.into_iter().map(|v| v as f32).collect();
                (
                    l,
                    Plane {
                        height,
                        width,
                        data,
                    },
                )
            })
            .collect();
        ChannelStack::from_channels(channels).expect("stitched planes share the template layout")
    }
}

impl Patchable for RgbImage {
    fn dims(&self) -> (usize, usize) {
        RgbImage::dims(self)
    }
    fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Self {
        RgbImage::crop(self, y0, x0, h, w)
    }
    fn plane_count(&self) -> usize {
        3
    }
    fn sample(&self, c: usize, idx: usize) -> f64 {
        self.planes[c][idx] as f64
    }
    fn assemble(_t: &Self, height: usize, width: usize, planes: Vec<Vec<f64>>) -> Self {
        let mut it = planes.into_iter().map(|p| {
            p.into_iter()
                .map(|v| (v + 0.5).floor().clamp(0.0, 255.0) as u8)
                .collect::<Vec<u8>>()
        });
        let planes = [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()];
        RgbImage {
            height,
            width,
            planes,
        }
    }
}

/// Patches cut from one image, with their origins.
#[derive(Debug, Clone)]
pub struct PatchGrid<T> {
    pub patch_size: usize,
    pub stride: usize,
    pub height: usize,
    pub width: usize,
    /// `(y, x)` of each patch's top-left corner, row-major over the grid.
    pub origins: Vec<(usize, usize)>,
    pub patches: Vec<T>,
}

/// Offsets along one axis: multiples of `stride`, the last clamped so the
/// patch ends on the edge.
pub fn axis_offsets(dim: usize, patch_size: usize, stride: usize) -> Vec<usize> {
    let count = (dim - patch_size).div_ceil(stride) + 1;
    (0..count)
        .map(|i| (i * stride).min(dim - patch_size))
        .collect()
}

fn check_params(dims: (usize, usize), patch_size: usize, stride: usize) -> Result<()> {
    if patch_size == 0 || stride == 0 || stride > patch_size {
        return Err(Error::Parameter(format!(
            "need 1 <= stride <= patch_size, got patch {patch_size} stride {stride}"
        )));
    }
    if patch_size > dims.0 || patch_size > dims.1 {
        return Err(Error::Parameter(format!(
            "patch size {patch_size} exceeds image {}x{}",
            dims.0, dims.1
        )));
    }
    Ok(())
}

/// Cut `image` into `patch_size` squares at `stride` spacing.
pub fn patchify<T: Patchable>(image: &T, patch_size: usize, stride: usize) -> Result<PatchGrid<T>> {
    let (height, width) = image.dims();
    check_params((height, width), patch_size, stride)?;
    let ys = axis_offsets(height, patch_size, stride);
    let xs = axis_offsets(width, patch_size, stride);
    let mut origins = Vec::with_capacity(ys.len() * xs.len());
    for &y in &ys {
        for &x in &xs {
            origins.push((y, x));
        }
    }
    let patches = origins
        .iter()
        .map(|&(y, x)| image.crop(y, x, patch_size, patch_size))
        .collect();
    Ok(PatchGrid {
        patch_size,
        stride,
        height,
        width,
        origins,
        patches,
    })
}

/// Triangular weight at position `i` of a `size`-long patch; positive
/// everywhere so patch edges on the image border keep full coverage.
#[inline]
pub fn ramp_weight(i: usize, size: usize) -> f64 {
    (i + 1).min(size - i) as f64
}

impl<T> PatchGrid<T> {
    /// Replace the patch payloads, keeping the geometry.
    pub fn map<U, F: FnMut(&T) -> Result<U>>(&self, mut f: F) -> Result<PatchGrid<U>> {
        let patches = self.patches.iter().map(&mut f).collect::<Result<Vec<U>>>()?;
        Ok(PatchGrid {
            patch_size: self.patch_size,
            stride: self.stride,
            height: self.height,
            width: self.width,
            origins: self.origins.clone(),
            patches,
        })
    }

    /// Accumulated blending weight per output pixel.
    pub fn weight_map(&self) -> Vec<f64> {
        let p = self.patch_size;
        let mut acc = vec![0.0; self.height * self.width];
        for &(y0, x0) in &self.origins {
            for dy in 0..p {
                let wy = ramp_weight(dy, p);
                let row = (y0 + dy) * self.width + x0;
                for dx in 0..p {
                    acc[row + dx] += wy * ramp_weight(dx, p);
                }
            }
        }
        acc
    }
}

/// Blend patches back into a full image with separable triangular weights,
/// normalized per pixel. Accumulation runs in patch order.
pub fn stitch<T: Patchable>(grid: &PatchGrid<T>) -> Result<T> {
    let first = grid
        .patches
        .first()
        .ok_or_else(|| Error::Shape("cannot stitch an empty patch grid".into()))?;
    if grid.patches.len() != grid.origins.len() {
        return Err(Error::Shape(format!(
            "{} patches for {} origins",
            grid.patches.len(),
            grid.origins.len()
        )));
    }
    let p = grid.patch_size;
    let planes = first.plane_count();
    let (h, w) = (grid.height, grid.width);
    let mut acc = vec![vec![0.0f64; h * w]; planes];
    let mut weight = vec![0.0f64; h * w];
    for (patch, &(y0, x0)) in grid.patches.iter().zip(&grid.origins) {
        if patch.dims() != (p, p) || y0 + p > h || x0 + p > w || patch.plane_count() != planes {
            return Err(Error::Shape(format!(
                "patch at ({y0}, {x0}) is inconsistent with the {h}x{w} grid"
            )));
        }
        for dy in 0..p {
            let wy = ramp_weight(dy, p);
            for dx in 0..p {
                let wt = wy * ramp_weight(dx, p);
                let out = (y0 + dy) * w + x0 + dx;
                let src = dy * p + dx;
                weight[out] += wt;
                for (c, plane) in acc.iter_mut().enumerate() {
                    plane[out] += wt * patch.sample(c, src);
                }
            }
        }
    }
    if let Some(i) = weight.iter().position(|&v| v <= 0.0) {
        return Err(Error::Numerical(format!(
            "patch grid leaves pixel ({}, {}) uncovered",
            i / w,
            i % w
        )));
    }
    for plane in acc.iter_mut() {
        for (v, wt) in plane.iter_mut().zip(&weight) {
            *v /= wt;
        }
    }
    Ok(T::assemble(first, h, w, acc))
}
