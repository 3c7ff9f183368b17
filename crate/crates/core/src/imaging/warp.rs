//! Control-point driven non-rigid warping with a thin-plate spline.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::imaging::{ChannelStack, Plane, RgbImage};

/// One correspondence: a pixel in the source image and where it lands in the
/// destination frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlPoint {
    pub src_x: f64,
    pub src_y: f64,
    pub dst_x: f64,
    pub dst_y: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ControlPointSet {
    pub points: Vec<ControlPoint>,
}

impl ControlPointSet {
    pub fn new(points: Vec<ControlPoint>) -> Self {
        Self { points }
    }
}

fn tps_kernel(r2: f64) -> f64 {
    if r2 <= 0.0 {
        0.0
    } else {
        0.5 * r2 * r2.ln()
    }
}

/// Thin-plate spline mapping destination coordinates back to source
/// coordinates.
#[derive(Debug, Clone)]
pub struct ThinPlateSpline {
    centers: Vec<(f64, f64)>,
    // Per output axis: radial weights followed by affine (1, x, y) terms.
    coef_x: DVector<f64>,
    coef_y: DVector<f64>,
}

impl ThinPlateSpline {
    /// Fit the spline through the point pairs; `regularization` is added to
    /// the kernel diagonal (0 interpolates exactly).
    pub fn fit(points: &ControlPointSet, regularization: f64) -> Result<Self> {
        let pts = &points.points;
        let n = pts.len();
        if n < 3 {
            return Err(Error::Fit(format!(
                "thin-plate spline needs at least 3 control points, got {n}"
            )));
        }
        if pts
            .iter()
            .any(|p| ![p.src_x, p.src_y, p.dst_x, p.dst_y].iter().all(|v| v.is_finite()))
        {
            return Err(Error::Fit("control point coordinates must be finite".into()));
        }
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (&pts[i], &pts[j]);
                if (a.dst_x - b.dst_x).abs() < 1e-9 && (a.dst_y - b.dst_y).abs() < 1e-9 {
                    return Err(Error::Fit(format!(
                        "control points {i} and {j} share destination ({}, {})",
                        a.dst_x, a.dst_y
                    )));
                }
            }
        }
        if collinear(pts) {
            return Err(Error::Fit("control points are collinear".into()));
        }

        let size = n + 3;
        let mut system = DMatrix::<f64>::zeros(size, size);
        for i in 0..n {
            for j in 0..n {
                let dx = pts[i].dst_x - pts[j].dst_x;
                let dy = pts[i].dst_y - pts[j].dst_y;
                system[(i, j)] = tps_kernel(dx * dx + dy * dy);
            }
            system[(i, i)] += regularization;
            let affine = [1.0, pts[i].dst_x, pts[i].dst_y];
            for (k, &v) in affine.iter().enumerate() {
                system[(i, n + k)] = v;
                system[(n + k, i)] = v;
            }
        }
        let mut rhs_x = DVector::<f64>::zeros(size);
        let mut rhs_y = DVector::<f64>::zeros(size);
        for (i, p) in pts.iter().enumerate() {
            rhs_x[i] = p.src_x;
            rhs_y[i] = p.src_y;
        }
        let lu = system.lu();
        let coef_x = lu
            .solve(&rhs_x)
            .ok_or_else(|| Error::Fit("singular thin-plate spline system".into()))?;
        let coef_y = lu
            .solve(&rhs_y)
            .ok_or_else(|| Error::Fit("singular thin-plate spline system".into()))?;
        if coef_x.iter().chain(coef_y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Fit("thin-plate spline solve produced non-finite weights".into()));
        }
        Ok(Self {
            centers: pts.iter().map(|p| (p.dst_x, p.dst_y)).collect(),
            coef_x,
            coef_y,
        })
    }

    /// Source coordinates for destination `(x, y)`.
    pub fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let n = self.centers.len();
        let mut sx = self.coef_x[n] + self.coef_x[n + 1] * x + self.coef_x[n + 2] * y;
        let mut sy = self.coef_y[n] + self.coef_y[n + 1] * x + self.coef_y[n + 2] * y;
        for (i, &(cx, cy)) in self.centers.iter().enumerate() {
            let u = tps_kernel((x - cx).powi(2) + (y - cy).powi(2));
            sx += self.coef_x[i] * u;
            sy += self.coef_y[i] * u;
        }
        (sx, sy)
    }
}

fn collinear(pts: &[ControlPoint]) -> bool {
    let n = pts.len() as f64;
    let (mx, my) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), p| (a + p.dst_x / n, b + p.dst_y / n));
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in pts {
        let (dx, dy) = (p.dst_x - mx, p.dst_y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    // Smallest eigenvalue of the 2x2 scatter matrix relative to the largest.
    let tr = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    let hi = tr / 2.0 + disc;
    let lo = tr / 2.0 - disc;
    hi <= 0.0 || lo <= 1e-10 * hi
}

const SNAP: f64 = 1e-9;

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < SNAP {
        r
    } else {
        v
    }
}

/// Bilinear sample of a row-major grid; `None` outside `[0, w-1] x [0, h-1]`.
pub fn bilinear<F: Fn(usize) -> f64>(
    height: usize,
    width: usize,
    x: f64,
    y: f64,
    at: F,
) -> Option<f64> {
    let (x, y) = (snap(x), snap(y));
    if x < 0.0 || y < 0.0 || x > (width - 1) as f64 || y > (height - 1) as f64 {
        return None;
    }
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let v00 = at(y0 * width + x0);
    if fx == 0.0 && fy == 0.0 {
        return Some(v00);
    }
    let v01 = at(y0 * width + x1);
    let v10 = at(y1 * width + x0);
    let v11 = at(y1 * width + x1);
    let top = v00 + (v01 - v00) * fx;
    let bottom = v10 + (v11 - v10) * fx;
    Some(top + (bottom - top) * fy)
}

/// Images that can be resampled through a coordinate map.
pub trait Warpable: Sized {
    fn warp_with(&self, tps: &ThinPlateSpline) -> Self;
}

fn source_coords(tps: &ThinPlateSpline, height: usize, width: usize) -> Vec<(f64, f64)> {
    crate::par::map_range(height * width, |i| {
        tps.map((i % width) as f64, (i / width) as f64)
    })
}

fn warp_plane_coords(plane: &Plane, coords: &[(f64, f64)], fill: f32) -> Plane {
    let data = coords
        .iter()
        .map(|&(x, y)| {
            bilinear(plane.height, plane.width, x, y, |i| plane.data[i] as f64)
                .map(|v| v as f32)
                .unwrap_or(fill)
        })
        .collect();
    Plane {
        height: plane.height,
        width: plane.width,
        data,
    }
}

/// Outside samples of float planes fill with 1.0, the white level of a
/// normalized plane.
impl Warpable for Plane {
    fn warp_with(&self, tps: &ThinPlateSpline) -> Self {
        let coords = source_coords(tps, self.height, self.width);
        warp_plane_coords(self, &coords, 1.0)
    }
}

impl Warpable for ChannelStack {
    fn warp_with(&self, tps: &ThinPlateSpline) -> Self {
        let coords = source_coords(tps, self.height(), self.width());
        let channels = self
            .channels()
            .iter()
            .map(|(l, p)| (*l, warp_plane_coords(p, &coords, 1.0)))
            .collect();
        ChannelStack::from_channels(channels).expect("warp preserves stack layout")
    }
}

/// Outside samples fill with white, the H&E slide background.
impl Warpable for RgbImage {
    fn warp_with(&self, tps: &ThinPlateSpline) -> Self {
        let (h, w) = self.dims();
        let coords = source_coords(tps, h, w);
        let planes = std::array::from_fn(|c| {
            let src = &self.planes[c];
            coords
                .iter()
                .map(|&(x, y)| {
                    bilinear(h, w, x, y, |i| src[i] as f64)
                        .map(|v| (v + 0.5).floor().clamp(0.0, 255.0) as u8)
                        .unwrap_or(255)
                })
                .collect()
        });
        RgbImage {
            height: h,
            width: w,
            planes,
        }
    }
}

/// Fit an exact-interpolating thin-plate spline and resample `image` into the
/// destination frame.
pub fn warp_with_control_points<T: Warpable>(image: &T, points: &ControlPointSet) -> Result<T> {
    let tps = ThinPlateSpline::fit(points, 0.0)?;
    Ok(image.warp_with(&tps))
}
