use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::RgbImage;
use crate::metrics::blur::{gaussian_blur, gaussian_kernel, FloatImage};

/// 8-bit peak used for PSNR.
pub const PEAK: f64 = 255.0;
/// Default pre-blur applied before scoring a prediction.
pub const DEFAULT_BLUR_SIGMA: f64 = 2.0;

/// How SSIM treats colour images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SsimColor {
    /// Score the BT.601 luma plane.
    #[default]
    Luma,
    /// Average the per-channel scores.
    PerChannel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SsimParams {
    pub k1: f64,
    pub k2: f64,
    pub window_sigma: f64,
    pub window_radius: usize,
    pub dynamic_range: f64,
    pub color: SsimColor,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            k1: 0.01,
            k2: 0.03,
            window_sigma: 1.5,
            window_radius: 5,
            dynamic_range: 255.0,
            color: SsimColor::Luma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub ssim: f64,
    /// `f64::INFINITY` for identical images.
    pub psnr: f64,
    pub rmse: f64,
    pub blur_sigma: f64,
}

fn same_dims(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!(
            "images differ in size: {}x{} vs {}x{}",
            a.0, a.1, b.0, b.1
        )));
    }
    Ok(())
}

/// `20 log10(255 / rmse)`, infinite when `rmse` is zero.
pub fn psnr_from_rmse(rmse: f64) -> f64 {
    if rmse == 0.0 {
        f64::INFINITY
    } else {
        20.0 * (PEAK / rmse).log10()
    }
}

fn rmse_planes(a: &[FloatImage; 3], b: &[FloatImage; 3]) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (pa, pb) in a.iter().zip(b) {
        for (x, y) in pa.data.iter().zip(&pb.data) {
            sum += (x - y) * (x - y);
        }
        count += pa.data.len();
    }
    (sum / count as f64).sqrt()
}

pub fn rgb_planes(img: &RgbImage) -> [FloatImage; 3] {
    let (h, w) = img.dims();
    img.to_f64_planes().map(|data| FloatImage {
        height: h,
        width: w,
        data,
    })
}

/// Root mean squared difference over every pixel and channel, 0-255 scale.
pub fn rmse(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    same_dims(a.dims(), b.dims())?;
    Ok(rmse_planes(&rgb_planes(a), &rgb_planes(b)))
}

pub fn psnr(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    rmse(a, b).map(psnr_from_rmse)
}

/// BT.601 luma of three 0-255 planes.
pub fn luma(planes: &[FloatImage; 3]) -> FloatImage {
    let data = planes[0]
        .data
        .iter()
        .zip(&planes[1].data)
        .zip(&planes[2].data)
        .map(|((r, g), b)| 0.299 * r + 0.587 * g + 0.114 * b)
        .collect();
    FloatImage {
        height: planes[0].height,
        width: planes[0].width,
        data,
    }
}

/// Correlate with `kernel` in both directions over valid positions only.
fn filter_valid(data: &[f64], h: usize, w: usize, kernel: &[f64]) -> (Vec<f64>, usize, usize) {
    let k = kernel.len();
    let (oh, ow) = (h + 1 - k, w + 1 - k);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            let mut acc = 0.0;
            for (t, &kv) in kernel.iter().enumerate() {
                acc += kv * data[y * w + x + t];
            }
            rows[y * ow + x] = acc;
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (t, &kv) in kernel.iter().enumerate() {
                acc += kv * rows[(y + t) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    (out, oh, ow)
}

/// Mean structural similarity of two grayscale images with a Gaussian window.
pub fn ssim(a: &FloatImage, b: &FloatImage, params: &SsimParams) -> Result<f64> {
    same_dims(a.dims(), b.dims())?;
    let size = 2 * params.window_radius + 1;
    let (h, w) = a.dims();
    if h < size || w < size {
        return Err(Error::Shape(format!(
            "{h}x{w} image is smaller than the {size}x{size} SSIM window"
        )));
    }
    let kernel = gaussian_kernel(params.window_sigma, params.window_radius);
    let c1 = (params.k1 * params.dynamic_range).powi(2);
    let c2 = (params.k2 * params.dynamic_range).powi(2);
    let prod = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
        a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect()
    };
    let (mu_a, _, _) = filter_valid(&a.data, h, w, &kernel);
    let (mu_b, _, _) = filter_valid(&b.data, h, w, &kernel);
    let (e_aa, _, _) = filter_valid(&prod(&|x, _| x * x), h, w, &kernel);
    let (e_bb, _, _) = filter_valid(&prod(&|_, y| y * y), h, w, &kernel);
    let (e_ab, _, _) = filter_valid(&prod(&|x, y| x * y), h, w, &kernel);
    let mut sum = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    Ok(sum / mu_a.len() as f64)
}

/// SSIM of two colour images per `params.color`.
pub fn ssim_color(a: &[FloatImage; 3], b: &[FloatImage; 3], params: &SsimParams) -> Result<f64> {
    match params.color {
        SsimColor::Luma => ssim(&luma(a), &luma(b), params),
        SsimColor::PerChannel => {
            let mut total = 0.0;
            for (pa, pb) in a.iter().zip(b) {
                total += ssim(pa, pb, params)?;
            }
            Ok(total / 3.0)
        }
    }
}

pub fn ssim_rgb(a: &RgbImage, b: &RgbImage, params: &SsimParams) -> Result<f64> {
    same_dims(a.dims(), b.dims())?;
    ssim_color(&rgb_planes(a), &rgb_planes(b), params)
}

/// Blur both images with `blur_sigma`, then score SSIM, PSNR and RMSE on
/// the blurred (unquantized) values.
pub fn evaluate_pair(pred: &RgbImage, truth: &RgbImage, blur_sigma: f64) -> Result<MetricReport> {
    evaluate_pair_with(pred, truth, blur_sigma, &SsimParams::default())
}

pub fn evaluate_pair_with(
    pred: &RgbImage,
    truth: &RgbImage,
    blur_sigma: f64,
    params: &SsimParams,
) -> Result<MetricReport> {
    same_dims(pred.dims(), truth.dims())?;
    let blur = |img: &RgbImage| -> Result<[FloatImage; 3]> {
        let [r, g, b] = rgb_planes(img);
        Ok([
            gaussian_blur(&r, blur_sigma)?,
            gaussian_blur(&g, blur_sigma)?,
            gaussian_blur(&b, blur_sigma)?,
        ])
    };
    let (p, t) = (blur(pred)?, blur(truth)?);
    let rmse = rmse_planes(&p, &t);
    Ok(MetricReport {
        ssim: ssim_color(&p, &t, params)?,
        psnr: psnr_from_rmse(rmse),
        rmse,
        blur_sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rgb(h: usize, w: usize, seed: u64) -> RgbImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RgbImage::new(h, w, std::array::from_fn(|_| (0..h * w).map(|_| rng.random()).collect())).unwrap()
    }

    fn gray(h: usize, w: usize, v: f64) -> FloatImage {
        FloatImage::new(h, w, vec![v; h * w]).unwrap()
    }

    #[test]
    fn rmse_cases() {
        let a = random_rgb(8, 8, 1);
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        assert_eq!(rmse(&RgbImage::filled(4, 4, [0; 3]), &RgbImage::filled(4, 4, [255; 3])).unwrap(), 255.0);
        let mut b = RgbImage::filled(4, 4, [100; 3]);
        let c = b.clone();
        for y in 0..2 {
            for x in 0..4 {
                b.set_pixel(y, x, [110; 3]);
            }
        }
        assert!((rmse(&b, &c).unwrap() - 50f64.sqrt()).abs() < 1e-12);
        assert!(rmse(&a, &RgbImage::filled(8, 7, [0; 3])).is_err());
    }

    #[test]
    fn psnr_matches_reported_pairs() {
        assert!((psnr_from_rmse(18.22) - 22.92).abs() < 0.01);
        assert!((psnr_from_rmse(32.71) - 17.83).abs() < 0.01);
        let a = random_rgb(4, 4, 2);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
    }

    #[test]
    fn ssim_identity_and_constants() {
        let p = SsimParams::default();
        let a = rgb_planes(&random_rgb(16, 16, 3));
        assert!((ssim(&a[0], &a[0], &p).unwrap() - 1.0).abs() < 1e-12);
        let c1 = (0.01f64 * 255.0).powi(2);
        let s = ssim(&gray(16, 16, 0.0), &gray(16, 16, 255.0), &p).unwrap();
        assert!((s - c1 / (255.0f64.powi(2) + c1)).abs() < 1e-12);
        assert!((s - 1.0e-4).abs() < 1e-6);
    }

    #[test]
    fn ssim_continuity() {
        let p = SsimParams::default();
        let a = rgb_planes(&random_rgb(16, 16, 4))[1].clone();
        for eps in [1e-2, 1e-3] {
            let b = FloatImage::new(16, 16, a.data.iter().map(|v| v + eps).collect()).unwrap();
            let s = ssim(&a, &b, &p).unwrap();
            assert!(1.0 - s < 10.0 * eps * eps && s < 1.0);
        }
    }

    #[test]
    fn ssim_window_too_large() {
        let p = SsimParams::default();
        assert!(ssim(&gray(10, 20, 1.0), &gray(10, 20, 1.0), &p).is_err());
    }

    #[test]
    fn uniform_offset_lowers_ssim() {
        let p = SsimParams::default();
        let a = rgb_planes(&random_rgb(20, 20, 5))[0].clone();
        for off in [0.5, 5.0, 40.0] {
            let b = FloatImage::new(20, 20, a.data.iter().map(|v| v + off).collect()).unwrap();
            assert!(ssim(&a, &b, &p).unwrap() < 1.0);
        }
    }

    #[test]
    fn per_channel_mode() {
        let a = random_rgb(16, 16, 6);
        let p = SsimParams { color: SsimColor::PerChannel, ..Default::default() };
        assert!((ssim_rgb(&a, &a, &p).unwrap() - 1.0).abs() < 1e-12);
        let b = random_rgb(16, 16, 7);
        let s = ssim_rgb(&a, &b, &p).unwrap();
        let planes_a = rgb_planes(&a);
        let planes_b = rgb_planes(&b);
        let manual: f64 = (0..3).map(|c| ssim(&planes_a[c], &planes_b[c], &p).unwrap()).sum::<f64>() / 3.0;
        assert_eq!(s, manual);
    }

    #[test]
    fn evaluate_identical_and_unblurred() {
        let a = random_rgb(24, 24, 8);
        let r = evaluate_pair(&a, &a, 2.0).unwrap();
        assert!((r.ssim - 1.0).abs() < 1e-12);
        assert_eq!(r.rmse, 0.0);
        assert_eq!(r.psnr, f64::INFINITY);
        let b = random_rgb(24, 24, 9);
        let r0 = evaluate_pair(&a, &b, 0.0).unwrap();
        assert_eq!(r0.rmse, rmse(&a, &b).unwrap());
        assert_eq!(r0.psnr, psnr(&a, &b).unwrap());
        assert_eq!(r0.ssim, ssim_rgb(&a, &b, &SsimParams::default()).unwrap());
        assert_eq!(r0.blur_sigma, 0.0);
    }

    #[test]
    fn blur_forgives_misregistration() {
        // Piecewise-constant scene and a copy shifted right by one pixel.
        let (h, w) = (48, 48);
        let mut truth = RgbImage::filled(h, w, [240, 230, 240]);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..12 {
            let (cy, cx, r) = (rng.random_range(4..44), rng.random_range(4..44), rng.random_range(2..6) as i64);
            let col = [rng.random(), rng.random(), rng.random()];
            for y in 0..h {
                for x in 0..w {
                    let (dy, dx) = (y as i64 - cy as i64, x as i64 - cx as i64);
                    if dy * dy + dx * dx <= r * r {
                        truth.set_pixel(y, x, col);
                    }
                }
            }
        }
        let mut shifted = truth.clone();
        for y in 0..h {
            for x in 1..w {
                shifted.set_pixel(y, x, truth.pixel(y, x - 1));
            }
        }
        let sigmas = [0.0, 0.5, 1.0, 1.5, 2.0];
        let reports: Vec<MetricReport> = sigmas.iter().map(|&s| evaluate_pair(&shifted, &truth, s).unwrap()).collect();
        for w2 in reports.windows(2) {
            assert!(w2[1].ssim > w2[0].ssim, "{reports:?}");
            assert!(w2[1].rmse < w2[0].rmse);
            assert!(w2[1].psnr > w2[0].psnr);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn ssim_symmetric_and_rmse_triangle(s1: u64, s2: u64, s3: u64) {
            let (a, b, c) = (random_rgb(12, 12, s1), random_rgb(12, 12, s2), random_rgb(12, 12, s3));
            let p = SsimParams::default();
            prop_assert_eq!(ssim_rgb(&a, &b, &p).unwrap(), ssim_rgb(&b, &a, &p).unwrap());
            let ac = rmse(&a, &c).unwrap();
            prop_assert!(ac <= rmse(&a, &b).unwrap() + rmse(&b, &c).unwrap() + 1e-9);
        }
    }
}
