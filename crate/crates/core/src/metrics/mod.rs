//! Pixel-wise image quality metrics with an optional Gaussian pre-blur.

mod blur;
mod quality;

pub use blur::{gaussian_blur, gaussian_kernel, reflect_index, FloatImage};
pub use quality::{
    evaluate_pair, evaluate_pair_with, luma, psnr, psnr_from_rmse, rgb_planes, rmse, ssim,
    ssim_color, ssim_rgb, MetricReport, SsimColor, SsimParams, DEFAULT_BLUR_SIGMA, PEAK,
};
