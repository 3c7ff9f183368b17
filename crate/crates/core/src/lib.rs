//! Multi-channel feature extraction and virtual staining for time-resolved
//! absorption microscopy.
//!
//! The crate is organized along the processing chain:
//!
//! - [`signal`]: per-pixel time-domain traces and the conventional channels
//!   (non-radiative energy, radiative amplitude, scattering).
//! - [`features`]: sign-blind K-means over trace shapes and pseudo-inverse
//!   feature images.
//! - [`imaging`]: channel stacks, preprocessing, patching, and warping.
//! - [`metrics`]: SSIM / PSNR / RMSE with a pre-blur.
//! - [`colorize`]: multi-channel adaptation around pluggable translation
//!   models, plus the linear and adversarial backends.
//! - [`study`]: the K sweep and the exhaustive channel-combination sweep.
//! - [`phantom`]: synthetic tissue cubes with known ground truth.
//! - [`formats`]: binary file formats and CSV/PNG helpers.

pub mod colorize;
pub mod error;
pub mod features;
pub mod formats;
pub mod imaging;
pub mod metrics;
pub mod par;
pub mod phantom;
pub mod signal;
pub mod study;

pub use error::{Error, Result};
