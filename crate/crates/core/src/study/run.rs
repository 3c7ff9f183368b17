use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::colorize::{virtual_stain, ColorizerBackend, TrainingPair};
use crate::error::{Error, Result};
use crate::features::{extract_features, kmeans_fit, learning_subset, FeatureSet, KMeansConfig};
use crate::imaging::{preprocess, ChannelLabel, ChannelStack, RgbImage};
use crate::metrics::{evaluate_pair, MetricReport};
use crate::signal::{extract_conventional_channels, ExtractConfig, SignalCube};
use crate::study::combos::{enumerate_combinations, CombinationId};
use crate::study::table::{StudyMeta, StudyTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub clip_fraction: f64,
    /// Leftmost fraction of the columns used for training; the rest is the
    /// held-out test region.
    pub train_fraction: f64,
    pub patch_size: usize,
    pub overlap: f64,
    pub blur_sigma: f64,
    /// Fraction of nonzero traces used to learn features.
    pub learn_fraction: f64,
    pub subset_seed: u64,
    /// Also supplies the K range of the K-study.
    pub kmeans: KMeansConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            clip_fraction: 0.01,
            train_fraction: 0.7,
            patch_size: 128,
            overlap: 0.5,
            blur_sigma: crate::metrics::DEFAULT_BLUR_SIGMA,
            learn_fraction: 0.1,
            subset_seed: 0,
            kmeans: KMeansConfig::default(),
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Parameter(format!("train_fraction must be in (0, 1), got {}", self.train_fraction)));
        }
        if self.kmeans.k_min < 1 || self.kmeans.k_min > self.kmeans.k_max {
            return Err(Error::Parameter(format!(
                "invalid K range {}..={}",
                self.kmeans.k_min, self.kmeans.k_max
            )));
        }
        Ok(())
    }
}

/// Column ranges of the shared train/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialSplit {
    pub height: usize,
    pub train: Range<usize>,
    pub test: Range<usize>,
}

impl SpatialSplit {
    pub fn new(height: usize, width: usize, train_fraction: f64) -> Result<Self> {
        let cut = (width as f64 * train_fraction).round() as usize;
        if cut == 0 || cut >= width || height == 0 {
            return Err(Error::Data(format!(
                "a {height}x{width} image cannot be split {train_fraction} / {}",
                1.0 - train_fraction
            )));
        }
        Ok(Self { height, train: 0..cut, test: cut..width })
    }

    pub fn train_stack(&self, s: &ChannelStack) -> ChannelStack {
        s.crop(0, self.train.start, self.height, self.train.len())
    }
    pub fn test_stack(&self, s: &ChannelStack) -> ChannelStack {
        s.crop(0, self.test.start, self.height, self.test.len())
    }
    pub fn train_rgb(&self, img: &RgbImage) -> RgbImage {
        img.crop(0, self.train.start, self.height, self.train.len())
    }
    pub fn test_rgb(&self, img: &RgbImage) -> RgbImage {
        img.crop(0, self.test.start, self.height, self.test.len())
    }
}

/// Clip and rescale every plane of the stack.
pub fn preprocess_stack(stack: &ChannelStack, clip_fraction: f64) -> Result<ChannelStack> {
    let mut out = ChannelStack::new(stack.height(), stack.width());
    for (label, plane) in stack.channels() {
        let p = preprocess(plane, clip_fraction, false).map_err(|e| e.context(label.to_string()))?;
        if p.constant {
            log::warn!("channel {label} is constant");
        }
        out.push(*label, p.plane)?;
    }
    Ok(out)
}

/// `[NR532, NR266, R266, m_f1..m_fK]`, preprocessed.
pub fn channel_array(cube: &SignalCube, features: &FeatureSet, clip_fraction: f64) -> Result<ChannelStack> {
    let conventional = extract_conventional_channels(cube, ExtractConfig::default())?;
    let mut stack = conventional
        .select(&[ChannelLabel::Nr532, ChannelLabel::Nr266, ChannelLabel::R266])
        .map_err(|e| e.context("channel array needs the cube's R266 plane"))?;
    for (label, plane) in extract_features(cube, features)?.to_stack()?.channels() {
        stack.push(*label, plane.clone())?;
    }
    preprocess_stack(&stack, clip_fraction)
}

/// Train on the split's training region and score the stained test region.
pub fn train_and_score(
    stack: &ChannelStack,
    truth: &RgbImage,
    split: &SpatialSplit,
    backend: &dyn ColorizerBackend,
    config: &StudyConfig,
) -> Result<MetricReport> {
    let pair = TrainingPair::new(split.train_stack(stack), split.train_rgb(truth))?;
    let model = backend.fit(&[pair])?;
    let pred = virtual_stain(&split.test_stack(stack), model.as_ref(), config.patch_size, config.overlap)?;
    evaluate_pair(&pred, &split.test_rgb(truth), config.blur_sigma)
}

/// Train, stain and score every channel combination of `stack`.
/// Failures are recorded per row.
pub fn run_c_study(
    stack: &ChannelStack,
    truth: &RgbImage,
    backend: &dyn ColorizerBackend,
    config: &StudyConfig,
) -> Result<StudyTable> {
    config.validate()?;
    if stack.dims() != truth.dims() {
        return Err(Error::Shape("channel array and ground truth differ in size".into()));
    }
    let split = SpatialSplit::new(stack.height(), stack.width(), config.train_fraction)?;
    let combos = enumerate_combinations(&stack.labels())?;
    let results = crate::par::map_slice(&combos, |c: &CombinationId| {
        let r = stack
            .select(c.labels())
            .and_then(|s| train_and_score(&s, truth, &split, backend, config))
            .map_err(|e| e.context(c.to_string()));
        if let Err(e) = &r {
            log::warn!("{e}");
        }
        r
    });
    let k = stack.labels().iter().filter(|l| matches!(l, ChannelLabel::Feature(_))).count();
    let meta = StudyMeta {
        backend: backend.name().to_string(),
        k: Some(k),
        seed: config.kmeans.seed,
        blur_sigma: config.blur_sigma,
    };
    Ok(StudyTable::from_results(combos.into_iter().zip(results).collect(), meta))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KReport {
    pub k: usize,
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KStudy {
    pub best_k: usize,
    pub reports: Vec<KReport>,
}

impl KStudy {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Format(format!("K-study table: {e}"));
        w.write_record(["k", "ssim", "psnr_db", "rmse", "best"]).map_err(err)?;
        for r in &self.reports {
            w.write_record([
                r.k.to_string(),
                r.report.ssim.to_string(),
                r.report.psnr.to_string(),
                r.report.rmse.to_string(),
                (r.k == self.best_k).to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io("K-study table", e))
    }
}

/// For each K: learn K features, stain the test region from
/// `[R266, m_f1..m_fK]` and score it. The best K has the highest SSIM,
/// the smaller K winning ties.
pub fn run_k_study(
    cube: &SignalCube,
    truth: &RgbImage,
    backend: &dyn ColorizerBackend,
    config: &StudyConfig,
) -> Result<KStudy> {
    config.validate()?;
    if (cube.height(), cube.width()) != truth.dims() {
        return Err(Error::Shape("cube and ground truth differ in size".into()));
    }
    let r266 = cube
        .r266
        .as_ref()
        .ok_or_else(|| Error::Data("K-study needs the cube's R266 plane".into()))?;
    let split = SpatialSplit::new(cube.height(), cube.width(), config.train_fraction)?;
    let subset = learning_subset(cube, config.learn_fraction, config.subset_seed)?;
    let mut reports = Vec::new();
    for k in config.kmeans.k_min..=config.kmeans.k_max {
        let annotate = |e: Error| e.context(format!("K = {k}"));
        let fs = kmeans_fit(&subset, k, &config.kmeans).map_err(annotate)?;
        let mut stack = ChannelStack::new(cube.height(), cube.width());
        stack.push(ChannelLabel::R266, r266.clone())?;
        for (label, plane) in extract_features(cube, &fs).map_err(annotate)?.to_stack()?.channels() {
            stack.push(*label, plane.clone())?;
        }
        let stack = preprocess_stack(&stack, config.clip_fraction).map_err(annotate)?;
        let report = train_and_score(&stack, truth, &split, backend, config).map_err(annotate)?;
        log::info!("K = {k}: SSIM {:.4}, PSNR {:.2} dB", report.ssim, report.psnr);
        reports.push(KReport { k, report });
    }
    let best_k = reports
        .iter()
        .fold(None::<&KReport>, |best, r| match best {
            Some(b) if b.report.ssim >= r.report.ssim => Some(b),
            _ => Some(r),
        })
        .map(|r| r.k)
        .expect("K range is nonempty");
    Ok(KStudy { best_k, reports })
}
