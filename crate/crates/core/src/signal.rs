//! Time-domain signals and the conventional per-pixel channels derived from
//! them: non-radiative modulation energy, radiative amplitude, and the
//! pre-excitation scattering level.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{ChannelLabel, ChannelStack, Plane};

/// Excitation pulse repetition rate of both sources.
pub const REP_RATE_HZ: f64 = 50e3;
/// Delay of the 532 nm pulse after the 266 nm pulse.
pub const PULSE_DELAY_NS: f64 = 500.0;
/// Spacing between 266 nm excitation events on the sample.
pub const PIXEL_PITCH_NM: f64 = 250.0;

/// One pixel's time-resolved detector trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeDomainSignal {
    samples: Vec<f64>,
    sample_period: f64,
}

impl TimeDomainSignal {
    pub fn new(samples: Vec<f64>, sample_period: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Data(format!(
                "a signal needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        if !(sample_period > 0.0 && sample_period.is_finite()) {
            return Err(Error::Parameter(format!(
                "sample period must be positive, got {sample_period}"
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_period,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// How the non-radiative modulation is condensed into one number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NrIntegralMode {
    /// Sum of squared baseline-subtracted samples times the sample period.
    #[default]
    Squared,
    /// Sum of absolute baseline-subtracted samples times the sample period.
    Absolute,
}

/// Sample indices of the two excitation events and the windows used to read
/// each channel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcitationSchedule {
    pub t266: usize,
    pub t532: usize,
    pub pre_window: Range<usize>,
    pub post266_window: Range<usize>,
    pub post532_window: Range<usize>,
    /// Baseline override; the pre-excitation window is used when absent.
    pub baseline_window: Option<Range<usize>>,
}

impl ExcitationSchedule {
    /// Contiguous windows: `[0, t266)`, `[t266, t532)`, `[t532, n)`.
    pub fn standard(n: usize, t266: usize, t532: usize) -> Result<Self> {
        let s = Self {
            t266,
            t532,
            pre_window: 0..t266,
            post266_window: t266..t532,
            post532_window: t532..n,
            baseline_window: None,
        };
        s.validate(n)?;
        Ok(s)
    }

    /// Place the 532 nm event [`PULSE_DELAY_NS`] after `t266` on a grid of
    /// `sample_period` nanoseconds.
    pub fn from_timing(n: usize, sample_period: f64, t266: usize) -> Result<Self> {
        let delay = (PULSE_DELAY_NS / sample_period).round() as usize;
        let record_ns = n as f64 * sample_period;
        if record_ns >= 1e9 / REP_RATE_HZ {
            return Err(Error::Parameter(format!(
                "record of {record_ns} ns overlaps the next pulse pair"
            )));
        }
        Self::standard(n, t266, t266 + delay)
    }

    pub fn baseline(&self) -> Range<usize> {
        self.baseline_window
            .clone()
            .unwrap_or_else(|| self.pre_window.clone())
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let within = |name: &str, w: &Range<usize>| {
            if w.start >= w.end || w.end > n {
                Err(Error::Range(format!(
                    "{name} window {}..{} is empty or outside 0..{n}",
                    w.start, w.end
                )))
            } else {
                Ok(())
            }
        };
        within("pre", &self.pre_window)?;
        within("post-266", &self.post266_window)?;
        within("post-532", &self.post532_window)?;
        if let Some(b) = &self.baseline_window {
            within("baseline", b)?;
        }
        if self.pre_window.end > self.t266 || self.t266 >= self.t532 || self.t532 >= n {
            return Err(Error::Range(format!(
                "need pre window end <= t266 < t532 < n, got {} / {} / {} / {n}",
                self.pre_window.end, self.t266, self.t532
            )));
        }
        let overlaps = |a: &Range<usize>, b: &Range<usize>| a.start < b.end && b.start < a.end;
        if overlaps(&self.pre_window, &self.post266_window)
            || overlaps(&self.pre_window, &self.post532_window)
            || overlaps(&self.post266_window, &self.post532_window)
        {
            return Err(Error::Range("excitation windows overlap".into()));
        }
        Ok(())
    }
}

fn check_window(window: &Range<usize>, n: usize, what: &str) -> Result<()> {
    if window.start >= window.end || window.end > n {
        return Err(Error::Range(format!(
            "{what} window {}..{} is empty or outside 0..{n}",
            window.start, window.end
        )));
    }
    Ok(())
}

fn mean_over<T: Copy + Into<f64>>(samples: &[T], window: &Range<usize>) -> f64 {
    let mut sum = 0.0;
    for &v in &samples[window.clone()] {
        sum += v.into();
    }
    sum / window.len() as f64
}

pub(crate) fn nr_integral_raw<T: Copy + Into<f64>>(
    samples: &[T],
    sample_period: f64,
    window: &Range<usize>,
    baseline: &Range<usize>,
    mode: NrIntegralMode,
) -> f64 {
    let b = mean_over(samples, baseline);
    let mut acc = 0.0;
    for &v in &samples[window.clone()] {
        let d = v.into() - b;
        acc += match mode {
            NrIntegralMode::Squared => d * d,
            NrIntegralMode::Absolute => d.abs(),
        };
    }
    acc * sample_period
}

pub(crate) fn radiative_amplitude_raw<T: Copy + Into<f64>>(samples: &[T], baseline: &Range<usize>) -> f64 {
    let b = mean_over(samples, baseline);
    samples
        .iter()
        .map(|&v| (v.into() - b).abs())
        .fold(0.0, f64::max)
}

/// Baseline-subtracted modulation energy over `window`.
pub fn nr_integral(
    signal: &TimeDomainSignal,
    window: Range<usize>,
    baseline_window: Range<usize>,
    mode: NrIntegralMode,
) -> Result<f64> {
    let n = signal.len();
    check_window(&window, n, "integration")?;
    check_window(&baseline_window, n, "baseline")?;
    Ok(nr_integral_raw(
        signal.samples(),
        signal.sample_period(),
        &window,
        &baseline_window,
        mode,
    ))
}

/// Largest absolute excursion from the baseline mean.
pub fn radiative_amplitude(signal: &TimeDomainSignal, baseline_window: Range<usize>) -> Result<f64> {
    check_window(&baseline_window, signal.len(), "baseline")?;
    Ok(radiative_amplitude_raw(signal.samples(), &baseline_window))
}

/// Mean detector level before excitation.
pub fn scattering_level(signal: &TimeDomainSignal, pre_window: Range<usize>) -> Result<f64> {
    check_window(&pre_window, signal.len(), "pre-excitation")?;
    Ok(mean_over(signal.samples(), &pre_window))
}

/// A height x width grid of equal-length time-domain signals, plus the
/// optional per-pixel radiative and scattering planes recorded alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalCube {
    height: usize,
    width: usize,
    n: usize,
    sample_period: f64,
    pixel_pitch: f64,
    /// Row-major pixels, time fastest.
    samples: Vec<f32>,
    schedule: ExcitationSchedule,
    pub r266: Option<Plane>,
    pub scatter: Option<Plane>,
}

impl SignalCube {
    pub fn new(
        height: usize,
        width: usize,
        n: usize,
        sample_period: f64,
        samples: Vec<f32>,
        schedule: ExcitationSchedule,
    ) -> Result<Self> {
        if height * width == 0 {
            return Err(Error::Shape("signal cube must contain at least one pixel".into()));
        }
        if n < 2 {
            return Err(Error::Shape(format!("signals need at least 2 samples, got {n}")));
        }
        if !(sample_period > 0.0 && sample_period.is_finite()) {
            return Err(Error::Parameter(format!(
                "sample period must be positive, got {sample_period}"
            )));
        }
        if samples.len() != height * width * n {
            return Err(Error::Shape(format!(
                "{height}x{width} cube with n={n} needs {} samples, got {}",
                height * width * n,
                samples.len()
            )));
        }
        schedule.validate(n)?;
        Ok(Self {
            height,
            width,
            n,
            sample_period,
            pixel_pitch: PIXEL_PITCH_NM,
            samples,
            schedule,
            r266: None,
            scatter: None,
        })
    }

    pub fn with_pixel_pitch(mut self, pitch_nm: f64) -> Self {
        self.pixel_pitch = pitch_nm;
        self
    }

    pub fn with_planes(mut self, r266: Option<Plane>, scatter: Option<Plane>) -> Result<Self> {
        for (name, p) in [("R266", &r266), ("Scatter", &scatter)] {
            if let Some(p) = p {
                if p.dims() != (self.height, self.width) {
                    return Err(Error::Shape(format!(
                        "{name} plane is {}x{}, cube is {}x{}",
                        p.height, p.width, self.height, self.width
                    )));
                }
            }
        }
        self.r266 = r266;
        self.scatter = scatter;
        Ok(self)
    }

    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }
    pub fn pixel_pitch(&self) -> f64 {
        self.pixel_pitch
    }
    pub fn schedule(&self) -> &ExcitationSchedule {
        &self.schedule
    }
    pub fn raw_samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn set_schedule(&mut self, schedule: ExcitationSchedule) -> Result<()> {
        schedule.validate(self.n)?;
        self.schedule = schedule;
        Ok(())
    }

    /// Trace of pixel `idx` (row-major).
    pub fn pixel(&self, idx: usize) -> &[f32] {
        &self.samples[idx * self.n..(idx + 1) * self.n]
    }

    pub fn signal(&self, y: usize, x: usize) -> Result<TimeDomainSignal> {
        let trace = self.pixel(y * self.width + x);
        TimeDomainSignal::new(trace.iter().map(|&v| v as f64).collect(), self.sample_period)
    }

    /// Trace of pixel `idx` widened to `f64`.
    pub fn pixel_f64(&self, idx: usize) -> Vec<f64> {
        self.pixel(idx).iter().map(|&v| v as f64).collect()
    }
}

/// Options for [`extract_conventional_channels`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtractConfig {
    pub mode: NrIntegralMode,
}

/// Assemble NR532, NR266, R266 and Scatter planes for the cube.
///
/// NR planes come from the traces; R266 is taken from the cube's companion
/// plane when present, and Scatter falls back to the pre-excitation mean of
/// each trace when the cube carries no scatter plane.
pub fn extract_conventional_channels(cube: &SignalCube, config: ExtractConfig) -> Result<ChannelStack> {
    let sched = cube.schedule();
    let baseline = sched.baseline();
    let per_pixel = crate::par::map_range(cube.pixel_count(), |idx| {
        let trace = cube.pixel(idx);
        if let Some(t) = trace.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "pixel ({}, {}) sample {t} is not finite",
                idx / cube.width(),
                idx % cube.width()
            )));
        }
        let nr266 = nr_integral_raw(trace, cube.sample_period(), &sched.post266_window, &baseline, config.mode);
        let nr532 = nr_integral_raw(trace, cube.sample_period(), &sched.post532_window, &baseline, config.mode);
        let scatter = mean_over(trace, &sched.pre_window);
        Ok([nr532 as f32, nr266 as f32, scatter as f32])
    });
    let values = per_pixel.into_iter().collect::<Result<Vec<_>>>()?;
    let (h, w) = (cube.height(), cube.width());
    let plane = |k: usize| Plane::new(h, w, values.iter().map(|v| v[k]).collect());
    let mut stack = ChannelStack::new(h, w);
    stack.push(ChannelLabel::Nr532, plane(0)?)?;
    stack.push(ChannelLabel::Nr266, plane(1)?)?;
    if let Some(r) = &cube.r266 {
        stack.push(ChannelLabel::R266, r.clone())?;
    }
    let scatter = match &cube.scatter {
        Some(s) => s.clone(),
        None => plane(2)?,
    };
    stack.push(ChannelLabel::Scatter, scatter)?;
    Ok(stack)
}
