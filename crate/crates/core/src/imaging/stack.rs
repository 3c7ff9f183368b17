use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single-channel float image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl Plane {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Shape(format!(
                "plane of {height}x{width} needs {} values, got {}",
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

    pub fn filled(height: usize, width: usize, value: f32) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }

    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> Plane {
        let mut data = Vec::with_capacity(h * w);
        for y in y0..y0 + h {
            let row = y * self.width;
            data.extend_from_slice(&self.data[row + x0..row + x0 + w]);
        }
        Plane {
            height: h,
            width: w,
            data,
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }
}

/// Identifies what a channel plane measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChannelLabel {
    Nr532,
    Nr266,
    R266,
    Scatter,
    /// Amplitude image of learned time-domain feature `i` (1-based).
    Feature(u8),
}

impl ChannelLabel {
    /// Sort key putting conventional channels first and features by index.
    pub fn canonical_key(&self) -> (u8, u8) {
        match *self {
            ChannelLabel::Nr532 => (0, 0),
            ChannelLabel::Nr266 => (1, 0),
            ChannelLabel::R266 => (2, 0),
            ChannelLabel::Scatter => (3, 0),
            ChannelLabel::Feature(i) => (4, i),
        }
    }
}

impl fmt::Display for ChannelLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelLabel::Nr532 => f.write_str("NR532"),
            ChannelLabel::Nr266 => f.write_str("NR266"),
            ChannelLabel::R266 => f.write_str("R266"),
            ChannelLabel::Scatter => f.write_str("Scatter"),
            ChannelLabel::Feature(i) => write!(f, "m_f{i}"),
        }
    }
}

impl FromStr for ChannelLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "NR532" => Ok(ChannelLabel::Nr532),
            "NR266" => Ok(ChannelLabel::Nr266),
            "R266" => Ok(ChannelLabel::R266),
            "Scatter" => Ok(ChannelLabel::Scatter),
            _ => s
                .strip_prefix("m_f")
                .and_then(|i| i.parse::<u8>().ok())
                .filter(|&i| i >= 1)
                .map(ChannelLabel::Feature)
                .ok_or_else(|| Error::Format(format!("unknown channel label {s:?}"))),
        }
    }
}

/// Named, co-registered float planes.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStack {
    height: usize,
    width: usize,
    channels: Vec<(ChannelLabel, Plane)>,
}

impl ChannelStack {
    pub fn new(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            channels: Vec::new(),
        }
    }

    pub fn from_channels(channels: Vec<(ChannelLabel, Plane)>) -> Result<Self> {
        let (h, w) = channels
            .first()
            .map(|(_, p)| p.dims())
            .ok_or_else(|| Error::Shape("channel stack needs at least one plane".into()))?;
        let mut stack = Self::new(h, w);
        for (label, plane) in channels {
            stack.push(label, plane)?;
        }
        Ok(stack)
    }

    pub fn push(&mut self, label: ChannelLabel, plane: Plane) -> Result<()> {
        if plane.dims() != (self.height, self.width) {
            return Err(Error::Shape(format!(
                "plane {label} is {}x{}, stack is {}x{}",
                plane.height, plane.width, self.height, self.width
            )));
        }
        if self.index_of(label).is_some() {
            return Err(Error::Data(format!("duplicate channel label {label}")));
        }
        if let Some(i) = plane.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "plane {label} has a non-finite value at pixel ({}, {})",
                i / self.width.max(1),
                i % self.width.max(1)
            )));
        }
        self.channels.push((label, plane));
        Ok(())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn labels(&self) -> Vec<ChannelLabel> {
        self.channels.iter().map(|(l, _)| *l).collect()
    }

    pub fn channels(&self) -> &[(ChannelLabel, Plane)] {
        &self.channels
    }

    pub fn plane(&self, i: usize) -> &Plane {
        &self.channels[i].1
    }

    pub fn index_of(&self, label: ChannelLabel) -> Option<usize> {
        self.channels.iter().position(|(l, _)| *l == label)
    }

    pub fn get(&self, label: ChannelLabel) -> Option<&Plane> {
        self.index_of(label).map(|i| &self.channels[i].1)
    }

    /// A new stack holding only `labels`, in the order given.
    pub fn select(&self, labels: &[ChannelLabel]) -> Result<ChannelStack> {
        let mut out = ChannelStack::new(self.height, self.width);
        for &label in labels {
            let plane = self.get(label).ok_or_else(|| {
                Error::Contract(format!(
                    "channel {label} not present (have {})",
                    join_labels(&self.labels())
                ))
            })?;
            out.push(label, plane.clone())?;
        }
        Ok(out)
    }

    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> ChannelStack {
        ChannelStack {
            height: h,
            width: w,
            channels: self
                .channels
                .iter()
                .map(|(l, p)| (*l, p.crop(y0, x0, h, w)))
                .collect(),
        }
    }

    /// Channel values of pixel `idx` (row-major index), appended to `out`.
    pub fn pixel_into(&self, idx: usize, out: &mut Vec<f64>) {
        out.extend(self.channels.iter().map(|(_, p)| p.data[idx] as f64));
    }
}

pub fn join_labels(labels: &[ChannelLabel]) -> String {
    labels
        .iter()
        .map(|l| l.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Planar 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub height: usize,
    pub width: usize,
    pub planes: [Vec<u8>; 3],
}

impl RgbImage {
    pub fn new(height: usize, width: usize, planes: [Vec<u8>; 3]) -> Result<Self> {
        if planes.iter().any(|p| p.len() != height * width) {
            return Err(Error::Shape(format!(
                "RGB planes must each hold {height}x{width} values"
            )));
        }
        Ok(Self {
            height,
            width,
            planes,
        })
    }

    pub fn filled(height: usize, width: usize, rgb: [u8; 3]) -> Self {
        Self {
            height,
            width,
            planes: rgb.map(|c| vec![c; height * width]),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn pixel(&self, y: usize, x: usize) -> [u8; 3] {
        let i = y * self.width + x;
        [self.planes[0][i], self.planes[1][i], self.planes[2][i]]
    }

    pub fn set_pixel(&mut self, y: usize, x: usize, rgb: [u8; 3]) {
        let i = y * self.width + x;
        for c in 0..3 {
            self.planes[c][i] = rgb[c];
        }
    }

    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> RgbImage {
        let planes = std::array::from_fn(|c| {
            let src = &self.planes[c];
            let mut out = Vec::with_capacity(h * w);
            for y in y0..y0 + h {
                let row = y * self.width;
                out.extend_from_slice(&src[row + x0..row + x0 + w]);
            }
            out
        });
        RgbImage {
            height: h,
            width: w,
            planes,
        }
    }

    /// Channel planes as `f64` on the 0-255 scale.
    pub fn to_f64_planes(&self) -> [Vec<f64>; 3] {
        std::array::from_fn(|c| self.planes[c].iter().map(|&v| v as f64).collect())
    }
}
