use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Waveform of one basis shape within one excitation epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Waveform {
    Decay { tau_ns: f64 },
    DampedSine { tau_ns: f64, period_ns: f64 },
}

impl Waveform {
    fn sample(&self, t: f64) -> f64 {
        match *self {
            Waveform::Decay { tau_ns } => (-t / tau_ns).exp(),
            Waveform::DampedSine { tau_ns, period_ns } => {
                (-t / tau_ns).exp() * (std::f64::consts::TAU * t / period_ns).cos()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Waveform::Decay { tau_ns } => tau_ns > 0.0 && tau_ns.is_finite(),
            Waveform::DampedSine { tau_ns, period_ns } => {
                tau_ns > 0.0 && tau_ns.is_finite() && period_ns > 0.0 && period_ns.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!("invalid waveform {self:?}")))
        }
    }
}

/// A basis shape: one waveform after each excitation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisShape {
    pub name: String,
    pub after_266: Waveform,
    pub after_532: Waveform,
}

/// Modified Gram-Schmidt on equal-length vectors, each result unit norm.
fn orthonormalize(mut vs: Vec<Vec<f64>>, what: &str) -> Result<Vec<Vec<f64>>> {
    for i in 0..vs.len() {
        for j in 0..i {
            let d: f64 = vs[i].iter().zip(&vs[j]).map(|(a, b)| a * b).sum();
            let (head, tail) = vs.split_at_mut(i);
            tail[0].iter_mut().zip(&head[j]).for_each(|(a, b)| *a -= d * b);
        }
        let norm = vs[i].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-6 {
            return Err(Error::Degenerate(format!(
                "basis shape {i} is linearly dependent on earlier shapes in the {what} window"
            )));
        }
        vs[i].iter_mut().for_each(|v| *v /= norm);
    }
    Ok(vs)
}

/// Render the basis as full-length traces: zero before `t266`, then the
/// two epoch pieces. Pieces are orthonormalized window by window, so every
/// shape carries unit energy in each window and the shapes are mutually
/// orthogonal.
pub fn render_basis(basis: &[BasisShape], n: usize, period_ns: f64, t266: usize, t532: usize) -> Result<Vec<Vec<f64>>> {
    if basis.is_empty() {
        return Err(Error::Parameter("phantom basis is empty".into()));
    }
    if !(t266 < t532 && t532 < n) {
        return Err(Error::Range(format!("need t266 < t532 < n, got {t266}, {t532}, {n}")));
    }
    if basis.len() > t532 - t266 || basis.len() > n - t532 {
        return Err(Error::Parameter(format!(
            "{} basis shapes do not fit in excitation windows of {} and {} samples",
            basis.len(),
            t532 - t266,
            n - t532
        )));
    }
    let piece = |w: &Waveform, len: usize| -> Result<Vec<f64>> {
        w.validate()?;
        Ok((0..len).map(|i| w.sample(i as f64 * period_ns)).collect())
    };
    let first = orthonormalize(
        basis.iter().map(|b| piece(&b.after_266, t532 - t266)).collect::<Result<_>>()?,
        "266 nm",
    )?;
    let second = orthonormalize(
        basis.iter().map(|b| piece(&b.after_532, n - t532)).collect::<Result<_>>()?,
        "532 nm",
    )?;
    Ok(first
        .into_iter()
        .zip(second)
        .map(|(a, b)| {
            let mut v = vec![0.0; t266];
            v.extend(a);
            v.extend(b);
            v
        })
        .collect())
}
