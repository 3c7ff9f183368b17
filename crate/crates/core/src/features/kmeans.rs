//! Lloyd-style K-means over signal directions.
//!
//! Signals are compared by the sine of the angle between them, so scaling or
//! inverting a trace never moves it between clusters. Each signal is reduced
//! to its unit direction before clustering; centroids are the principal
//! direction of each cluster and its mirror image.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::centroid::{canonicalize_sign, power_iterate};
use crate::features::distance::{norm, unit_sin2};
use crate::features::{FeatureSet, LearnMeta};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub seed: u64,
    pub max_iter: usize,
    /// Stop once the relative distortion improvement drops below this.
    pub tol: f64,
    pub k_min: usize,
    pub k_max: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            max_iter: 300,
            tol: 1e-8,
            k_min: 2,
            k_max: 6,
        }
    }
}

/// Full output of a K-means run.
#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub features: FeatureSet,
    /// Cluster of each input signal; `None` for zero-norm signals.
    pub assignments: Vec<Option<usize>>,
    /// Total distortion `sum sin^2` after each assignment step.
    pub distortion_history: Vec<f64>,
}

/// Nearest centroid by squared sine; ties go to the lowest index.
fn nearest(u: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let d = unit_sin2(u, c);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    (best, best_d)
}

fn plus_plus_seed(units: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let m = units.len();
    let mut centroids = Vec::with_capacity(k);
    let first = rng.random_range(0..m);
    centroids.push(units[first].clone());
    let mut d2: Vec<f64> = units.iter().map(|u| unit_sin2(u, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = m - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..m)
        };
        let c = units[pick].clone();
        for (d, u) in d2.iter_mut().zip(units) {
            *d = d.min(unit_sin2(u, &c));
        }
        centroids.push(c);
    }
    for c in centroids.iter_mut() {
        canonicalize_sign(c);
    }
    centroids
}

/// Cluster `signals` into `k` sign-blind shapes.
pub fn kmeans_fit<S: AsRef<[f64]> + Sync>(signals: &[S], k: usize, config: &KMeansConfig) -> Result<FeatureSet> {
    kmeans_fit_detailed(signals, k, config).map(|f| f.features)
}

pub fn kmeans_fit_detailed<S: AsRef<[f64]> + Sync>(
    signals: &[S],
    k: usize,
    config: &KMeansConfig,
) -> Result<KMeansFit> {
    if k < config.k_min || k > config.k_max {
        return Err(Error::Parameter(format!(
            "K = {k} outside the configured range {}..={}",
            config.k_min, config.k_max
        )));
    }
    if config.max_iter == 0 || !(config.tol >= 0.0) {
        return Err(Error::Parameter("max_iter must be positive and tol non-negative".into()));
    }
    let n = signals
        .first()
        .map(|s| s.as_ref().len())
        .ok_or_else(|| Error::Data("no signals to cluster".into()))?;
    if signals.iter().any(|s| s.as_ref().len() != n) {
        return Err(Error::Shape("signals differ in length".into()));
    }

    // Unit directions of the nonzero signals, remembering where they came from.
    let mut origin = Vec::new();
    let mut units = Vec::new();
    for (i, s) in signals.iter().enumerate() {
        let s = s.as_ref();
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("signal {i} has non-finite samples")));
        }
        let nm = norm(s);
        if nm > 0.0 {
            origin.push(i);
            units.push(s.iter().map(|v| v / nm).collect::<Vec<f64>>());
        }
    }
    if units.is_empty() {
        return Err(Error::Data("every signal has zero norm".into()));
    }
    if units.len() < k {
        return Err(Error::Parameter(format!(
            "need at least K = {k} nonzero signals, got {}",
            units.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut centroids = plus_plus_seed(&units, k, &mut rng);
    let mut history = Vec::new();
    let mut labels;
    let mut iterations = 0;
    loop {
        let assigned = crate::par::map_slice(&units, |u| nearest(u, &centroids));
        labels = assigned.iter().map(|a| a.0).collect::<Vec<_>>();
        let distortion: f64 = assigned.iter().map(|a| a.1).sum();
        iterations += 1;
        let done = match history.last() {
            Some(&prev) => distortion == 0.0 || prev - distortion <= config.tol * prev,
            None => distortion == 0.0,
        };
        history.push(distortion);
        if done || iterations >= config.max_iter {
            break;
        }

        // Members per cluster, in signal order.
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (i, &l) in labels.iter().enumerate() {
            members[l].push(i);
        }
        let mut taken = vec![false; units.len()];
        let updated = crate::par::map_range(k, |j| {
            if members[j].is_empty() {
                return None;
            }
            // Warm start keeps the Rayleigh quotient, and so the cluster
            // cost, from getting worse.
            let rows = || members[j].iter().map(|&i| units[i].as_slice());
            power_iterate(rows, &centroids[j]).or_else(|| power_iterate(rows, &units[members[j][0]]))
        });
        for (j, update) in updated.into_iter().enumerate() {
            match update {
                Some(mut c) => {
                    canonicalize_sign(&mut c);
                    centroids[j] = c;
                }
                None if members[j].is_empty() => {
                    // Repair: move the empty centroid onto the worst-fit signal.
                    let mut worst = None;
                    let mut worst_d = -1.0;
                    for (i, &(_, d)) in assigned.iter().enumerate() {
                        if !taken[i] && d > worst_d {
                            worst_d = d;
                            worst = Some(i);
                        }
                    }
                    if let Some(i) = worst {
                        taken[i] = true;
                        let mut c = units[i].clone();
                        canonicalize_sign(&mut c);
                        centroids[j] = c;
                    }
                }
                None => {
                    return Err(Error::Numerical(format!("centroid {j} collapsed during power iteration")));
                }
            }
        }
    }

    let distortion = *history.last().expect("at least one assignment pass");
    let features = FeatureSet::from_centroids(
        centroids,
        LearnMeta {
            seed: config.seed,
            iterations: iterations as u32,
            distortion,
        },
    )?;
    let mut assignments = vec![None; signals.len()];
    for (&i, &l) in origin.iter().zip(&labels) {
        assignments[i] = Some(l);
    }
    Ok(KMeansFit {
        features,
        assignments,
        distortion_history: history,
    })
}
