//! Sign-blind cluster centroids.
//!
//! The centroid of a cluster is the principal component of the cluster
//! together with its negated copy. That union has zero mean, so its
//! covariance is the plain second-moment matrix `sum x x^T`; the top
//! eigenvector is found by matrix-free power iteration.

use crate::error::{Error, Result};
use crate::features::distance::{dot, norm};

pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITER: usize = 1000;
const SIGN_EPS: f64 = 1e-12;

/// Flip `v` so its first component with magnitude above 1e-12 is positive.
pub fn canonicalize_sign(v: &mut [f64]) {
    if let Some(&first) = v.iter().find(|c| c.abs() > SIGN_EPS) {
        if first < 0.0 {
            v.iter_mut().for_each(|c| *c = -*c);
        }
    }
}

/// `sum_x x (x . v)` over the selected rows, accumulated in row order.
fn second_moment_apply<'a, I>(rows: I, v: &[f64], out: &mut [f64])
where
    I: Iterator<Item = &'a [f64]>,
{
    out.iter_mut().for_each(|o| *o = 0.0);
    for x in rows {
        let proj = dot(x, v);
        for (o, xi) in out.iter_mut().zip(x) {
            *o += xi * proj;
        }
    }
}

/// Power iteration from `start`; returns a unit vector (sign not yet
/// canonical) or `None` when the operator annihilates the iterate.
pub(crate) fn power_iterate<'a, F, I>(rows: F, start: &[f64]) -> Option<Vec<f64>>
where
    F: Fn() -> I,
    I: Iterator<Item = &'a [f64]>,
{
    let n = start.len();
    let s = norm(start);
    if s == 0.0 {
        return None;
    }
    let mut v: Vec<f64> = start.iter().map(|c| c / s).collect();
    let mut next = vec![0.0; n];
    for _ in 0..POWER_MAX_ITER {
        second_moment_apply(rows(), &v, &mut next);
        let m = norm(&next);
        if m == 0.0 || !m.is_finite() {
            return None;
        }
        let mut delta = 0.0;
        for (vi, ni) in v.iter_mut().zip(&next) {
            let u = ni / m;
            delta += (u - *vi) * (u - *vi);
            *vi = u;
        }
        if delta.sqrt() < POWER_TOL {
            return Some(v);
        }
    }
    log::debug!("power iteration hit {POWER_MAX_ITER} iterations");
    Some(v)
}

/// Unit principal direction of `members` and their negatives, with the
/// canonical sign.
pub fn cluster_centroid<S: AsRef<[f64]>>(members: &[S]) -> Result<Vec<f64>> {
    let first = members
        .first()
        .ok_or_else(|| Error::Degenerate("cluster has no members".into()))?;
    let n = first.as_ref().len();
    if members.iter().any(|m| m.as_ref().len() != n) {
        return Err(Error::Shape("cluster members differ in length".into()));
    }
    // Start from the longest member: it always has a nonzero image under the
    // second-moment operator.
    let mut best = 0;
    let mut best_norm = -1.0;
    for (i, m) in members.iter().enumerate() {
        let nm = norm(m.as_ref());
        if nm > best_norm {
            best_norm = nm;
            best = i;
        }
    }
    if best_norm <= 0.0 {
        return Err(Error::Degenerate("all cluster members have zero norm".into()));
    }
    let mut v = power_iterate(|| members.iter().map(|m| m.as_ref()), members[best].as_ref())
        .ok_or_else(|| Error::Numerical("power iteration collapsed".into()))?;
    canonicalize_sign(&mut v);
    Ok(v)
}
