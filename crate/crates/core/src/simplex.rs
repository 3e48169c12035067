//! Euclidean projection onto the unit simplex `{w : 1'w = 1, w >= 0}`.

use serde::{Deserialize, Serialize};

use crate::error::{HopError, Result};

/// Feasibility tolerance for [`SimplexPoint`].
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// Tolerance on `|zeta(gamma)|` for the bisection cross-check.
pub const BISECTION_TOL: f64 = 1e-14;

/// A point of the unit simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    /// Checks entries `>= -1e-12` and `|sum - 1| <= 1e-12`.
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(HopError::data("simplex point needs at least one entry"));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(HopError::data("simplex point has non-finite entries"));
        }
        if let Some(i) = w.iter().position(|&v| v < -FEASIBILITY_TOL) {
            return Err(HopError::data(format!("weight {i} is negative: {}", w[i])));
        }
        let s: f64 = w.iter().sum();
        if (s - 1.0).abs() > FEASIBILITY_TOL {
            return Err(HopError::data(format!("weights sum to {s}, not 1")));
        }
        Ok(Self(w))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn vertex(n: usize, i: usize) -> Self {
        let mut w = vec![0.0; n];
        w[i] = 1.0;
        Self(w)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for SimplexPoint {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for SimplexPoint {
    type Error = HopError;

    fn try_from(w: Vec<f64>) -> Result<Self> {
        Self::new(w)
    }
}

impl From<SimplexPoint> for Vec<f64> {
    fn from(p: SimplexPoint) -> Self {
        p.0
    }
}

/// A projection together with its KKT multiplier: `w_i = max(0, v_i - gamma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub point: SimplexPoint,
    pub gamma: f64,
}

/// `sum_i max(0, v_i - gamma) - 1`; non-increasing in `gamma`.
pub fn zeta(gamma: f64, v: &[f64]) -> f64 {
    v.iter().map(|&x| (x - gamma).max(0.0)).sum::<f64>() - 1.0
}

fn check_finite(v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(HopError::data("cannot project an empty vector"));
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(HopError::data(format!("entry {i} is not finite: {}", v[i])));
    }
    Ok(())
}

/// Applies the threshold, clamps round-off negatives and renormalizes.
fn finish(v: &[f64], gamma: f64) -> SimplexPoint {
    let mut w: Vec<f64> = v.iter().map(|&x| if x > gamma { x - gamma } else { 0.0 }).collect();
    for x in &mut w {
        if *x < 0.0 && *x >= -1e-15 {
            *x = 0.0;
        }
    }
    let s: f64 = w.iter().sum();
    if s > 0.0 {
        w.iter_mut().for_each(|x| *x /= s);
    }
    SimplexPoint(w)
}

/// Threshold from the sort-based closed form.
fn sorted_threshold(v: &[f64]) -> f64 {
    let mut u = v.to_vec();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut gamma = u[0] - 1.0;
    for (k, &x) in u.iter().enumerate() {
        cum += x;
        let g = (cum - 1.0) / (k + 1) as f64;
        if x - g > 0.0 {
            gamma = g;
        }
    }
    gamma
}

/// Exact projection by sorting, `O(N log N)`.
pub fn project(v: &[f64]) -> Result<SimplexPoint> {
    Ok(project_with_multiplier(v)?.point)
}

pub fn project_with_multiplier(v: &[f64]) -> Result<Projection> {
    check_finite(v)?;
    let gamma = sorted_threshold(v);
    Ok(Projection {
        point: finish(v, gamma),
        gamma,
    })
}

/// Bisection on `zeta` to `|zeta| <= 1e-14`; kept as a cross-check.
pub fn project_bisection(v: &[f64]) -> Result<Projection> {
    check_finite(v)?;
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // zeta(max - 1) >= 0 and zeta(max) = -1 bracket the root
    let (mut lo, mut hi) = (max - 1.0, max);
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let z = zeta(mid, v);
        if z.abs() <= BISECTION_TOL || mid <= lo || mid >= hi {
            break;
        }
        if z > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Projection {
        point: finish(v, mid),
        gamma: mid,
    })
}

/// Largest violation of the KKT system of the projection of `v`:
/// `w_i = max(0, v_i - gamma)` and `sum w = 1`.
pub fn kkt_violation(v: &[f64], p: &Projection) -> f64 {
    let w = p.point.as_slice();
    let mut worst = (w.iter().sum::<f64>() - 1.0).abs();
    for (&wi, &vi) in w.iter().zip(v) {
        worst = worst.max((wi - (vi - p.gamma).max(0.0)).abs());
    }
    worst
}
