use serde::{Deserialize, Serialize};

use crate::error::{HopError, Result};

/// Scalar coefficients of the skew-t moment formulas; functions of `nu` only.
///
/// They are the moments of the inverse-gamma mixing variable `W = 1/tau`:
/// `a1 = E[W]`, `a22 = Var[W]`, `a31` its third central moment and `a41`
/// its fourth, while `a32`, `a42`, `a43` collect the Gaussian cross terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentCoefficients {
    pub a1: f64,
    pub a21: f64,
    pub a22: f64,
    pub a31: f64,
    pub a32: f64,
    pub a41: f64,
    pub a42: f64,
    pub a43: f64,
}

/// Coefficients evaluated only where their pole in `nu` allows.
///
/// Each field is `None` when `nu` is at or below that coefficient's pole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialCoefficients {
    pub a1: Option<f64>,
    pub a21: Option<f64>,
    pub a22: Option<f64>,
    pub a31: Option<f64>,
    pub a32: Option<f64>,
    pub a41: Option<f64>,
    pub a42: Option<f64>,
    pub a43: Option<f64>,
}

fn a1(nu: f64) -> f64 {
    nu / (nu - 2.0)
}

fn a22(nu: f64) -> f64 {
    2.0 * nu * nu / ((nu - 2.0).powi(2) * (nu - 4.0))
}

fn a31(nu: f64) -> f64 {
    16.0 * nu.powi(3) / ((nu - 2.0).powi(3) * (nu - 4.0) * (nu - 6.0))
}

fn a32(nu: f64) -> f64 {
    6.0 * nu * nu / ((nu - 2.0).powi(2) * (nu - 4.0))
}

fn a41(nu: f64) -> f64 {
    (12.0 * nu + 120.0) * nu.powi(4) / ((nu - 2.0).powi(4) * (nu - 4.0) * (nu - 6.0) * (nu - 8.0))
}

fn a42(nu: f64) -> f64 {
    6.0 * (2.0 * nu + 4.0) * nu.powi(3) / ((nu - 2.0).powi(3) * (nu - 4.0) * (nu - 6.0))
}

fn a43(nu: f64) -> f64 {
    3.0 * nu * nu / ((nu - 2.0) * (nu - 4.0))
}

fn check_finite_moments(nu: f64) -> Result<()> {
    if !nu.is_finite() || nu <= 2.0 {
        return Err(HopError::domain(format!(
            "nu = {nu}: the skew-t has no finite moments for nu <= 2"
        )));
    }
    Ok(())
}

impl MomentCoefficients {
    /// The full set; requires `nu > 8` so that every coefficient is finite.
    pub fn new(nu: f64) -> Result<Self> {
        check_finite_moments(nu)?;
        if nu <= 8.0 {
            return Err(HopError::domain(format!(
                "nu = {nu}: fourth-moment coefficients require nu > 8"
            )));
        }
        Ok(Self {
            a1: a1(nu),
            a21: a1(nu),
            a22: a22(nu),
            a31: a31(nu),
            a32: a32(nu),
            a41: a41(nu),
            a42: a42(nu),
            a43: a43(nu),
        })
    }
}

impl PartialCoefficients {
    pub fn new(nu: f64) -> Result<Self> {
        check_finite_moments(nu)?;
        let above = |pole: f64, f: fn(f64) -> f64| (nu > pole).then(|| f(nu));
        Ok(Self {
            a1: above(2.0, a1),
            a21: above(2.0, a1),
            a22: above(4.0, a22),
            a31: above(6.0, a31),
            a32: above(4.0, a32),
            a41: above(8.0, a41),
            a42: above(6.0, a42),
            a43: above(4.0, a43),
        })
    }

    /// Converts to the full set if every coefficient exists.
    pub fn complete(&self) -> Option<MomentCoefficients> {
        Some(MomentCoefficients {
            a1: self.a1?,
            a21: self.a21?,
            a22: self.a22?,
            a31: self.a31?,
            a32: self.a32?,
            a41: self.a41?,
            a42: self.a42?,
            a43: self.a43?,
        })
    }
}

/// Shorthand for [`MomentCoefficients::new`].
pub fn moment_coefficients(nu: f64) -> Result<MomentCoefficients> {
    MomentCoefficients::new(nu)
}
