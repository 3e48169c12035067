use serde::{Deserialize, Serialize};

use crate::error::{check_dim, HopError, Result};
use crate::model::{portfolio_moments, portfolio_moments_and_gradients, GhMstParams, MomentGradients, PortfolioMoments};
use crate::nonparam::{np_portfolio_moments, np_portfolio_moments_and_gradients, CoMomentTensors, COMOMENT_CAP};

/// A smooth function on the simplex, as seen by the solvers.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    fn value(&self, w: &[f64]) -> Result<f64>;

    fn value_and_gradient(&self, w: &[f64]) -> Result<(f64, Vec<f64>)>;

    fn gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        Ok(self.value_and_gradient(w)?.1)
    }
}

/// Where the portfolio moments come from.
#[derive(Debug, Clone)]
pub enum MomentBackend {
    /// Closed forms under the skew-t model, `O(N^2)` per evaluation.
    Parametric(GhMstParams),
    /// Kronecker contractions of dense tensors, `O(N^4)` per evaluation.
    Tensor(CoMomentTensors),
}

impl MomentBackend {
    pub fn n_assets(&self) -> usize {
        match self {
            MomentBackend::Parametric(p) => p.n_assets(),
            MomentBackend::Tensor(t) => t.n_assets(),
        }
    }

    pub fn moments(&self, w: &[f64]) -> Result<PortfolioMoments> {
        match self {
            MomentBackend::Parametric(p) => portfolio_moments(w, p),
            MomentBackend::Tensor(t) => np_portfolio_moments(w, t),
        }
    }

    pub fn moments_and_gradients(&self, w: &[f64]) -> Result<(PortfolioMoments, MomentGradients)> {
        match self {
            MomentBackend::Parametric(p) => portfolio_moments_and_gradients(w, p),
            MomentBackend::Tensor(t) => np_portfolio_moments_and_gradients(w, t),
        }
    }
}

/// Moment weights `(lambda1..lambda4)`, all non-negative, not all zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Lambdas([f64; 4]);

impl Lambdas {
    pub fn new(l: [f64; 4]) -> Result<Self> {
        if l.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(HopError::config(format!("moment weights must be finite and non-negative, got {l:?}")));
        }
        if l.iter().all(|&v| v == 0.0) {
            return Err(HopError::config("at least one moment weight must be positive"));
        }
        Ok(Self(l))
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.0
    }
}

impl TryFrom<[f64; 4]> for Lambdas {
    type Error = HopError;

    fn try_from(l: [f64; 4]) -> Result<Self> {
        Self::new(l)
    }
}

impl From<Lambdas> for [f64; 4] {
    fn from(l: Lambdas) -> Self {
        l.0
    }
}

/// Weights from a constant-relative-risk-aversion expansion with aversion `xi`:
/// `(1, xi/2, xi(xi+1)/6, xi(xi+1)(xi+2)/24)`.
pub fn crra_lambdas(xi: f64) -> Result<Lambdas> {
    if !(xi >= 0.0) || !xi.is_finite() {
        return Err(HopError::domain(format!("risk aversion xi = {xi} must be finite and non-negative")));
    }
    Lambdas::new([
        1.0,
        xi / 2.0,
        xi * (xi + 1.0) / 6.0,
        xi * (xi + 1.0) * (xi + 2.0) / 24.0,
    ])
}

/// `f(w) = -l1 phi1 + l2 phi2 - l3 phi3 + l4 phi4`.
#[derive(Debug, Clone)]
pub struct MvskObjective {
    lambdas: Lambdas,
    backend: MomentBackend,
}

const SIGNS: [f64; 4] = [-1.0, 1.0, -1.0, 1.0];

impl MvskObjective {
    pub fn new(lambdas: Lambdas, backend: MomentBackend) -> Result<Self> {
        match &backend {
            MomentBackend::Parametric(p) => p.require_nu_above(8.0, "the MVSK objective")?,
            MomentBackend::Tensor(t) => {
                if t.n_assets() > COMOMENT_CAP {
                    return Err(HopError::Size {
                        n: t.n_assets(),
                        cap: COMOMENT_CAP,
                    });
                }
            }
        }
        Ok(Self { lambdas, backend })
    }

    pub fn parametric(lambdas: Lambdas, params: GhMstParams) -> Result<Self> {
        Self::new(lambdas, MomentBackend::Parametric(params))
    }

    pub fn tensor(lambdas: Lambdas, tensors: CoMomentTensors) -> Result<Self> {
        Self::new(lambdas, MomentBackend::Tensor(tensors))
    }

    pub fn lambdas(&self) -> Lambdas {
        self.lambdas
    }

    pub fn backend(&self) -> &MomentBackend {
        &self.backend
    }

    fn combine(&self, m: &PortfolioMoments) -> f64 {
        let l = self.lambdas.as_array();
        let phi = m.as_array();
        (0..4).map(|k| SIGNS[k] * l[k] * phi[k]).sum()
    }
}

impl Objective for MvskObjective {
    fn dim(&self) -> usize {
        self.backend.n_assets()
    }

    fn value(&self, w: &[f64]) -> Result<f64> {
        check_dim(self.dim(), w.len())?;
        Ok(self.combine(&self.backend.moments(w)?))
    }

    fn value_and_gradient(&self, w: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_dim(self.dim(), w.len())?;
        let (m, g) = self.backend.moments_and_gradients(w)?;
        let l = self.lambdas.as_array();
        let grads = g.as_array();
        let mut out = vec![0.0; w.len()];
        for k in 0..4 {
            let c = SIGNS[k] * l[k];
            if c != 0.0 {
                for (o, v) in out.iter_mut().zip(grads[k]) {
                    *o += c * v;
                }
            }
        }
        Ok((self.combine(&m), out))
    }
}

/// Free-function form of [`Objective::value`].
pub fn objective(w: &[f64], obj: &impl Objective) -> Result<f64> {
    obj.value(w)
}
