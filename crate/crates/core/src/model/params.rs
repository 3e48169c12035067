use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, HopError, Result};

/// Parameters `{mu, Sigma, gamma, nu}` of the generalized hyperbolic skew-t.
///
/// `mu` and `Sigma` are the location and scatter, not the mean and
/// covariance. The Cholesky factor of `Sigma` and `Sigma^{-1} gamma` are
/// computed once at construction; the value is immutable afterwards.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ParamsDocument", into = "ParamsDocument")]
pub struct GhMstParams {
    mu: Vec<f64>,
    sigma: DMatrix<f64>,
    gamma: Vec<f64>,
    nu: f64,
    chol: Cholesky<f64, Dyn>,
    ln_det_sigma: f64,
    sigma_inv_gamma: Vec<f64>,
    gamma_quad: f64,
}

impl PartialEq for GhMstParams {
    fn eq(&self, other: &Self) -> bool {
        self.mu == other.mu && self.sigma == other.sigma && self.gamma == other.gamma && self.nu == other.nu
    }
}

impl GhMstParams {
    pub fn new(mu: Vec<f64>, sigma: DMatrix<f64>, gamma: Vec<f64>, nu: f64) -> Result<Self> {
        let n = mu.len();
        if n == 0 {
            return Err(HopError::data("parameters need at least one asset"));
        }
        check_dim(n, gamma.len())?;
        check_dim(n, sigma.nrows())?;
        check_dim(n, sigma.ncols())?;
        if mu.iter().chain(gamma.iter()).chain(sigma.iter()).any(|v| !v.is_finite()) {
            return Err(HopError::data("parameters contain non-finite values"));
        }
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(HopError::domain(format!("nu = {nu} must be a positive finite real")));
        }
        for i in 0..n {
            for j in 0..i {
                if sigma[(i, j)] != sigma[(j, i)] {
                    return Err(HopError::data(format!("scatter matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        let chol = Cholesky::new(sigma.clone())
            .ok_or_else(|| HopError::numerical("scatter matrix is not positive definite"))?;
        let ln_det_sigma = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let sigma_inv_gamma: Vec<f64> = chol.solve(&DVector::from_column_slice(&gamma)).iter().copied().collect();
        let gamma_quad = gamma.iter().zip(&sigma_inv_gamma).map(|(a, b)| a * b).sum::<f64>().max(0.0);
        Ok(Self {
            mu,
            sigma,
            gamma,
            nu,
            chol,
            ln_det_sigma,
            sigma_inv_gamma,
            gamma_quad,
        })
    }

    pub fn n_assets(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Same location, scatter and skewness with a different `nu`.
    pub fn with_nu(&self, nu: f64) -> Result<Self> {
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(HopError::domain(format!("nu = {nu} must be a positive finite real")));
        }
        let mut p = self.clone();
        p.nu = nu;
        Ok(p)
    }

    pub(crate) fn cholesky(&self) -> &Cholesky<f64, Dyn> {
        &self.chol
    }

    pub(crate) fn ln_det_sigma(&self) -> f64 {
        self.ln_det_sigma
    }

    pub(crate) fn sigma_inv_gamma(&self) -> &[f64] {
        &self.sigma_inv_gamma
    }

    /// `gamma' Sigma^{-1} gamma`
    pub(crate) fn gamma_quad(&self) -> f64 {
        self.gamma_quad
    }

    /// `Sigma w`, column by column.
    pub(crate) fn sigma_times(&self, w: &[f64]) -> Vec<f64> {
        let n = self.n_assets();
        let mut out = vec![0.0; n];
        let data = self.sigma.as_slice();
        for (j, &wj) in w.iter().enumerate() {
            if wj == 0.0 {
                continue;
            }
            let col = &data[j * n..(j + 1) * n];
            for (o, &c) in out.iter_mut().zip(col) {
                *o += c * wj;
            }
        }
        out
    }

    pub fn require_nu_above(&self, threshold: f64, what: &str) -> Result<()> {
        if self.nu > threshold {
            Ok(())
        } else {
            Err(HopError::domain(format!(
                "{what} requires nu > {threshold}, got nu = {}",
                self.nu
            )))
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| HopError::data(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| HopError::data(format!("invalid parameter document: {e}")))
    }
}

/// Wire form: `{"mu": [...], "sigma": [[...]], "gamma": [...], "nu": x}`,
/// matrices row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamsDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    pub gamma: Vec<f64>,
    pub nu: f64,
}

impl TryFrom<ParamsDocument> for GhMstParams {
    type Error = HopError;

    fn try_from(doc: ParamsDocument) -> Result<Self> {
        let n = doc.mu.len();
        check_dim(n, doc.sigma.len())?;
        for row in &doc.sigma {
            check_dim(n, row.len())?;
        }
        let sigma = DMatrix::from_fn(n, n, |i, j| doc.sigma[i][j]);
        GhMstParams::new(doc.mu, sigma, doc.gamma, doc.nu)
    }
}

impl From<GhMstParams> for ParamsDocument {
    fn from(p: GhMstParams) -> Self {
        let n = p.n_assets();
        ParamsDocument {
            schema: Some(crate::SCHEMA.to_string()),
            sigma: (0..n).map(|i| (0..n).map(|j| p.sigma[(i, j)]).collect()).collect(),
            mu: p.mu,
            gamma: p.gamma,
            nu: p.nu,
        }
    }
}
