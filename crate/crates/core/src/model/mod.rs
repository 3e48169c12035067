//! The skew-t return model: parameters, closed-form moments, density and sampler.

mod coefficients;
mod density;
mod moments;
mod params;
mod sampler;

pub use coefficients::{moment_coefficients, MomentCoefficients, PartialCoefficients};
pub use density::{log_pdf, log_pdf_with, SKEW_EPS};
pub(crate) use density::{log_pdf_from, mahalanobis};
pub use moments::{
    mean_and_covariance, portfolio_gradients, portfolio_hessians, portfolio_moments, portfolio_moments_and_gradients,
    reconstruct_comoments, MomentGradients, MomentHessians, PortfolioMoments, RECONSTRUCT_CAP,
};
pub use params::{GhMstParams, ParamsDocument};
pub use sampler::{sample_matrix, sample_returns, sample_rows};
