use nalgebra::DMatrix;

use hop_core::fit::{fit, FitConfig, FitInit};
use hop_core::model::{sample_returns, GhMstParams};

fn symmetric_truth() -> GhMstParams {
    let sigma = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 0.5, 0.1, 0.0, 0.1, 0.8]);
    GhMstParams::new(vec![0.1, -0.05, 0.0], sigma, vec![0.0; 3], 15.0).unwrap()
}

#[test]
fn symmetric_data_gives_negligible_skew() {
    let truth = symmetric_truth();
    let x = sample_returns(&truth, 50_000, 11).unwrap();
    let r = fit(&x, &FitConfig::default()).unwrap();
    assert!(r.converged && !r.non_monotone);
    assert!(r.params.gamma().iter().all(|g| g.abs() < 0.05), "{:?}", r.params.gamma());
    assert!((r.params.nu() - 15.0).abs() < 3.0, "nu = {}", r.params.nu());
    for (a, b) in r.params.mu().iter().zip(truth.mu()) {
        assert!((a - b).abs() < 0.05);
    }
}

#[test]
fn fits_are_deterministic() {
    let x = sample_returns(&symmetric_truth(), 5_000, 12).unwrap();
    let cfg = FitConfig { max_iter: 40, ..FitConfig::default() };
    let a = fit(&x, &cfg).unwrap();
    let b = fit(&x, &cfg).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(a.loglik_trace, b.loglik_trace);
}

#[test]
fn starting_at_truth_keeps_likelihood_rising() {
    let truth = symmetric_truth();
    let x = sample_returns(&truth, 5_000, 13).unwrap();
    let cfg = FitConfig { init: FitInit::Provided(truth), max_iter: 50, ..FitConfig::default() };
    let r = fit(&x, &cfg).unwrap();
    assert!(r.loglik_trace.windows(2).all(|w| w[1] >= w[0] - 1e-10));
    assert!(r.params.nu() >= cfg.nu_bounds[0] && r.params.nu() <= cfg.nu_bounds[1]);
}

#[test]
fn too_few_observations_is_rejected() {
    let x = sample_returns(&symmetric_truth(), 3, 14).unwrap();
    assert!(fit(&x, &FitConfig::default()).is_err());
}
