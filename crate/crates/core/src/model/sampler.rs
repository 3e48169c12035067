use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::params::GhMstParams;
use crate::data::ReturnsMatrix;
use crate::error::{HopError, Result};
use crate::par;

const SAMPLE_CHUNK: usize = 4096;

/// Draws `count` rows from the normal variance-mean mixture
/// `tau ~ Gamma(nu/2, rate nu/2)`, `x | tau ~ N(mu + gamma/tau, Sigma/tau)`.
///
/// Returned row-major, `count x N`. Chunk `c` uses ChaCha stream `c` of the
/// seed, so the output depends only on `(params, count, seed)`.
pub fn sample_rows(p: &GhMstParams, count: usize, seed: u64) -> Result<Vec<f64>> {
    let n = p.n_assets();
    let nu = p.nu();
    let mixing = Gamma::new(0.5 * nu, 2.0 / nu).map_err(|e| HopError::domain(format!("mixing law: {e}")))?;
    let l = p.cholesky().l();
    let chunks = par::map_chunks(count, SAMPLE_CHUNK, |range| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream((range.start / SAMPLE_CHUNK) as u64);
        let mut out = Vec::with_capacity(range.len() * n);
        let mut z = vec![0.0; n];
        for _ in range {
            let tau: f64 = mixing.sample(&mut rng);
            let inv_tau = 1.0 / tau;
            let scale = inv_tau.sqrt();
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(&mut rng);
            }
            for i in 0..n {
                let lz: f64 = (0..=i).map(|j| l[(i, j)] * z[j]).sum();
                out.push(p.mu()[i] + p.gamma()[i] * inv_tau + scale * lz);
            }
        }
        out
    });
    Ok(chunks.concat())
}

/// [`sample_rows`] wrapped as a returns matrix (needs `count >= 2`).
pub fn sample_returns(p: &GhMstParams, count: usize, seed: u64) -> Result<ReturnsMatrix> {
    let rows = sample_rows(p, count, seed)?;
    ReturnsMatrix::from_row_major(rows, count, p.n_assets())
}

/// Same draws as [`sample_rows`] as an `nalgebra` matrix.
pub fn sample_matrix(p: &GhMstParams, count: usize, seed: u64) -> Result<DMatrix<f64>> {
    let rows = sample_rows(p, count, seed)?;
    Ok(DMatrix::from_row_slice(count, p.n_assets(), &rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::moments::mean_and_covariance;

    #[test]
    fn deterministic_per_seed() {
        let p = GhMstParams::new(vec![0.0, 1.0], DMatrix::identity(2, 2), vec![0.5, -0.5], 10.0).unwrap();
        let a = sample_rows(&p, 10_000, 42).unwrap();
        let b = sample_rows(&p, 10_000, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_rows(&p, 10_000, 43).unwrap();
        assert_ne!(a, c);
        // a longer draw extends the shorter one
        let d = sample_rows(&p, 12_000, 42).unwrap();
        assert_eq!(&d[..a.len()], &a[..]);
    }

    #[test]
    fn empty_and_tiny_counts() {
        let p = GhMstParams::new(vec![0.0], DMatrix::identity(1, 1), vec![0.5], 10.0).unwrap();
        assert!(sample_rows(&p, 0, 1).unwrap().is_empty());
        assert!(sample_returns(&p, 1, 1).is_err());
        assert_eq!(sample_matrix(&p, 3, 1).unwrap().shape(), (3, 1));
    }

    #[test]
    fn mean_within_three_standard_errors() {
        let p = GhMstParams::new(vec![0.1, -0.2], DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5]), vec![0.3, -0.1], 12.0)
            .unwrap();
        let t = 200_000;
        let rows = sample_rows(&p, t, 7).unwrap();
        let (mean, cov) = mean_and_covariance(&p).unwrap();
        for i in 0..2 {
            let m = (0..t).map(|r| rows[r * 2 + i]).sum::<f64>() / t as f64;
            let se = (cov[(i, i)] / t as f64).sqrt();
            assert!((m - mean[i]).abs() < 3.0 * se, "asset {i}: {m} vs {}", mean[i]);
        }
    }
}
