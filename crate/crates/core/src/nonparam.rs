//! Sample co-moment tensors and Kronecker-form portfolio moments.
//!
//! Co-skewness is stored as a dense row-major `N x N^2` array with entry
//! `(i, j*N + k)`, co-kurtosis as `N x N^3` with entry `(i, j*N^2 + k*N + l)`.

use nalgebra::DMatrix;

use crate::data::ReturnsMatrix;
use crate::error::{check_dim, HopError, Result};
use crate::model::{MomentGradients, MomentHessians, PortfolioMoments};
use crate::par;

/// Default guard on `N` for dense tensor construction.
pub const COMOMENT_CAP: usize = 64;

/// Largest `N` for which the tensor Hessians are provided.
pub const NP_HESSIAN_CAP: usize = 16;

/// Mean, covariance, co-skewness and co-kurtosis.
#[derive(Debug, Clone, PartialEq)]
pub struct CoMomentTensors {
    n: usize,
    mean: Vec<f64>,
    cov: DMatrix<f64>,
    coskew: Vec<f64>,
    cokurt: Vec<f64>,
}

impl CoMomentTensors {
    pub fn from_parts(mean: Vec<f64>, cov: DMatrix<f64>, coskew: Vec<f64>, cokurt: Vec<f64>) -> Result<Self> {
        let n = mean.len();
        check_dim(n, cov.nrows())?;
        check_dim(n, cov.ncols())?;
        check_dim(n * n * n, coskew.len())?;
        check_dim(n * n * n * n, cokurt.len())?;
        Ok(Self {
            n,
            mean,
            cov,
            coskew,
            cokurt,
        })
    }

    pub fn n_assets(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Row-major `N x N^2`.
    pub fn coskew(&self) -> &[f64] {
        &self.coskew
    }

    /// Row-major `N x N^3`.
    pub fn cokurt(&self) -> &[f64] {
        &self.cokurt
    }

    pub fn coskew_at(&self, i: usize, j: usize, k: usize) -> f64 {
        let n = self.n;
        self.coskew[(i * n + j) * n + k]
    }

    pub fn cokurt_at(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.n;
        self.cokurt[((i * n + j) * n + k) * n + l]
    }

    pub fn coskew_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n * self.n, &self.coskew)
    }

    pub fn cokurt_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n.pow(3), &self.cokurt)
    }

    /// Bytes held by the dense arrays.
    pub fn memory_bytes(&self) -> usize {
        std::mem::size_of::<f64>() * (self.mean.len() + self.cov.len() + self.coskew.len() + self.cokurt.len())
    }
}

/// Dense `N^3` array with every permutation of `(i, j, k)` set to
/// `f` evaluated at the sorted indices.
pub fn fill_symmetric3(n: usize, f: impl Fn(usize, usize, usize) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; n * n * n];
    let idx = |a: usize, b: usize, c: usize| (a * n + b) * n + c;
    for i in 0..n {
        for j in i..n {
            for k in j..n {
                let v = f(i, j, k);
                for (a, b, c) in [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
                    out[idx(a, b, c)] = v;
                }
            }
        }
    }
    out
}

/// Dense `N^4` analogue of [`fill_symmetric3`].
pub fn fill_symmetric4(n: usize, f: impl Fn(usize, usize, usize, usize) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; n * n * n * n];
    let idx = |a: usize, b: usize, c: usize, d: usize| ((a * n + b) * n + c) * n + d;
    for i in 0..n {
        for j in i..n {
            for k in j..n {
                for l in k..n {
                    let v = f(i, j, k, l);
                    for p in permutations4([i, j, k, l]) {
                        out[idx(p[0], p[1], p[2], p[3])] = v;
                    }
                }
            }
        }
    }
    out
}

fn permutations4(x: [usize; 4]) -> [[usize; 4]; 24] {
    let mut out = [[0; 4]; 24];
    let mut m = 0;
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                if a == b || b == c || a == c {
                    continue;
                }
                let d = 6 - a - b - c;
                out[m] = [x[a], x[b], x[c], x[d]];
                m += 1;
            }
        }
    }
    out
}

/// Sample tensors with divisor `T`, refusing `N > 64`.
pub fn estimate_comoments(returns: &ReturnsMatrix) -> Result<CoMomentTensors> {
    estimate_comoments_capped(returns, COMOMENT_CAP)
}

/// [`estimate_comoments`] with an explicit cap on `N`.
///
/// Only the sorted-index entries are accumulated; rows are reduced in fixed
/// chunks combined in order, so the result does not depend on threading.
pub fn estimate_comoments_capped(returns: &ReturnsMatrix, cap: usize) -> Result<CoMomentTensors> {
    let n = returns.n_assets();
    if n > cap {
        return Err(HopError::Size { n, cap });
    }
    let t = returns.n_periods();
    if t < 2 {
        return Err(HopError::data("need at least two observations"));
    }
    let tf = t as f64;
    let sums = par::map_chunks(t, par::ROW_CHUNK, |range| {
        let mut s = vec![0.0; n];
        for r in range {
            for (a, &x) in s.iter_mut().zip(returns.row(r)) {
                *a += x;
            }
        }
        s
    });
    let mut mean = vec![0.0; n];
    for s in &sums {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= tf;
    }

    let n2 = n * (n + 1) / 2;
    let n3 = n * (n + 1) * (n + 2) / 6;
    let n4 = n * (n + 1) * (n + 2) * (n + 3) / 24;
    let partials = par::map_chunks(t, par::ROW_CHUNK, |range| {
        let mut acc = vec![0.0; n2 + n3 + n4];
        let mut c = vec![0.0; n];
        for r in range {
            for ((ci, &x), m) in c.iter_mut().zip(returns.row(r)).zip(&mean) {
                *ci = x - m;
            }
            let mut pos = 0;
            for i in 0..n {
                for j in i..n {
                    acc[pos] += c[i] * c[j];
                    pos += 1;
                }
            }
            for i in 0..n {
                for j in i..n {
                    let cij = c[i] * c[j];
                    for k in j..n {
                        acc[pos] += cij * c[k];
                        pos += 1;
                    }
                }
            }
            for i in 0..n {
                for j in i..n {
                    let cij = c[i] * c[j];
                    for k in j..n {
                        let cijk = cij * c[k];
                        for l in k..n {
                            acc[pos] += cijk * c[l];
                            pos += 1;
                        }
                    }
                }
            }
        }
        acc
    });
    let mut acc = vec![0.0; n2 + n3 + n4];
    for p in &partials {
        for (a, v) in acc.iter_mut().zip(p) {
            *a += v;
        }
    }
    acc.iter_mut().for_each(|a| *a /= tf);

    let mut cov = DMatrix::zeros(n, n);
    let mut pos = 0;
    for i in 0..n {
        for j in i..n {
            cov[(i, j)] = acc[pos];
            cov[(j, i)] = acc[pos];
            pos += 1;
        }
    }
    let coskew = fill_symmetric3(n, |i, j, k| acc[n2 + sorted_offset3(n, i, j, k)]);
    let cokurt = fill_symmetric4(n, |i, j, k, l| acc[n2 + n3 + sorted_offset4(n, i, j, k, l)]);
    CoMomentTensors::from_parts(mean, cov, coskew, cokurt)
}

/// Sorted triples over an alphabet of size `m`.
fn triples_from(m: usize) -> usize {
    m * (m + 1) * (m + 2) / 6
}

fn quads_from(m: usize) -> usize {
    m * (m + 1) * (m + 2) * (m + 3) / 24
}

fn pairs_from(m: usize) -> usize {
    m * (m + 1) / 2
}

/// Position of sorted `(i, j, k)` in the nested-loop enumeration.
fn sorted_offset3(n: usize, i: usize, j: usize, k: usize) -> usize {
    let before_i = triples_from(n) - triples_from(n - i);
    let before_j = pairs_from(n - i) - pairs_from(n - j);
    before_i + before_j + (k - j)
}

fn sorted_offset4(n: usize, i: usize, j: usize, k: usize, l: usize) -> usize {
    let before_i = quads_from(n) - quads_from(n - i);
    let before_j = triples_from(n - i) - triples_from(n - j);
    let before_k = pairs_from(n - j) - pairs_from(n - k);
    before_i + before_j + before_k + (l - k)
}

/// `w (x) w` as a flat `N^2` vector.
fn kron2(w: &[f64]) -> Vec<f64> {
    w.iter().flat_map(|&a| w.iter().map(move |&b| a * b)).collect()
}

fn kron3(w: &[f64]) -> Vec<f64> {
    let ww = kron2(w);
    w.iter().flat_map(|&a| ww.iter().map(move |&b| a * b)).collect()
}

/// Row-major `rows x cols` matrix times vector.
fn mat_vec(m: &[f64], cols: usize, v: &[f64]) -> Vec<f64> {
    m.chunks_exact(cols).map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `Phi (w (x) w)` and `Psi (w (x) w (x) w)`.
fn contractions(w: &[f64], t: &CoMomentTensors) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dim(t.n, w.len())?;
    let n = t.n;
    Ok((mat_vec(&t.coskew, n * n, &kron2(w)), mat_vec(&t.cokurt, n * n * n, &kron3(w))))
}

fn first_two(w: &[f64], t: &CoMomentTensors) -> (f64, Vec<f64>) {
    let cw: Vec<f64> = (0..t.n).map(|i| (0..t.n).map(|j| t.cov[(i, j)] * w[j]).sum()).collect();
    (dot(w, &t.mean), cw)
}

/// `phi1 = w'mean`, `phi2 = w'Cov w`, `phi3 = w'Phi(w (x) w)`,
/// `phi4 = w'Psi(w (x) w (x) w)`.
pub fn np_portfolio_moments(w: &[f64], t: &CoMomentTensors) -> Result<PortfolioMoments> {
    let (u3, u4) = contractions(w, t)?;
    let (phi1, cw) = first_two(w, t);
    Ok(PortfolioMoments {
        phi1,
        phi2: dot(w, &cw),
        phi3: dot(w, &u3),
        phi4: dot(w, &u4),
    })
}

/// `(mean, 2 Cov w, 3 Phi(w (x) w), 4 Psi(w (x) w (x) w))`.
pub fn np_portfolio_gradients(w: &[f64], t: &CoMomentTensors) -> Result<MomentGradients> {
    Ok(np_portfolio_moments_and_gradients(w, t)?.1)
}

pub fn np_portfolio_moments_and_gradients(
    w: &[f64],
    t: &CoMomentTensors,
) -> Result<(PortfolioMoments, MomentGradients)> {
    let (u3, u4) = contractions(w, t)?;
    let (phi1, cw) = first_two(w, t);
    let m = PortfolioMoments {
        phi1,
        phi2: dot(w, &cw),
        phi3: dot(w, &u3),
        phi4: dot(w, &u4),
    };
    let g = MomentGradients {
        phi1: t.mean.clone(),
        phi2: cw.iter().map(|v| 2.0 * v).collect(),
        phi3: u3.iter().map(|v| 3.0 * v).collect(),
        phi4: u4.iter().map(|v| 4.0 * v).collect(),
    };
    Ok((m, g))
}

/// `6 Phi (I (x) w)` and `12 Psi (I (x) w (x) w)`; for validation only,
/// limited to `N <= 16`.
pub fn np_portfolio_hessians(w: &[f64], t: &CoMomentTensors) -> Result<MomentHessians> {
    let n = t.n;
    if n > NP_HESSIAN_CAP {
        return Err(HopError::Size { n, cap: NP_HESSIAN_CAP });
    }
    check_dim(n, w.len())?;
    let ww = kron2(w);
    let h3 = DMatrix::from_fn(n, n, |i, j| 6.0 * dot(&t.coskew[(i * n + j) * n..(i * n + j + 1) * n], w));
    let h4 = DMatrix::from_fn(n, n, |i, j| {
        let start = (i * n + j) * n * n;
        12.0 * dot(&t.cokurt[start..start + n * n], &ww)
    });
    Ok(MomentHessians { phi3: h3, phi4: h4 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{portfolio_gradients, portfolio_hessians, portfolio_moments, reconstruct_comoments, sample_returns};
    use crate::testutil::{random_params, random_vec};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn three_point_example() {
        let r = ReturnsMatrix::from_rows(&[vec![-1.0], vec![0.0], vec![1.0]]).unwrap();
        let t = estimate_comoments(&r).unwrap();
        assert_eq!(t.mean(), &[0.0]);
        assert_relative_eq!(t.cov()[(0, 0)], 2.0 / 3.0, max_relative = 1e-15);
        assert_eq!(t.coskew_at(0, 0, 0), 0.0);
        assert_relative_eq!(t.cokurt_at(0, 0, 0, 0), 2.0 / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn constant_rows_give_zero_tensors() {
        let r = ReturnsMatrix::from_rows(&vec![vec![0.3, -1.0, 2.0]; 5]).unwrap();
        let t = estimate_comoments(&r).unwrap();
        assert!(t.cov().iter().all(|&v| v == 0.0));
        assert!(t.coskew().iter().all(|&v| v == 0.0));
        assert!(t.cokurt().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_naive_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (t_len, n) = (700, 4);
        let rows: Vec<Vec<f64>> = (0..t_len).map(|_| random_vec(&mut rng, n, 1.0)).collect();
        let r = ReturnsMatrix::from_rows(&rows).unwrap();
        let est = estimate_comoments(&r).unwrap();
        let mean: Vec<f64> = (0..n).map(|i| rows.iter().map(|x| x[i]).sum::<f64>() / t_len as f64).collect();
        let c: Vec<Vec<f64>> = rows.iter().map(|x| x.iter().zip(&mean).map(|(a, b)| a - b).collect()).collect();
        for i in 0..n {
            for j in 0..n {
                let v = c.iter().map(|x| x[i] * x[j]).sum::<f64>() / t_len as f64;
                assert!(rel(est.cov()[(i, j)], v) < 1e-12);
                for k in 0..n {
                    let v = c.iter().map(|x| x[i] * x[j] * x[k]).sum::<f64>() / t_len as f64;
                    assert!((est.coskew_at(i, j, k) - v).abs() < 1e-12 * v.abs().max(1e-3));
                    for l in 0..n {
                        let v = c.iter().map(|x| x[i] * x[j] * x[k] * x[l]).sum::<f64>() / t_len as f64;
                        assert!(rel(est.cokurt_at(i, j, k, l), v) < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn relabeling_is_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Vec<f64>> = (0..50).map(|_| random_vec(&mut rng, 3, 1.0)).collect();
        let r = ReturnsMatrix::from_rows(&rows).unwrap();
        let perm = [2, 0, 1];
        let a = estimate_comoments(&r).unwrap();
        let b = estimate_comoments(&r.select_assets(&perm).unwrap()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    assert_relative_eq!(b.coskew_at(i, j, k), a.coskew_at(perm[i], perm[j], perm[k]), max_relative = 1e-12);
                    for l in 0..3 {
                        assert_relative_eq!(
                            b.cokurt_at(i, j, k, l),
                            a.cokurt_at(perm[i], perm[j], perm[k], perm[l]),
                            max_relative = 1e-12
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn kronecker_form_matches_naive_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = random_params(&mut rng, 5, 11.0);
        let t = reconstruct_comoments(&p, 32).unwrap();
        let w = random_vec(&mut rng, 5, 1.0);
        let m = np_portfolio_moments(&w, &t).unwrap();
        let (mut s3, mut s4) = (0.0, 0.0);
        for i in 0..5 {
            for j in 0..5 {
                for k in 0..5 {
                    s3 += t.coskew_at(i, j, k) * w[i] * w[j] * w[k];
                    for l in 0..5 {
                        s4 += t.cokurt_at(i, j, k, l) * w[i] * w[j] * w[k] * w[l];
                    }
                }
            }
        }
        assert!(rel(m.phi3, s3) < 1e-12);
        assert!(rel(m.phi4, s4) < 1e-12);
    }

    #[test]
    fn basis_vector_reads_marginal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = reconstruct_comoments(&random_params(&mut rng, 4, 10.0), 32).unwrap();
        let mut e = vec![0.0; 4];
        e[2] = 1.0;
        let m = np_portfolio_moments(&e, &t).unwrap();
        assert_eq!(m.phi3, t.coskew()[2 * 16 + 2 * 4 + 2]);
        let w = random_vec(&mut rng, 4, 1.0);
        let w2: Vec<f64> = w.iter().map(|v| 2.0 * v).collect();
        assert_relative_eq!(
            np_portfolio_moments(&w2, &t).unwrap().phi4,
            16.0 * np_portfolio_moments(&w, &t).unwrap().phi4,
            max_relative = 1e-13
        );
    }

    #[test]
    fn agrees_with_parametric_formulas() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for n in 1..=8 {
            let p = random_params(&mut rng, n, 9.5 + n as f64);
            let t = reconstruct_comoments(&p, 32).unwrap();
            let w = random_vec(&mut rng, n, 1.0);
            let a = portfolio_moments(&w, &p).unwrap();
            let b = np_portfolio_moments(&w, &t).unwrap();
            for (x, y) in a.as_array().into_iter().zip(b.as_array()) {
                assert!(rel(y, x) < 1e-10, "n={n}: {x} vs {y}");
            }
            let ga = portfolio_gradients(&w, &p).unwrap();
            let gb = np_portfolio_gradients(&w, &t).unwrap();
            for (x, y) in ga.as_array().into_iter().zip(gb.as_array()) {
                for (u, v) in x.iter().zip(y) {
                    assert!((u - v).abs() <= 1e-9 * u.abs().max(1.0), "n={n}: {u} vs {v}");
                }
            }
            let ha = portfolio_hessians(&w, &p).unwrap();
            let hb = np_portfolio_hessians(&w, &t).unwrap();
            assert!((&ha.phi3 - &hb.phi3).amax() <= 1e-9 * ha.phi3.amax().max(1.0));
            assert!((&ha.phi4 - &hb.phi4).amax() <= 1e-9 * ha.phi4.amax().max(1.0));
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let rows: Vec<Vec<f64>> = (0..200).map(|_| random_vec(&mut rng, 4, 1.0)).collect();
        let t = estimate_comoments(&ReturnsMatrix::from_rows(&rows).unwrap()).unwrap();
        let w = random_vec(&mut rng, 4, 1.0);
        let g = np_portfolio_gradients(&w, &t).unwrap();
        let h = 1e-6;
        for i in 0..4 {
            let (mut wp, mut wm) = (w.clone(), w.clone());
            wp[i] += h;
            wm[i] -= h;
            let mp = np_portfolio_moments(&wp, &t).unwrap().as_array();
            let mm = np_portfolio_moments(&wm, &t).unwrap().as_array();
            for k in 0..4 {
                let fd = (mp[k] - mm[k]) / (2.0 * h);
                let an = g.as_array()[k][i];
                assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-2), "k={k} i={i}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn caps_and_dimensions() {
        let r = ReturnsMatrix::from_row_major(vec![0.0; 2 * 5], 2, 5).unwrap();
        assert!(matches!(estimate_comoments_capped(&r, 4), Err(HopError::Size { n: 5, cap: 4 })));
        let t = estimate_comoments(&r).unwrap();
        assert!(matches!(np_portfolio_moments(&[1.0], &t), Err(HopError::Dimension { .. })));
        assert_eq!(t.memory_bytes(), 8 * (5 + 25 + 125 + 625));
    }

    #[test]
    fn estimates_converge_to_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let p = random_params(&mut rng, 3, 30.0);
        let truth = reconstruct_comoments(&p, 32).unwrap();
        let err = |t_len: usize| {
            let est = estimate_comoments(&sample_returns(&p, t_len, 5).unwrap()).unwrap();
            est.coskew().iter().zip(truth.coskew()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let (e3, e5) = (err(1_000), err(100_000));
        assert!(e5 < e3, "{e5} !< {e3}");
    }
}
