//! Log-scale modified Bessel function of the second kind.
//!
//! `K_v(x)` is evaluated as `ln K_v(x)` without ever forming the raw value:
//! the fractional order `mu = v - n`, `|mu| <= 1/2`, is handled by Temme's
//! series (`x < 2`), Steed's continued fraction (`2 <= x < 50`) or the
//! Hankel asymptotic expansion (`x >= 50`), and the integer part is climbed
//! with the forward recurrence carried as ratios `K_{m+1} / K_m`.

use std::f64::consts::PI;

const SERIES_X: f64 = 2.0;
const ASYMPTOTIC_X: f64 = 50.0;
const MAX_TERMS: usize = 20_000;

// Chebyshev expansions of g1(mu) and g2(mu) on 4|mu| - 1 in [-1, 1], where
// g1 = (1/G(1-mu) - 1/G(1+mu)) / (2 mu) and g2 = (1/G(1-mu) + 1/G(1+mu)) / 2.
const G1_CHEB: [f64; 14] = [
    -1.145_164_083_662_683_1,
    0.006_360_853_113_470_842_4,
    0.001_862_451_930_072_068_4,
    0.000_152_833_085_873_453_5,
    0.000_017_017_464_011_802_039,
    -6.459_750_292_334_725_4e-7,
    -5.181_984_843_251_938e-8,
    4.518_909_289_485_818_3e-10,
    3.243_322_737_102_087_3e-11,
    6.830_943_402_494_752_3e-13,
    2.835_350_275_517_210_2e-14,
    -7.988_390_576_932_359e-16,
    -3.372_667_730_077_195e-17,
    -3.658_633_480_921_052e-20,
];

const G2_CHEB: [f64; 15] = [
    1.882_645_524_949_671_8,
    -0.077_490_658_396_167_51,
    -0.018_256_714_847_324_93,
    0.000_633_803_020_907_489_6,
    0.000_076_229_054_350_872_9,
    -9.550_164_756_172_044e-7,
    -8.892_726_810_788_635e-8,
    -1.952_133_477_231_961_4e-9,
    -9.400_305_273_588_516e-11,
    4.687_513_384_953_239e-12,
    2.265_853_574_692_576e-13,
    -1.172_550_969_848_801_5e-15,
    -7.044_133_820_024_522e-17,
    -2.437_787_831_010_769_3e-18,
    -7.522_524_321_825_39e-20,
];

fn chebyshev(coeffs: &[f64], t: f64) -> f64 {
    let t2 = 2.0 * t;
    let (mut d, mut dd) = (0.0, 0.0);
    for &c in coeffs[1..].iter().rev() {
        let tmp = d;
        d = t2 * d - dd + c;
        dd = tmp;
    }
    t * d - dd + 0.5 * coeffs[0]
}

/// Returns `(G(1+mu), G(1-mu), g1, g2)` for `|mu| <= 1/2`.
fn temme_gamma(mu: f64) -> (f64, f64, f64, f64) {
    let t = 4.0 * mu.abs() - 1.0;
    let g1 = chebyshev(&G1_CHEB, t);
    let g2 = chebyshev(&G2_CHEB, t);
    (1.0 / (g2 - mu * g1), 1.0 / (g2 + mu * g1), g1, g2)
}

/// Temme's series for `(K_mu(x), K_{mu+1}(x))`, `x < 2`, unscaled.
fn temme_series(mu: f64, x: f64) -> (f64, f64) {
    let half_x = 0.5 * x;
    let ln_half_x = half_x.ln();
    let half_x_mu = (mu * ln_half_x).exp();
    let pi_mu = PI * mu;
    let sigma = -mu * ln_half_x;
    let sinrat = if pi_mu.abs() < f64::EPSILON {
        1.0
    } else {
        pi_mu / pi_mu.sin()
    };
    let sinhrat = if sigma.abs() < f64::EPSILON {
        1.0
    } else {
        sigma.sinh() / sigma
    };
    let (gamma_1p, gamma_1m, g1, g2) = temme_gamma(mu);

    let mut fk = sinrat * (sigma.cosh() * g1 - sinhrat * ln_half_x * g2);
    let mut pk = 0.5 / half_x_mu * gamma_1p;
    let mut qk = 0.5 * half_x_mu * gamma_1m;
    let mut ck = 1.0;
    let mut sum0 = fk;
    let mut sum1 = pk;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        fk = (kf * fk + pk + qk) / (kf * kf - mu * mu);
        ck *= half_x * half_x / kf;
        pk /= kf - mu;
        qk /= kf + mu;
        let hk = -kf * fk + pk;
        let del0 = ck * fk;
        sum0 += del0;
        sum1 += ck * hk;
        if del0.abs() < 0.5 * sum0.abs() * f64::EPSILON {
            break;
        }
    }
    (sum0, sum1 * 2.0 / x)
}

/// Steed's continued fraction for `(e^x K_mu(x), e^x K_{mu+1}(x))`.
fn steed_cf2_scaled(mu: f64, x: f64) -> (f64, f64) {
    let mut bi = 2.0 * (1.0 + x);
    let mut di = 1.0 / bi;
    let mut delhi = di;
    let mut hi = di;
    let mut qi = 0.0;
    let mut qip1 = 1.0;
    let mut ai = -(0.25 - mu * mu);
    let a1 = ai;
    let mut ci = -ai;
    let mut bqi = -ai;
    let mut s = 1.0 + bqi * delhi;
    for i in 2..MAX_TERMS {
        ai -= 2.0 * (i - 1) as f64;
        ci = -ai * ci / i as f64;
        let tmp = (qi - bi * qip1) / ai;
        qi = qip1;
        qip1 = tmp;
        bqi += ci * qip1;
        bi += 2.0;
        di = 1.0 / (bi + ai * di);
        delhi *= bi * di - 1.0;
        hi += delhi;
        let dels = bqi * delhi;
        s += dels;
        if (dels / s).abs() < f64::EPSILON {
            break;
        }
    }
    hi *= -a1;
    let k_mu = (PI / (2.0 * x)).sqrt() / s;
    (k_mu, k_mu * (mu + x + 0.5 - hi) / x)
}

/// Hankel expansion of `e^x K_v(x)` for large `x`.
fn hankel_scaled(v: f64, x: f64) -> f64 {
    let four_v2 = 4.0 * v * v;
    let mut term = 1.0_f64;
    let mut sum = 1.0;
    for k in 1..64 {
        let odd = (2 * k - 1) as f64;
        let next = term * (four_v2 - odd * odd) / (8.0 * k as f64 * x);
        if next.abs() >= term.abs() && k > 1 {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < f64::EPSILON * sum.abs() {
            break;
        }
    }
    (PI / (2.0 * x)).sqrt() * sum
}

/// `ln K_v(x)` together with the neighbouring ratios, all for `v >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct BesselKLadder {
    pub ln_k: f64,
    /// `K_{v+1}(x) / K_v(x)`
    pub ratio_up: f64,
    /// `K_{v-1}(x) / K_v(x)`
    pub ratio_down: f64,
}

pub(crate) fn bessel_k_ladder(order: f64, x: f64) -> BesselKLadder {
    let v = order.abs();
    if !(x > 0.0) || !v.is_finite() || !x.is_finite() {
        let ln_k = if x == 0.0 { f64::INFINITY } else if x == f64::INFINITY { f64::NEG_INFINITY } else { f64::NAN };
        return BesselKLadder {
            ln_k,
            ratio_up: f64::NAN,
            ratio_down: f64::NAN,
        };
    }
    let n = (v + 0.5).floor() as usize;
    let mu = v - n as f64;

    let (ln_k_mu, r0) = if x < SERIES_X {
        let (k0, k1) = temme_series(mu, x);
        (k0.ln(), k1 / k0)
    } else if x < ASYMPTOTIC_X {
        let (k0, k1) = steed_cf2_scaled(mu, x);
        (k0.ln() - x, k1 / k0)
    } else {
        let k0 = hankel_scaled(mu, x);
        let k1 = hankel_scaled(mu + 1.0, x);
        (k0.ln() - x, k1 / k0)
    };

    let mut ln_k = ln_k_mu;
    let mut ratio = r0;
    let mut prev = f64::NAN;
    for k in 1..=n {
        ln_k += ratio.ln();
        prev = ratio;
        ratio = 1.0 / ratio + 2.0 * (mu + k as f64) / x;
    }
    let ratio_down = if n >= 1 { 1.0 / prev } else { r0 - 2.0 * mu / x };
    BesselKLadder {
        ln_k,
        ratio_up: ratio,
        ratio_down,
    }
}

/// Natural log of the modified Bessel function of the second kind,
/// `ln K_v(x)`, for real order `v` and `x > 0`.
///
/// `K_{-v} = K_v`, so the sign of `order` is ignored. Returns `+inf` at
/// `x = 0` and `NaN` for negative or non-finite input.
pub fn ln_bessel_k(order: f64, x: f64) -> f64 {
    bessel_k_ladder(order, x).ln_k
}

/// `d/dv ln K_v(x)` by a central difference in the order.
pub(crate) fn ln_bessel_k_order_derivative(order: f64, x: f64) -> f64 {
    let v = order.abs();
    let h = 1e-5 * v.max(1.0);
    (ln_bessel_k(v + h, x) - ln_bessel_k(v - h, x)) / (2.0 * h)
}
