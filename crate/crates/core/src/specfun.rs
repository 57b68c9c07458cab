//! Special functions used throughout the crate: log-Gamma, Gamma ratios,
//! exponentially scaled modified Bessel functions of integer order and the
//! Macdonald function `K_s` for `0 < s < 1`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{domain, Result};
use crate::math::{self, PI};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

// B_{2k} / (2k (2k - 1)) for k = 1..=10.
const STIRLING: [f64; 10] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
    43_867.0 / 244_188.0,
    -174_611.0 / 125_400.0,
];

/// Stirling correction sum `sum_k c_k x^{1-2k}`, valid for `x >= 10`.
fn stirling_tail(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut pow = inv;
    let mut acc = 0.0;
    for c in STIRLING {
        let term = c * pow;
        acc += term;
        if term.abs() < 1e-18 * acc.abs() {
            break;
        }
        pow *= inv2;
    }
    acc
}

/// Natural logarithm of the Gamma function for `x > 0`.
///
/// Arguments below 10 are shifted up with the functional equation and the
/// Stirling series (ten Bernoulli terms) is evaluated at the shifted point.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain("log_gamma requires a finite positive argument", x));
    }
    Ok(log_gamma_pos(x))
}

pub(crate) fn log_gamma_pos(x: f64) -> f64 {
    if x >= 10.0 {
        return (x - 0.5) * math::ln(x) - x + HALF_LN_2PI + stirling_tail(x);
    }
    let shift = math::ceil(10.0 - x) as i32;
    let mut prod = 1.0;
    let mut y = x;
    for _ in 0..shift {
        prod *= y;
        y += 1.0;
    }
    (y - 0.5) * math::ln(y) - y + HALF_LN_2PI + stirling_tail(y) - math::ln(prod)
}

/// `ln Gamma(z + delta) - ln Gamma(z)` without cancellation, `z >= 10`.
fn log_gamma_shift(z: f64, delta: f64) -> f64 {
    let q = math::ln_1p(delta / z);
    let mut acc = (z - 0.5) * q + delta * math::ln(z + delta) - delta;
    let inv2 = 1.0 / (z * z);
    let mut pow = 1.0 / z;
    for (k, c) in STIRLING.iter().enumerate() {
        let e = 1.0 - 2.0 * (k as f64 + 1.0);
        let term = c * pow * math::expm1(e * q);
        acc += term;
        if term.abs() < 1e-18 * acc.abs().max(1e-300) {
            break;
        }
        pow *= inv2;
    }
    acc
}

/// `Gamma(a) / Gamma(b)` for positive `a`, `b`.
///
/// When both arguments are large and close together the ratio is computed
/// from the difference of Stirling expansions, which behaves like
/// `b^{a-b}` and avoids subtracting two huge logarithms.
pub fn gamma_ratio(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(domain("gamma_ratio numerator argument must be positive", a));
    }
    if !(b > 0.0) || !b.is_finite() {
        return Err(domain("gamma_ratio denominator argument must be positive", b));
    }
    Ok(gamma_ratio_pos(a, b))
}

pub(crate) fn gamma_ratio_pos(a: f64, b: f64) -> f64 {
    if a.min(b) >= 10.0 && (a - b).abs() <= 4.0 {
        math::exp(log_gamma_shift(b, a - b))
    } else {
        math::exp(log_gamma_pos(a) - log_gamma_pos(b))
    }
}

/// `ln |Gamma(-s)|` for `0 < s < 1`, via `Gamma(-s) Gamma(1+s) = -pi / sin(pi s)`.
pub(crate) fn log_abs_gamma_neg(s: f64) -> f64 {
    math::ln(PI) - math::ln(math::sin_pi(s)) - log_gamma_pos(1.0 + s)
}

/// `Gamma(x)` for moderate positive `x`.
pub(crate) fn gamma_pos(x: f64) -> f64 {
    math::exp(log_gamma_pos(x))
}

const SERIES_LIMIT: f64 = 20.0;

/// Hankel expansion of `e^{-t} I_n(t)`; accurate once `t >= max(20, 2 n^2)`.
fn bessel_i_scaled_hankel(n: u64, t: f64) -> f64 {
    let mu = 4.0 * (n as f64) * (n as f64);
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..200u32 {
        let odd = (2 * k - 1) as f64;
        term *= -(mu - odd * odd) / (8.0 * k as f64 * t);
        if term.abs() >= prev {
            break;
        }
        sum += term;
        prev = term.abs();
        if prev < 1e-17 * sum.abs() {
            break;
        }
    }
    sum / math::sqrt(2.0 * PI * t)
}

/// Power series of `e^{-t} I_n(t)`; all terms positive.
fn bessel_i_scaled_series(n: u64, t: f64) -> f64 {
    let half = 0.5 * t;
    let nf = n as f64;
    let log_first = nf * math::ln(half) - log_gamma_pos(nf + 1.0) - t;
    if log_first < -745.0 {
        return 0.0;
    }
    let mut term = math::exp(log_first);
    let mut sum = term;
    let q = half * half;
    let mut l = 0.0;
    loop {
        l += 1.0;
        term *= q / (l * (l + nf));
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

/// Backward ratio recurrence `r_k = I_k / I_{k-1} = 1 / (2k/t + r_{k+1})`,
/// returning `r_1..=r_nmax` (index 0 unused).
fn bessel_i_ratios(nmax: usize, t: f64) -> Vec<f64> {
    let start = nmax + 30 + math::sqrt(60.0 * t) as usize;
    let mut ratios = vec![0.0; nmax + 1];
    let mut r = 0.0;
    for k in (1..=start).rev() {
        r = 1.0 / (2.0 * k as f64 / t + r);
        if k <= nmax {
            ratios[k] = r;
        }
    }
    ratios
}

/// `e^{-t} I_n(t)` for integer `n` and `t >= 0`.
///
/// Small arguments use the power series, large arguments (`t >= max(20, 2n^2)`)
/// the Hankel expansion, and the band in between the backward ratio
/// recurrence anchored at `e^{-t} I_0(t)`.
pub fn bessel_i_scaled(n: i64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    let n = n.unsigned_abs();
    if t == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if t < SERIES_LIMIT {
        return bessel_i_scaled_series(n, t);
    }
    let nf = n as f64;
    if t >= 2.0 * nf * nf {
        return bessel_i_scaled_hankel(n, t);
    }
    let ratios = bessel_i_ratios(n as usize, t);
    let mut value = bessel_i_scaled_hankel(0, t);
    for r in &ratios[1..] {
        value *= r;
        if value == 0.0 {
            break;
        }
    }
    value
}

/// `e^{-t} I_k(t)` for every `k` in `0..=nmax`.
///
/// Uses one backward recurrence normalized by `sum_k e^{-t} I_k(t) = 1`, or
/// per-order Hankel expansions when `t` is large for every order requested.
pub fn bessel_i_scaled_all(nmax: usize, t: f64) -> Vec<f64> {
    let mut out = vec![0.0; nmax + 1];
    if t == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let nf = nmax as f64;
    if t >= SERIES_LIMIT && t >= 2.0 * nf * nf {
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = bessel_i_scaled_hankel(k as u64, t);
        }
        return out;
    }
    // The normalization sum needs every order that is not negligible.
    let span = (nmax + 30 + math::sqrt(60.0 * t) as usize).max(nmax);
    let ratios = bessel_i_ratios(span, t);
    let mut prod = 1.0;
    let mut tail = 0.0;
    for r in &ratios[1..] {
        prod *= r;
        tail += prod;
        if prod < 1e-300 {
            break;
        }
    }
    let i0 = 1.0 / (1.0 + 2.0 * tail);
    out[0] = i0;
    let mut v = i0;
    for k in 1..=nmax {
        v *= ratios[k];
        out[k] = v;
    }
    out
}

/// Asymptotic expansion of `K_s(x)` for large `x`.
fn bessel_k_asymptotic(s: f64, x: f64) -> f64 {
    let mu = 4.0 * s * s;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..100u32 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (8.0 * k as f64 * x);
        if term.abs() >= prev {
            break;
        }
        sum += term;
        prev = term.abs();
        if prev < 1e-17 * sum.abs() {
            break;
        }
    }
    math::sqrt(PI / (2.0 * x)) * math::exp(-x) * sum
}

/// Trapezoid rule on `int_0^inf exp(-x cosh u) cosh(s u) du`.
///
/// The integrand is analytic in a strip around the real axis and decays
/// double exponentially, so the trapezoid sum converges geometrically.
fn bessel_k_integral(s: f64, x: f64) -> f64 {
    // exponent -x cosh(u) + s u relative to its value at u = 0
    let mut upper = 1.0;
    while x * math::cosh(upper) - s * upper - x < 45.0 {
        upper += 0.5;
    }
    let step = 0.05_f64.min(0.25 / math::sqrt(x.max(1.0)));
    let count = math::ceil(upper / step) as usize;
    let mut sum = 0.5 * math::exp(-x);
    for i in 1..=count {
        let u = i as f64 * step;
        sum += math::exp(-x * math::cosh(u)) * math::cosh(s * u);
    }
    sum * step
}

const BESSEL_K_ASYMPTOTIC_FROM: f64 = 25.0;

/// Macdonald function `K_s(x)` for `0 < s < 1`, `x > 0`.
pub fn bessel_k(s: f64, x: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(domain("bessel_k order must lie in (0, 1)", s));
    }
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain("bessel_k argument must be positive", x));
    }
    Ok(bessel_k_unchecked(s, x))
}

pub(crate) fn bessel_k_unchecked(s: f64, x: f64) -> f64 {
    if x >= BESSEL_K_ASYMPTOTIC_FROM {
        bessel_k_asymptotic(s, x)
    } else {
        bessel_k_integral(s, x)
    }
}

/// Normalized extension profile `theta_s(x) = 2^{1-s} x^s K_s(x) / Gamma(s)`,
/// with `theta_s(0) = 1`.
///
/// For small `x` the profile is summed from the series of `I_{-s} - I_s`
/// so that `1 - theta_s(x) ~ x^{2s}` keeps full relative accuracy.
pub fn extension_profile(s: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    if x < 2.0 {
        let q = 0.25 * x * x;
        let g1ms = gamma_pos(1.0 - s);
        // sum_l q^l / (l! Gamma(l + 1 - s)), times Gamma(1 - s)
        let mut a_term = 1.0;
        let mut a_sum = 1.0;
        // sum_l q^l / (l! Gamma(l + 1 + s)), times Gamma(1 - s)
        let mut b_term = g1ms / gamma_pos(1.0 + s);
        let mut b_sum = b_term;
        let mut l = 0.0;
        loop {
            l += 1.0;
            a_term *= q / (l * (l - s));
            b_term *= q / (l * (l + s));
            a_sum += a_term;
            b_sum += b_term;
            if a_term < 1e-18 * a_sum && b_term < 1e-18 * b_sum {
                break;
            }
        }
        a_sum - math::powf(0.5 * x, 2.0 * s) * b_sum
    } else {
        math::powf(2.0, 1.0 - s) * math::powf(x, s) * bessel_k_unchecked(s, x) / gamma_pos(s)
    }
}

/// Derivative of [`extension_profile`]: `-2^{1-s} x^s K_{1-s}(x) / Gamma(s)`.
pub fn extension_profile_derivative(s: f64, x: f64) -> f64 {
    -math::powf(2.0, 1.0 - s) * math::powf(x, s) * bessel_k_unchecked(1.0 - s, x) / gamma_pos(s)
}
