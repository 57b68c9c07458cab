//! Kernel of the fractional discrete Laplacian `(-Δ_h)^s` on `(hZ)^d`, its
//! periodization on the discrete torus, and the semidiscrete heat kernels it
//! is built from.
//!
//! For `m ≠ 0`
//!
//! ```text
//! K(m) = h^{-2s} / |Γ(-s)| ∫_0^∞ Π_i e^{-2t} I_{m_i}(2t) t^{-1-s} dt,
//! ```
//!
//! and in one dimension this collapses to the Gamma ratio
//! `c_s h^{-2s} Γ(|m|-s) / Γ(|m|+1+s)` with `c_s = 4^s Γ(1/2+s) / (√π |Γ(-s)|)`.
//!
//! Every integral in `t` is taken in the variable `u = ln t`. The integrand is
//! then entire in `u`, bounded in the strip `|Im u| < π/2`, and decays
//! exponentially at both ends, so both adaptive Gauss–Kronrod and the plain
//! trapezoid rule converge quickly. The ends `(0, t_lo)` and `(t_hi, ∞)` are
//! integrated analytically from the small- and large-time Bessel expansions.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{domain, Error, Result};
use crate::math::{self, PI};
use crate::quad::{self, Estimate};
use crate::specfun::{self, bessel_i_scaled, bessel_i_scaled_all};

/// Fractional order `s`, mesh size `h` and dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracParams {
    s: f64,
    h: f64,
    d: usize,
}

impl FracParams {
    pub fn new(s: f64, h: f64, d: usize) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(domain("fractional order s must lie in (0, 1)", s));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(domain("mesh size h must be positive", h));
        }
        if d == 0 {
            return Err(domain("dimension d must be at least 1", 0.0));
        }
        Ok(Self { s, h, d })
    }

    /// Parameters of the discrete torus with `2N + 1` points per axis, whose
    /// mesh is tied to `N` by `h = 2π / (2N + 1)`.
    pub fn torus(s: f64, n_half: usize, d: usize) -> Result<Self> {
        if n_half == 0 {
            return Err(Error::Precondition("torus size N must be positive".into()));
        }
        Self::new(s, torus_mesh(n_half), d)
    }

    pub fn s(&self) -> f64 {
        self.s
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn with_dim(self, d: usize) -> Result<Self> {
        Self::new(self.s, self.h, d)
    }

    pub fn with_mesh(self, h: f64) -> Result<Self> {
        Self::new(self.s, h, self.d)
    }

    /// `h^{-2s}`.
    pub fn mesh_factor(&self) -> f64 {
        math::powf(self.h, -2.0 * self.s)
    }

    /// `1 / |Γ(-s)|`.
    pub fn inv_abs_gamma_neg(&self) -> f64 {
        math::exp(-specfun::log_abs_gamma_neg(self.s))
    }

    /// `4^s Γ(1/2+s) / (√π |Γ(-s)|)`, the prefactor of the 1D closed form.
    pub fn line_constant(&self) -> f64 {
        let s = self.s;
        math::exp(
            s * 2.0 * math::LN_2 + specfun::log_gamma_pos(0.5 + s)
                - 0.5 * math::ln(PI)
                - specfun::log_abs_gamma_neg(s),
        )
    }
}

/// Mesh of the torus with `2N + 1` points per axis.
pub fn torus_mesh(n_half: usize) -> f64 {
    2.0 * PI / (2 * n_half + 1) as f64
}

fn l1(m: &[i64]) -> u64 {
    m.iter().map(|x| x.unsigned_abs()).sum()
}

/// One-dimensional kernel in closed form; zero at the origin.
///
/// # Panics
/// If `p.d() != 1`.
pub fn kernel_1d(p: &FracParams, m: i64) -> f64 {
    assert_eq!(p.d(), 1, "kernel_1d needs a one-dimensional parameter set");
    if m == 0 {
        return 0.0;
    }
    let a = m.unsigned_abs() as f64;
    p.line_constant() * p.mesh_factor() * specfun::gamma_ratio_pos(a - p.s, a + 1.0 + p.s)
}

/// `Σ_{m ≥ M} K(m)` in one dimension, from the telescoping identity
/// `Γ(m-s)/Γ(m+1+s) = (Γ(m-s)/Γ(m+s) - Γ(m+1-s)/Γ(m+1+s)) / (2s)`.
pub fn kernel_tail_sum_1d(p: &FracParams, start: u64) -> Result<f64> {
    assert_eq!(p.d(), 1, "kernel_tail_sum_1d needs a one-dimensional parameter set");
    if start == 0 {
        return Err(Error::Precondition("tail sum must start at M >= 1".into()));
    }
    let m = start as f64;
    Ok(p.line_constant() * p.mesh_factor() * specfun::gamma_ratio_pos(m - p.s, m + p.s)
        / (2.0 * p.s))
}

/// Upper bound for `K(m)` in terms of `‖m‖_1`:
/// `h^{-2s} 2^{d(d+2s-1)} 4^s Γ(d/2+s) Γ(‖m‖_1-s) / (π^{d/2} |Γ(-s)| Γ(‖m‖_1+d+s))`.
pub fn kernel_upper_bound(p: &FracParams, m: &[i64]) -> f64 {
    kernel_upper_bound_l1(p, l1(m))
}

pub(crate) fn kernel_upper_bound_l1(p: &FracParams, norm1: u64) -> f64 {
    if norm1 == 0 {
        return 0.0;
    }
    let (s, d) = (p.s, p.d as f64);
    let r = norm1 as f64;
    let log_c = d * (d + 2.0 * s - 1.0) * math::LN_2 + 2.0 * s * math::LN_2
        + specfun::log_gamma_pos(0.5 * d + s)
        - 0.5 * d * math::ln(PI)
        - specfun::log_abs_gamma_neg(s);
    p.mesh_factor() * math::exp(log_c) * specfun::gamma_ratio_pos(r - s, r + d + s)
}

const T_LO: f64 = 1e-7;

/// Relative target handed to the adaptive rule; below ~1e-14 round-off in
/// the Bessel factors dominates and refinement stops paying off.
fn quad_rel_tol(tol: f64) -> f64 {
    (0.2 * tol).max(2e-14)
}

fn t_hi(max_order: u64) -> f64 {
    let k = max_order.max(1) as f64;
    1e6 * k * k
}

/// `∫_0^{T_LO} Π_i e^{-2t} I_{m_i}(2t) t^{-1-s} dt` from the small-`t` expansion
/// `Π_i t^{|m_i|}/|m_i|! · (1 - 2dt + O(t^2))`.
fn left_tail(m: &[i64], s: f64) -> f64 {
    let order = l1(m) as f64;
    let d = m.len() as f64;
    let log_fact: f64 = m
        .iter()
        .map(|x| specfun::log_gamma_pos(x.unsigned_abs() as f64 + 1.0))
        .sum();
    let a = order - s;
    math::exp(-log_fact)
        * (math::powf(T_LO, a) / a - 2.0 * d * math::powf(T_LO, a + 1.0) / (a + 1.0))
}

/// `∫_{T}^∞ Π_i e^{-2t} I_{m_i}(2t) t^{-1-s} dt` from
/// `e^{-2t} I_k(2t) ≈ (4πt)^{-1/2} (1 - (4k^2-1)/(16t))`.
fn right_tail(m: &[i64], s: f64, t: f64) -> f64 {
    let d = m.len() as f64;
    let b = 0.5 * d + s;
    let c: f64 = m
        .iter()
        .map(|&k| (4.0 * (k as f64) * (k as f64) - 1.0) / 16.0)
        .sum();
    math::powf(4.0 * PI, -0.5 * d) * (math::powf(t, -b) / b - c * math::powf(t, -b - 1.0) / (b + 1.0))
}

/// Kernel value at `m ≠ 0` by adaptive quadrature of the Bessel integral,
/// with the absolute error kept below `tol · value`.
pub fn kernel_nd(p: &FracParams, m: &[i64], tol: f64) -> Result<Estimate> {
    if m.len() != p.d {
        return Err(Error::Precondition(alloc::format!(
            "offset has {} components, expected {}",
            m.len(),
            p.d
        )));
    }
    if m.iter().all(|&x| x == 0) {
        return Err(Error::Precondition("kernel_nd is defined for m != 0".into()));
    }
    if !(tol > 0.0) {
        return Err(domain("kernel tolerance must be positive", tol));
    }
    let s = p.s;
    let max_order = m.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0);
    let hi = t_hi(max_order);
    let integrand = |u: f64| {
        let t = math::exp(u);
        let mut g = 1.0;
        for &k in m {
            g *= bessel_i_scaled(k, 2.0 * t);
            if g == 0.0 {
                return 0.0;
            }
        }
        g * math::exp(-s * u)
    };
    let body = quad::integrate(integrand, math::ln(T_LO), math::ln(hi), 0.0, quad_rel_tol(tol), 4000)?;
    let total = left_tail(m, s) + body.value + right_tail(m, s, hi);
    let scale = p.mesh_factor() * p.inv_abs_gamma_neg();
    // Neglected terms of the two tail expansions are O(T_LO^2) and O((k^2/T)^2) relative.
    let tail_err = 1e-13 * total.abs();
    Ok(Estimate {
        value: scale * total,
        abs_err: scale * (body.abs_err + tail_err),
    })
}

/// Trapezoid rule on a uniform grid in `u = ln t` over the whole real line.
///
/// `eval(t, out)` accumulates the integrand's values (without the `t^{-s}`
/// weight) for every table entry into `out`; the grid covers
/// `[ln T_LO, ln t_end]` and the caller adds the contribution of the grid
/// points beyond both ends. Returns the fine sum and the sum on every other
/// node, whose difference serves as an error indicator.
fn log_trapezoid<F: FnMut(f64, &mut [f64], f64)>(
    entries: usize,
    t_end: f64,
    step: f64,
    s: f64,
    mut eval: F,
) -> (Vec<f64>, Vec<f64>, f64, f64) {
    let u_lo = math::ln(T_LO);
    // even, so the coarse grid ends on the same node
    let count = 2 * math::ceil(0.5 * (math::ln(t_end) - u_lo) / step) as usize;
    let mut fine = vec![0.0; entries];
    let mut coarse = vec![0.0; entries];
    let mut scratch = vec![0.0; entries];
    for k in 0..=count {
        let u = u_lo + k as f64 * step;
        let t = math::exp(u);
        let w = step * math::exp(-s * u);
        scratch.iter_mut().for_each(|v| *v = 0.0);
        eval(t, &mut scratch, w);
        for (f, v) in fine.iter_mut().zip(&scratch) {
            *f += v;
        }
        if k % 2 == 0 {
            for (c, v) in coarse.iter_mut().zip(&scratch) {
                *c += 2.0 * v;
            }
        }
    }
    let u_hi = u_lo + count as f64 * step;
    (fine, coarse, u_lo, u_hi)
}

/// Grid contribution `Σ_{k≥1} step · A e^{-rate (u0 ± k step)}` of a pure
/// exponential continued beyond the end of the grid.
fn geometric_tail(step: f64, value_at_end: f64, rate: f64) -> f64 {
    let q = math::exp(-rate * step);
    step * value_at_end * q / (1.0 - q)
}

/// Kernel values cached on the cube `‖m‖_∞ ≤ R`.
///
/// Values are stored on the nonnegative orthant and read through the sign
/// symmetry `K(…, m_i, …) = K(…, -m_i, …)`.
#[derive(Debug, Clone)]
pub struct KernelTable {
    params: FracParams,
    radius: usize,
    values: Vec<f64>,
    errors: Vec<f64>,
    tail_constant: f64,
}

const TABLE_STEP: f64 = 0.0625;

impl KernelTable {
    /// Build the table. In one dimension the closed form is used; otherwise
    /// all entries share one trapezoid grid in `ln t`.
    pub fn build(p: &FracParams, radius: usize) -> Result<Self> {
        let d = p.d;
        let side = radius + 1;
        let entries = side
            .checked_pow(d as u32)
            .filter(|&n| n <= 50_000_000)
            .ok_or_else(|| Error::Precondition("kernel table too large".into()))?;
        let (values, errors) = if d == 1 {
            let values: Vec<f64> = (0..side as i64).map(|m| kernel_1d(p, m)).collect();
            let errors = values.iter().map(|v| 4.0 * f64::EPSILON * v).collect();
            (values, errors)
        } else {
            Self::integrate_all(p, radius, entries)
        };
        let tail_constant = if d == 1 {
            p.line_constant() * p.mesh_factor()
        } else {
            // leading coefficient of the upper bound in ‖m‖_1^{-d-2s}
            kernel_upper_bound_l1(p, 1) * specfun::gamma_ratio_pos(1.0 + d as f64 + p.s, 1.0 - p.s)
        };
        Ok(Self {
            params: *p,
            radius,
            values,
            errors,
            tail_constant,
        })
    }

    fn integrate_all(p: &FracParams, radius: usize, entries: usize) -> (Vec<f64>, Vec<f64>) {
        let d = p.d;
        let s = p.s;
        let side = radius + 1;
        let hi = t_hi(radius as u64);
        let (fine, coarse, u_lo, u_hi) = log_trapezoid(entries, hi, TABLE_STEP, s, |t, out, w| {
            let b = bessel_i_scaled_all(radius, 2.0 * t);
            let mut idx = vec![0usize; d];
            for slot in out.iter_mut() {
                let mut g = w;
                for &i in &idx {
                    g *= b[i];
                }
                *slot = g;
                for i in (0..d).rev() {
                    idx[i] += 1;
                    if idx[i] < side {
                        break;
                    }
                    idx[i] = 0;
                }
            }
        });
        let scale = p.mesh_factor() * p.inv_abs_gamma_neg();
        let mut values = vec![0.0; entries];
        let mut errors = vec![0.0; entries];
        let mut idx = vec![0i64; d];
        for e in 0..entries {
            if e > 0 {
                let order = l1(&idx) as f64;
                let log_fact: f64 = idx
                    .iter()
                    .map(|&x| specfun::log_gamma_pos(x as f64 + 1.0))
                    .sum();
                // continue the grid past both ends with the asymptotic forms
                let left_rate = order - s;
                let left_val = math::exp(-log_fact + left_rate * u_lo);
                let b = 0.5 * d as f64 + s;
                let c: f64 = idx.iter().map(|&k| (4.0 * (k * k) as f64 - 1.0) / 16.0).sum();
                let right_val = math::powf(4.0 * PI, -0.5 * d as f64) * math::exp(-b * u_hi);
                let tails = |step: f64| {
                    geometric_tail(step, left_val, left_rate)
                        - 2.0 * d as f64
                            * geometric_tail(step, left_val * math::exp(u_lo), left_rate + 1.0)
                        + geometric_tail(step, right_val, b)
                        - c * geometric_tail(step, right_val * math::exp(-u_hi), b + 1.0)
                };
                let total = fine[e] + tails(TABLE_STEP);
                let total_coarse = coarse[e] + tails(2.0 * TABLE_STEP);
                values[e] = scale * total;
                errors[e] = scale * ((total - total_coarse).abs() + 1e-13 * total.abs());
            }
            for i in (0..d).rev() {
                idx[i] += 1;
                if (idx[i] as usize) < side {
                    break;
                }
                idx[i] = 0;
            }
        }
        (values, errors)
    }

    fn index(&self, m: &[i64]) -> Option<usize> {
        if m.len() != self.params.d {
            return None;
        }
        let side = self.radius + 1;
        let mut idx = 0usize;
        for &x in m {
            let a = x.unsigned_abs() as usize;
            if a > self.radius {
                return None;
            }
            idx = idx * side + a;
        }
        Some(idx)
    }

    /// Cached `K(m)`, or `None` outside the cube.
    pub fn get(&self, m: &[i64]) -> Option<f64> {
        self.index(m).map(|i| self.values[i])
    }

    /// Error estimate attached to `K(m)`.
    pub fn abs_err(&self, m: &[i64]) -> Option<f64> {
        self.index(m).map(|i| self.errors[i])
    }

    pub fn params(&self) -> &FracParams {
        &self.params
    }
    pub fn radius(&self) -> usize {
        self.radius
    }
    /// Coefficient `C` of the far-field model `K(m) ≈ C |m|^{-d-2s}`
    /// (sharp for `d = 1`, an upper-bound constant for `d ≥ 2`).
    pub fn tail_constant(&self) -> f64 {
        self.tail_constant
    }

    /// All offsets of the cube in lexicographic order.
    pub fn offsets(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        let d = self.params.d;
        let r = self.radius as i64;
        let total = (2 * self.radius + 1).pow(d as u32);
        (0..total).map(move |mut e| {
            let mut m = vec![0i64; d];
            for i in (0..d).rev() {
                m[i] = (e % (2 * r as usize + 1)) as i64 - r;
                e /= 2 * r as usize + 1;
            }
            m
        })
    }
}

/// Semidiscrete heat kernel `G(m, t) = Π_i e^{-2t} I_{m_i}(2t)` on the unit lattice.
pub fn heat_kernel(m: &[i64], t: f64) -> f64 {
    m.iter().map(|&k| bessel_i_scaled(k, 2.0 * t)).product()
}

/// Number of orders beyond which `e^{-2τ} I_k(2τ)` is below double precision.
fn negligible_order(tau: f64) -> usize {
    (math::sqrt(170.0 * tau) + 20.0) as usize
}

/// One-dimensional periodized heat kernel `Σ_ℓ e^{-2τ} I_{ℓn+r}(2τ)` on the
/// unit lattice, for residues `r = 0..=N` where `n = 2N + 1`.
pub fn periodized_heat_1d(n_half: usize, tau: f64) -> Vec<f64> {
    let n = 2 * n_half + 1;
    let kmax = n_half + negligible_order(tau);
    let b = bessel_i_scaled_all(kmax, 2.0 * tau);
    (0..=n_half)
        .map(|r| {
            let mut acc = b[r];
            let mut l = 1;
            loop {
                let up = l * n + r;
                let down = l * n - r;
                if down > kmax {
                    break;
                }
                acc += b[down];
                if up <= kmax {
                    acc += b[up];
                }
                l += 1;
            }
            acc
        })
        .collect()
}

/// `Σ_{ℓ≠0} e^{-2τ} I_{ℓ(2N+1)}(2τ)`, the weight the origin of the unit
/// lattice receives from its periodic copies under the heat flow.
fn image_excess_1d(n_half: usize, tau: f64) -> f64 {
    let n = 2 * n_half + 1;
    let kmax = negligible_order(tau).max(n);
    let b = bessel_i_scaled_all(kmax, 2.0 * tau);
    (1..=kmax / n).map(|l| 2.0 * b[l * n]).sum()
}

/// Heat kernel of the discrete torus with `2N + 1` points per axis and mesh
/// `h`, at point `j` and time `t`, summed over periodic images:
/// `e^{-2dt/h^2} Σ_ℓ Π_k I_{ℓ_k(2N+1)+j_k}(2t/h^2)`.
///
/// The image sum stops once the next shell of images contributes less than
/// `tol`; `max_images` bounds the number of shells.
pub fn torus_heat_kernel(
    n_half: usize,
    h: f64,
    j: &[i64],
    t: f64,
    tol: f64,
    max_images: usize,
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(domain("torus heat kernel needs t > 0", t));
    }
    let n = (2 * n_half + 1) as i64;
    let tau = t / (h * h);
    let mut total = 1.0;
    for &jk in j {
        let r = jk.rem_euclid(n);
        let r = if r > n_half as i64 { r - n } else { r };
        let mut acc = bessel_i_scaled(r, 2.0 * tau);
        let mut converged = false;
        for l in 1..=max_images as i64 {
            let shell = bessel_i_scaled(l * n + r, 2.0 * tau) + bessel_i_scaled(l * n - r, 2.0 * tau);
            acc += shell;
            if shell < tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Tolerance {
                what: "torus heat kernel image sum",
                achieved: f64::NAN,
                requested: tol,
            });
        }
        total *= acc;
    }
    Ok(total)
}

/// Spectral form of [`torus_heat_kernel`]:
/// `(2N+1)^{-d} Σ_k Π_i exp((2t/h^2)(cos(k_i h') - 1)) cos(k·j h')`, `h' = 2π/(2N+1)`.
pub fn torus_heat_kernel_spectral(n_half: usize, h: f64, j: &[i64], t: f64) -> f64 {
    let n = 2 * n_half + 1;
    let angle = 2.0 * PI / n as f64;
    let tau = t / (h * h);
    // the sum factorizes over axes
    j.iter()
        .map(|&jk| {
            let mut acc = 0.0;
            for k in -(n_half as i64)..=n_half as i64 {
                let theta = angle * k as f64;
                acc += math::exp(2.0 * tau * (math::cos(theta) - 1.0)) * math::cos(theta * jk as f64);
            }
            acc / n as f64
        })
        .product()
}

/// Shift of `j` into the fundamental cell `{-N..N}`, as an absolute value.
fn residue_abs(j: i64, n_half: usize) -> usize {
    let n = (2 * n_half + 1) as i64;
    let r = j.rem_euclid(n);
    (if r > n_half as i64 { n - r } else { r }) as usize
}

fn check_torus(p: &FracParams, n_half: usize) -> Result<()> {
    if n_half == 0 {
        return Err(Error::Precondition("torus size N must be positive".into()));
    }
    let expected = torus_mesh(n_half);
    if (p.h - expected).abs() > 1e-12 * expected {
        return Err(Error::Precondition(alloc::format!(
            "mesh h = {} is inconsistent with N = {} (expected 2π/(2N+1) = {})",
            p.h,
            n_half,
            expected
        )));
    }
    Ok(())
}

/// Periodized kernel `K^A(j) = Σ_{k ∈ Z^d} K(j + k(2N+1))` at `j ≠ 0`.
///
/// In one dimension the Gamma-ratio series is summed in closed form through
/// its Beta-integral representation
/// `Σ_{k} Γ(|j+kn|-s)/Γ(|j+kn|+1+s) = Γ(1+2s)^{-1} ∫_0^1 (x^j + x^{n-j}) x^{-s-1} (1-x)^{2s} / (1-x^n) dx`.
/// In higher dimensions the periodic image sum is moved inside the heat
/// semigroup integral, where it factorizes into one-dimensional periodized
/// heat kernels.
pub fn torus_kernel(p: &FracParams, n_half: usize, j: &[i64], tol: f64) -> Result<Estimate> {
    check_torus(p, n_half)?;
    if j.len() != p.d {
        return Err(Error::Precondition("torus point has the wrong dimension".into()));
    }
    let r: Vec<usize> = j.iter().map(|&x| residue_abs(x, n_half)).collect();
    if r.iter().all(|&x| x == 0) {
        return Err(Error::Precondition("torus kernel is defined for j != 0".into()));
    }
    if p.d == 1 {
        torus_kernel_line(p, n_half, r[0], tol)
    } else {
        torus_kernel_semigroup(p, n_half, &r, tol)
    }
}

fn torus_kernel_line(p: &FracParams, n_half: usize, j: usize, tol: f64) -> Result<Estimate> {
    let s = p.s;
    let n = (2 * n_half + 1) as f64;
    let jf = j as f64;
    let integrand = |x: f64, xc: f64| {
        let one_minus_xn = if xc < 0.5 {
            -math::expm1(n * math::ln_1p(-xc))
        } else {
            1.0 - math::powf(x, n)
        };
        (math::powf(x, jf - s - 1.0) + math::powf(x, n - jf - s - 1.0)) * math::powf(xc, 2.0 * s)
            / one_minus_xn
    };
    let est = quad::tanh_sinh_unit(integrand, tol.max(1e-15))?;
    let scale = p.line_constant() * p.mesh_factor() / specfun::gamma_pos(1.0 + 2.0 * s);
    Ok(Estimate {
        value: scale * est.value,
        abs_err: scale * est.abs_err,
    })
}

/// Time beyond which every periodized heat kernel equals `(2N+1)^{-1}` to
/// double precision: `(2N+1) e^{-μ_1 τ} < 1e-16` with `μ_1 = 4 sin^2(π/(2N+1))`.
fn equilibration_time(n_half: usize, d: usize) -> f64 {
    let n = (2 * n_half + 1) as f64;
    let mu1 = 4.0 * math::powf(math::sin(PI / n), 2.0);
    (math::ln(n * d as f64) + 37.0) / mu1
}

fn torus_kernel_semigroup(p: &FracParams, n_half: usize, r: &[usize], tol: f64) -> Result<Estimate> {
    let s = p.s;
    let d = p.d;
    let n = (2 * n_half + 1) as f64;
    let t_eq = equilibration_time(n_half, d);
    let integrand = |u: f64| {
        let t = math::exp(u);
        let per = periodized_heat_1d(n_half, t);
        let g: f64 = r.iter().map(|&k| per[k]).product();
        g * math::exp(-s * u)
    };
    let body = quad::integrate(integrand, math::ln(T_LO), math::ln(t_eq), 0.0, quad_rel_tol(tol), 4000)?;
    let m: Vec<i64> = r.iter().map(|&k| k as i64).collect();
    let right = math::powf(n, -(d as f64)) * math::powf(t_eq, -s) / s;
    let total = left_tail(&m, s) + body.value + right;
    let scale = p.mesh_factor() * p.inv_abs_gamma_neg();
    Ok(Estimate {
        value: scale * total,
        abs_err: scale * (body.abs_err + 1e-13 * total),
    })
}

/// Periodized kernel summed directly over the images `‖k‖_∞ ≤ K`, growing
/// `K` until a tail bound falls below `tol`.
///
/// Returns the partial sum, the tail bound and the number of image shells
/// used. In one dimension the tail is bounded through the monotone kernel
/// and the exact tail sums; in higher dimensions the `‖m‖_1` upper bound is
/// summed shell by shell and then doubled.
pub fn torus_kernel_truncated(
    p: &FracParams,
    n_half: usize,
    j: &[i64],
    tol: f64,
    max_shells: usize,
) -> Result<(f64, f64, usize)> {
    check_torus(p, n_half)?;
    let d = p.d;
    let n = (2 * n_half + 1) as i64;
    let r: Vec<i64> = j.iter().map(|&x| residue_abs(x, n_half) as i64).collect();
    if r.iter().all(|&x| x == 0) {
        return Err(Error::Precondition("torus kernel is defined for j != 0".into()));
    }
    let table = if d == 1 {
        None
    } else {
        // images out to a few shells are read from one table
        Some(KernelTable::build(p, (n_half + 2 * n as usize).min(120))?)
    };
    let value_at = |m: &[i64]| -> Result<f64> {
        if d == 1 {
            return Ok(kernel_1d(p, m[0]));
        }
        match table.as_ref().and_then(|t| t.get(m)) {
            Some(v) => Ok(v),
            None => Ok(kernel_nd(p, m, 1e-12)?.value),
        }
    };
    let mut sum = 0.0;
    let mut shells = 0usize;
    loop {
        // add shell `shells` (the set ‖k‖_∞ = shells)
        let q = shells as i64;
        for_each_shell(d, q, |k| {
            let m: Vec<i64> = r.iter().zip(k).map(|(&ri, &ki)| ri + ki * n).collect();
            sum += value_at(&m)?;
            Ok(())
        })?;
        let bound = if d == 1 {
            if q == 0 {
                f64::INFINITY
            } else {
                let base = q * n;
                (kernel_tail_sum_1d(p, (base + r[0] + 1) as u64)?
                    + kernel_tail_sum_1d(p, (base - r[0] + 1) as u64)?)
                    / n as f64
            }
        } else {
            2.0 * shell_tail_bound(p, n_half, shells)
        };
        if bound <= tol {
            return Ok((sum, bound, shells));
        }
        if shells >= max_shells {
            return Err(Error::Tolerance {
                what: "periodized kernel tail",
                achieved: bound,
                requested: tol,
            });
        }
        shells += 1;
    }
}

fn for_each_shell<F: FnMut(&[i64]) -> Result<()>>(d: usize, q: i64, mut f: F) -> Result<()> {
    let side = 2 * q + 1;
    let total = side.pow(d as u32);
    let mut k = vec![0i64; d];
    for mut e in 0..total {
        for slot in k.iter_mut().rev() {
            *slot = e % side - q;
            e /= side;
        }
        if k.iter().map(|x| x.abs()).max().unwrap_or(0) == q {
            f(&k)?;
        }
    }
    Ok(())
}

/// `Σ_{q > Q} #shell(q) · B(nq - N)` with `B` the `‖m‖_1` kernel bound;
/// every image in shell `q` has `‖m‖_1 ≥ ‖m‖_∞ ≥ nq - N`.
fn shell_tail_bound(p: &FracParams, n_half: usize, shells: usize) -> f64 {
    let d = p.d as i32;
    let n = (2 * n_half + 1) as u64;
    let term = |q: u64| {
        let count = 2.0 * d as f64 * math::powi(2.0 * q as f64 + 1.0, d - 1);
        count * kernel_upper_bound_l1(p, n * q - n_half as u64)
    };
    let explicit = 4000u64;
    let mut acc = 0.0;
    let start = shells as u64 + 1;
    for q in start..start + explicit {
        acc += term(q);
    }
    // power-law remainder: term(q) ~ q^{-1-2s}
    let last = start + explicit - 1;
    acc + term(last) * last as f64 / (2.0 * p.s)
}

/// `Σ_{m≠0} K(m)`, the diagonal weight of the operator.
pub fn kernel_mass(p: &FracParams, tol: f64) -> Result<Estimate> {
    if p.d == 1 {
        let v = 2.0 * kernel_tail_sum_1d(p, 1)?;
        return Ok(Estimate {
            value: v,
            abs_err: 4.0 * f64::EPSILON * v,
        });
    }
    let s = p.s;
    let d = p.d as f64;
    let hi = 1e8;
    let integrand = |u: f64| {
        let t = math::exp(u);
        let g = math::powi(bessel_i_scaled(0, 2.0 * t), p.d as i32);
        -math::expm1(math::ln(g).min(0.0)) * math::exp(-s * u)
    };
    let body = quad::integrate(integrand, math::ln(T_LO), math::ln(hi), 0.0, quad_rel_tol(tol), 4000)?;
    // 1 - G(0,t) = 2dt - (2d^2 + d) t^2 + O(t^3) near zero
    let left = 2.0 * d * math::powf(T_LO, 1.0 - s) / (1.0 - s)
        - (2.0 * d * d + d) * math::powf(T_LO, 2.0 - s) / (2.0 - s);
    // G(0,t) = (4πt)^{-d/2} (1 + d/(16t) + O(t^{-2})) for large t
    let b = 0.5 * d + s;
    let right = math::powf(hi, -s) / s
        - math::powf(4.0 * PI, -0.5 * d)
            * (math::powf(hi, -b) / b + d / 16.0 * math::powf(hi, -b - 1.0) / (b + 1.0));
    let total = left + body.value + right;
    let scale = p.mesh_factor() * p.inv_abs_gamma_neg();
    Ok(Estimate {
        value: scale * total,
        abs_err: scale * (body.abs_err + 1e-13 * total),
    })
}

/// `Σ_{k ∈ Z^d, k≠0} K(k(2N+1))`.
pub fn self_image_sum(p: &FracParams, n_half: usize, tol: f64) -> Result<Estimate> {
    check_torus(p, n_half)?;
    let s = p.s;
    let n = (2 * n_half + 1) as f64;
    if p.d == 1 {
        let integrand = |x: f64, xc: f64| {
            let one_minus_xn = if xc < 0.5 {
                -math::expm1(n * math::ln_1p(-xc))
            } else {
                1.0 - math::powf(x, n)
            };
            2.0 * math::powf(x, n - s - 1.0) * math::powf(xc, 2.0 * s) / one_minus_xn
        };
        let est = quad::tanh_sinh_unit(integrand, tol.max(1e-15))?;
        let scale = p.line_constant() * p.mesh_factor() / specfun::gamma_pos(1.0 + 2.0 * s);
        return Ok(Estimate {
            value: scale * est.value,
            abs_err: scale * est.abs_err,
        });
    }
    let d = p.d;
    let df = d as f64;
    let t_eq = equilibration_time(n_half, d);
    let hi = 1e8_f64.max(10.0 * t_eq);
    // Π P - Π B_0 = (P - B_0) Σ_i P^i B_0^{d-1-i}, free of cancellation
    let integrand = |u: f64| {
        let t = math::exp(u);
        let b0 = bessel_i_scaled(0, 2.0 * t);
        let excess = if t < t_eq {
            image_excess_1d(n_half, t)
        } else {
            1.0 / n - b0
        };
        let per = b0 + excess;
        let mut geom = 0.0;
        for i in 0..d {
            geom += math::powi(per, i as i32) * math::powi(b0, (d - 1 - i) as i32);
        }
        excess * geom * math::exp(-s * u)
    };
    let body = quad::integrate(integrand, math::ln(T_LO), math::ln(hi), 0.0, quad_rel_tol(tol), 4000)?;
    let b = 0.5 * df + s;
    let right = math::powf(n, -df) * math::powf(hi, -s) / s
        - math::powf(4.0 * PI, -0.5 * df)
            * (math::powf(hi, -b) / b + df / 16.0 * math::powf(hi, -b - 1.0) / (b + 1.0));
    let total = body.value + right;
    let scale = p.mesh_factor() * p.inv_abs_gamma_neg();
    Ok(Estimate {
        value: scale * total,
        abs_err: scale * (body.abs_err + 1e-13 * total.abs()),
    })
}

/// Periodized kernel on the whole torus, stored over `{0..N}^d` and read
/// through sign symmetry.
#[derive(Debug, Clone)]
pub struct TorusKernel {
    params: FracParams,
    n_half: usize,
    values: Vec<f64>,
    self_images: f64,
}

impl TorusKernel {
    pub fn build(p: &FracParams, n_half: usize, tol: f64) -> Result<Self> {
        check_torus(p, n_half)?;
        let d = p.d;
        let side = n_half + 1;
        let entries = side.pow(d as u32);
        let mut values = vec![0.0; entries];
        if d == 1 {
            for j in 1..=n_half {
                values[j] = torus_kernel_line(p, n_half, j, tol)?.value;
            }
        } else {
            let s = p.s;
            let t_eq = equilibration_time(n_half, d);
            let (fine, _coarse, u_lo, u_hi) = log_trapezoid(entries, t_eq, TABLE_STEP, s, |t, out, w| {
                let per = periodized_heat_1d(n_half, t);
                let mut idx = vec![0usize; d];
                for slot in out.iter_mut() {
                    let mut g = w;
                    for &i in &idx {
                        g *= per[i];
                    }
                    *slot = g;
                    for i in (0..d).rev() {
                        idx[i] += 1;
                        if idx[i] < side {
                            break;
                        }
                        idx[i] = 0;
                    }
                }
            });
            let n = (2 * n_half + 1) as f64;
            let scale = p.mesh_factor() * p.inv_abs_gamma_neg();
            let right_val = math::powf(n, -(d as f64)) * math::exp(-s * u_hi);
            let right = geometric_tail(TABLE_STEP, right_val, s);
            let mut idx = vec![0i64; d];
            for e in 0..entries {
                if e > 0 {
                    // left continuation from the small-time form of the nearest image
                    let order = l1(&idx) as f64;
                    let log_fact: f64 = idx
                        .iter()
                        .map(|&x| specfun::log_gamma_pos(x as f64 + 1.0))
                        .sum();
                    let rate = order - s;
                    let left_val = math::exp(-log_fact + rate * u_lo);
                    let left = geometric_tail(TABLE_STEP, left_val, rate)
                        - 2.0 * d as f64
                            * geometric_tail(TABLE_STEP, left_val * math::exp(u_lo), rate + 1.0);
                    values[e] = scale * (fine[e] + left + right);
                }
                for i in (0..d).rev() {
                    idx[i] += 1;
                    if (idx[i] as usize) < side {
                        break;
                    }
                    idx[i] = 0;
                }
            }
        }
        let self_images = self_image_sum(p, n_half, tol)?.value;
        Ok(Self {
            params: *p,
            n_half,
            values,
            self_images,
        })
    }

    /// `Σ_{k≠0} K(k(2N+1))`, the weight a point receives from its own
    /// periodic copies.
    pub fn self_images(&self) -> f64 {
        self.self_images
    }

    /// `K^A(j)` for any integer point (reduced modulo `2N + 1`); zero at `j ≡ 0`.
    pub fn get(&self, j: &[i64]) -> f64 {
        let side = self.n_half + 1;
        let mut idx = 0;
        for &x in j {
            idx = idx * side + residue_abs(x, self.n_half);
        }
        self.values[idx]
    }

    pub fn params(&self) -> &FracParams {
        &self.params
    }
    pub fn n_half(&self) -> usize {
        self.n_half
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(s: f64, h: f64) -> FracParams {
        FracParams::new(s, h, 1).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(FracParams::new(1.5, 1.0, 1).is_err());
        assert!(FracParams::new(0.5, 0.0, 1).is_err());
        assert!(FracParams::new(0.5, 1.0, 0).is_err());
        let t = FracParams::torus(0.5, 8, 1).unwrap();
        assert!((t.h() - 2.0 * PI / 17.0).abs() < 1e-15);
    }

    #[test]
    fn closed_form_half_values() {
        let p = line(0.5, 1.0);
        assert_eq!(kernel_1d(&p, 0), 0.0);
        assert!((kernel_1d(&p, 1) - 4.0 / (3.0 * PI)).abs() < 1e-15);
        assert_eq!(kernel_1d(&p, -1), kernel_1d(&p, 1));
        assert!((kernel_1d(&p, 2) - 4.0 / (15.0 * PI)).abs() < 1e-15);
        assert!((kernel_1d(&p, 3) - 4.0 / (35.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn mesh_scaling_is_exact() {
        for &s in &[0.25, 0.5, 0.75] {
            let a = line(s, 1.0);
            let b = line(s, 0.1);
            for m in 1..30 {
                let lhs = kernel_1d(&b, m);
                let rhs = math::powf(0.1, -2.0 * s) * kernel_1d(&a, m);
                assert!((lhs / rhs - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn quadrature_matches_closed_form() {
        for &s in &[0.25, 0.5, 0.75] {
            let p = line(s, 1.0);
            for m in [1i64, 2, 5, 20] {
                let q = kernel_nd(&p, &[m], 1e-10).unwrap();
                let exact = kernel_1d(&p, m);
                assert!((q.value / exact - 1.0).abs() < 1e-9, "s={s} m={m}: {} vs {exact}", q.value);
            }
        }
    }

    #[test]
    fn kernel_nd_rejects_origin_and_bad_shape() {
        let p = FracParams::new(0.5, 1.0, 2).unwrap();
        assert!(kernel_nd(&p, &[0, 0], 1e-8).is_err());
        assert!(kernel_nd(&p, &[1], 1e-8).is_err());
    }

    #[test]
    fn kernel_nd_even_symmetry() {
        let p = FracParams::new(0.3, 1.0, 2).unwrap();
        let a = kernel_nd(&p, &[2, -3], 1e-10).unwrap().value;
        let b = kernel_nd(&p, &[2, 3], 1e-10).unwrap().value;
        let c = kernel_nd(&p, &[-2, 3], 1e-10).unwrap().value;
        assert!((a - b).abs() < 1e-12 * b && (c - b).abs() < 1e-12 * b);
    }

    #[test]
    fn kernel_nd_below_upper_bound() {
        let p = FracParams::new(0.5, 1.0, 2).unwrap();
        let k = kernel_nd(&p, &[1, 0], 1e-10).unwrap().value;
        assert!(k <= kernel_upper_bound(&p, &[1, 0]));
    }

    #[test]
    fn tail_sum_telescoping_oracle() {
        // brute-force partial sum to 10^6 plus the integral estimate of the rest
        let p = line(0.5, 1.0);
        let mut brute = 0.0;
        for m in (1..=1_000_000i64).rev() {
            brute += kernel_1d(&p, m);
        }
        let rest = kernel_tail_sum_1d(&p, 1_000_001).unwrap();
        let closed = kernel_tail_sum_1d(&p, 1).unwrap();
        assert!((closed - 2.0 / PI).abs() < 1e-14);
        assert!((brute / closed - 1.0).abs() < 1e-6);
        assert!(((brute + rest) / closed - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tail_sum_consistency() {
        for &s in &[0.2, 0.5, 0.9] {
            let p = line(s, 0.7);
            for m in 1..=50u64 {
                let diff = kernel_tail_sum_1d(&p, m).unwrap() - kernel_tail_sum_1d(&p, m + 1).unwrap();
                let k = kernel_1d(&p, m as i64);
                assert!((diff - k).abs() < 1e-12 * kernel_tail_sum_1d(&p, m).unwrap());
            }
        }
        assert!(kernel_tail_sum_1d(&line(0.5, 1.0), 0).is_err());
    }

    #[test]
    fn tail_sum_power_law() {
        let p = line(0.5, 1.0);
        let a = kernel_tail_sum_1d(&p, 5000).unwrap() * 5000.0;
        let b = kernel_tail_sum_1d(&p, 10_000).unwrap() * 10_000.0;
        assert!((a / b - 1.0).abs() < 0.01);
    }

    #[test]
    fn table_matches_kernel_nd_in_2d() {
        let p = FracParams::new(0.4, 0.5, 2).unwrap();
        let table = KernelTable::build(&p, 12).unwrap();
        for m in [[1i64, 0], [0, 1], [3, -2], [12, 12], [7, 1]] {
            let q = kernel_nd(&p, &m, 1e-11).unwrap().value;
            let t = table.get(&m).unwrap();
            assert!((q / t - 1.0).abs() < 1e-10, "{m:?}: {q} vs {t}");
        }
        assert_eq!(table.get(&[0, 0]), Some(0.0));
        assert_eq!(table.get(&[13, 0]), None);
    }

    #[test]
    fn table_quadrature_path_in_1d_matches_closed_form() {
        let p = line(0.25, 1.0);
        let (values, _) = KernelTable::integrate_all(&p, 40, 41);
        for m in 1..=40 {
            let exact = kernel_1d(&p, m as i64);
            assert!((values[m] / exact - 1.0).abs() < 1e-11, "m={m}");
        }
    }

    #[test]
    fn heat_kernel_basics() {
        assert_eq!(heat_kernel(&[0], 0.0), 1.0);
        assert_eq!(heat_kernel(&[3, -2], 0.7), heat_kernel(&[-3, 2], 0.7));
        let mut mass = 0.0;
        for a in -60i64..=60 {
            for b in -60i64..=60 {
                mass += heat_kernel(&[a, b], 1.0);
            }
        }
        assert!((mass - 1.0).abs() < 1e-10);
    }

    #[test]
    fn torus_heat_kernel_mass_and_spectral_form() {
        let n_half = 8;
        let h = torus_mesh(n_half);
        let mut mass = 0.0;
        for j in -8i64..=8 {
            mass += torus_heat_kernel(n_half, h, &[j], 0.5, 1e-18, 100).unwrap();
        }
        assert!((mass - 1.0).abs() < 1e-12);
        for &t in &[0.1, 1.0, 5.0] {
            for j in -8i64..=8 {
                let a = torus_heat_kernel(n_half, h, &[j], t, 1e-18, 100).unwrap();
                let b = torus_heat_kernel_spectral(n_half, h, &[j], t);
                assert!((a - b).abs() < 1e-10, "t={t} j={j}");
            }
        }
        let tiny = torus_heat_kernel(n_half, h, &[0], 1e-9, 1e-18, 100).unwrap();
        assert!((tiny - 1.0).abs() < 1e-6);
    }

    #[test]
    fn torus_kernel_line_matches_truncated_series() {
        let p = FracParams::torus(0.5, 8, 1).unwrap();
        for j in 1..=8i64 {
            let exact = torus_kernel(&p, 8, &[j], 1e-14).unwrap().value;
            let (partial, bound, _) = torus_kernel_truncated(&p, 8, &[j], 1e-6, 100_000).unwrap();
            assert!(exact >= partial - 1e-14);
            assert!(exact - partial <= bound + 1e-14);
            assert!(exact >= kernel_1d(&p, j));
            let neg = torus_kernel(&p, 8, &[-j], 1e-14).unwrap().value;
            assert!((neg - exact).abs() < 1e-15 * exact);
        }
    }

    #[test]
    fn torus_kernel_semigroup_route_agrees_in_1d() {
        let p = FracParams::torus(0.3, 6, 1).unwrap();
        for j in 1..=6usize {
            let a = torus_kernel_line(&p, 6, j, 1e-14).unwrap().value;
            let b = torus_kernel_semigroup(&p, 6, &[j], 1e-13).unwrap().value;
            assert!((a / b - 1.0).abs() < 1e-11, "j={j}: {a} vs {b}");
        }
    }

    #[test]
    fn torus_table_matches_pointwise() {
        let p = FracParams::torus(0.6, 4, 2).unwrap();
        let table = TorusKernel::build(&p, 4, 1e-13).unwrap();
        for j in [[1i64, 0], [2, -3], [4, 4], [0, -1]] {
            let single = torus_kernel(&p, 4, &j, 1e-12).unwrap().value;
            assert!((table.get(&j) / single - 1.0).abs() < 1e-11, "{j:?}");
        }
    }

    #[test]
    fn kernel_mass_matches_line_closed_form_and_symbol_average() {
        // the semigroup route run in d = 1 against 2 * tail(1)
        let p = line(0.35, 0.8);
        let exact = kernel_mass(&p, 1e-12).unwrap().value;
        let s = p.s();
        let integrand = |u: f64| {
            let t = math::exp(u);
            -math::expm1(math::ln(bessel_i_scaled(0, 2.0 * t))) * math::exp(-s * u)
        };
        let body = quad::integrate(integrand, math::ln(T_LO), math::ln(1e8), 0.0, 1e-13, 4000).unwrap();
        let approx = p.mesh_factor() * p.inv_abs_gamma_neg() * (body.value + 2.0 * math::powf(T_LO, 1.0 - s) / (1.0 - s) + math::powf(1e8, -s) / s);
        assert!((approx / exact - 1.0).abs() < 1e-6, "{approx} vs {exact}");
        // in 2D the mass is the average of the symbol over the Brillouin zone
        let q = FracParams::new(0.5, 1.0, 2).unwrap();
        let mass = kernel_mass(&q, 1e-12).unwrap().value;
        let inner = |a: f64| {
            quad::integrate(
                |b: f64| {
                    let v = 4.0 * math::powf(math::sin(0.5 * a), 2.0) + 4.0 * math::powf(math::sin(0.5 * b), 2.0);
                    math::sqrt(v)
                },
                0.0,
                PI,
                1e-13,
                1e-13,
                2000,
            )
            .unwrap()
            .value
        };
        let avg = quad::integrate(inner, 0.0, PI, 1e-12, 1e-12, 2000).unwrap().value / (PI * PI);
        assert!((mass / avg - 1.0).abs() < 1e-9, "{mass} vs {avg}");
    }

    #[test]
    fn self_images_match_direct_sums() {
        let p = FracParams::torus(0.5, 3, 1).unwrap();
        let n = 7i64;
        let exact = self_image_sum(&p, 3, 1e-14).unwrap().value;
        let mut direct = 0.0;
        for k in 1..=200_000i64 {
            direct += 2.0 * kernel_1d(&p, k * n);
        }
        // remaining tail ~ 2 C (nK)^{-2s} / (2s n)
        let rest = 2.0 * kernel_tail_sum_1d(&p, (200_000 * n) as u64).unwrap() / n as f64;
        assert!(((direct + rest) / exact - 1.0).abs() < 1e-6, "{direct} {rest} {exact}");
        // the d >= 2 route restricted to a line must agree with the Beta integral
        let s = p.s();
        let nh = 3;
        let t_eq = equilibration_time(nh, 1);
        let integrand = |u: f64| {
            let t = math::exp(u);
            let excess = if t < t_eq { image_excess_1d(nh, t) } else { 1.0 / 7.0 - bessel_i_scaled(0, 2.0 * t) };
            excess * math::exp(-s * u)
        };
        let body = quad::integrate(integrand, math::ln(T_LO), math::ln(1e8), 0.0, 1e-13, 4000).unwrap();
        let right = math::powf(1e8, -s) / (7.0 * s) - math::powf(4.0 * PI, -0.5) * math::powf(1e8, -0.5 - s) / (0.5 + s);
        let semigroup = p.mesh_factor() * p.inv_abs_gamma_neg() * (body.value + right);
        assert!((semigroup / exact - 1.0).abs() < 1e-8, "{semigroup} vs {exact}");
    }

    #[test]
    fn self_images_in_2d_match_table_sum() {
        let p = FracParams::torus(0.75, 2, 2).unwrap();
        let n = 5i64;
        let table = KernelTable::build(&p, 200).unwrap();
        let mut direct = 0.0;
        for a in -40i64..=40 {
            for b in -40i64..=40 {
                if a != 0 || b != 0 {
                    direct += table.get(&[a * n, b * n]).unwrap();
                }
            }
        }
        let exact = self_image_sum(&p, 2, 1e-12).unwrap().value;
        // images beyond |k|_inf = 40 carry roughly C (40 n)^{-2s} of the total
        assert!(exact > direct && (exact - direct) / exact < 0.01, "{direct} vs {exact}");
    }

    #[test]
    fn torus_kernel_preconditions() {
        let p = FracParams::new(0.5, 1.0, 1).unwrap();
        assert!(torus_kernel(&p, 8, &[1], 1e-10).is_err());
        let q = FracParams::torus(0.5, 8, 1).unwrap();
        assert!(torus_kernel(&q, 8, &[0], 1e-10).is_err());
        assert!(torus_kernel(&q, 8, &[17], 1e-10).is_err());
    }

    #[test]
    fn truncated_tail_budget_exhaustion() {
        let p = FracParams::torus(0.25, 4, 1).unwrap();
        let r = torus_kernel_truncated(&p, 4, &[1], 1e-12, 10);
        assert!(matches!(r, Err(Error::Tolerance { .. })));
    }
}
