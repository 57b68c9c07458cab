//! Recovering `f` supported in `W` from `(-Δ_A)^{1/2} f` observed on a
//! disjoint set `Ω` of the discrete torus.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Error, Result};
use crate::kernel::{FracParams, TorusKernel};
use crate::lattice::{apply_frac_torus_spectral, apply_multiplier, Point, TorusFunction};
use crate::math::{self, PI};

/// Geometry, noise and seed of one recovery experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseSetup {
    pub n_half: usize,
    pub d: usize,
    pub w: Vec<Point>,
    pub omega: Vec<Point>,
    /// Regularization used when no discrepancy target exists (noiseless data).
    pub reg_lambda: f64,
    pub noise: f64,
    pub seed: u64,
}

impl InverseSetup {
    /// One-dimensional blocks `W = {-|W|, ..., -1}` and
    /// `Ω = {sep - 1, ..., sep + |Ω| - 2}`, so that the gap between them is `sep`.
    pub fn blocks(n_half: usize, w_size: usize, omega_size: usize, separation: usize, seed: u64) -> Result<Self> {
        let w: Vec<Point> = (1..=w_size as i64).rev().map(|k| vec![-k]).collect();
        let start = separation as i64 - 1;
        let omega: Vec<Point> = (0..omega_size as i64).map(|k| vec![start + k]).collect();
        let setup = Self {
            n_half,
            d: 1,
            w,
            omega,
            reg_lambda: 1e-20,
            noise: 0.0,
            seed,
        };
        setup.validate()?;
        Ok(setup)
    }

    pub fn validate(&self) -> Result<()> {
        if self.w.is_empty() || self.omega.is_empty() {
            return Err(Error::Precondition("W and Ω must be nonempty".into()));
        }
        let nh = self.n_half as i64;
        for p in self.w.iter().chain(&self.omega) {
            if p.len() != self.d || p.iter().any(|x| x.abs() > nh) {
                return Err(Error::Precondition(format!("{p:?} is not a point of the torus")));
            }
        }
        let ws: BTreeSet<&Point> = self.w.iter().collect();
        let os: BTreeSet<&Point> = self.omega.iter().collect();
        if ws.len() != self.w.len() || os.len() != self.omega.len() {
            return Err(Error::Precondition("W and Ω must not repeat points".into()));
        }
        if let Some(p) = self.omega.iter().find(|p| ws.contains(p)) {
            return Err(Error::Precondition(format!("W and Ω intersect at {p:?}")));
        }
        if !(self.reg_lambda > 0.0) {
            return Err(domain("regularization must be positive", self.reg_lambda));
        }
        if !(self.noise >= 0.0) {
            return Err(domain("noise level must be nonnegative", self.noise));
        }
        Ok(())
    }

    fn torus_index(&self, p: &[i64]) -> usize {
        let side = 2 * self.n_half + 1;
        p.iter()
            .fold(0usize, |acc, &x| acc * side + (x + self.n_half as i64) as usize)
    }
}

fn delta(setup: &InverseSetup, at: &[i64]) -> Result<TorusFunction> {
    let mut v = TorusFunction::zeros(setup.n_half, setup.d)?.into_values();
    v[setup.torus_index(at)] = 1.0;
    TorusFunction::new(setup.n_half, setup.d, v)
}

/// `A[ω, w] = ((-Δ_A)^{1/2} δ_w)(ω) = -K^A(ω - w)`, with five columns
/// re-derived through the Fourier multiplier.
pub fn forward_matrix(setup: &InverseSetup, tol: f64) -> Result<DMatrix<f64>> {
    setup.validate()?;
    let p = FracParams::torus(0.5, setup.n_half, setup.d)?;
    let kernel = TorusKernel::build(&p, setup.n_half, tol)?;
    let mut a = DMatrix::<f64>::zeros(setup.omega.len(), setup.w.len());
    let mut diff = vec![0i64; setup.d];
    for (r, o) in setup.omega.iter().enumerate() {
        for (c, w) in setup.w.iter().enumerate() {
            for i in 0..setup.d {
                diff[i] = o[i] - w[i];
            }
            a[(r, c)] = -kernel.get(&diff);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed);
    for _ in 0..5.min(setup.w.len()) {
        let c = rng.random_range(0..setup.w.len());
        let col = apply_frac_torus_spectral(&delta(setup, &setup.w[c])?, 0.5)?;
        for (r, o) in setup.omega.iter().enumerate() {
            let gap = (col.get(o) - a[(r, c)]).abs();
            if gap > 1e-10 {
                return Err(Error::Certificate {
                    what: "forward matrix column against the Fourier multiplier",
                    residual: gap,
                    tolerance: 1e-10,
                });
            }
        }
    }
    Ok(a)
}

/// Gram matrix of the `H^1` form restricted to functions supported in `W`:
/// `f^T P f = ‖f‖_{H^1}^2` with multiplier `1 + h^{-2} Σ_i sin^2(h k_i)`.
pub fn h1_gram(setup: &InverseSetup) -> Result<DMatrix<f64>> {
    setup.validate()?;
    let n = (2 * setup.n_half + 1) as f64;
    let h = 2.0 * PI / n;
    let mut p = DMatrix::<f64>::zeros(setup.w.len(), setup.w.len());
    for (c, w) in setup.w.iter().enumerate() {
        let col = apply_multiplier(&delta(setup, w)?, |k| {
            1.0 + k
                .iter()
                .map(|&x| {
                    let a = math::sin(2.0 * PI * x as f64 / n);
                    a * a
                })
                .sum::<f64>()
                / (h * h)
        });
        for (r, v) in setup.w.iter().enumerate() {
            p[(r, c)] = col.get(v);
        }
    }
    // symmetrize away round-off
    Ok((&p + p.transpose()) * 0.5)
}

/// Minimizer of `‖A f - g‖^2 + λ f^T P f` through a Cholesky factorization
/// of the normal equations.
pub fn recover_tikhonov(a: &DMatrix<f64>, g: &DVector<f64>, lambda: f64, p: &DMatrix<f64>) -> Result<DVector<f64>> {
    if !(lambda > 0.0) {
        return Err(domain("regularization must be positive", lambda));
    }
    if a.nrows() != g.len() || p.nrows() != a.ncols() || p.ncols() != a.ncols() {
        return Err(Error::Precondition("matrix shapes do not match".into()));
    }
    let normal = a.transpose() * a + p * lambda;
    let chol = normal
        .cholesky()
        .ok_or(Error::Factorization("Cholesky factorization of the normal equations"))?;
    Ok(chol.solve(&(a.transpose() * g)))
}

/// `λ` with `‖A f̂_λ - g‖ = target`, by bisection on `ln λ`.
fn discrepancy_lambda(a: &DMatrix<f64>, g: &DVector<f64>, p: &DMatrix<f64>, target: f64) -> Result<(f64, DVector<f64>)> {
    let scale = (a.transpose() * a).trace() / p.trace();
    let mut lo = math::ln(1e-16 * scale);
    let mut hi = math::ln(1e6 * scale);
    let resid = |ln_l: f64| -> Result<(f64, DVector<f64>)> {
        let f = recover_tikhonov(a, g, math::exp(ln_l), p)?;
        Ok(((a * &f - g).norm(), f))
    };
    let (r_lo, _) = resid(lo)?;
    let (r_hi, _) = resid(hi)?;
    if !(r_lo <= target && target <= r_hi) {
        return Err(Error::LambdaRange {
            low: r_lo,
            high: r_hi,
            target,
        });
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if resid(mid)?.0 > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let l = 0.5 * (lo + hi);
    Ok((math::exp(l), resid(l)?.1))
}

/// One row of the stability curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub eps: f64,
    pub error_mean: f64,
    pub error_std: f64,
    /// Mean of `‖g - A f*‖ / ‖f*‖_{H^1}` over trials.
    pub data_ratio: f64,
    /// Geometric mean of the chosen regularization.
    pub lambda_chosen: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCurve {
    pub points: Vec<CurvePoint>,
    pub fitted_nu: f64,
    pub fitted_c: f64,
    /// Coefficient of determination of the log-log-log fit.
    pub r_squared: f64,
}

struct Trial {
    f_star: DVector<f64>,
    clean: DVector<f64>,
    eta: DVector<f64>,
}

fn draw_trial(setup: &InverseSetup, a: &DMatrix<f64>, p: &DMatrix<f64>, trial: u64) -> Trial {
    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed ^ trial);
    let mut f_star = DVector::from_fn(a.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
    let h1 = math::sqrt(f_star.dot(&(p * &f_star)));
    f_star /= h1;
    let clean = a * &f_star;
    let mut eta = DVector::from_fn(a.nrows(), |_, _| rng.sample::<f64, _>(StandardNormal));
    eta *= clean.norm() / eta.norm();
    Trial { f_star, clean, eta }
}

/// Largest `L^2(W)` error over `trials` noiseless recoveries with
/// `λ = setup.reg_lambda`.
pub fn noiseless_recovery(setup: &InverseSetup, trials: usize, tol: f64) -> Result<f64> {
    let a = forward_matrix(setup, tol)?;
    let p = h1_gram(setup)?;
    let mut worst = 0.0f64;
    for t in 0..trials as u64 {
        let tr = draw_trial(setup, &a, &p, t);
        let f = recover_tikhonov(&a, &tr.clean, setup.reg_lambda, &p)?;
        worst = worst.max((f - tr.f_star).norm());
    }
    Ok(worst)
}

/// Recovery error against noise level, with `(C, ν)` fitted to
/// `error ≈ C |ln(data ratio)|^{-ν}`.
pub fn stability_sweep(setup: &InverseSetup, eps_list: &[f64], trials: usize, tol: f64) -> Result<StabilityCurve> {
    if eps_list.is_empty() || trials == 0 {
        return Err(Error::Precondition("need at least one noise level and one trial".into()));
    }
    if eps_list.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
        return Err(Error::Precondition("noise levels must lie in (0,1)".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Precondition("noise levels must be strictly decreasing".into()));
    }
    let a = forward_matrix(setup, tol)?;
    let p = h1_gram(setup)?;
    let draws: Vec<Trial> = (0..trials as u64).map(|t| draw_trial(setup, &a, &p, t)).collect();
    let mut points = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let mut errs = Vec::with_capacity(trials);
        let mut ratio = 0.0;
        let mut log_l = 0.0;
        for tr in &draws {
            let g = &tr.clean + &tr.eta * eps;
            let (lambda, f) = discrepancy_lambda(&a, &g, &p, eps * g.norm())?;
            errs.push((f - &tr.f_star).norm());
            ratio += (&tr.eta * eps).norm();
            log_l += math::ln(lambda);
        }
        let k = trials as f64;
        let mean = errs.iter().sum::<f64>() / k;
        let var = if trials > 1 {
            errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (k - 1.0)
        } else {
            0.0
        };
        points.push(CurvePoint {
            eps,
            error_mean: mean,
            error_std: math::sqrt(var),
            data_ratio: ratio / k,
            lambda_chosen: math::exp(log_l / k),
        });
    }
    let xs: Vec<f64> = points.iter().map(|q| math::ln(math::ln(q.data_ratio).abs())).collect();
    let ys: Vec<f64> = points.iter().map(|q| math::ln(q.error_mean)).collect();
    let (slope, intercept, r_squared) = linear_fit(&xs, &ys);
    Ok(StabilityCurve {
        points,
        fitted_nu: -slope,
        fitted_c: math::exp(intercept),
        r_squared,
    })
}

/// Ordinary least squares `y ≈ a x + b`; returns `(a, b, R^2)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return (0.0, my, 0.0);
    }
    let a = sxy / sxx;
    let b = my - a * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (a, b, r2)
}

/// `C f |ln ε|^{-ν} + C exp(-(Ch)^{-1} |ln ε|^{-1+ν}) f`.
pub fn stability_bound(eps: f64, h: f64, nu: f64, c: f64, f_h1: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(domain("ε must lie in (0,1)", eps));
    }
    if !(h > 0.0) {
        return Err(domain("mesh h must be positive", h));
    }
    let l = math::ln(eps).abs();
    Ok(c * f_h1 * math::powf(l, -nu) + c * math::exp(-math::powf(l, nu - 1.0) / (c * h)) * f_h1)
}

/// `h0 ≤ 10^{-1} |ln ε|^{-1+ν} |ln(-C ln ε)|^{-1}`.
pub fn continuum_regime(h0: f64, eps: f64, nu: f64, c: f64) -> Result<bool> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(domain("ε must lie in (0,1)", eps));
    }
    let inner = -c * math::ln(eps);
    if !(inner > 1.0) {
        return Err(domain("-C ln ε must exceed 1", inner));
    }
    let rhs = 0.1 * math::powf(math::ln(eps).abs(), nu - 1.0) / math::ln(inner).abs();
    Ok(h0 <= rhs)
}
