//! Semidiscrete extension problem on the torus, its weighted Neumann trace,
//! and the Carleman / boundary-bulk machinery for `s = 1/2`.
//!
//! The extension of `v` solves `(∂_t^2 + ((1-2s)/t) ∂_t + Δ_A) ũ = 0` for
//! `t > 0` with `ũ(·,0) = v`, mode by mode:
//! `ũ_k(t) = v̂_k θ_s(√λ_k t)`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::lattice::{apply_frac_torus_spectral, cube_points, dft, idft, LatticeFunction, Point, Shape, TorusFunction};
use crate::math::{self, PI};
use crate::specfun::{extension_profile, gamma_pos};

/// `ũ` sampled on `{-N..N}^d × t_grid`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionField {
    base: TorusFunction,
    s: f64,
    t_grid: Vec<f64>,
    /// `values[level * |torus| + index]`.
    values: Vec<f64>,
}

impl ExtensionField {
    pub fn base(&self) -> &TorusFunction {
        &self.base
    }
    pub fn s(&self) -> f64 {
        self.s
    }
    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }
    /// Slice of values at `t_grid[level]`, in the base's row-major order.
    pub fn level(&self, level: usize) -> &[f64] {
        let n = self.base.values().len();
        &self.values[level * n..(level + 1) * n]
    }
    pub fn get(&self, j: &[i64], level: usize) -> f64 {
        self.level(level)[self.base.index(j)]
    }
}

/// `t_min ρ^k` for `k = 0, 1, ...` up to the first value `≥ t_max`.
pub fn geometric_grid(t_min: f64, ratio: f64, t_max: f64) -> Result<Vec<f64>> {
    if !(t_min > 0.0) || !(ratio > 1.0) || !(t_max > t_min) {
        return Err(Error::Precondition(format!(
            "geometric grid needs 0 < t_min < t_max and ratio > 1 (got {t_min}, {t_max}, {ratio})"
        )));
    }
    let mut grid = vec![t_min];
    while *grid.last().unwrap() < t_max {
        grid.push(grid.last().unwrap() * ratio);
    }
    Ok(grid)
}

/// Eigenvalue of `-Δ_A` at frequency `k`: `Σ_i (4/h^2) sin^2(π k_i/(2N+1))`.
fn laplace_eigenvalue(k: &[i64], n_half: usize) -> f64 {
    let n = (2 * n_half + 1) as f64;
    let h = 2.0 * PI / n;
    k.iter()
        .map(|&x| {
            let a = math::sin(PI * x as f64 / n);
            4.0 * a * a / (h * h)
        })
        .sum()
}

fn check_order(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(domain("order s must lie in (0,1)", s))
    }
}

/// Solve the extension problem per Fourier mode and sample it on `t_grid`.
pub fn cs_extend_torus(v: &TorusFunction, s: f64, t_grid: &[f64]) -> Result<ExtensionField> {
    check_order(s)?;
    if t_grid.is_empty() || !(t_grid[0] > 0.0) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition(
            "t grid must be positive and strictly increasing".into(),
        ));
    }
    let (n_half, d) = (v.n_half(), v.d());
    let coeffs = dft(v);
    let roots: Vec<f64> = cube_points(n_half, d)
        .map(|k| math::sqrt(laplace_eigenvalue(&k, n_half)))
        .collect();
    let mut values = Vec::with_capacity(t_grid.len() * coeffs.len());
    let mut work = vec![Complex64::new(0.0, 0.0); coeffs.len()];
    for &t in t_grid {
        for ((w, c), r) in work.iter_mut().zip(&coeffs).zip(&roots) {
            *w = c * extension_profile(s, r * t);
        }
        values.extend(idft(&work, n_half, d).iter().map(|c| c.re));
    }
    Ok(ExtensionField {
        base: v.clone(),
        s,
        t_grid: t_grid.to_vec(),
        values,
    })
}

/// `d_s = Γ(1-s) / (4^{s-1/2} Γ(s))`, the factor between the weighted
/// Neumann trace of the extension and `(-Δ_A)^s`.
pub fn neumann_constant(s: f64) -> Result<f64> {
    check_order(s)?;
    Ok(gamma_pos(1.0 - s) / (math::powf(4.0, s - 0.5) * gamma_pos(s)))
}

/// Relative fit residual above which the grid is declared too coarse.
const FIT_THRESHOLD: f64 = 1e-6;

/// `-lim_{t→0} t^{1-2s} ∂_t ũ`, from a least-squares fit of
/// `ũ_j(t) - u_j ≈ β_j t^{2s} + γ_j t^2 + δ_j t^{2s+2}` on the first
/// `fit_points` levels. The limit is `-2s β_j`.
pub fn neumann_trace(field: &ExtensionField, fit_points: usize) -> Result<TorusFunction> {
    let s = field.s;
    let grid = &field.t_grid;
    if fit_points < 4 || fit_points > grid.len() {
        return Err(Error::Precondition(format!(
            "fit needs between 4 and {} levels, got {fit_points}",
            grid.len()
        )));
    }
    if grid[0] > 1e-4 {
        return Err(Error::Precondition(format!(
            "smallest t = {:e} does not resolve the boundary layer (need ≤ 1e-4)",
            grid[0]
        )));
    }
    let exps = [2.0 * s, 2.0, 2.0 * s + 2.0];
    let t_top = grid[fit_points - 1];
    let mut design = DMatrix::<f64>::zeros(fit_points, exps.len());
    for i in 0..fit_points {
        for (c, e) in exps.iter().enumerate() {
            design[(i, c)] = math::powf(grid[i] / t_top, *e);
        }
    }
    let base = field.base.values();
    let npts = base.len();
    let mut data = DMatrix::<f64>::zeros(fit_points, npts);
    for i in 0..fit_points {
        for (j, (a, b)) in field.level(i).iter().zip(base).enumerate() {
            data[(i, j)] = a - b;
        }
    }
    let scale = data.amax();
    if scale == 0.0 {
        return TorusFunction::zeros(field.base.n_half(), field.base.d());
    }
    let svd = design.clone().svd(true, true);
    let coefs = svd
        .solve(&data, 1e-14)
        .map_err(|_| Error::Factorization("least-squares fit"))?;
    // differences of O(1) values carry round-off of order ε |u|
    let floor = 1e3 * f64::EPSILON * field.base.sup_norm();
    let residual = ((&data - &design * &coefs).amax() - floor).max(0.0) / scale;
    if residual > FIT_THRESHOLD {
        return Err(Error::GridTooCoarse {
            residual,
            threshold: FIT_THRESHOLD,
        });
    }
    let unscale = math::powf(t_top, -2.0 * s);
    let values = (0..npts).map(|j| -2.0 * s * coefs[(0, j)] * unscale).collect();
    TorusFunction::new(field.base.n_half(), field.base.d(), values)
}

/// Neumann trace next to `d_s (-Δ_A)^s u` and the relative sup defect.
#[derive(Debug, Clone)]
pub struct TraceComparison {
    pub trace: TorusFunction,
    pub oracle: TorusFunction,
    pub constant: f64,
    pub rel_defect: f64,
}

pub fn neumann_trace_check(field: &ExtensionField, fit_points: usize) -> Result<TraceComparison> {
    let trace = neumann_trace(field, fit_points)?;
    let constant = neumann_constant(field.s)?;
    let frac = apply_frac_torus_spectral(&field.base, field.s)?;
    let oracle = TorusFunction::new(
        frac.n_half(),
        frac.d(),
        frac.values().iter().map(|x| constant * x).collect(),
    )?;
    let scale = oracle.sup_norm();
    let diff = trace.max_abs_diff(&oracle);
    let rel_defect = if scale > 0.0 { diff / scale } else { diff };
    Ok(TraceComparison {
        trace,
        oracle,
        constant,
        rel_defect,
    })
}

/// `φ(jh, t) = -|jh|^2 + c0 (t^2/2 - t)`.
pub fn carleman_weight(c0: f64, h: f64, j: &[i64], t: f64) -> f64 {
    let x2: f64 = j.iter().map(|&x| (x as f64 * h) * (x as f64 * h)).sum();
    -x2 + c0 * (0.5 * t * t - t)
}

/// Parameters of the Carleman weight and its admissible range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarlemanConfig {
    pub c0: f64,
    pub tau: f64,
    pub h: f64,
    pub delta0: f64,
    pub tau0: f64,
    pub t_step: f64,
}

impl CarlemanConfig {
    /// `δ0 = 0.5`, `τ0 = 1`, `t_step = h/4`.
    pub fn new(c0: f64, tau: f64, h: f64) -> Result<Self> {
        let cfg = Self {
            c0,
            tau,
            h,
            delta0: 0.5,
            tau0: 1.0,
            t_step: 0.25 * h,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c0 > 0.0) {
            return Err(domain("c0 must be positive", self.c0));
        }
        if !(self.h > 0.0) {
            return Err(domain("mesh h must be positive", self.h));
        }
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return Err(domain("tau must be finite and nonnegative", self.tau));
        }
        if !(self.delta0 > 0.0) || !(self.t_step > 0.0) {
            return Err(domain("delta0 and t_step must be positive", self.delta0.min(self.t_step)));
        }
        if self.tau * self.h > self.delta0 {
            return Err(Error::Precondition(format!(
                "tau·h = {} exceeds delta0 = {}",
                self.tau * self.h,
                self.delta0
            )));
        }
        Ok(())
    }
}

type Grid = BTreeMap<Point, f64>;

fn neighbours(p: &Point, k: usize, step: i64) -> Point {
    let mut q = p.clone();
    q[k] += step;
    q
}

/// `(Sv, Av)` on maps, without any validation.
fn conjugates(cfg: &CarlemanConfig, v: &Grid) -> (Grid, Grid) {
    let th2 = cfg.tau * cfg.h * cfg.h;
    let inv_h2 = 1.0 / (cfg.h * cfg.h);
    let Some(d) = v.keys().next().map(|p| p.len()) else {
        return (Grid::new(), Grid::new());
    };
    let mut out_pts: Vec<Point> = Vec::new();
    for p in v.keys() {
        out_pts.push(p.clone());
        for k in 0..d {
            out_pts.push(neighbours(p, k, 1));
            out_pts.push(neighbours(p, k, -1));
        }
    }
    out_pts.sort();
    out_pts.dedup();
    let val = |p: &Point| v.get(p).copied().unwrap_or(0.0);
    let mut sv = Grid::new();
    let mut av = Grid::new();
    for j in out_pts {
        let mut s_acc = 0.0;
        let mut a_acc = 0.0;
        for k in 0..d {
            let up = val(&neighbours(&j, k, 1));
            let down = val(&neighbours(&j, k, -1));
            // φ_j - φ_{j+e_k} = h^2 (2 j_k + 1),  φ_j - φ_{j-e_k} = h^2 (1 - 2 j_k)
            let jk = j[k] as f64;
            let a_up = th2 * (2.0 * jk + 1.0);
            let a_down = th2 * (1.0 - 2.0 * jk);
            s_acc += math::cosh(a_up) * up + math::cosh(a_down) * down - 2.0 * val(&j);
            a_acc += math::sinh(a_up) * up + math::sinh(a_down) * down;
        }
        sv.insert(j.clone(), s_acc * inv_h2);
        av.insert(j, a_acc * inv_h2);
    }
    (sv, av)
}

fn finite_map(cfg: &CarlemanConfig, v: &LatticeFunction) -> Result<Grid> {
    cfg.validate()?;
    let Shape::FinitelySupported(map) = v.shape() else {
        return Err(Error::Precondition("tangential conjugates need a finitely supported function".into()));
    };
    if (v.params().h() - cfg.h).abs() > 1e-15 * cfg.h {
        return Err(Error::Precondition(format!(
            "function mesh {} differs from configuration mesh {}",
            v.params().h(),
            cfg.h
        )));
    }
    Ok(map.clone())
}

/// Symmetric and antisymmetric parts of `e^{τφ} Δ_d e^{-τφ}` applied to `v`.
///
/// The weight differences are exact: `τ(φ_j - φ_{j±e_k}) = τh^2(1 ± 2j_k)`.
pub fn tangential_conjugates(cfg: &CarlemanConfig, v: &LatticeFunction) -> Result<(Grid, Grid)> {
    Ok(conjugates(cfg, &finite_map(cfg, v)?))
}

fn pair(a: &Grid, b: &Grid) -> f64 {
    a.iter().map(|(k, x)| x * b.get(k).copied().unwrap_or(0.0)).sum()
}

/// `([S,A]v, v)` two ways.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommutatorCheck {
    /// `(S(Av), v) - (A(Sv), v)`.
    pub lhs: f64,
    /// `-4h^{-4} sinh(2τh^2) Σ sinh^2(2τ j_k h^2)|v_j|^2 - 4h^{-2} sinh(2τh^2) Σ |(v_{j+e_k} - v_{j-e_k})/(2h)|^2`.
    pub rhs: f64,
    pub defect: f64,
}

pub fn tangential_commutator_check(cfg: &CarlemanConfig, v: &LatticeFunction) -> Result<CommutatorCheck> {
    let map = finite_map(cfg, v)?;
    let (sv, av) = conjugates(cfg, &map);
    let (s_av, _) = conjugates(cfg, &av);
    let (_, a_sv) = conjugates(cfg, &sv);
    let lhs = pair(&s_av, &map) - pair(&a_sv, &map);

    let h = cfg.h;
    let th2 = cfg.tau * h * h;
    let sh = math::sinh(2.0 * th2);
    let Some(d) = map.keys().next().map(|p| p.len()) else {
        return Ok(CommutatorCheck {
            lhs,
            rhs: 0.0,
            defect: lhs.abs(),
        });
    };
    let mut weight = 0.0;
    for (j, x) in &map {
        for &jk in j {
            let a = math::sinh(2.0 * th2 * jk as f64);
            weight += a * a * x * x;
        }
    }
    // centred differences live on the support and its neighbours
    let mut grad = 0.0;
    let mut pts: Vec<Point> = Vec::new();
    for p in map.keys() {
        pts.push(p.clone());
        for k in 0..d {
            pts.push(neighbours(p, k, 1));
            pts.push(neighbours(p, k, -1));
        }
    }
    pts.sort();
    pts.dedup();
    let val = |p: &Point| map.get(p).copied().unwrap_or(0.0);
    for j in &pts {
        for k in 0..d {
            let c = (val(&neighbours(j, k, 1)) - val(&neighbours(j, k, -1))) / (2.0 * h);
            grad += c * c;
        }
    }
    let rhs = -4.0 * sh * weight / (h * h * h * h) - 4.0 * sh * grad / (h * h);
    Ok(CommutatorCheck {
        lhs,
        rhs,
        defect: (lhs - rhs).abs(),
    })
}

/// Real field on `{-R..R}^d × {0, Δt, 2Δt, ...}` with mesh `h`; zero outside.
#[derive(Debug, Clone, PartialEq)]
pub struct BulkField {
    d: usize,
    h: f64,
    radius: usize,
    t_step: f64,
    levels: usize,
    /// `values[level * |box| + index]`, row-major box index.
    values: Vec<f64>,
}

impl BulkField {
    pub fn from_fn<F: FnMut(&[f64], f64) -> f64>(
        d: usize,
        h: f64,
        radius: usize,
        t_step: f64,
        levels: usize,
        mut f: F,
    ) -> Result<Self> {
        if d == 0 || !(h > 0.0) || !(t_step > 0.0) || levels < 4 {
            return Err(Error::Precondition("bulk field needs d ≥ 1, h > 0, t_step > 0, ≥ 4 levels".into()));
        }
        let pts: Vec<Point> = cube_points(radius, d).collect();
        let mut values = Vec::with_capacity(pts.len() * levels);
        let mut x = vec![0.0; d];
        for k in 0..levels {
            let t = k as f64 * t_step;
            for p in &pts {
                for (xi, pi) in x.iter_mut().zip(p) {
                    *xi = *pi as f64 * h;
                }
                values.push(f(&x, t));
            }
        }
        Ok(Self {
            d,
            h,
            radius,
            t_step,
            levels,
            values,
        })
    }

    pub fn zeros(d: usize, h: f64, radius: usize, t_step: f64, levels: usize) -> Result<Self> {
        Self::from_fn(d, h, radius, t_step, levels, |_, _| 0.0)
    }

    fn side(&self) -> usize {
        2 * self.radius + 1
    }
    fn box_len(&self) -> usize {
        self.side().pow(self.d as u32)
    }

    fn at(&self, j: &[i64], k: isize) -> f64 {
        if k < 0 || k as usize >= self.levels {
            return 0.0;
        }
        let r = self.radius as i64;
        let mut idx = 0usize;
        for &x in j {
            if x.abs() > r {
                return 0.0;
            }
            idx = idx * self.side() + (x + r) as usize;
        }
        self.values[k as usize * self.box_len() + idx]
    }
}

/// Norms entering the Carleman inequality and the smallest constant for it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarlemanProbe {
    /// `τ^{3/2}‖e^{τφ}ũ‖ + τ^{1/2}‖e^{τφ}∇_d ũ‖ + τ^{1/2}‖e^{τφ}∂_t ũ‖`.
    pub lhs: f64,
    /// `‖e^{τφ}(Δ_d + ∂_t^2)ũ‖ + τ^{3/2}‖e^{τφ}(|u| + |∇_d u| + |∂_t ũ|)‖_{t=0}`.
    pub rhs: f64,
    pub empirical_constant: f64,
}

/// Evaluate both sides of the weighted inequality for `field`, whose support
/// must lie in the half ball of radius 4/5.
pub fn carleman_probe(cfg: &CarlemanConfig, field: &BulkField) -> Result<CarlemanProbe> {
    cfg.validate()?;
    if cfg.tau <= cfg.tau0 {
        return Err(Error::Precondition(format!(
            "tau = {} must exceed tau0 = {}",
            cfg.tau, cfg.tau0
        )));
    }
    if (field.h - cfg.h).abs() > 1e-15 * cfg.h || (field.t_step - cfg.t_step).abs() > 1e-15 * cfg.t_step {
        return Err(Error::Precondition("field grid does not match the configuration".into()));
    }
    let (h, dt, tau, d) = (cfg.h, cfg.t_step, cfg.tau, field.d);
    let pts: Vec<Point> = cube_points(field.radius, d).collect();
    for k in 0..field.levels {
        let t = k as f64 * dt;
        for p in &pts {
            let x2: f64 = p.iter().map(|&x| (x as f64 * h) * (x as f64 * h)).sum();
            if field.at(p, k as isize) != 0.0 && x2 + t * t >= 0.64 {
                return Err(Error::Precondition(format!(
                    "field is nonzero at j = {p:?}, t = {t} outside the half ball of radius 4/5"
                )));
            }
        }
    }
    // the box must leave one empty layer so that outside values are truly zero
    let edge = (field.radius as f64) * h;
    let t_edge = (field.levels - 1) as f64 * dt;
    if edge < 0.8 || t_edge < 0.8 {
        return Err(Error::Precondition("grid does not cover the half ball of radius 4/5".into()));
    }

    let hd = math::powi(h, d as i32);
    let mut acc_u = 0.0;
    let mut acc_grad = 0.0;
    let mut acc_dt = 0.0;
    let mut acc_op = 0.0;
    let mut acc_bdry = 0.0;
    let mut nb = vec![0i64; d];
    // the padded grid adds one level above the last so the centred stencils close
    for k in 0..=field.levels as isize {
        let t = k as f64 * dt;
        let wt = if k == 0 { 0.5 * dt } else { dt };
        for p in pts.iter().chain(core::iter::empty()) {
            let u = field.at(p, k);
            let e = math::exp(tau * carleman_weight(cfg.c0, h, p, t));
            let mut grad2 = 0.0;
            let mut lap = 0.0;
            for i in 0..d {
                nb.copy_from_slice(p);
                nb[i] += 1;
                let up = field.at(&nb, k);
                nb[i] -= 2;
                let down = field.at(&nb, k);
                let g = (up - u) / h;
                grad2 += g * g;
                lap += (up + down - 2.0 * u) / (h * h);
            }
            let (ut, utt) = if k == 0 {
                let (u1, u2, u3) = (field.at(p, 1), field.at(p, 2), field.at(p, 3));
                (
                    (-3.0 * u + 4.0 * u1 - u2) / (2.0 * dt),
                    (2.0 * u - 5.0 * u1 + 4.0 * u2 - u3) / (dt * dt),
                )
            } else {
                let (um, up) = (field.at(p, k - 1), field.at(p, k + 1));
                ((up - um) / (2.0 * dt), (up + um - 2.0 * u) / (dt * dt))
            };
            let e2 = e * e * wt;
            acc_u += e2 * u * u;
            acc_grad += e2 * grad2;
            acc_dt += e2 * ut * ut;
            acc_op += e2 * (lap + utt) * (lap + utt);
            if k == 0 {
                let b = u.abs() + math::sqrt(grad2) + ut.abs();
                acc_bdry += e * e * b * b;
            }
        }
    }
    let norm = |a: f64| math::sqrt(hd * a);
    let t32 = tau * math::sqrt(tau);
    let t12 = math::sqrt(tau);
    let lhs = t32 * norm(acc_u) + t12 * norm(acc_grad) + t12 * norm(acc_dt);
    let rhs = norm(acc_op) + t32 * norm(acc_bdry);
    let empirical_constant = if lhs == 0.0 {
        0.0
    } else if rhs == 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    };
    Ok(CarlemanProbe {
        lhs,
        rhs,
        empirical_constant,
    })
}

/// Half-ball quantities of an extension field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfBallNorms {
    /// `‖ũ‖_{L^2(B_r^+)}`.
    pub bulk_l2: f64,
    /// `‖u‖_{L^2(B_r')}`.
    pub trace_l2: f64,
    /// `‖u‖_{H^1(B_r')}` with forward differences.
    pub trace_h1: f64,
    /// `‖lim t^{1-2s} ∂_t ũ‖_{L^2(B_r')}`.
    pub trace_dt_l2: f64,
}

/// Levels used for the weighted normal derivative at the boundary.
const TRACE_FIT_POINTS: usize = 12;

/// Norms over `B_r^+(center)` and `B_r'(center)`; lattice sums with weight
/// `h^d`, trapezoid rule in `t` (with `t = 0` carrying the trace).
pub fn half_ball_norms(field: &ExtensionField, center: &[f64], r: f64) -> Result<HalfBallNorms> {
    if !(r > 0.0) {
        return Err(domain("half-ball radius must be positive", r));
    }
    let base = &field.base;
    let d = base.d();
    if center.len() != d {
        return Err(Error::Precondition(format!("center must have {d} coordinates")));
    }
    let h = base.h();
    let grid = &field.t_grid;
    if *grid.last().unwrap() < r {
        return Err(Error::Precondition(format!(
            "t grid ends at {} below the radius {r}",
            grid.last().unwrap()
        )));
    }
    let neumann = neumann_trace(field, TRACE_FIT_POINTS)?;
    let hd = math::powi(h, d as i32);
    let mut bulk = 0.0;
    let mut tl2 = 0.0;
    let mut th1 = 0.0;
    let mut tdt = 0.0;
    for (idx, p) in base.points().enumerate() {
        let dist2: f64 = p
            .iter()
            .zip(center)
            .map(|(&x, c)| (x as f64 * h - c) * (x as f64 * h - c))
            .sum();
        if dist2 >= r * r {
            continue;
        }
        let u0 = base.values()[idx];
        tl2 += u0 * u0;
        let mut g2 = 0.0;
        let mut q = p.clone();
        for i in 0..d {
            q[i] += 1;
            let g = (base.get(&q) - u0) / h;
            q[i] -= 1;
            g2 += g * g;
        }
        th1 += u0 * u0 + g2;
        let nt = neumann.values()[idx];
        tdt += nt * nt;
        // ∫_0^{T} ũ^2 dt with T = sqrt(r^2 - |x - c|^2)
        let top = math::sqrt(r * r - dist2);
        let mut prev_t = 0.0;
        let mut prev_f = u0 * u0;
        for (lvl, &t) in grid.iter().enumerate() {
            let v = field.level(lvl)[idx];
            let f = v * v;
            if t >= top {
                let w = (top - prev_t) / (t - prev_t);
                let f_top = prev_f + w * (f - prev_f);
                bulk += 0.5 * (prev_f + f_top) * (top - prev_t);
                break;
            }
            bulk += 0.5 * (prev_f + f) * (t - prev_t);
            prev_t = t;
            prev_f = f;
        }
    }
    Ok(HalfBallNorms {
        bulk_l2: math::sqrt(hd * bulk),
        trace_l2: math::sqrt(hd * tl2),
        trace_h1: math::sqrt(hd * th1),
        trace_dt_l2: math::sqrt(hd * tdt),
    })
}

/// Outcome of the boundary-bulk interpolation probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryBulkReport {
    pub h: f64,
    pub r0: f64,
    /// `‖ũ‖_{L^2(B_{r0}^+)}`.
    pub bulk_small: f64,
    /// `‖ũ‖_{L^2(B_1^+)}`.
    pub bulk_big: f64,
    /// `‖u‖_{H^1(B_1')} + ‖∂_t ũ‖_{L^2(B_1')}`.
    pub trace_data: f64,
    pub fitted_alpha: f64,
    /// The saturated equation had a solution inside `(0,1)`.
    pub saturated: bool,
    pub holds: bool,
}

/// Constant used for both the interpolation factor and the correction term.
pub const BOUNDARY_BULK_C: f64 = 10.0;
const ALPHA_FLOOR: f64 = 1e-3;

/// Exponent for which
/// `bulk_small = C max(bulk_big, D)^{1-α} D^α + C e^{-C/h} bulk_big`,
/// clipped into `[ALPHA_FLOOR, 1 - ALPHA_FLOOR]`, and whether the equation
/// had a solution at all. When `D ≥ bulk_big` the right side does not depend
/// on `α`; every exponent works and the upper end is reported.
pub fn saturated_alpha(bulk_small: f64, bulk_big: f64, data: f64, h: f64) -> (f64, bool) {
    let c = BOUNDARY_BULK_C;
    let m = bulk_big.max(data);
    if m == 0.0 || data == 0.0 {
        return (1.0 - ALPHA_FLOOR, false);
    }
    let corr = c * math::exp(-c / h) * bulk_big;
    let q = (bulk_small - corr) / (c * m);
    if q <= 0.0 || data >= m {
        return (1.0 - ALPHA_FLOOR, false);
    }
    let raw = math::ln(q) / math::ln(data / m);
    (raw.clamp(ALPHA_FLOOR, 1.0 - ALPHA_FLOOR), raw > 0.0 && raw < 1.0)
}

/// Evaluate the interpolation inequality for the `s = 1/2` extension of `f`
/// (zero bulk potential), with `C = 10`.
pub fn boundary_bulk_probe(f: &TorusFunction, r0: f64) -> Result<BoundaryBulkReport> {
    if !(r0 > 0.0 && r0 < 1.0) {
        return Err(domain("inner radius r0 must lie in (0,1)", r0));
    }
    let h = f.h();
    for (p, v) in f.points().zip(f.values()) {
        let x2: f64 = p.iter().map(|&x| (x as f64 * h) * (x as f64 * h)).sum();
        if *v != 0.0 && x2 >= 0.25 {
            return Err(Error::Precondition(format!(
                "boundary datum is nonzero at {p:?}, outside the ball of radius 1/2"
            )));
        }
    }
    let mut grid = geometric_grid(1e-6, 1.05, 1.0)?;
    // the half ball of radius 1 needs the grid to reach t = 1
    if *grid.last().unwrap() < 1.0 {
        grid.push(1.0);
    }
    let field = cs_extend_torus(f, 0.5, &grid)?;
    let origin = vec![0.0; f.d()];
    let small = half_ball_norms(&field, &origin, r0)?;
    let big = half_ball_norms(&field, &origin, 1.0)?;
    let data = big.trace_h1 + big.trace_dt_l2;
    let c = BOUNDARY_BULK_C;
    let (alpha, saturated) = saturated_alpha(small.bulk_l2, big.bulk_l2, data, h);
    let m = big.bulk_l2.max(data);
    let rhs = c * math::powf(m, 1.0 - alpha) * math::powf(data, alpha) + c * math::exp(-c / h) * big.bulk_l2;
    Ok(BoundaryBulkReport {
        h,
        r0,
        bulk_small: small.bulk_l2,
        bulk_big: big.bulk_l2,
        trace_data: data,
        fitted_alpha: alpha,
        saturated,
        holds: small.bulk_l2 <= rhs,
    })
}
