//! Functions on `(hZ)^d` and on the discrete torus, and the fractional
//! discrete Laplacian acting on them.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::dft::DftNd;
use crate::error::{domain, Error, Result};
use crate::kernel::{
    kernel_1d, kernel_mass, kernel_nd, kernel_tail_sum_1d, torus_mesh, FracParams, KernelTable,
    TorusKernel,
};
use crate::math;
use crate::quad::Estimate;

/// Lattice point.
pub type Point = Vec<i64>;

/// All points of the cube `{-N..N}^d` in row-major order.
pub fn cube_points(n_half: usize, d: usize) -> impl Iterator<Item = Point> {
    let side = 2 * n_half + 1;
    let total = side.pow(d as u32);
    (0..total).map(move |mut e| {
        let mut p = vec![0i64; d];
        for slot in p.iter_mut().rev() {
            *slot = (e % side) as i64 - n_half as i64;
            e /= side;
        }
        p
    })
}

/// How a lattice function is represented.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// Zero outside a finite set.
    FinitelySupported(BTreeMap<Point, f64>),
    /// `left` for `j_axis ≤ -cutoff`, `right` for `j_axis ≥ cutoff`, their
    /// mean in between, plus a finitely supported perturbation.
    StepProfile {
        axis: usize,
        cutoff: i64,
        left: f64,
        right: f64,
        perturbation: BTreeMap<Point, f64>,
    },
}

/// Bounded function on `(hZ)^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeFunction {
    params: FracParams,
    shape: Shape,
}

fn check_points<'a>(d: usize, points: impl Iterator<Item = &'a Point>) -> Result<()> {
    for p in points {
        if p.len() != d {
            return Err(Error::Precondition(format!(
                "point {p:?} does not have {d} components"
            )));
        }
    }
    Ok(())
}

impl LatticeFunction {
    /// Finitely supported function; zero entries are dropped.
    pub fn finitely_supported<I: IntoIterator<Item = (Point, f64)>>(
        params: &FracParams,
        entries: I,
    ) -> Result<Self> {
        let map: BTreeMap<Point, f64> = entries.into_iter().filter(|(_, v)| *v != 0.0).collect();
        check_points(params.d(), map.keys())?;
        if map.values().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("function values must be finite".into()));
        }
        Ok(Self {
            params: *params,
            shape: Shape::FinitelySupported(map),
        })
    }

    /// Unit mass at `at`.
    pub fn delta(params: &FracParams, at: Point) -> Result<Self> {
        Self::finitely_supported(params, [(at, 1.0)])
    }

    /// Step along `axis` (0-based) with a finitely supported perturbation.
    pub fn step_profile<I: IntoIterator<Item = (Point, f64)>>(
        params: &FracParams,
        axis: usize,
        cutoff: i64,
        left: f64,
        right: f64,
        perturbation: I,
    ) -> Result<Self> {
        if axis >= params.d() {
            return Err(Error::Precondition(format!(
                "step axis {axis} out of range for d = {}",
                params.d()
            )));
        }
        if cutoff < 1 {
            return Err(Error::Precondition("step cutoff must be at least 1".into()));
        }
        let perturbation: BTreeMap<Point, f64> =
            perturbation.into_iter().filter(|(_, v)| *v != 0.0).collect();
        check_points(params.d(), perturbation.keys())?;
        Ok(Self {
            params: *params,
            shape: Shape::StepProfile {
                axis,
                cutoff,
                left,
                right,
                perturbation,
            },
        })
    }

    pub fn params(&self) -> &FracParams {
        &self.params
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Finite part of the function (the support, or the perturbation).
    pub fn finite_part(&self) -> &BTreeMap<Point, f64> {
        match &self.shape {
            Shape::FinitelySupported(m) => m,
            Shape::StepProfile { perturbation, .. } => perturbation,
        }
    }

    /// Same function scaled by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let scale = |m: &BTreeMap<Point, f64>| m.iter().map(|(k, v)| (k.clone(), c * v)).collect();
        let shape = match &self.shape {
            Shape::FinitelySupported(m) => Shape::FinitelySupported(scale(m)),
            Shape::StepProfile {
                axis,
                cutoff,
                left,
                right,
                perturbation,
            } => Shape::StepProfile {
                axis: *axis,
                cutoff: *cutoff,
                left: c * left,
                right: c * right,
                perturbation: scale(perturbation),
            },
        };
        Self {
            params: self.params,
            shape,
        }
    }

    fn step_base(&self, j: &[i64]) -> f64 {
        match &self.shape {
            Shape::FinitelySupported(_) => 0.0,
            Shape::StepProfile {
                axis,
                cutoff,
                left,
                right,
                ..
            } => {
                let x = j[*axis];
                if x <= -cutoff {
                    *left
                } else if x >= *cutoff {
                    *right
                } else {
                    0.5 * (left + right)
                }
            }
        }
    }

    /// `u_j`.
    pub fn value(&self, j: &[i64]) -> f64 {
        self.step_base(j) + self.finite_part().get(j).copied().unwrap_or(0.0)
    }

    /// `sup |u|`.
    pub fn sup_norm(&self) -> f64 {
        let mut m = 0.0f64;
        match &self.shape {
            Shape::FinitelySupported(map) => {
                for v in map.values() {
                    m = m.max(v.abs());
                }
            }
            Shape::StepProfile {
                left,
                right,
                perturbation,
                ..
            } => {
                m = m.max(left.abs()).max(right.abs());
                for (j, v) in perturbation {
                    m = m.max((self.step_base(j) + v).abs());
                }
            }
        }
        m
    }
}

/// Kernel values on `(hZ)^d` read through a cache, with the diagonal mass.
#[derive(Debug, Clone)]
pub struct LatticeOperator {
    params: FracParams,
    table: KernelTable,
    mass: f64,
    mass_err: f64,
}

impl LatticeOperator {
    /// Operator whose kernel cache covers offsets with `‖m‖_∞ ≤ radius`;
    /// offsets beyond it are integrated on demand.
    pub fn new(params: &FracParams, radius: usize) -> Result<Self> {
        let table = KernelTable::build(params, radius)?;
        let mass = kernel_mass(params, 1e-13)?;
        Ok(Self {
            params: *params,
            table,
            mass: mass.value,
            mass_err: mass.abs_err,
        })
    }

    pub fn params(&self) -> &FracParams {
        &self.params
    }

    pub fn table(&self) -> &KernelTable {
        &self.table
    }

    /// `Σ_{m≠0} K(m)`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `K(m)` with its error estimate.
    pub fn kernel(&self, m: &[i64]) -> Result<Estimate> {
        if self.params.d() == 1 {
            let v = kernel_1d(&self.params, m[0]);
            return Ok(Estimate {
                value: v,
                abs_err: 4.0 * f64::EPSILON * v,
            });
        }
        match (self.table.get(m), self.table.abs_err(m)) {
            (Some(value), Some(abs_err)) => Ok(Estimate { value, abs_err }),
            _ => kernel_nd(&self.params, m, 1e-12),
        }
    }

    /// `((-Δ_h)^s u)_j` with an absolute error bound.
    pub fn apply(&self, u: &LatticeFunction, j: &[i64]) -> Result<Estimate> {
        if u.params != self.params {
            return Err(Error::Precondition(
                "function and operator have different parameters".into(),
            ));
        }
        if j.len() != self.params.d() {
            return Err(Error::Precondition("evaluation point has the wrong dimension".into()));
        }
        let mut acc = Estimate {
            value: 0.0,
            abs_err: 0.0,
        };
        // finite part: q_j mass - Σ_{m≠j} q_m K(j - m)
        let finite = u.finite_part();
        let qj = finite.get(j).copied().unwrap_or(0.0);
        acc.value += qj * self.mass;
        acc.abs_err += qj.abs() * self.mass_err;
        let mut diff = vec![0i64; j.len()];
        for (m, qm) in finite {
            if m.as_slice() == j {
                continue;
            }
            for i in 0..j.len() {
                diff[i] = j[i] - m[i];
            }
            let k = self.kernel(&diff)?;
            acc.value -= qm * k.value;
            acc.abs_err += qm.abs() * k.abs_err;
        }
        if let Shape::StepProfile {
            axis,
            cutoff,
            left,
            right,
            ..
        } = u.shape
        {
            let v = step_operator_value(&self.params, j[axis], cutoff, left, right)?;
            acc.value += v;
            acc.abs_err += 16.0 * f64::EPSILON * v.abs().max(self.mass * left.abs().max(right.abs()));
        }
        Ok(acc)
    }
}

/// Operator applied to the pure step (no perturbation) at a point with axis
/// coordinate `x`. Summing the kernel over the directions transverse to the
/// step leaves the one-dimensional kernel, so this is the 1D value in every
/// dimension. Half-line sums come from the exact tail formula.
fn step_operator_value(p: &FracParams, x: i64, cutoff: i64, left: f64, right: f64) -> Result<f64> {
    let line = p.with_dim(1)?;
    let mid = 0.5 * (left + right);
    let base = |y: i64| {
        if y <= -cutoff {
            left
        } else if y >= cutoff {
            right
        } else {
            mid
        }
    };
    let bx = base(x);
    let mut v = 0.0;
    if x > -cutoff {
        // left half-line m ≤ -cutoff: offsets x - m ≥ x + cutoff ≥ 1
        v += (bx - left) * kernel_tail_sum_1d(&line, (x + cutoff) as u64)?;
    }
    if x < cutoff {
        v += (bx - right) * kernel_tail_sum_1d(&line, (cutoff - x) as u64)?;
    }
    for m in (1 - cutoff)..cutoff {
        if m != x {
            v += (bx - mid) * kernel_1d(&line, x - m);
        }
    }
    Ok(v)
}

/// `((-Δ_h)^s u)_j`, failing if the error bound exceeds `tol`.
pub fn apply_frac_lattice(u: &LatticeFunction, j: &[i64], tol: f64) -> Result<Estimate> {
    let d = u.params.d();
    let mut radius = 1usize;
    if d > 1 {
        for m in u.finite_part().keys() {
            for i in 0..d {
                radius = radius.max((j[i] - m[i]).unsigned_abs() as usize);
            }
        }
        radius = radius.min(match d {
            2 => 200,
            3 => 24,
            _ => 6,
        });
    }
    let op = LatticeOperator::new(&u.params, radius)?;
    let est = op.apply(u, j)?;
    if est.abs_err > tol {
        return Err(Error::Tolerance {
            what: "lattice operator application",
            achieved: est.abs_err,
            requested: tol,
        });
    }
    Ok(est)
}

/// Real function on the discrete torus `{-N..N}^d`, `h = 2π/(2N+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusFunction {
    n_half: usize,
    d: usize,
    values: Vec<f64>,
}

impl TorusFunction {
    /// Values in row-major order over `{-N..N}^d`.
    pub fn new(n_half: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if n_half == 0 || d == 0 {
            return Err(Error::Precondition("torus needs N ≥ 1 and d ≥ 1".into()));
        }
        let expected = (2 * n_half + 1).pow(d as u32);
        if values.len() != expected {
            return Err(Error::Precondition(format!(
                "torus function needs {expected} values, got {}",
                values.len()
            )));
        }
        Ok(Self { n_half, d, values })
    }

    pub fn from_fn<F: FnMut(&[i64]) -> f64>(n_half: usize, d: usize, mut f: F) -> Result<Self> {
        let values = cube_points(n_half, d).map(|p| f(&p)).collect();
        Self::new(n_half, d, values)
    }

    pub fn zeros(n_half: usize, d: usize) -> Result<Self> {
        Self::from_fn(n_half, d, |_| 0.0)
    }

    pub fn n_half(&self) -> usize {
        self.n_half
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn h(&self) -> f64 {
        torus_mesh(self.n_half)
    }
    pub fn side(&self) -> usize {
        2 * self.n_half + 1
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Row-major index of any integer point, reduced into `{-N..N}^d`.
    pub fn index(&self, j: &[i64]) -> usize {
        let n = self.side() as i64;
        let mut idx = 0usize;
        for &x in j {
            let r = (x + self.n_half as i64).rem_euclid(n);
            idx = idx * self.side() + r as usize;
        }
        idx
    }

    /// Value at `j`, read periodically.
    pub fn get(&self, j: &[i64]) -> f64 {
        self.values[self.index(j)]
    }

    pub fn points(&self) -> impl Iterator<Item = Point> {
        cube_points(self.n_half, self.d)
    }

    /// `Σ_j u_j v_j`.
    pub fn dot(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Permutation from row-major `{-N..N}^d` order to residue order and back.
fn to_residue_order(values: &[Complex64], n_half: usize, d: usize) -> Vec<Complex64> {
    let n = 2 * n_half + 1;
    let mut out = vec![Complex64::new(0.0, 0.0); values.len()];
    for (e, v) in values.iter().enumerate() {
        let mut rest = e;
        let mut idx = 0usize;
        let mut mul = 1usize;
        for _ in 0..d {
            let digit = rest % n;
            rest /= n;
            idx += ((digit + n_half + 1) % n) * mul;
            mul *= n;
        }
        out[idx] = *v;
    }
    out
}

fn from_residue_order(values: &[Complex64], n_half: usize, d: usize) -> Vec<Complex64> {
    let n = 2 * n_half + 1;
    let mut out = vec![Complex64::new(0.0, 0.0); values.len()];
    for (e, slot) in out.iter_mut().enumerate() {
        let mut rest = e;
        let mut idx = 0usize;
        let mut mul = 1usize;
        for _ in 0..d {
            let digit = rest % n;
            rest /= n;
            idx += ((digit + n_half + 1) % n) * mul;
            mul *= n;
        }
        *slot = values[idx];
    }
    out
}

/// `v̂_k = (2N+1)^{-d} Σ_j v_j e^{-i k·j h}` for `k ∈ {-N..N}^d`, row-major.
pub fn dft(v: &TorusFunction) -> Vec<Complex64> {
    let data: Vec<Complex64> = v.values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    dft_complex(&data, v.n_half, v.d)
}

pub fn dft_complex(values: &[Complex64], n_half: usize, d: usize) -> Vec<Complex64> {
    let mut work = to_residue_order(values, n_half, d);
    DftNd::new(2 * n_half + 1, d).forward(&mut work);
    from_residue_order(&work, n_half, d)
}

/// `v_j = Σ_k v̂_k e^{i k·j h}`, row-major over `{-N..N}^d`.
pub fn idft(coeffs: &[Complex64], n_half: usize, d: usize) -> Vec<Complex64> {
    let mut work = to_residue_order(coeffs, n_half, d);
    DftNd::new(2 * n_half + 1, d).inverse(&mut work);
    from_residue_order(&work, n_half, d)
}

/// `h^{-2s} (Σ_i 4 sin^2(h ξ_i / 2))^s`.
pub fn symbol(p: &FracParams, xi: &[f64]) -> f64 {
    let h = p.h();
    let sum: f64 = xi
        .iter()
        .map(|&x| {
            let v = math::sin(0.5 * h * x);
            4.0 * v * v
        })
        .sum();
    if sum == 0.0 {
        0.0
    } else {
        math::powf(sum, p.s()) * p.mesh_factor()
    }
}

/// Apply a real Fourier multiplier given on frequencies `k ∈ {-N..N}^d`.
pub fn apply_multiplier<F: FnMut(&[i64]) -> f64>(v: &TorusFunction, mut mult: F) -> TorusFunction {
    let mut coeffs = dft(v);
    for (c, k) in coeffs.iter_mut().zip(cube_points(v.n_half, v.d)) {
        *c *= mult(&k);
    }
    let back = idft(&coeffs, v.n_half, v.d);
    TorusFunction {
        n_half: v.n_half,
        d: v.d,
        values: back.iter().map(|c| c.re).collect(),
    }
}

/// Torus operator by its Fourier multiplier `(Σ_i (4/h^2) sin^2(k_i π/(2N+1)))^s`.
pub fn apply_frac_torus_spectral(v: &TorusFunction, s: f64) -> Result<TorusFunction> {
    let p = FracParams::torus(s, v.n_half, v.d)?;
    Ok(apply_multiplier(v, |k| {
        let xi: Vec<f64> = k.iter().map(|&x| x as f64).collect();
        symbol(&p, &xi)
    }))
}

/// Torus operator by the periodized kernel: `Σ_{m≠j} (v_j - v_m) K^A(j - m)`.
#[derive(Debug, Clone)]
pub struct TorusOperator {
    kernel: TorusKernel,
}

impl TorusOperator {
    pub fn new(s: f64, n_half: usize, d: usize, tol: f64) -> Result<Self> {
        let p = FracParams::torus(s, n_half, d)?;
        Ok(Self {
            kernel: TorusKernel::build(&p, n_half, tol)?,
        })
    }

    pub fn kernel(&self) -> &TorusKernel {
        &self.kernel
    }

    pub fn apply(&self, v: &TorusFunction) -> Result<TorusFunction> {
        let p = self.kernel.params();
        if v.n_half != self.kernel.n_half() || v.d != p.d() {
            return Err(Error::Precondition("torus function does not match the operator".into()));
        }
        let pts: Vec<Point> = v.points().collect();
        let mut diff = vec![0i64; v.d];
        let values = pts
            .iter()
            .enumerate()
            .map(|(a, j)| {
                let vj = v.values[a];
                let mut acc = 0.0;
                for (b, m) in pts.iter().enumerate() {
                    if a == b {
                        continue;
                    }
                    for i in 0..v.d {
                        diff[i] = j[i] - m[i];
                    }
                    acc += (vj - v.values[b]) * self.kernel.get(&diff);
                }
                acc
            })
            .collect();
        Ok(TorusFunction {
            n_half: v.n_half,
            d: v.d,
            values,
        })
    }
}

pub fn apply_frac_torus_pointwise(v: &TorusFunction, s: f64, tol: f64) -> Result<TorusFunction> {
    TorusOperator::new(s, v.n_half, v.d, tol)?.apply(v)
}

/// `(p_Σ u)_j = Σ_{l ∈ Z^d} u(l(2N+1) + j)`.
pub fn periodize(u: &LatticeFunction, n_half: usize) -> Result<TorusFunction> {
    let Shape::FinitelySupported(map) = u.shape() else {
        return Err(Error::Precondition("periodization needs a finitely supported function".into()));
    };
    let mut out = TorusFunction::zeros(n_half, u.params.d())?;
    for (m, v) in map {
        let idx = out.index(m);
        out.values[idx] += v;
    }
    Ok(out)
}

/// Periodic extension `Rv` of a torus function to `Z^d`.
#[derive(Debug, Clone, Copy)]
pub struct Repetition<'a> {
    v: &'a TorusFunction,
}

impl Repetition<'_> {
    pub fn value(&self, m: &[i64]) -> f64 {
        self.v.get(m)
    }
}

pub fn repeat(v: &TorusFunction) -> Repetition<'_> {
    Repetition { v }
}

/// Both sides of `Σ_l (Rv)_l ((-Δ_h)^s φ)_l = Σ_j v_j ((-Δ_A)^s p_Σ φ)_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferenceReport {
    pub lhs: f64,
    pub rhs: f64,
    pub defect: f64,
    pub scale: f64,
    pub passed: bool,
}

/// Evaluate both sides of the transference identity.
///
/// The lattice side is summed exactly: points of `supp φ` are handled
/// directly, and the sum over all other lattice points is folded onto the
/// torus, where it becomes a sum against the periodized kernel (including
/// the weight `Σ_{k≠0} K(k(2N+1))` of a point's own copies) minus the
/// in-support correction. The torus side uses the spectral multiplier.
pub fn transference_check(
    v: &TorusFunction,
    phi: &LatticeFunction,
    tol: f64,
) -> Result<TransferenceReport> {
    let p = *phi.params();
    let n_half = v.n_half;
    let expected = FracParams::torus(p.s(), n_half, v.d)?;
    if (p.h() - expected.h()).abs() > 1e-12 * expected.h() || p.d() != v.d {
        return Err(Error::Precondition(
            "φ must live on the lattice of mesh 2π/(2N+1) in the torus dimension".into(),
        ));
    }
    let Shape::FinitelySupported(support) = phi.shape() else {
        return Err(Error::Precondition("φ must be finitely supported".into()));
    };
    let d = v.d;
    let mut radius = 1usize;
    for a in support.keys() {
        for b in support.keys() {
            for i in 0..d {
                radius = radius.max((a[i] - b[i]).unsigned_abs() as usize);
            }
        }
    }
    let op = LatticeOperator::new(&p, if d == 1 { 1 } else { radius })?;
    let torus_kernel = TorusKernel::build(&p, n_half, 1e-14)?;
    let rv = repeat(v);
    let mut diff = vec![0i64; d];

    // Σ_{l ≠ m} Rv_l K(l - m) for a lattice point m
    let folded = |m: &[i64]| -> f64 {
        let mut acc = 0.0;
        let mut off = vec![0i64; d];
        for (b, j) in v.points().enumerate() {
            for i in 0..d {
                off[i] = j[i] - m[i];
            }
            let w = if v.index(&off) == v.index(&vec![0i64; d]) {
                torus_kernel.self_images()
            } else {
                torus_kernel.get(&off)
            };
            acc += v.values[b] * w;
        }
        acc
    };

    let mut lhs = 0.0;
    for (l, phi_l) in support {
        // in-support points: Rv_l (Lφ)_l
        let mut lphi = phi_l * op.mass();
        for (m, phi_m) in support {
            if m != l {
                for i in 0..d {
                    diff[i] = l[i] - m[i];
                }
                lphi -= phi_m * op.kernel(&diff)?.value;
            }
        }
        lhs += rv.value(l) * lphi;
        // points outside the support, grouped by the support point they interact with
        let mut inside = 0.0;
        for m in support.keys() {
            if m != l {
                for i in 0..d {
                    diff[i] = m[i] - l[i];
                }
                inside += rv.value(m) * op.kernel(&diff)?.value;
            }
        }
        lhs -= phi_l * (folded(l) - inside);
    }

    let pphi = periodize(phi, n_half)?;
    let rhs = v.dot(&apply_frac_torus_spectral(&pphi, p.s())?);
    let defect = (lhs - rhs).abs();
    let scale = lhs.abs().max(rhs.abs()).max(1.0);
    Ok(TransferenceReport {
        lhs,
        rhs,
        defect,
        scale,
        passed: defect <= tol * scale,
    })
}

/// `‖F^{-1}[(1 + h^{-2} Σ_i sin^2(h ξ_i))^{r/2} F v]‖_{ℓ^2}` on the torus,
/// with frequencies `h ξ_i = 2π k_i/(2N+1)`.
pub fn sobolev_norm_torus(v: &TorusFunction, r: f64, h: f64) -> f64 {
    let n = v.side() as f64;
    let coeffs = dft(v);
    // Parseval: Σ_j |w_j|^2 = n^d Σ_k |ŵ_k|^2
    let mut acc = 0.0;
    for (c, k) in coeffs.iter().zip(v.points()) {
        let sum: f64 = k
            .iter()
            .map(|&x| {
                let a = math::sin(2.0 * crate::math::PI * x as f64 / n);
                a * a
            })
            .sum();
        acc += math::powf(1.0 + sum / (h * h), r) * c.norm_sqr();
    }
    math::sqrt(acc * v.values.len() as f64)
}

/// Lattice version of [`sobolev_norm_torus`] for finitely supported `u`,
/// computed on tori of doubling size until the value settles to 1e-12.
pub fn sobolev_norm_lattice(u: &LatticeFunction, r: f64) -> Result<f64> {
    let Shape::FinitelySupported(map) = u.shape() else {
        return Err(Error::Precondition("Sobolev norm needs a finitely supported function".into()));
    };
    if !r.is_finite() {
        return Err(domain("Sobolev order must be finite", r));
    }
    let d = u.params.d();
    let h = u.params.h();
    if map.is_empty() {
        return Ok(0.0);
    }
    let extent = map
        .keys()
        .flat_map(|k| k.iter().map(|x| x.unsigned_abs()))
        .max()
        .unwrap_or(0) as usize;
    let mut n_half = (2 * extent).max(4);
    let mut previous = f64::NAN;
    loop {
        if (2 * n_half + 1).pow(d as u32) > 4_000_000 {
            return Err(Error::Tolerance {
                what: "Sobolev norm torus embedding",
                achieved: f64::NAN,
                requested: 1e-12,
            });
        }
        let mut t = TorusFunction::zeros(n_half, d)?;
        for (m, v) in map {
            let idx = t.index(m);
            t.values[idx] += v;
        }
        let value = sobolev_norm_torus(&t, r, h);
        if (value - previous).abs() <= 1e-12 * value.max(1e-300) {
            return Ok(value);
        }
        previous = value;
        n_half *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::PI;
    use crate::quad;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(s: f64, h: f64) -> FracParams {
        FracParams::new(s, h, 1).unwrap()
    }

    fn random_torus(rng: &mut ChaCha8Rng, n_half: usize, d: usize) -> TorusFunction {
        TorusFunction::from_fn(n_half, d, |_| rng.random_range(-1.0..1.0)).unwrap()
    }

    #[test]
    fn constant_step_is_annihilated() {
        let p = line(0.5, 1.0);
        let u = LatticeFunction::step_profile(&p, 0, 3, 2.5, 2.5, []).unwrap();
        for j in -6..=6 {
            assert!(apply_frac_lattice(&u, &[j], 1e-12).unwrap().value.abs() < 1e-14);
        }
        let q = FracParams::new(0.3, 0.5, 2).unwrap();
        let u = LatticeFunction::step_profile(&q, 1, 2, -1.0, -1.0, []).unwrap();
        assert!(apply_frac_lattice(&u, &[3, 0], 1e-10).unwrap().value.abs() < 1e-13);
    }

    #[test]
    fn delta_gives_negative_kernel() {
        let p = line(0.5, 1.0);
        let u = LatticeFunction::delta(&p, vec![0]).unwrap();
        let v = apply_frac_lattice(&u, &[5], 1e-12).unwrap().value;
        assert!((v + kernel_1d(&p, 5)).abs() < 1e-16);
        let at0 = apply_frac_lattice(&u, &[0], 1e-12).unwrap().value;
        assert!((at0 - 2.0 * kernel_tail_sum_1d(&p, 1).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn step_profile_value_at_one() {
        // ũ = -1 for j ≤ -2, 0 on {-1,0,1}, 1 for j ≥ 2; at j = 1 only
        // m = -1 (weight K(2)) ... survive after cancellation: -(K(1)+K(2)) · 1
        let p = line(0.5, 1.0);
        let u = LatticeFunction::step_profile(&p, 0, 2, -1.0, 1.0, []).unwrap();
        let v = apply_frac_lattice(&u, &[1], 1e-12).unwrap().value;
        assert!((v + 8.0 / (5.0 * PI)).abs() < 1e-14, "{v}");
        // oracle: brute-force sum out to 10^6 with tail estimate
        let mut brute = 0.0;
        for m in (-1_000_000i64..=1_000_000).rev() {
            if m != 1 {
                brute += (0.0 - u.value(&[m])) * kernel_1d(&p, 1 - m);
            }
        }
        let rest = kernel_tail_sum_1d(&p, 1_000_002).unwrap() - kernel_tail_sum_1d(&p, 999_999).unwrap();
        assert!((brute + rest - v).abs() < 1e-10, "{} vs {v}", brute + rest);
    }

    #[test]
    fn step_in_2d_reduces_to_line() {
        let p = FracParams::new(0.4, 1.0, 2).unwrap();
        let u = LatticeFunction::step_profile(&p, 0, 2, -1.0, 1.0, [(vec![2, 0], 0.5)]).unwrap();
        let line_u = LatticeFunction::step_profile(&line(0.4, 1.0), 0, 2, -1.0, 1.0, []).unwrap();
        let val = apply_frac_lattice(&u, &[1, 3], 1e-10).unwrap().value;
        let expected = apply_frac_lattice(&line_u, &[1], 1e-12).unwrap().value
            - 0.5 * kernel_nd(&p, &[-1, 3], 1e-12).unwrap().value;
        assert!((val - expected).abs() < 1e-11);
    }

    #[test]
    fn semigroup_integral_reproduces_delta_response() {
        // (Lδ)_j = -1/|Γ(-s)| ∫ G(j, t) t^{-1-s} dt for j ≠ 0
        let p = FracParams::new(0.6, 1.0, 2).unwrap();
        let u = LatticeFunction::delta(&p, vec![0, 0]).unwrap();
        let j = [2i64, 1];
        let lu = apply_frac_lattice(&u, &j, 1e-10).unwrap().value;
        let s = p.s();
        let integral = quad::integrate(
            |x: f64| {
                // t = x / (1 - x) maps (0, 1) onto (0, ∞)
                let t = x / (1.0 - x);
                crate::kernel::heat_kernel(&j, t) * math::powf(t, -1.0 - s) / ((1.0 - x) * (1.0 - x))
            },
            0.0,
            1.0,
            0.0,
            1e-10,
            4000,
        )
        .unwrap();
        let semigroup = -integral.value * p.inv_abs_gamma_neg();
        assert!((semigroup - lu).abs() < 1e-6 * lu.abs(), "{semigroup} vs {lu}");
    }

    #[test]
    fn dft_delta_round_trip_and_parseval() {
        let delta = TorusFunction::from_fn(4, 2, |j| if j == [0, 0] { 1.0 } else { 0.0 }).unwrap();
        for c in dft(&delta) {
            assert!((c - Complex64::new(1.0 / 81.0, 0.0)).norm() < 1e-15);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let v = random_torus(&mut rng, 4, 1);
        let coeffs = dft(&v);
        let back = idft(&coeffs, 4, 1);
        for (a, b) in back.iter().zip(v.values()) {
            assert!((a.re - b).abs() < 1e-13 && a.im.abs() < 1e-13);
        }
        let lhs: f64 = v.values().iter().map(|x| x * x).sum();
        let rhs: f64 = 9.0 * coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>();
        assert!((lhs - rhs).abs() < 1e-12);
        // direct-sum oracle for one coefficient
        let k = 3i64;
        let mut direct = Complex64::new(0.0, 0.0);
        for (j, x) in v.points().zip(v.values()) {
            direct += x * Complex64::from_polar(1.0, -(k * j[0]) as f64 * v.h());
        }
        assert!((coeffs[(k + 4) as usize] - direct / 9.0).norm() < 1e-14);
    }

    #[test]
    fn symbol_values() {
        let p = FracParams::new(0.3, 0.5, 2).unwrap();
        assert_eq!(symbol(&p, &[0.0, 0.0]), 0.0);
        let top = PI / 0.5;
        let expected = math::powf(0.5, -0.6) * math::powf(8.0, 0.3);
        assert!((symbol(&p, &[top, top]) - expected).abs() < 1e-13);
        let a = symbol(&p, &[1.0, 2.0]);
        let b = symbol(&p, &[1.0 + 2.0 * top, 2.0 - 2.0 * top]);
        assert!((a - b).abs() < 1e-12);
        let fine = FracParams::new(0.3, 1e-3, 2).unwrap();
        let limit = math::powf(5.0, 0.3);
        assert!((symbol(&fine, &[1.0, 2.0]) / limit - 1.0).abs() < 0.01);
    }

    #[test]
    fn spectral_eigenfunctions_and_semigroup() {
        let n_half = 6;
        let k = 2i64;
        let v = TorusFunction::from_fn(n_half, 1, |j| math::cos(k as f64 * j[0] as f64 * torus_mesh(n_half))).unwrap();
        let out = apply_frac_torus_spectral(&v, 0.5).unwrap();
        let lam = symbol(&FracParams::torus(0.5, n_half, 1).unwrap(), &[k as f64]);
        for (a, b) in out.values().iter().zip(v.values()) {
            assert!((a - lam * b).abs() < 1e-12);
        }
        let c = TorusFunction::from_fn(n_half, 2, |_| 3.0).unwrap();
        assert!(apply_frac_torus_spectral(&c, 0.4).unwrap().sup_norm() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = random_torus(&mut rng, 5, 2);
        let twice = apply_frac_torus_spectral(&apply_frac_torus_spectral(&w, 0.25).unwrap(), 0.25).unwrap();
        let once = apply_frac_torus_spectral(&w, 0.5).unwrap();
        assert!(twice.max_abs_diff(&once) < 1e-12);
    }

    #[test]
    fn pointwise_matches_spectral() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(n_half, d, s) in &[(8usize, 1usize, 0.5), (4, 2, 0.5), (12, 1, 0.25), (5, 2, 0.75)] {
            let op = TorusOperator::new(s, n_half, d, 1e-14).unwrap();
            for _ in 0..5 {
                let v = random_torus(&mut rng, n_half, d);
                let a = op.apply(&v).unwrap();
                let b = apply_frac_torus_spectral(&v, s).unwrap();
                assert!(a.max_abs_diff(&b) < 1e-10, "N={n_half} d={d} s={s}: {}", a.max_abs_diff(&b));
            }
        }
        let c = TorusFunction::from_fn(3, 1, |_| 1.0).unwrap();
        assert!(apply_frac_torus_pointwise(&c, 0.5, 1e-14).unwrap().sup_norm() < 1e-14);
    }

    #[test]
    fn periodize_and_repeat() {
        let p = FracParams::torus(0.5, 3, 1).unwrap();
        let u = LatticeFunction::finitely_supported(&p, [(vec![7], 2.0), (vec![-1], 1.0), (vec![3], -0.5)]).unwrap();
        let t = periodize(&u, 3).unwrap();
        assert_eq!(t.get(&[0]), 2.0);
        assert_eq!(t.get(&[-1]), 1.0);
        assert_eq!(t.get(&[3]), -0.5);
        assert!((t.values().iter().sum::<f64>() - 2.5).abs() < 1e-15);
        let r = repeat(&t);
        for m in -20i64..20 {
            assert_eq!(r.value(&[m + 7]), r.value(&[m]));
        }
        for j in -3i64..=3 {
            assert_eq!(r.value(&[j]), t.get(&[j]));
        }
    }

    #[test]
    fn transference_identity_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &(n_half, d) in &[(6usize, 1usize), (4, 1), (3, 2)] {
            let p = FracParams::torus(0.5, n_half, d).unwrap();
            let v = random_torus(&mut rng, n_half, d);
            let phi = LatticeFunction::finitely_supported(
                &p,
                (0..4).map(|_| {
                    let pt: Point = (0..d).map(|_| rng.random_range(-12i64..=12)).collect();
                    (pt, rng.random_range(-1.0..1.0))
                }),
            )
            .unwrap();
            let rep = transference_check(&v, &phi, 1e-8).unwrap();
            assert!(rep.passed, "N={n_half} d={d}: {rep:?}");
            let c = TorusFunction::from_fn(n_half, d, |_| 1.5).unwrap();
            let rep = transference_check(&c, &phi, 1e-8).unwrap();
            assert!(rep.lhs.abs() < 1e-10 && rep.rhs.abs() < 1e-10, "{rep:?}");
        }
    }

    #[test]
    fn transference_left_side_by_brute_force() {
        // direct truncated sum of Σ_l Rv_l (Lφ)_l in d = 1 with a large window
        let n_half = 4;
        let p = FracParams::torus(0.5, n_half, 1).unwrap();
        let v = TorusFunction::from_fn(n_half, 1, |j| math::sin(1.0 + j[0] as f64)).unwrap();
        let phi = LatticeFunction::finitely_supported(&p, [(vec![0], 1.0), (vec![5], -0.7)]).unwrap();
        let rep = transference_check(&v, &phi, 1e-8).unwrap();
        let r = repeat(&v);
        let mut brute = 0.0;
        let big = 400_000i64;
        for l in -big..=big {
            let mut lphi = phi.value(&[l]) * 2.0 * kernel_tail_sum_1d(&p, 1).unwrap();
            for (m, pm) in phi.finite_part() {
                if m[0] != l {
                    lphi -= pm * kernel_1d(&p, l - m[0]);
                }
            }
            brute += r.value(&[l]) * lphi;
        }
        // the mean of Rv times the net tail mass of Lφ is what the window misses
        assert!((brute - rep.lhs).abs() < 1e-4, "{brute} vs {}", rep.lhs);
    }

    #[test]
    fn sobolev_norms() {
        let p = line(0.5, 1.0);
        let delta = LatticeFunction::delta(&p, vec![0]).unwrap();
        assert!((sobolev_norm_lattice(&delta, 0.0).unwrap() - 1.0).abs() < 1e-13);
        let oracle = quad::integrate(|t: f64| 1.0 + math::sin(t) * math::sin(t), -PI, PI, 0.0, 1e-13, 100)
            .unwrap()
            .value
            / (2.0 * PI);
        let r1 = sobolev_norm_lattice(&delta, 1.0).unwrap();
        assert!((r1 - math::sqrt(oracle)).abs() < 1e-12, "{r1}");
        let u = LatticeFunction::finitely_supported(&p, [(vec![0], 1.0), (vec![2], -2.0), (vec![3], 0.5)]).unwrap();
        let mut last = 0.0;
        for r in [0.0, 0.3, 1.0, 1.7] {
            let v = sobolev_norm_lattice(&u, r).unwrap();
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn torus_form_is_symmetric_and_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = random_torus(&mut rng, 5, 2);
        let v = random_torus(&mut rng, 5, 2);
        let lu = apply_frac_torus_spectral(&u, 0.3).unwrap();
        let lv = apply_frac_torus_spectral(&v, 0.3).unwrap();
        assert!((lu.dot(&v) - u.dot(&lv)).abs() < 1e-10);
        assert!(lv.dot(&v) >= 0.0);
    }
}
