//! Explicit failures of unique continuation for the fractional discrete
//! Laplacian: nonzero functions vanishing together with `(-Δ)^s u` on a
//! finite set (lattice and torus), and the slab counterexamples for
//! `(-Δ)^s u = V u` in one and two dimensions.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernel::{kernel_1d, kernel_upper_bound_l1, FracParams, KernelTable};
use crate::lattice::{
    apply_frac_lattice, LatticeFunction, LatticeOperator, Point, TorusFunction, TorusOperator,
};
use crate::math;
use crate::specfun;

/// Outcome of a construction together with the numbers that certify it.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    /// `max |(-Δ)^s u|` over the constrained set.
    pub residual_sup: f64,
    /// `‖u‖_∞`.
    pub u_norm: f64,
    /// `‖V‖_∞` when a potential is part of the construction.
    pub potential_bound: Option<f64>,
    pub tolerance: f64,
    pub params: FracParams,
    /// Named point sets the construction refers to.
    pub sets: Vec<(String, Vec<Point>)>,
    /// Operator value at each constrained point.
    pub checks: Vec<(Point, f64)>,
    pub accepted: bool,
    pub notes: Vec<String>,
}

/// Null vector of a wide `r × (r+1)` matrix, with the dimension of the
/// null space.
///
/// The matrix is padded with a zero row and factored by SVD; the right
/// singular vector of the smallest singular value spans the null space when
/// it is one-dimensional. The vector is scaled to `‖x‖_∞ = 1` with its first
/// nonzero entry positive.
pub fn null_vector(m: &DMatrix<f64>) -> Result<(Vec<f64>, usize)> {
    let rows = m.nrows();
    let cols = m.ncols();
    if cols != rows + 1 {
        return Err(Error::Precondition(format!(
            "expected a {rows} × {} matrix, got {rows} × {cols}",
            rows + 1
        )));
    }
    let mut square = DMatrix::<f64>::zeros(cols, cols);
    square.view_mut((0, 0), (rows, cols)).copy_from(m);
    let svd = square.svd(false, true);
    let vt = svd
        .v_t
        .ok_or(Error::Factorization("singular value decomposition"))?;
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
    let top = sv[order[cols - 1]].max(f64::MIN_POSITIVE);
    let corank = order
        .iter()
        .filter(|&&i| sv[i] <= 1e-12 * top * cols as f64)
        .count()
        .max(1);
    let k = order[0];
    let mut x: Vec<f64> = (0..cols).map(|c| vt[(k, c)]).collect();
    let norm = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let first = x.iter().copied().find(|v| v.abs() > 1e-14 * norm).unwrap_or(1.0);
    let scale = first.signum() / norm;
    x.iter_mut().for_each(|v| *v *= scale);
    Ok((x, corank))
}

/// `|X| + 1` points outside `X`, nearest to the centroid of `X` in the
/// `ℓ∞` distance, ties broken lexicographically. `admissible` filters the
/// candidates (e.g. to the torus cube).
fn auto_select<F: Fn(&[i64]) -> bool>(x: &[Point], admissible: F) -> Result<Vec<Point>> {
    let d = x[0].len();
    let count = x.len() + 1;
    let centroid: Vec<f64> = (0..d)
        .map(|i| x.iter().map(|p| p[i] as f64).sum::<f64>() / x.len() as f64)
        .collect();
    let taken: BTreeSet<&Point> = x.iter().collect();
    let mut radius = 1i64;
    loop {
        let center: Vec<i64> = centroid.iter().map(|c| math::floor(*c + 0.5) as i64).collect();
        let side = 2 * radius + 1;
        let mut cands: Vec<(f64, Point)> = Vec::new();
        for mut e in 0..side.pow(d as u32) {
            let mut p = vec![0i64; d];
            for i in (0..d).rev() {
                p[i] = center[i] + e % side - radius;
                e /= side;
            }
            if taken.contains(&p) || !admissible(&p) {
                continue;
            }
            let dist = p
                .iter()
                .zip(&centroid)
                .map(|(a, c)| (*a as f64 - c).abs())
                .fold(0.0, f64::max);
            cands.push((dist, p));
        }
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        // every point within distance radius - 1 of the centroid is inside the box
        let safe = (radius - 1) as f64;
        if cands.len() >= count && cands[count - 1].0 <= safe {
            return Ok(cands.into_iter().take(count).map(|c| c.1).collect());
        }
        if radius > 10_000 {
            return Err(Error::Precondition("could not find enough admissible points".into()));
        }
        radius *= 2;
    }
}

fn check_sets(x: &[Point], y: &[Point], d: usize) -> Result<()> {
    if x.is_empty() {
        return Err(Error::Precondition("X must be nonempty".into()));
    }
    for p in x.iter().chain(y) {
        if p.len() != d {
            return Err(Error::Precondition(format!("point {p:?} is not in dimension {d}")));
        }
    }
    let xs: BTreeSet<&Point> = x.iter().collect();
    if xs.len() != x.len() {
        return Err(Error::Precondition("X has repeated points".into()));
    }
    let ys: BTreeSet<&Point> = y.iter().collect();
    if ys.len() != y.len() {
        return Err(Error::Precondition("Y has repeated points".into()));
    }
    if let Some(p) = y.iter().find(|p| xs.contains(p)) {
        return Err(Error::Precondition(format!("X and Y intersect at {p:?}")));
    }
    if y.len() != x.len() + 1 {
        return Err(Error::Precondition(format!(
            "Y must have |X| + 1 = {} points, got {}",
            x.len() + 1,
            y.len()
        )));
    }
    Ok(())
}

/// Nonzero `u` supported on `Y` with `u = 0` and `(-Δ_h)^s u = 0` on `X`.
///
/// `u` is a null vector of the `|X| × (|X|+1)` matrix `K(x - y)`; the
/// residual is recomputed by applying the operator to the assembled lattice
/// function.
pub fn global_ucp_counterexample(
    p: &FracParams,
    x: &[Point],
    y: Option<&[Point]>,
    tol: f64,
) -> Result<(LatticeFunction, Certificate)> {
    if x.is_empty() {
        return Err(Error::Precondition("X must be nonempty".into()));
    }
    let y: Vec<Point> = match y {
        Some(y) => y.to_vec(),
        None => auto_select(x, |_| true)?,
    };
    check_sets(x, &y, p.d())?;
    let mut radius = 1usize;
    for a in x {
        for b in &y {
            for i in 0..p.d() {
                radius = radius.max((a[i] - b[i]).unsigned_abs() as usize);
            }
        }
    }
    let op = LatticeOperator::new(p, if p.d() == 1 { 1 } else { radius })?;
    let mut m = DMatrix::<f64>::zeros(x.len(), y.len());
    let mut diff = vec![0i64; p.d()];
    for (r, a) in x.iter().enumerate() {
        for (c, b) in y.iter().enumerate() {
            for i in 0..p.d() {
                diff[i] = a[i] - b[i];
            }
            m[(r, c)] = op.kernel(&diff)?.value;
        }
    }
    let (coeffs, corank) = null_vector(&m)?;
    let u = LatticeFunction::finitely_supported(p, y.iter().cloned().zip(coeffs.iter().copied()))?;
    let mut checks = Vec::with_capacity(x.len());
    for a in x {
        checks.push((a.clone(), op.apply(&u, a)?.value));
    }
    finish_certificate(
        *p,
        u.sup_norm(),
        checks,
        tol,
        corank,
        vec![("X".into(), x.to_vec()), ("Y".into(), y)],
    )
    .map(|c| (u, c))
}

fn finish_certificate(
    params: FracParams,
    u_norm: f64,
    checks: Vec<(Point, f64)>,
    tol: f64,
    corank: usize,
    sets: Vec<(String, Vec<Point>)>,
) -> Result<Certificate> {
    let residual_sup = checks.iter().fold(0.0f64, |a, c| a.max(c.1.abs()));
    let mut notes = Vec::new();
    if corank > 1 {
        notes.push(format!(
            "null space has dimension {corank}; one solution is returned"
        ));
    }
    if u_norm == 0.0 {
        return Err(Error::Certificate {
            what: "constructed function vanishes",
            residual: residual_sup,
            tolerance: tol,
        });
    }
    if residual_sup > tol * u_norm {
        return Err(Error::Certificate {
            what: "operator residual on the constrained set",
            residual: residual_sup,
            tolerance: tol * u_norm,
        });
    }
    Ok(Certificate {
        residual_sup,
        u_norm,
        potential_bound: None,
        tolerance: tol,
        params,
        sets,
        checks,
        accepted: true,
        notes,
    })
}

/// `V_j = (Lu)_j / u_j`, and `0` where both vanish.
///
/// Fails if `u_j = 0` while `|(Lu)_j| > tol`.
pub fn potential_from_pair(points: &[Point], u: &[f64], lu: &[f64], tol: f64) -> Result<Vec<f64>> {
    if u.len() != lu.len() || u.len() != points.len() {
        return Err(Error::Precondition("u, Lu and points must have equal length".into()));
    }
    points
        .iter()
        .zip(u.iter().zip(lu))
        .map(|(j, (&uj, &lj))| {
            if uj != 0.0 {
                Ok(lj / uj)
            } else if lj.abs() <= tol {
                Ok(0.0)
            } else {
                Err(Error::Inconsistent {
                    index: j.clone(),
                    lu: lj,
                })
            }
        })
        .collect()
}

/// The one-dimensional slab counterexample and its potential.
#[derive(Debug, Clone)]
pub struct SlabSolution {
    /// Correction coefficient `a = (K(1) + K(2)) / (K(3) - K(1))`.
    pub a: f64,
    /// `u = ũ + v`: `±1` for `±j ≥ 2`, zero on `{-1, 0, 1}`, `±a` added at `±2`.
    pub u: LatticeFunction,
    /// `V = (-Δ)^s u / u` on the window `|j| ≤ window`.
    pub potential: LatticeFunction,
    pub window: i64,
    pub certificate: Certificate,
}

/// `a = (K(1) + K(2)) / (K(3) - K(1))` with the 1D kernel of `p`.
pub fn slab_coefficient(p: &FracParams) -> Result<f64> {
    let line = p.with_dim(1)?;
    let k1 = kernel_1d(&line, 1);
    let k2 = kernel_1d(&line, 2);
    let k3 = kernel_1d(&line, 3);
    Ok((k1 + k2) / (k3 - k1))
}

/// Step profile `ũ + v` along `axis` built from the coefficient `a`.
pub fn slab_profile(p: &FracParams, axis: usize, a: f64) -> Result<LatticeFunction> {
    let d = p.d();
    let at = |x: i64| {
        let mut pt = vec![0i64; d];
        pt[axis] = x;
        pt
    };
    if d == 1 {
        LatticeFunction::step_profile(p, axis, 2, -1.0, 1.0, [(at(2), a), (at(-2), -a)])
    } else {
        // a perturbation on whole hyperplanes is not finitely supported, so
        // only the step itself is representable in d ≥ 2
        LatticeFunction::step_profile(p, axis, 2, -1.0, 1.0, [])
    }
}

/// Build `u`, `V` and certify `(-Δ)^s u = 0` on `{-1, 0, 1}` with exact tails.
pub fn slab_counterexample_1d(p: &FracParams, tol: f64) -> Result<SlabSolution> {
    if p.d() != 1 {
        return Err(Error::Precondition("slab_counterexample_1d needs d = 1".into()));
    }
    let a = slab_coefficient(p)?;
    if (a + 1.0).abs() < 1e-12 {
        return Err(Error::Certificate {
            what: "coefficient a = -1 would make u vanish at ±2",
            residual: (a + 1.0).abs(),
            tolerance: 1e-12,
        });
    }
    let u = slab_profile(p, 0, a)?;
    let op = LatticeOperator::new(p, 1)?;
    let mut checks = Vec::new();
    for j in -1i64..=1 {
        checks.push((vec![j], op.apply(&u, &[j])?.value));
    }
    let window = 50i64;
    let pts: Vec<Point> = (-window..=window).map(|j| vec![j]).collect();
    let uvals: Vec<f64> = pts.iter().map(|j| u.value(j)).collect();
    let mut luvals = Vec::with_capacity(pts.len());
    for j in &pts {
        luvals.push(op.apply(&u, j)?.value);
    }
    let v = potential_from_pair(&pts, &uvals, &luvals, tol)?;
    let bound = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let potential = LatticeFunction::finitely_supported(p, pts.iter().cloned().zip(v))?;
    let mut cert = finish_certificate(
        *p,
        u.sup_norm(),
        checks,
        tol / u.sup_norm(),
        1,
        vec![
            ("constrained".into(), vec![vec![-1], vec![0], vec![1]]),
            ("nonzero".into(), vec![vec![-2], vec![2]]),
        ],
    )?;
    cert.tolerance = tol;
    cert.potential_bound = Some(bound);
    if uvals.iter().zip(&pts).any(|(v, j)| j[0].abs() >= 2 && *v == 0.0) {
        return Err(Error::Certificate {
            what: "u must be nonzero for |j| ≥ 2",
            residual: 0.0,
            tolerance: 0.0,
        });
    }
    Ok(SlabSolution {
        a,
        u,
        potential,
        window,
        certificate: cert,
    })
}

/// `Σ_{r ≥ start} Γ(r + a) / Γ(r + b) = Γ(start + a) / ((b - a - 1) Γ(start + b - 1))`
/// for `b - a > 1`.
fn gamma_ratio_series_tail(start: f64, a: f64, b: f64) -> f64 {
    specfun::gamma_ratio_pos(start + a, start + b - 1.0) / (b - a - 1.0)
}

/// Bound on `Σ_{‖n‖_1 > radius} K(n)` in two dimensions from the `‖·‖_1`
/// kernel bound; there are `4r` points with `‖n‖_1 = r`.
pub fn slab_tail_bound_2d(p: &FracParams, radius: u64) -> Result<f64> {
    if p.d() != 2 {
        return Err(Error::Precondition("2D tail bound needs d = 2".into()));
    }
    let s = p.s();
    // B(r) = C Γ(r - s) / Γ(r + 2 + s) with C = B(1) Γ(3 + s) / Γ(1 - s)
    let c = kernel_upper_bound_l1(p, 1) * specfun::gamma_ratio_pos(3.0 + s, 1.0 - s);
    // r Γ(r-s)/Γ(r+2+s) = Γ(r-s)/Γ(r+1+s) - (1+s) Γ(r-s)/Γ(r+2+s)
    let m = (radius + 1) as f64;
    let sum = gamma_ratio_series_tail(m, -s, 1.0 + s) - (1.0 + s) * gamma_ratio_series_tail(m, -s, 2.0 + s);
    Ok(4.0 * c * sum)
}

/// Values of the two-dimensional slab construction at the sampled points.
#[derive(Debug, Clone)]
pub struct Slab2dReport {
    pub a: f64,
    pub trunc_radius: usize,
    pub tail_bound: f64,
    /// `(j1, j2, value of (-Δ)^s(ũ+v), value of (-Δ)^s ũ)`.
    pub samples: Vec<(i64, i64, f64, f64)>,
    pub certificate: Certificate,
}

/// Evaluate `(-Δ_h)^s (ũ + v)` with the two-dimensional kernel at
/// `(j1, j2)` for `j1 ∈ {-1, 0, 1}` and each sampled `j2`, where `ũ + v`
/// varies along the first axis only. Offsets are truncated to
/// `‖n‖_1 ≤ trunc_radius`; the rest is bounded by [`slab_tail_bound_2d`].
pub fn slab_counterexample_2d(
    p: &FracParams,
    j2_samples: &[i64],
    trunc_radius: usize,
    tol: f64,
) -> Result<Slab2dReport> {
    if p.d() != 2 {
        return Err(Error::Precondition("slab_counterexample_2d needs d = 2".into()));
    }
    let a = slab_coefficient(p)?;
    let profile = |x: i64| -> (f64, f64) {
        let step = if x <= -2 {
            -1.0
        } else if x >= 2 {
            1.0
        } else {
            0.0
        };
        let bump = if x == 2 {
            a
        } else if x == -2 {
            -a
        } else {
            0.0
        };
        (step + bump, step)
    };
    // |u_j - u_m| ≤ sup u - inf u
    let spread = 2.0 * (1.0 + a.abs());
    let tail_unit = slab_tail_bound_2d(p, trunc_radius as u64)?;
    let tail_bound = spread * tail_unit;
    if tail_bound > tol {
        return Err(Error::Tolerance {
            what: "2D slab tail certificate",
            achieved: tail_bound,
            requested: tol,
        });
    }
    let table = KernelTable::build(p, trunc_radius)?;
    let r = trunc_radius as i64;
    let mut samples = Vec::new();
    let mut checks = Vec::new();
    for &j2 in j2_samples {
        for j1 in -1i64..=1 {
            let (uj, sj) = profile(j1);
            let mut full = 0.0;
            let mut step_only = 0.0;
            // offsets n = j - m with ‖n‖_1 ≤ R, grouped by n1 so that the
            // contributions of ±n1 are added before the transverse sum
            for n1 in -r..=r {
                let rest = r - n1.abs();
                let mut ksum = 0.0;
                for n2 in -rest..=rest {
                    if n1 == 0 && n2 == 0 {
                        continue;
                    }
                    ksum += table.get(&[n1, n2]).expect("offset inside the table");
                }
                let (um, sm) = profile(j1 - n1);
                full += (uj - um) * ksum;
                step_only += (sj - sm) * ksum;
            }
            samples.push((j1, j2, full, step_only));
            checks.push((vec![j1, j2], full));
        }
    }
    let mut cert = finish_certificate(
        *p,
        1.0 + a.abs(),
        checks,
        tol / (1.0 + a.abs()),
        1,
        vec![(
            "sampled".into(),
            j2_samples
                .iter()
                .flat_map(|&j2| (-1i64..=1).map(move |j1| vec![j1, j2]))
                .collect(),
        )],
    )?;
    cert.tolerance = tol;
    cert.notes.push(format!("tail bound {tail_bound:e}"));
    Ok(Slab2dReport {
        a,
        trunc_radius,
        tail_bound,
        samples,
        certificate: cert,
    })
}

/// Nonzero `u` on the discrete torus with `u = 0` and `(-Δ_A)^s u = 0` on
/// `X`, for `|X| ≤ N`.
pub fn torus_ucp_counterexample(
    n_half: usize,
    d: usize,
    s: f64,
    x: &[Point],
    tol: f64,
) -> Result<(TorusFunction, Certificate)> {
    if x.len() > n_half {
        return Err(Error::Precondition(format!(
            "|X| = {} exceeds N = {n_half}; the construction needs |X| ≤ N",
            x.len()
        )));
    }
    let nh = n_half as i64;
    for p in x {
        if p.len() != d || p.iter().any(|c| c.abs() > nh) {
            return Err(Error::Precondition(format!("{p:?} is not a point of the torus")));
        }
    }
    let y = auto_select(x, |p| p.iter().all(|c| c.abs() <= nh))?;
    check_sets(x, &y, d)?;
    let op = TorusOperator::new(s, n_half, d, 1e-14)?;
    let mut m = DMatrix::<f64>::zeros(x.len(), y.len());
    let mut diff = vec![0i64; d];
    for (r, a) in x.iter().enumerate() {
        for (c, b) in y.iter().enumerate() {
            for i in 0..d {
                diff[i] = a[i] - b[i];
            }
            m[(r, c)] = op.kernel().get(&diff);
        }
    }
    let (coeffs, corank) = null_vector(&m)?;
    let mut u = TorusFunction::zeros(n_half, d)?;
    let mut vals = u.clone().into_values();
    for (pt, c) in y.iter().zip(&coeffs) {
        vals[u.index(pt)] = *c;
    }
    u = TorusFunction::new(n_half, d, vals)?;
    let lu = op.apply(&u)?;
    let checks = x.iter().map(|a| (a.clone(), lu.get(a))).collect();
    let params = FracParams::torus(s, n_half, d)?;
    let cert = finish_certificate(
        params,
        u.sup_norm(),
        checks,
        tol,
        corank,
        vec![("X".into(), x.to_vec()), ("Y".into(), y)],
    )?;
    Ok((u, cert))
}

/// Re-evaluate a lattice certificate's residual with fresh kernel values.
pub fn recheck_lattice(u: &LatticeFunction, points: &[Point], tol: f64) -> Result<f64> {
    let mut worst = 0.0f64;
    for j in points {
        worst = worst.max(apply_frac_lattice(u, j, tol)?.value.abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::kernel_nd;
    use crate::lattice::apply_frac_torus_spectral;
    use crate::math::PI;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hand_case_one_to_minus_five() {
        let p = FracParams::new(0.5, 1.0, 1).unwrap();
        let (u, cert) = global_ucp_counterexample(&p, &[vec![0]], Some(&[vec![1], vec![2]]), 1e-14).unwrap();
        let u1 = u.value(&[1]);
        let u2 = u.value(&[2]);
        assert!((u2 / u1 + 5.0).abs() < 1e-13, "{u1} {u2}");
        assert!(cert.residual_sup < 1e-14);
        assert_eq!(u.value(&[0]), 0.0);
        // the scaled function passes the same independent recheck
        let scaled = u.scaled(7.0);
        let r = recheck_lattice(&scaled, &[vec![0]], 1e-12).unwrap();
        assert!(r <= 7.0 * 1e-14);
    }

    #[test]
    fn auto_selected_sets_in_2d() {
        let p = FracParams::new(0.3, 1.0, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..3 {
            let mut x: Vec<Point> = Vec::new();
            while x.len() < 3 {
                let pt = vec![rng.random_range(-4i64..=4), rng.random_range(-4i64..=4)];
                if !x.contains(&pt) {
                    x.push(pt);
                }
            }
            let (u, cert) = global_ucp_counterexample(&p, &x, None, 1e-9).unwrap();
            assert!(cert.u_norm > 0.0);
            let independent = recheck_lattice(&u, &x, 1e-10).unwrap();
            assert!(independent <= 1e-9 * cert.u_norm);
            for pt in &x {
                assert_eq!(u.value(pt), 0.0);
            }
        }
    }

    #[test]
    fn auto_selection_order() {
        let y = auto_select(&[vec![0]], |_| true).unwrap();
        assert_eq!(y, vec![vec![-1], vec![1]]);
        let y = auto_select(&[vec![0, 0], vec![1, 0]], |_| true).unwrap();
        assert_eq!(y.len(), 3);
        assert!(y.iter().all(|p| p != &vec![0, 0] && p != &vec![1, 0]));
    }

    #[test]
    fn invalid_sets_rejected() {
        let p = FracParams::new(0.5, 1.0, 1).unwrap();
        assert!(global_ucp_counterexample(&p, &[vec![0]], Some(&[vec![0], vec![2]]), 1e-12).is_err());
        assert!(global_ucp_counterexample(&p, &[vec![0]], Some(&[vec![1]]), 1e-12).is_err());
    }

    #[test]
    fn slab_coefficient_at_half() {
        let p = FracParams::new(0.5, 1.0, 1).unwrap();
        let a = slab_coefficient(&p).unwrap();
        // independent evaluation through Γ(1/2), Γ(5/2), ... in closed form
        let k = |m: f64| 4.0 / (PI * (4.0 * m * m - 1.0));
        let oracle = (k(1.0) + k(2.0)) / (k(3.0) - k(1.0));
        assert!((a + 21.0 / 16.0).abs() < 1e-13 && (oracle + 21.0 / 16.0).abs() < 1e-14);
    }

    #[test]
    fn slab_1d_certificate_and_potential() {
        let p = FracParams::new(0.5, 1.0, 1).unwrap();
        let sol = slab_counterexample_1d(&p, 1e-10).unwrap();
        assert!(sol.certificate.residual_sup < 1e-13);
        assert_eq!(sol.certificate.checks[1].1, 0.0);
        // (-Δ)^s u = V u on the window
        let op = LatticeOperator::new(&p, 1).unwrap();
        for j in -50i64..=50 {
            let lu = op.apply(&sol.u, &[j]).unwrap().value;
            let vu = sol.potential.value(&[j]) * sol.u.value(&[j]);
            assert!((lu - vu).abs() < 1e-9, "j={j}");
        }
        let base = sol.certificate.potential_bound.unwrap();
        for h in [0.5, 0.1] {
            let q = FracParams::new(0.5, h, 1).unwrap();
            let b = slab_counterexample_1d(&q, 1e-10).unwrap().certificate.potential_bound.unwrap();
            assert!((b / base - math::powf(h, -1.0)).abs() < 1e-10 * math::powf(h, -1.0));
        }
    }

    #[test]
    fn slab_2d_tail_bound_is_an_upper_bound() {
        let p = FracParams::new(0.5, 1.0, 2).unwrap();
        let r = 30u64;
        let bound = slab_tail_bound_2d(&p, r).unwrap();
        // explicit shell sum of the same ‖·‖_1 bound out to 2e5 plus its power tail
        let mut explicit = 0.0;
        for n in (r + 1)..200_000 {
            explicit += 4.0 * n as f64 * kernel_upper_bound_l1(&p, n);
        }
        assert!(explicit <= bound && bound - explicit < 1e-4 * bound + 4.0 * kernel_upper_bound_l1(&p, 200_000) * 4e10);
        // and it dominates the actual kernel mass outside the diamond
        let actual: f64 = (1..=6).map(|k| kernel_nd(&p, &[r as i64 + k, 0], 1e-10).unwrap().value).sum();
        assert!(actual < bound);
    }

    #[test]
    fn slab_2d_reduces_to_line() {
        let p = FracParams::new(0.5, 1.0, 2).unwrap();
        let rep = slab_counterexample_2d(&p, &[0, 3, -7], 60, 1.0).unwrap();
        for &(j1, _, full, step) in &rep.samples {
            if j1 == 0 {
                assert!(full.abs() < 1e-12 && step.abs() < 1e-12);
            } else {
                assert!(full.abs() <= rep.tail_bound);
                let target = -(j1 as f64) * 8.0 / (5.0 * PI);
                assert!((step - target).abs() <= rep.tail_bound);
            }
        }
        let first = rep.samples[2].2;
        for s in &rep.samples {
            if s.0 == 1 {
                assert!((s.2 - first).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn torus_counterexample() {
        let (u, cert) = torus_ucp_counterexample(5, 1, 0.5, &[vec![0]], 1e-12).unwrap();
        assert!(cert.residual_sup <= 1e-12 * cert.u_norm);
        let spectral = apply_frac_torus_spectral(&u, 0.5).unwrap();
        assert!(spectral.get(&[0]).abs() < 1e-12);
        let shifted = TorusFunction::from_fn(5, 1, |j| u.get(j) + 3.0).unwrap();
        let ls = apply_frac_torus_spectral(&shifted, 0.5).unwrap();
        assert!(ls.max_abs_diff(&spectral) < 1e-12);
        assert!(torus_ucp_counterexample(3, 1, 0.5, &[vec![0], vec![1], vec![2], vec![-1]], 1e-12).is_err());
    }

    #[test]
    fn potential_pairs() {
        let pts = vec![vec![0], vec![1], vec![2]];
        let v = potential_from_pair(&pts, &[2.0, 0.0, 1.0], &[1.0, 0.0, -3.0], 1e-12).unwrap();
        assert_eq!(v, vec![0.5, 0.0, -3.0]);
        let e = potential_from_pair(&pts, &[2.0, 0.0, 1.0], &[1.0, 0.3, -3.0], 1e-12).unwrap_err();
        assert_eq!(e, Error::Inconsistent { index: vec![1], lu: 0.3 });
    }
}
