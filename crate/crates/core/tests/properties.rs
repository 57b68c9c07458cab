use fraclat_core::counterexamples::{global_ucp_counterexample, null_vector, recheck_lattice, slab_counterexample_1d};
use fraclat_core::extension::{cs_extend_torus, geometric_grid, tangential_conjugates, CarlemanConfig};
use fraclat_core::inverse::{forward_matrix, h1_gram, recover_tikhonov, InverseSetup};
use fraclat_core::kernel::{kernel_1d, kernel_tail_sum_1d, FracParams};
use fraclat_core::lattice::{apply_frac_lattice, apply_frac_torus_spectral, LatticeFunction, TorusFunction, TorusOperator};
use fraclat_core::specfun::bessel_i_scaled;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn torus(n: usize, d: usize, vals: &[f64]) -> TorusFunction {
    let mut it = vals.iter().cycle();
    TorusFunction::from_fn(n, d, |_| *it.next().unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bessel_scaled_in_unit_interval_and_recurrence(n in -20i64..=20, t in 0.5f64..50.0) {
        let v = bessel_i_scaled(n, t);
        prop_assert!((0.0..=1.0).contains(&v));
        if n != 0 {
            let lhs = bessel_i_scaled(n - 1, t) - bessel_i_scaled(n + 1, t);
            let rhs = 2.0 * n as f64 / t * v;
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1e-300), "{lhs} {rhs}");
        }
    }

    #[test]
    fn kernel_positive_and_mesh_scaled(s in 0.02f64..0.98, h in 0.01f64..10.0, m in 1i64..5000) {
        let unit = FracParams::new(s, 1.0, 1).unwrap();
        let p = FracParams::new(s, h, 1).unwrap();
        let a = kernel_1d(&p, m);
        let b = h.powf(-2.0 * s) * kernel_1d(&unit, m);
        prop_assert!(a > 0.0);
        prop_assert!((a - b).abs() <= 8.0 * f64::EPSILON * b);
        prop_assert_eq!(a, kernel_1d(&p, -m));
    }

    #[test]
    fn partial_sums_meet_tail(s in 0.05f64..0.95, m in 2u64..400) {
        let p = FracParams::new(s, 1.0, 1).unwrap();
        let head: f64 = (1..m as i64).map(|k| kernel_1d(&p, k)).sum();
        let total = kernel_tail_sum_1d(&p, 1).unwrap();
        let rest = kernel_tail_sum_1d(&p, m).unwrap();
        prop_assert!((head + rest - total).abs() <= 1e-12 * total);
    }

    #[test]
    fn torus_form_symmetric_and_nonnegative(
        n in 1usize..7,
        d in 1usize..3,
        s in 0.05f64..0.95,
        a in prop::collection::vec(-1.0f64..1.0, 1..40),
        b in prop::collection::vec(-1.0f64..1.0, 1..40),
    ) {
        let (u, v) = (torus(n, d, &a), torus(n, d, &b));
        let op = TorusOperator::new(s, n, d, 1e-14).unwrap();
        let (lu, lv) = (op.apply(&u).unwrap(), op.apply(&v).unwrap());
        let scale = u.sup_norm() * v.sup_norm() * (2 * n + 1).pow(d as u32) as f64;
        prop_assert!((lu.dot(&v) - u.dot(&lv)).abs() <= 1e-10 * scale.max(1.0));
        prop_assert!(lu.dot(&u) >= -1e-12 * scale.max(1.0));
        let spectral = apply_frac_torus_spectral(&u, s).unwrap();
        prop_assert!(lu.max_abs_diff(&spectral) <= 1e-10);
    }

    #[test]
    fn null_vector_homogeneous(
        entries in prop::collection::vec(-1.0f64..1.0, 12),
        c in prop_oneof![-50.0f64..-0.02, 0.02f64..50.0],
    ) {
        let m = DMatrix::from_row_slice(3, 4, &entries);
        let (x, r) = null_vector(&m).unwrap();
        let (y, r2) = null_vector(&(m.clone() * c)).unwrap();
        prop_assert_eq!(r, r2);
        if r == 1 {
            for (a, b) in x.iter().zip(&y) {
                prop_assert!((a - b).abs() < 1e-9, "{x:?} {y:?}");
            }
        }
        let res = (&m * DVector::from_vec(x)).amax();
        prop_assert!(res < 1e-12 * m.amax().max(1.0));
    }

    #[test]
    fn certificate_scale_invariant(s in 0.1f64..0.9, c in prop_oneof![-20.0f64..-0.1, 0.1f64..20.0], x0 in -3i64..3) {
        let p = FracParams::new(s, 1.0, 1).unwrap();
        let x = vec![vec![x0], vec![x0 + 2]];
        let (u, cert) = global_ucp_counterexample(&p, &x, None, 1e-9).unwrap();
        let r1 = recheck_lattice(&u, &x, 1e-13).unwrap();
        let r2 = recheck_lattice(&u.scaled(c), &x, 1e-13).unwrap();
        prop_assert!(r1 <= 1e-9 * cert.u_norm);
        prop_assert!(r2 <= 1e-9 * c.abs() * cert.u_norm);
    }

    #[test]
    fn slab_potential_reproduces_operator(s in 0.05f64..0.95, h in 0.05f64..2.0) {
        let p = FracParams::new(s, h, 1).unwrap();
        let sol = slab_counterexample_1d(&p, 1e-9).unwrap();
        for j in (-50i64..=50).step_by(7) {
            let lu = apply_frac_lattice(&sol.u, &[j], 1e-11).unwrap().value;
            let vu = sol.potential.value(&[j]) * sol.u.value(&[j]);
            prop_assert!((lu - vu).abs() <= 1e-9, "j={j}: {lu} vs {vu}");
        }
    }

    #[test]
    fn extension_energy_decays(n in 1usize..8, s in 0.1f64..0.9, vals in prop::collection::vec(-1.0f64..1.0, 1..20)) {
        let raw = torus(n, 1, &vals);
        let mean = raw.values().iter().sum::<f64>() / raw.values().len() as f64;
        let v = TorusFunction::new(n, 1, raw.values().iter().map(|x| x - mean).collect()).unwrap();
        let grid = geometric_grid(1e-4, 1.3, 10.0).unwrap();
        let f = cs_extend_torus(&v, s, &grid).unwrap();
        let mut prev = f64::INFINITY;
        for l in 0..grid.len() {
            let e: f64 = f.level(l).iter().map(|x| x * x).sum();
            prop_assert!(e <= prev * (1.0 + 1e-12) + 1e-300);
            prev = e;
        }
    }

    #[test]
    fn conjugates_split_the_weighted_laplacian(
        h in 0.05f64..0.3,
        tau_frac in 0.05f64..1.0,
        vals in prop::collection::vec(-1.0f64..1.0, 9),
    ) {
        // S + A = e^{τφ} Δ e^{-τφ}, checked against the direct product of weights
        let tau = tau_frac * 0.5 / h;
        let cfg = CarlemanConfig::new(1.0, tau, h).unwrap();
        let p = FracParams::new(0.5, h, 1).unwrap();
        let v = LatticeFunction::finitely_supported(&p, (-4i64..=4).map(|j| vec![j]).zip(vals.iter().copied())).unwrap();
        let (sv, av) = tangential_conjugates(&cfg, &v).unwrap();
        let phi = |j: i64| -> f64 { -(j as f64 * h).powi(2) };
        let w = |j: i64| v.value(&[j]) * (-tau * phi(j)).exp();
        for j in -6i64..=6 {
            let direct = (tau * phi(j)).exp() * (w(j + 1) - 2.0 * w(j) + w(j - 1)) / (h * h);
            let sum = sv.get(&vec![j]).copied().unwrap_or(0.0) + av.get(&vec![j]).copied().unwrap_or(0.0);
            prop_assert!((direct - sum).abs() <= 1e-12 * 500.0 / (h * h), "j={j}: {direct} {sum}");
        }
    }

    #[test]
    fn tikhonov_gradient_vanishes(seed in 0u64..1000, log_lambda in -8.0f64..0.0) {
        let setup = InverseSetup::blocks(8, 3, 4, 2, seed).unwrap();
        let a = forward_matrix(&setup, 1e-10).unwrap();
        let p = h1_gram(&setup).unwrap();
        let g = DVector::from_fn(a.nrows(), |i, _| ((seed as f64 + 1.0) * (i as f64 + 0.5)).sin());
        let lambda = 10f64.powf(log_lambda);
        let f = recover_tikhonov(&a, &g, lambda, &p).unwrap();
        let grad = a.transpose() * (&a * &f - &g) + &p * &f * lambda;
        let scale = (a.transpose() * &g).norm().max(1e-300);
        prop_assert!(grad.norm() <= 1e-10 * scale, "{}", grad.norm() / scale);
    }
}
