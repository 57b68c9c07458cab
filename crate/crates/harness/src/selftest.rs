//! Fast invariant battery.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use fraclat_core::extension::{tangential_commutator_check, CarlemanConfig};
use fraclat_core::kernel::{kernel_1d, kernel_nd, FracParams};
use fraclat_core::lattice::{apply_frac_torus_spectral, cube_points, transference_check, LatticeFunction, TorusOperator};
use fraclat_core::specfun::{bessel_i_scaled, log_gamma};

use crate::experiments::normal_torus;
use crate::report::{Check, ExperimentReport, Relation};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfTestOptions {
    pub seed: u64,
    /// Test hook: multiplies the closed-form kernel before it is compared
    /// with quadrature. Anything other than 1 must make that check fail.
    pub kernel_constant_factor: f64,
}

impl Default for SelfTestOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            kernel_constant_factor: 1.0,
        }
    }
}

pub fn self_test() -> ExperimentReport {
    self_test_with(SelfTestOptions::default())
}

type Measure = anyhow::Result<f64>;

fn record(checks: &mut Vec<Check>, name: &str, threshold: f64, m: Measure) {
    checks.push(match m {
        Ok(v) => Check::at_most(name, v, threshold),
        Err(e) => Check::errored(name, threshold, Relation::AtMost, format!("{e:#}")),
    });
}

fn gamma_recurrence() -> Measure {
    let mut worst = 0.0f64;
    for x in [0.3, 1.7, 4.2, 11.5, 37.25] {
        // ln Γ(x+1) = ln Γ(x) + ln x
        worst = worst.max((log_gamma(x + 1.0)? - log_gamma(x)? - f64::ln(x)).abs());
    }
    Ok(worst)
}

fn bessel_recurrence() -> Measure {
    let mut worst = 0.0f64;
    for t in [0.5, 3.0, 20.0] {
        for n in 1..6i64 {
            // I_{n-1} - I_{n+1} = (2n/t) I_n, unchanged by the common e^{-t}
            let lhs = bessel_i_scaled(n - 1, t) - bessel_i_scaled(n + 1, t);
            let rhs = 2.0 * n as f64 / t * bessel_i_scaled(n, t);
            worst = worst.max((lhs - rhs).abs() / rhs.abs());
        }
    }
    Ok(worst)
}

fn kernel_vs_quadrature(factor: f64) -> Measure {
    let mut worst = 0.0f64;
    for (s, m) in [(0.5, 1i64), (0.5, 2), (0.25, 3), (0.75, 7), (0.5, 20)] {
        let p = FracParams::new(s, 1.0, 1)?;
        let closed = factor * kernel_1d(&p, m);
        let quad = kernel_nd(&p, &[m], 1e-12)?.value;
        worst = worst.max((closed - quad).abs() / quad);
    }
    Ok(worst)
}

fn pointwise_vs_spectral(rng: &mut ChaCha8Rng) -> Measure {
    let mut worst = 0.0f64;
    for d in [1usize, 2] {
        let v = normal_torus(rng, 6, d)?;
        let op = TorusOperator::new(0.4, 6, d, 1e-14)?;
        worst = worst.max(op.apply(&v)?.max_abs_diff(&apply_frac_torus_spectral(&v, 0.4)?));
    }
    Ok(worst)
}

fn commutator(rng: &mut ChaCha8Rng) -> Measure {
    let cfg = CarlemanConfig::new(2.0, 3.0, 0.1)?;
    let p = FracParams::new(0.5, 0.1, 1)?;
    let v = LatticeFunction::finitely_supported(&p, cube_points(8, 1).map(|j| (j, rng.sample(StandardNormal))))?;
    let c = tangential_commutator_check(&cfg, &v)?;
    Ok(c.defect / c.lhs.abs())
}

fn transference(rng: &mut ChaCha8Rng) -> Measure {
    let p = FracParams::torus(0.5, 4, 1)?;
    let v = normal_torus(rng, 4, 1)?;
    let phi = LatticeFunction::finitely_supported(&p, cube_points(6, 1).map(|j| (j, rng.sample(StandardNormal))))?;
    let r = transference_check(&v, &phi, 1e-8)?;
    Ok(r.defect / r.scale)
}

pub fn self_test_with(opts: SelfTestOptions) -> ExperimentReport {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut checks = Vec::new();
    record(&mut checks, "gamma recurrence", 1e-12, gamma_recurrence());
    record(&mut checks, "bessel recurrence", 1e-12, bessel_recurrence());
    record(&mut checks, "kernel closed form vs quadrature", 1e-8, kernel_vs_quadrature(opts.kernel_constant_factor));
    record(&mut checks, "pointwise vs spectral at N = 6", 1e-10, pointwise_vs_spectral(&mut rng));
    record(&mut checks, "commutator identity at h = 0.1, tau = 3", 1e-10, commutator(&mut rng));
    record(&mut checks, "transference at N = 4", 1e-8, transference(&mut rng));
    let mut config = BTreeMap::new();
    config.insert("seed".to_string(), opts.seed.to_string());
    config.insert("kernel_constant_factor".to_string(), format!("{:?}", opts.kernel_constant_factor));
    ExperimentReport {
        experiment: "self-test".into(),
        config,
        wall_time_s: start.elapsed().as_secs_f64(),
        checks,
        artifacts: Vec::new(),
    }
}
