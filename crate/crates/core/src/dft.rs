//! Discrete Fourier transform on `(Z/nZ)^d`.
//!
//! Arrays are stored in row-major order indexed by residues `0..n` on every
//! axis. The forward transform is normalized,
//! `v̂_k = n^{-d} Σ_j v_j e^{-2πi k·j/n}`, and the inverse is the plain sum
//! `v_j = Σ_k v̂_k e^{2πi k·j/n}`.
//!
//! Lengths below 64 use the direct O(n^2) sum; longer axes use Bluestein's
//! chirp-z algorithm on a power-of-two FFT.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::math::{self, PI};

const DIRECT_LIMIT: usize = 64;

fn unit(angle: f64) -> Complex64 {
    Complex64::new(math::cos(angle), math::sin(angle))
}

/// Radix-2 in-place FFT with sign `e^{-2πi jk/m}`.
struct Pow2 {
    m: usize,
    twiddles: Vec<Complex64>,
}

impl Pow2 {
    fn new(m: usize) -> Self {
        debug_assert!(m.is_power_of_two());
        let twiddles = (0..m / 2)
            .map(|k| unit(-2.0 * PI * k as f64 / m as f64))
            .collect();
        Self { m, twiddles }
    }

    fn run(&self, buf: &mut [Complex64]) {
        let m = self.m;
        let bits = m.trailing_zeros();
        if m <= 1 {
            return;
        }
        for i in 0..m {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= m {
            let stride = m / len;
            for start in (0..m).step_by(len) {
                for k in 0..len / 2 {
                    let w = self.twiddles[k * stride];
                    let a = buf[start + k];
                    let b = buf[start + k + len / 2] * w;
                    buf[start + k] = a + b;
                    buf[start + k + len / 2] = a - b;
                }
            }
            len <<= 1;
        }
    }
}

enum Plan {
    Direct(Vec<Complex64>),
    Bluestein {
        chirp: Vec<Complex64>,
        filter: Vec<Complex64>,
        inner: Pow2,
    },
}

/// One-dimensional transform of a fixed length, unnormalized, with sign
/// `e^{-2πi jk/n}`.
pub struct Dft1 {
    n: usize,
    plan: Plan,
}

impl Dft1 {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "transform length must be positive");
        let plan = if n < DIRECT_LIMIT {
            Plan::Direct((0..n).map(|k| unit(-2.0 * PI * k as f64 / n as f64)).collect())
        } else {
            // c_j = e^{iπ j^2 / n}, with j^2 reduced mod 2n to keep the angle small
            let chirp: Vec<Complex64> = (0..n)
                .map(|j| {
                    let q = (j as u128 * j as u128 % (2 * n as u128)) as f64;
                    unit(PI * q / n as f64)
                })
                .collect();
            let m = (2 * n - 1).next_power_of_two();
            let inner = Pow2::new(m);
            let mut filter = vec![Complex64::new(0.0, 0.0); m];
            filter[0] = chirp[0];
            for j in 1..n {
                filter[j] = chirp[j];
                filter[m - j] = chirp[j];
            }
            inner.run(&mut filter);
            Plan::Bluestein {
                chirp,
                filter,
                inner,
            }
        };
        Self { n, plan }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place forward transform (no normalization).
    pub fn forward(&self, buf: &mut [Complex64]) {
        let n = self.n;
        assert_eq!(buf.len(), n);
        match &self.plan {
            Plan::Direct(tw) => {
                let input: Vec<Complex64> = buf.to_vec();
                for (k, out) in buf.iter_mut().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (j, x) in input.iter().enumerate() {
                        acc += x * tw[(j * k) % n];
                    }
                    *out = acc;
                }
            }
            Plan::Bluestein {
                chirp,
                filter,
                inner,
            } => {
                let m = inner.m;
                let mut work = vec![Complex64::new(0.0, 0.0); m];
                for j in 0..n {
                    work[j] = buf[j] * chirp[j].conj();
                }
                inner.run(&mut work);
                for (w, f) in work.iter_mut().zip(filter) {
                    *w *= f;
                }
                // inverse power-of-two transform through conjugation
                work.iter_mut().for_each(|w| *w = w.conj());
                inner.run(&mut work);
                let scale = 1.0 / m as f64;
                for k in 0..n {
                    buf[k] = work[k].conj() * scale * chirp[k].conj();
                }
            }
        }
    }

    /// In-place inverse transform (sign `+`, no normalization).
    pub fn inverse(&self, buf: &mut [Complex64]) {
        buf.iter_mut().for_each(|x| *x = x.conj());
        self.forward(buf);
        buf.iter_mut().for_each(|x| *x = x.conj());
    }
}

/// Transform plans for the cube `(Z/nZ)^d`.
pub struct DftNd {
    n: usize,
    d: usize,
    axis: Dft1,
}

impl DftNd {
    pub fn new(n: usize, d: usize) -> Self {
        Self {
            n,
            d,
            axis: Dft1::new(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    fn along_axes(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        assert_eq!(data.len(), n.pow(self.d as u32), "array does not match the cube");
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for axis in 0..self.d {
            let stride = n.pow((self.d - 1 - axis) as u32);
            let block = stride * n;
            for base in (0..data.len()).step_by(block) {
                for offset in 0..stride {
                    let start = base + offset;
                    for (i, slot) in line.iter_mut().enumerate() {
                        *slot = data[start + i * stride];
                    }
                    if inverse {
                        self.axis.inverse(&mut line);
                    } else {
                        self.axis.forward(&mut line);
                    }
                    for (i, v) in line.iter().enumerate() {
                        data[start + i * stride] = *v;
                    }
                }
            }
        }
    }

    /// `v̂_k = n^{-d} Σ_j v_j e^{-2πi k·j/n}`.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.along_axes(data, false);
        let scale = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|x| *x *= scale);
    }

    /// `v_j = Σ_k v̂_k e^{2πi k·j/n}`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.along_axes(data, true);
    }
}
