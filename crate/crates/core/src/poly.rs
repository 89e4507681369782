//! Polynomial helpers for `A(z) = 1 + a_1 z^-1 + ... + a_p z^-p`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;

/// Roots of `A(z)` (the model poles) from the companion matrix.
pub fn roots(a: &[f64]) -> Vec<Complex64> {
    let p = a.len();
    if p == 0 {
        return Vec::new();
    }
    let mut companion = DMatrix::<f64>::zeros(p, p);
    for (k, &ak) in a.iter().enumerate() {
        companion[(0, k)] = -ak;
    }
    for i in 1..p {
        companion[(i, i - 1)] = 1.0;
    }
    companion
        .complex_eigenvalues()
        .iter()
        .map(|c| Complex64::new(c.re, c.im))
        .collect()
}

pub fn max_root_modulus(a: &[f64]) -> f64 {
    roots(a).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Expands `prod (1 - z_i z^-1)` into `a_1..a_p`; imaginary parts are dropped,
/// so roots must come in conjugate pairs.
pub fn from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    for &z in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
        for (i, &c) in poly.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * z;
        }
        poly = next;
    }
    poly[1..].iter().map(|c| c.re).collect()
}

/// Second-order section `1 - 2 r cos(theta) z^-1 + r^2 z^-2` for a resonance
/// at `freq_hz` with 3-dB bandwidth `bw_hz`.
pub fn resonator(freq_hz: f64, bw_hz: f64, sample_rate: f64) -> [f64; 2] {
    let r = (-PI * bw_hz / sample_rate).exp();
    let theta = 2.0 * PI * freq_hz / sample_rate;
    [-2.0 * r * theta.cos(), r * r]
}

/// Product of resonator sections, as `a_1..a_{2n}`.
pub fn cascade(resonances: &[(f64, f64)], sample_rate: f64) -> Vec<f64> {
    let mut poly = vec![1.0];
    for &(f, bw) in resonances {
        let [b1, b2] = resonator(f, bw, sample_rate);
        let mut next = vec![0.0; poly.len() + 2];
        for (i, &c) in poly.iter().enumerate() {
            next[i] += c;
            next[i + 1] += c * b1;
            next[i + 2] += c * b2;
        }
        poly = next;
    }
    poly[1..].to_vec()
}

/// All-pole filtering `y[n] = x[n] - sum a_k y[n-k]` with zero initial state.
pub fn allpole_filter(a: &[f64], x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for n in 0..x.len() {
        let mut acc = x[n];
        for (k, &ak) in a.iter().enumerate() {
            if n > k {
                acc -= ak * y[n - k - 1];
            }
        }
        y[n] = acc;
    }
    y
}

/// Inverse filtering `e[n] = x[n] + sum a_k x[n-k]` with zero initial state.
pub fn inverse_filter(a: &[f64], x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|n| {
            let mut acc = x[n];
            for (k, &ak) in a.iter().enumerate() {
                if n > k {
                    acc += ak * x[n - k - 1];
                }
            }
            acc
        })
        .collect()
}
