//! All-pole estimators: autocorrelation, covariance and forward-backward
//! linear prediction, plain and with a temporal weighting of the
//! prediction error (quasi-closed-phase analysis).
//!
//! All models use the `A(z) = 1 + sum_{k=1}^{p} a_k z^-k` convention, i.e.
//! the predictor is `x^_n = -sum a_k x_{n-k}`.

mod levinson;
mod solve;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use levinson::{levinson_durbin, reflection_coefficients, LevinsonSolution};
pub use solve::{solve_spd_system, NormalEquationSystem};

use crate::dsp::{apply_window, autocorrelation, Frame, WindowKind};
use crate::error::{Error, Result};

/// The six all-pole estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "LP-ACOR")]
    LpAcor,
    #[serde(rename = "LP-COV")]
    LpCov,
    #[serde(rename = "LP-FBCOV")]
    LpFbcov,
    #[serde(rename = "QCP-ACOR")]
    QcpAcor,
    #[serde(rename = "QCP-COV")]
    QcpCov,
    #[serde(rename = "QCP-FBCOV")]
    QcpFbcov,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::LpAcor,
        Method::LpCov,
        Method::LpFbcov,
        Method::QcpAcor,
        Method::QcpCov,
        Method::QcpFbcov,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::LpAcor => "LP-ACOR",
            Method::LpCov => "LP-COV",
            Method::LpFbcov => "LP-FBCOV",
            Method::QcpAcor => "QCP-ACOR",
            Method::QcpCov => "QCP-COV",
            Method::QcpFbcov => "QCP-FBCOV",
        }
    }

    pub fn is_weighted(self) -> bool {
        matches!(self, Method::QcpAcor | Method::QcpCov | Method::QcpFbcov)
    }

    pub fn range(self) -> Range {
        match self {
            Method::LpAcor | Method::QcpAcor => Range::Autocorrelation,
            Method::LpCov | Method::QcpCov => Range::Covariance,
            Method::LpFbcov | Method::QcpFbcov => Range::ForwardBackward,
        }
    }

    /// Window applied to the frame before analysis.
    pub fn window(self) -> WindowKind {
        match self.range() {
            Range::Autocorrelation => WindowKind::Hamming,
            _ => WindowKind::Rectangular,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('_', "-");
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == norm)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown all-pole method '{s}'")))
    }
}

/// Summation range of the prediction error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Range {
    /// `n in [0, N+p)` with the frame zero-extended on both sides.
    Autocorrelation,
    /// Forward error only, `n in [p, N-1]`.
    Covariance,
    /// Forward over `[p, N-1]` plus backward over `[0, N-1-p]`.
    ForwardBackward,
}

impl Range {
    /// Length of a weighting function for a frame of `frame_len` samples:
    /// one weight per predicted-sample position.
    pub fn weight_len(self, frame_len: usize, order: usize) -> usize {
        match self {
            Range::Autocorrelation => frame_len + order,
            Range::Covariance | Range::ForwardBackward => frame_len,
        }
    }
}

/// An order-`p` all-pole model.
#[derive(Debug, Clone, PartialEq)]
pub struct AllPoleModel {
    pub order: usize,
    /// `a_1..a_p`.
    pub coefficients: Vec<f64>,
    pub gain: f64,
    pub method: Method,
    /// Zero-energy input; coefficients are all zero and gain is zero.
    pub degenerate: bool,
    /// All roots of `A(z)` strictly inside the unit circle. Covariance-type
    /// models may be unstable; they are kept as estimated.
    pub minimum_phase: bool,
}

impl AllPoleModel {
    pub fn degenerate(order: usize, method: Method) -> Self {
        Self {
            order,
            coefficients: vec![0.0; order],
            gain: 0.0,
            method,
            degenerate: true,
            minimum_phase: true,
        }
    }

    fn from_coefficients(coefficients: Vec<f64>, gain: f64, method: Method) -> Self {
        let minimum_phase = reflection_coefficients(&coefficients).is_some();
        Self {
            order: coefficients.len(),
            coefficients,
            gain,
            method,
            degenerate: false,
            minimum_phase,
        }
    }

    /// Poles of the model.
    pub fn poles(&self) -> Vec<rustfft::num_complex::Complex64> {
        crate::poly::roots(&self.coefficients)
    }
}

fn check_order(frame: &Frame, p: usize) -> Result<()> {
    if p == 0 || p >= frame.len() {
        return Err(Error::InvalidArgument(format!(
            "model order {p} must be in 1..{}",
            frame.len()
        )));
    }
    Ok(())
}

fn windowed(frame: &Frame, kind: WindowKind) -> Vec<f64> {
    if frame.window == kind {
        frame.samples.clone()
    } else {
        apply_window(frame, kind).samples
    }
}

/// Autocorrelation-method LP on a Hamming-windowed frame (Levinson-Durbin).
///
/// An unwindowed frame is windowed here.
pub fn lp_autocorrelation(frame: &Frame, p: usize) -> Result<AllPoleModel> {
    check_order(frame, p)?;
    let x = windowed(frame, WindowKind::Hamming);
    let r = autocorrelation(&x, p);
    match levinson_durbin(&r, p) {
        None => Ok(AllPoleModel::degenerate(p, Method::LpAcor)),
        Some(sol) => {
            let mut model = AllPoleModel::from_coefficients(sol.coefficients, sol.error.sqrt(), Method::LpAcor);
            model.minimum_phase = true;
            Ok(model)
        }
    }
}

/// Covariance-method LP: forward error over `n in [p, N-1]`, in-frame samples only.
pub fn lp_covariance(frame: &Frame, p: usize) -> Result<AllPoleModel> {
    check_order(frame, p)?;
    fit(&frame.samples, p, Range::Covariance, None, Method::LpCov)
}

/// Forward-backward covariance LP with one shared coefficient set.
pub fn lp_forward_backward_cov(frame: &Frame, p: usize) -> Result<AllPoleModel> {
    check_order(frame, p)?;
    fit(&frame.samples, p, Range::ForwardBackward, None, Method::LpFbcov)
}

/// Weighted (QCP) estimator in the given summation range.
///
/// `weights[n]` multiplies the prediction error of the sample at position `n`
/// (relative to the frame start) in both prediction directions; its length
/// must be [`Range::weight_len`].
pub fn qcp_variant(frame: &Frame, p: usize, weights: &[f64], range: Range) -> Result<AllPoleModel> {
    check_order(frame, p)?;
    let expected = range.weight_len(frame.len(), p);
    if weights.len() != expected {
        return Err(Error::InvalidArgument(format!(
            "weighting function has {} samples, expected {expected}",
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
        return Err(Error::InvalidArgument(format!("weights must be positive, found {w}")));
    }
    let (method, x) = match range {
        Range::Autocorrelation => (Method::QcpAcor, windowed(frame, WindowKind::Hamming)),
        Range::Covariance => (Method::QcpCov, frame.samples.clone()),
        Range::ForwardBackward => (Method::QcpFbcov, frame.samples.clone()),
    };
    fit(&x, p, range, Some(weights), method)
}

/// Runs `method` with `weights` used only by the QCP variants.
pub fn estimate(frame: &Frame, p: usize, method: Method, weights: Option<&[f64]>) -> Result<AllPoleModel> {
    match method {
        Method::LpAcor => lp_autocorrelation(frame, p),
        Method::LpCov => lp_covariance(frame, p),
        Method::LpFbcov => lp_forward_backward_cov(frame, p),
        Method::QcpAcor | Method::QcpCov | Method::QcpFbcov => {
            let ones;
            let w = match weights {
                Some(w) => w,
                None => {
                    ones = vec![1.0; method.range().weight_len(frame.len(), p)];
                    &ones
                }
            };
            qcp_variant(frame, p, w, method.range())
        }
    }
}

/// `(p+1) x (p+1)` correlation matrix `phi[i][k]` (row-major) and the total
/// weight of the error terms.
pub fn correlation_matrix(x: &[f64], p: usize, range: Range, weights: Option<&[f64]>) -> (Vec<f64>, f64) {
    let n_len = x.len();
    let dim = p + 1;
    let mut phi = vec![0.0; dim * dim];
    let mut total_weight = 0.0;
    let w_at = |n: usize| weights.map_or(1.0, |w| w[n]);

    let mut accumulate = |get: &dyn Fn(usize, usize) -> f64, ns: std::ops::Range<usize>| {
        for n in ns {
            total_weight += w_at(n);
            for i in 0..dim {
                let xi = get(n, i);
                if xi == 0.0 {
                    continue;
                }
                for k in i..dim {
                    let t = xi * get(n, k);
                    phi[i * dim + k] += match weights {
                        Some(w) => w[n] * t,
                        None => t,
                    };
                }
            }
        }
    };

    match range {
        Range::Autocorrelation => {
            let padded = |n: usize, i: usize| -> f64 {
                // sample x[n - i] of the zero-extended frame
                n.checked_sub(i).and_then(|m| x.get(m)).copied().unwrap_or(0.0)
            };
            accumulate(&padded, 0..n_len + p);
        }
        Range::Covariance => {
            accumulate(&|n, i| x[n - i], p..n_len);
        }
        Range::ForwardBackward => {
            accumulate(&|n, i| x[n - i], p..n_len);
            accumulate(&|n, i| x[n + i], 0..n_len - p);
        }
    }
    for i in 0..dim {
        for k in 0..i {
            phi[i * dim + k] = phi[k * dim + i];
        }
    }
    (phi, total_weight)
}

/// Normal equations `sum_k phi[i][k] a_k = -phi[i][0]`, `1 <= i <= p`.
pub fn normal_equations(phi: &[f64], p: usize) -> NormalEquationSystem {
    let dim = p + 1;
    let mut matrix = vec![0.0; p * p];
    for i in 0..p {
        for k in 0..p {
            matrix[i * p + k] = phi[(i + 1) * dim + k + 1];
        }
    }
    let rhs = (0..p).map(|i| -phi[(i + 1) * dim]).collect();
    NormalEquationSystem { order: p, matrix, rhs }
}

fn fit(x: &[f64], p: usize, range: Range, weights: Option<&[f64]>, method: Method) -> Result<AllPoleModel> {
    let (phi, total_weight) = correlation_matrix(x, p, range, weights);
    if !(phi[0] > 0.0) {
        return Ok(AllPoleModel::degenerate(p, method));
    }
    let system = normal_equations(&phi, p);
    if !(system.trace() > 0.0) {
        // nothing to predict from: the minimum-norm predictor is A(z) = 1
        return Ok(AllPoleModel::from_coefficients(
            vec![0.0; p],
            (phi[0] / total_weight).sqrt(),
            method,
        ));
    }
    let a = solve_spd_system(&system)?;
    let residual = phi[0] + (0..p).map(|k| a[k] * phi[k + 1]).sum::<f64>();
    let gain = (residual.max(0.0) / total_weight).sqrt();
    Ok(AllPoleModel::from_coefficients(a, gain, method))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
        StandardNormal.sample(rng)
    }

    fn ar2(len: usize, seed: u64) -> Frame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = vec![0.0; len + 500];
        for n in 2..x.len() {
            x[n] = 1.5 * x[n - 1] - 0.9 * x[n - 2] + gaussian(&mut rng);
        }
        Frame::new(x[500..].to_vec(), 0)
    }

    #[test]
    fn onset_in_last_sample_gives_flat_model() {
        let mut x = vec![0.0; 200];
        x[199] = 0.3;
        let f = Frame::new(x, 0);
        for m in [Method::LpCov, Method::LpFbcov, Method::QcpCov, Method::QcpFbcov] {
            let model = estimate(&f, 12, m, None).unwrap();
            assert_eq!(model.coefficients, vec![0.0; 12], "{m}");
            assert!(model.gain > 0.0 && !model.degenerate);
        }
    }

    fn random_frame(len: usize, seed: u64) -> Frame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Frame::new((0..len).map(|_| rng.gen_range(-1.0..1.0)).collect(), 0)
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn method_tags_parse() {
        for m in Method::ALL {
            assert_eq!(m.tag().parse::<Method>().unwrap(), m);
            assert_eq!(m.tag().to_lowercase().parse::<Method>().unwrap(), m);
        }
        assert!("lp-burg".parse::<Method>().is_err());
    }

    #[test]
    fn ar2_recovery_all_methods() {
        let frame = ar2(10_000, 1);
        let ones = vec![1.0; 10_000];
        let models = [
            lp_autocorrelation(&frame, 2).unwrap(),
            lp_covariance(&frame, 2).unwrap(),
            lp_forward_backward_cov(&frame, 2).unwrap(),
            qcp_variant(&frame, 2, &ones, Range::Covariance).unwrap(),
            qcp_variant(&frame, 2, &ones, Range::ForwardBackward).unwrap(),
        ];
        for m in &models {
            assert_close(&m.coefficients, &[-1.5, 0.9], 0.02);
        }
    }

    #[test]
    fn white_noise_gives_small_coefficients() {
        let mut maxima: Vec<f64> = (0..100)
            .map(|seed| {
                let m = lp_autocorrelation(&random_frame(1000, seed), 12).unwrap();
                m.coefficients.iter().fold(0.0f64, |acc, a| acc.max(a.abs()))
            })
            .collect();
        maxima.sort_by(f64::total_cmp);
        assert!(maxima[94] < 0.2, "95th percentile {}", maxima[94]);
    }

    #[test]
    fn covariance_exact_on_noiseless_ar12() {
        let truth = poly::cascade(
            &[
                (500.0, 60.0),
                (1500.0, 80.0),
                (2500.0, 100.0),
                (3300.0, 150.0),
                (900.0, 200.0),
                (3800.0, 300.0),
            ],
            8000.0,
        );
        let mut exc = vec![0.0; 260];
        exc[0] = 1.0;
        let y = poly::allpole_filter(&truth, &exc);
        // analysis starts after the impulse
        let frame = Frame::new(y[1..201].to_vec(), 1);
        let m = lp_covariance(&frame, 12).unwrap();
        assert_close(&m.coefficients, &truth, 1e-6);
    }

    #[test]
    fn degenerate_on_zero_frames() {
        let z = Frame::new(vec![0.0; 200], 0);
        for m in [
            lp_autocorrelation(&z, 12).unwrap(),
            lp_covariance(&z, 12).unwrap(),
            lp_forward_backward_cov(&z, 12).unwrap(),
            qcp_variant(&z, 12, &vec![1.0; 200], Range::ForwardBackward).unwrap(),
        ] {
            assert!(m.degenerate);
            assert!(m.coefficients.iter().all(|&a| a == 0.0));
            assert_eq!(m.gain, 0.0);
        }
    }

    #[test]
    fn constant_frame_is_handled_by_ridge() {
        let c = Frame::new(vec![0.25; 200], 0);
        let m = lp_covariance(&c, 12).unwrap();
        assert!(m.coefficients.iter().all(|a| a.is_finite()));
    }

    #[test]
    fn order_and_weight_length_checked() {
        let f = random_frame(20, 3);
        assert!(lp_covariance(&f, 20).is_err());
        assert!(lp_autocorrelation(&f, 0).is_err());
        assert!(qcp_variant(&f, 4, &[1.0; 19], Range::Covariance).is_err());
        assert!(qcp_variant(&f, 4, &[1.0; 20], Range::Autocorrelation).is_err());
        let mut w = vec![1.0; 20];
        w[3] = 0.0;
        assert!(qcp_variant(&f, 4, &w, Range::Covariance).is_err());
    }

    #[test]
    fn unit_weights_reproduce_unweighted_estimators() {
        for seed in 0..10 {
            let f = random_frame(200, seed);
            let p = 12;
            let cov = lp_covariance(&f, p).unwrap();
            let qcov = qcp_variant(&f, p, &vec![1.0; 200], Range::Covariance).unwrap();
            assert_eq!(cov.coefficients, qcov.coefficients);
            let fb = lp_forward_backward_cov(&f, p).unwrap();
            let qfb = qcp_variant(&f, p, &vec![1.0; 200], Range::ForwardBackward).unwrap();
            assert_eq!(fb.coefficients, qfb.coefficients);
            let ac = lp_autocorrelation(&f, p).unwrap();
            let qac = qcp_variant(&f, p, &vec![1.0; 212], Range::Autocorrelation).unwrap();
            assert_close(&ac.coefficients, &qac.coefficients, 1e-10);
        }
    }

    #[test]
    fn forward_backward_is_reversal_symmetric() {
        let f = random_frame(200, 9);
        let rev = Frame::new(f.samples.iter().rev().copied().collect(), 0);
        let a = lp_forward_backward_cov(&f, 12).unwrap();
        let b = lp_forward_backward_cov(&rev, 12).unwrap();
        assert_close(&a.coefficients, &b.coefficients, 1e-12);
        let (pa, _) = correlation_matrix(&f.samples, 12, Range::ForwardBackward, None);
        let (pb, _) = correlation_matrix(&rev.samples, 12, Range::ForwardBackward, None);
        assert_close(&pa, &pb, 1e-12);
    }

    #[test]
    fn normal_equations_symmetric_psd() {
        let f = random_frame(200, 4);
        let w: Vec<f64> = (0..200).map(|n| 0.1 + (n % 7) as f64 / 7.0).collect();
        for range in [Range::Covariance, Range::ForwardBackward] {
            let (phi, _) = correlation_matrix(&f.samples, 12, range, Some(&w));
            let sys = normal_equations(&phi, 12);
            assert!(sys.is_symmetric(1e-10));
            // x^T M x >= 0 on a few probe vectors
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            for _ in 0..20 {
                let v: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let q: f64 = (0..12)
                    .flat_map(|i| (0..12).map(move |k| (i, k)))
                    .map(|(i, k)| v[i] * sys.at(i, k) * v[k])
                    .sum();
                assert!(q >= -1e-12);
            }
        }
    }

    #[test]
    fn autocorrelation_method_is_minimum_phase() {
        for seed in 0..30 {
            let m = lp_autocorrelation(&random_frame(200, seed), 12).unwrap();
            assert!(m.minimum_phase);
            assert!(poly::max_root_modulus(&m.coefficients) < 1.0);
        }
    }

    #[test]
    fn covariance_gain_matches_residual_power() {
        let frame = ar2(10_000, 8);
        let m = lp_covariance(&frame, 2).unwrap();
        // innovation variance of the generator is 1
        assert!((m.gain - 1.0).abs() < 0.05, "gain {}", m.gain);
    }
}
