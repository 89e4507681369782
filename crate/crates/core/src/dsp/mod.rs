//! Signal conditioning: pre-emphasis, framing, windowing, autocorrelation
//! and FFT magnitude spectra.

mod resample;

pub use resample::resample;

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Analysis sample rate of the whole pipeline.
pub const ANALYSIS_RATE: u32 = 8000;

/// Floor added to linear magnitudes before taking dB.
pub const DB_FLOOR: f64 = 1e-12;

/// Mono signal with samples normalized to [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite sample at index {i}")));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Mean square over all samples.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WindowKind {
    Hamming,
    Rectangular,
}

/// One analysis segment cut from a [`Signal`].
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub samples: Vec<f64>,
    /// Offset of the first sample in the source signal.
    pub start_index: usize,
    pub window: WindowKind,
}

impl Frame {
    pub fn new(samples: Vec<f64>, start_index: usize) -> Self {
        Self {
            samples,
            start_index,
            window: WindowKind::Rectangular,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Frame length and hop in samples for a given rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameGrid {
    pub frame_len: usize,
    pub hop: usize,
}

impl FrameGrid {
    pub fn from_ms(frame_ms: f64, hop_ms: f64, sample_rate: u32) -> Result<Self> {
        if !(hop_ms > 0.0) || frame_ms < hop_ms {
            return Err(Error::InvalidArgument(format!(
                "need frame_ms >= hop_ms > 0 (got {frame_ms}, {hop_ms})"
            )));
        }
        let frame_len = (frame_ms * sample_rate as f64 / 1000.0).round() as usize;
        let hop = (hop_ms * sample_rate as f64 / 1000.0).round() as usize;
        if frame_len == 0 || hop == 0 {
            return Err(Error::InvalidArgument("frame or hop shorter than one sample".into()));
        }
        Ok(Self { frame_len, hop })
    }

    /// Number of complete frames in a signal of `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.frame_len {
            0
        } else {
            (len - self.frame_len) / self.hop + 1
        }
    }

    pub fn start(&self, index: usize) -> usize {
        index * self.hop
    }

    pub fn center(&self, index: usize) -> usize {
        index * self.hop + self.frame_len / 2
    }
}

/// First-order FIR pre-emphasis `P(z) = 1 - alpha z^-1`.
pub fn pre_emphasize(signal: &Signal, alpha: f64) -> Signal {
    let x = signal.samples();
    let mut out = Vec::with_capacity(x.len());
    if let Some(&first) = x.first() {
        out.push(first);
        out.extend(x.windows(2).map(|w| w[1] - alpha * w[0]));
    }
    Signal {
        samples: out,
        sample_rate: signal.sample_rate,
    }
}

/// Cuts the signal into frames; a trailing partial frame is discarded.
pub fn frame_signal(signal: &Signal, frame_ms: f64, hop_ms: f64) -> Result<Vec<Frame>> {
    let grid = FrameGrid::from_ms(frame_ms, hop_ms, signal.sample_rate)?;
    Ok(frames_on_grid(signal.samples(), grid))
}

pub fn frames_on_grid(samples: &[f64], grid: FrameGrid) -> Vec<Frame> {
    (0..grid.frame_count(samples.len()))
        .map(|i| {
            let start = grid.start(i);
            Frame::new(samples[start..start + grid.frame_len].to_vec(), start)
        })
        .collect()
}

pub fn hamming(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..n)
            .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
            .collect(),
    }
}

pub fn apply_window(frame: &Frame, kind: WindowKind) -> Frame {
    let samples = match kind {
        WindowKind::Rectangular => frame.samples.clone(),
        WindowKind::Hamming => frame
            .samples
            .iter()
            .zip(hamming(frame.len()))
            .map(|(s, w)| s * w)
            .collect(),
    };
    Frame {
        samples,
        start_index: frame.start_index,
        window: kind,
    }
}

/// `r[k] = sum_n s[n] s[n-k]` for `k = 0..=max_lag`.
pub fn autocorrelation(samples: &[f64], max_lag: usize) -> Vec<f64> {
    (0..=max_lag)
        .map(|k| {
            if k >= samples.len() {
                0.0
            } else {
                samples[k..].iter().zip(samples).map(|(a, b)| a * b).sum()
            }
        })
        .collect()
}

/// Zero-padded DFT of `samples`; returns all `nfft` bins.
pub fn dft(samples: &[f64], nfft: usize) -> Result<Vec<Complex64>> {
    if !nfft.is_power_of_two() || nfft < samples.len() {
        return Err(Error::InvalidArgument(format!(
            "nfft {nfft} must be a power of two >= {}",
            samples.len()
        )));
    }
    let mut buf: Vec<Complex64> = samples
        .iter()
        .map(|&s| Complex64::new(s, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(nfft)
        .collect();
    FftPlanner::new().plan_fft_forward(nfft).process(&mut buf);
    Ok(buf)
}

/// `|DFT|^2` on the first `nfft/2 + 1` bins.
pub fn power_spectrum(samples: &[f64], nfft: usize) -> Result<Vec<f64>> {
    Ok(dft(samples, nfft)?
        .into_iter()
        .take(nfft / 2 + 1)
        .map(|c| c.norm_sqr())
        .collect())
}

/// `20 log10(|DFT| + eps)` on the first `nfft/2 + 1` bins.
pub fn magnitude_spectrum_db(samples: &[f64], nfft: usize) -> Result<Vec<f64>> {
    Ok(dft(samples, nfft)?
        .into_iter()
        .take(nfft / 2 + 1)
        .map(|c| 20.0 * (c.norm() + DB_FLOOR).log10())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sig(x: Vec<f64>) -> Signal {
        Signal::new(x, 8000).unwrap()
    }

    #[test]
    fn signal_rejects_bad_input() {
        assert!(Signal::new(vec![0.0], 0).is_err());
        assert!(Signal::new(vec![0.0, f64::NAN], 8000).is_err());
        assert!(Signal::new(vec![f64::INFINITY], 8000).is_err());
    }

    #[test]
    fn pre_emphasis_difference_equation() {
        let out = pre_emphasize(&sig(vec![1.0, 1.0, 1.0]), 0.5);
        assert_eq!(out.samples(), &[1.0, 0.5, 0.5]);
        let zeros = pre_emphasize(&sig(vec![0.0; 16]), 0.5);
        assert!(zeros.samples().iter().all(|&v| v == 0.0));
        assert!(pre_emphasize(&sig(vec![]), 0.5).is_empty());
    }

    #[test]
    fn framing_counts() {
        let one_second = sig(vec![0.1; 8000]);
        let frames = frame_signal(&one_second, 25.0, 10.0).unwrap();
        assert_eq!(frames.len(), (8000 - 200) / 80 + 1);
        assert_eq!(frames.len(), 98);
        assert!(frames.iter().all(|f| f.len() == 200));
        for (i, f) in frames.iter().enumerate() {
            assert_eq!(f.start_index, i * 80);
        }
        assert!(frame_signal(&sig(vec![0.0; 199]), 25.0, 10.0).unwrap().is_empty());
        assert!(frame_signal(&one_second, 10.0, 25.0).is_err());
        assert!(frame_signal(&one_second, 25.0, 0.0).is_err());
    }

    #[test]
    fn windows() {
        let f = Frame::new(vec![0.3, -0.2, 0.9, 0.4], 7);
        let r = apply_window(&f, WindowKind::Rectangular);
        assert_eq!(r.samples, f.samples);
        assert_eq!(r.start_index, 7);
        let h = apply_window(&Frame::new(vec![1.0; 3], 0), WindowKind::Hamming);
        assert!((h.samples[0] - 0.08).abs() < 1e-15);
        assert!((h.samples[1] - 1.0).abs() < 1e-15);
        assert!((h.samples[2] - 0.08).abs() < 1e-15);
        for n in [2usize, 10, 200, 257] {
            let w = hamming(n);
            assert!((w[0] - 0.08).abs() < 1e-12);
            assert!((w[n - 1] - 0.08).abs() < 1e-12);
        }
    }

    #[test]
    fn autocorrelation_small_cases() {
        let mut imp = vec![0.0; 10];
        imp[0] = 1.0;
        assert_eq!(autocorrelation(&imp, 2), vec![1.0, 0.0, 0.0]);
        assert_eq!(autocorrelation(&[1.0, 1.0], 1), vec![2.0, 1.0]);
    }

    #[test]
    fn autocorrelation_peaks_at_cosine_period() {
        let period = 40;
        let x: Vec<f64> = (0..400).map(|n| (2.0 * PI * n as f64 / period as f64).cos()).collect();
        let r = autocorrelation(&x, 60);
        assert!(r[period] > r[period - 1] && r[period] > r[period + 1]);
    }

    #[test]
    fn spectrum_cases() {
        let mut imp = vec![0.0; 64];
        imp[0] = 1.0;
        let s = magnitude_spectrum_db(&imp, 64).unwrap();
        assert_eq!(s.len(), 33);
        assert!(s.iter().all(|v| v.abs() < 1e-9));

        let z = magnitude_spectrum_db(&[0.0; 32], 64).unwrap();
        assert!(z.iter().all(|&v| (v - 20.0 * DB_FLOOR.log10()).abs() < 1e-9));

        let nfft = 256;
        let bin = 20;
        let x: Vec<f64> = (0..nfft)
            .map(|n| (2.0 * PI * bin as f64 * n as f64 / nfft as f64).cos())
            .collect();
        let s = magnitude_spectrum_db(&x, nfft).unwrap();
        assert!(s[bin] - s[bin - 1] >= 40.0);
        assert!(s[bin] - s[bin + 1] >= 40.0);

        assert!(magnitude_spectrum_db(&[0.0; 100], 64).is_err());
        assert!(magnitude_spectrum_db(&[0.0; 10], 100).is_err());
    }

    proptest! {
        #[test]
        fn pre_emphasis_is_linear(
            x in prop::collection::vec(-1.0f64..1.0, 1..64),
            a in -2.0f64..2.0,
            b in -2.0f64..2.0,
        ) {
            let y: Vec<f64> = x.iter().rev().map(|v| v * 0.7).collect();
            let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let lhs = pre_emphasize(&sig(mix), 0.5);
            let px = pre_emphasize(&sig(x.clone()), 0.5);
            let py = pre_emphasize(&sig(y), 0.5);
            for i in 0..x.len() {
                let rhs = a * px.samples()[i] + b * py.samples()[i];
                prop_assert!((lhs.samples()[i] - rhs).abs() < 1e-12);
            }
        }

        #[test]
        fn autocorrelation_zero_lag_dominates(x in prop::collection::vec(-1.0f64..1.0, 2..128)) {
            let r = autocorrelation(&x, x.len() - 1);
            for k in 1..r.len() {
                prop_assert!(r[0] + 1e-12 >= r[k].abs());
            }
        }

        #[test]
        fn parseval(x in prop::collection::vec(-1.0f64..1.0, 1..128)) {
            let nfft = 128;
            let spec = dft(&x, nfft).unwrap();
            let lhs: f64 = spec.iter().map(|c| c.norm_sqr()).sum();
            let rhs = nfft as f64 * x.iter().map(|v| v * v).sum::<f64>();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.max(1e-300));
        }
    }
}
