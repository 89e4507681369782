//! F0 estimation and glottal closure instant (GCI) detection.
//!
//! The GCI detector is a simple LP-residual peak picker guided by the F0
//! track: it only has to place the quasi-closed-phase weighting, so it aims
//! at a few samples of accuracy on clean voiced speech.

use crate::allpole::lp_autocorrelation;
use crate::dsp::{Frame, FrameGrid, Signal};
use crate::error::Result;
use crate::poly;

pub const F0_MIN: f64 = 60.0;
pub const F0_MAX: f64 = 400.0;
const VOICING_THRESHOLD: f64 = 0.3;
const RMS_THRESHOLD: f64 = 1e-4;
const GCI_LP_ORDER: usize = 12;
const SEARCH_TOLERANCE: f64 = 0.2;
const SUBMULTIPLE_RATIO: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub struct PitchTrack {
    /// Hz per frame; 0 for unvoiced frames.
    pub f0: Vec<f64>,
    pub voiced: Vec<bool>,
    pub grid: FrameGrid,
    pub sample_rate: u32,
}

impl PitchTrack {
    pub fn len(&self) -> usize {
        self.f0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0.is_empty()
    }

    /// Frame whose center is closest to sample `n`.
    pub fn frame_at(&self, n: usize) -> usize {
        let half = self.grid.frame_len / 2;
        let idx = (n.saturating_sub(half) + self.grid.hop / 2) / self.grid.hop;
        idx.min(self.len().saturating_sub(1))
    }

    /// Runs of consecutive voiced frames as `[first, last]` frame indices.
    pub fn voiced_runs(&self) -> Vec<(usize, usize)> {
        let mut runs = Vec::new();
        let mut start = None;
        for (i, &v) in self.voiced.iter().enumerate() {
            match (v, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    runs.push((s, i - 1));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            runs.push((s, self.voiced.len() - 1));
        }
        runs
    }
}

/// Strictly increasing sample indices of detected glottal closures.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GciSequence {
    pub instants: Vec<usize>,
}

impl GciSequence {
    pub fn is_empty(&self) -> bool {
        self.instants.is_empty()
    }

    pub fn len(&self) -> usize {
        self.instants.len()
    }
}

fn lag_range(sample_rate: u32) -> (usize, usize) {
    let fs = sample_rate as f64;
    ((fs / F0_MAX).floor() as usize, (fs / F0_MIN).ceil() as usize)
}

/// Per-frame F0 from the normalized autocorrelation `r[k]/r[0]` of a
/// window centred on each frame and spanning three maximal periods.
pub fn estimate_f0(signal: &Signal, grid: FrameGrid) -> PitchTrack {
    let x = signal.samples();
    let (min_lag, max_lag) = lag_range(signal.sample_rate());
    let span = grid.frame_len.max(3 * max_lag);
    let n_frames = grid.frame_count(x.len());
    let mut f0 = vec![0.0; n_frames];
    let mut voiced = vec![false; n_frames];

    for i in 0..n_frames {
        let start = grid.start(i);
        let frame = &x[start..start + grid.frame_len];
        let rms = (frame.iter().map(|v| v * v).sum::<f64>() / frame.len() as f64).sqrt();
        if rms <= RMS_THRESHOLD {
            continue;
        }
        let center = grid.center(i);
        let lo = center.saturating_sub(span / 2);
        let hi = (lo + span).min(x.len());
        let seg = &x[lo..hi];
        let mean = seg.iter().sum::<f64>() / seg.len() as f64;
        let seg: Vec<f64> = seg.iter().map(|v| v - mean).collect();
        let r0: f64 = seg.iter().map(|v| v * v).sum();
        if !(r0 > 0.0) || seg.len() <= min_lag + 1 {
            continue;
        }
        let top = max_lag.min(seg.len() - 2);
        let rho: Vec<f64> = (0..=top + 1)
            .map(|k| seg[k..].iter().zip(&seg).map(|(a, b)| a * b).sum::<f64>() / r0)
            .collect();
        let Some(best) = (min_lag..=top).max_by(|&a, &b| rho[a].total_cmp(&rho[b])) else {
            continue;
        };
        if rho[best] <= VOICING_THRESHOLD || residual_peak(&seg, min_lag, top) <= VOICING_THRESHOLD {
            continue;
        }
        let best = submultiple_lag(&rho, best, min_lag, top);
        let offset = if best > min_lag && best < top {
            parabolic_offset(rho[best - 1], rho[best], rho[best + 1])
        } else {
            0.0
        };
        let lag = best as f64 + offset;
        f0[i] = (signal.sample_rate() as f64 / lag).clamp(F0_MIN, F0_MAX);
        voiced[i] = true;
    }

    PitchTrack {
        f0,
        voiced,
        grid,
        sample_rate: signal.sample_rate(),
    }
}

/// Largest normalized autocorrelation of the LP-whitened window over the
/// lag range. Noise shaped by narrow resonances correlates strongly at short
/// lags; its whitened version does not, whereas a pulse train stays periodic.
fn residual_peak(seg: &[f64], min_lag: usize, top: usize) -> f64 {
    let Ok(model) = lp_autocorrelation(&Frame::new(seg.to_vec(), 0), GCI_LP_ORDER) else {
        return 0.0;
    };
    let e = poly::inverse_filter(&model.coefficients, seg);
    let e = &e[GCI_LP_ORDER.min(e.len())..];
    let r0: f64 = e.iter().map(|v| v * v).sum();
    if !(r0 > 0.0) || e.len() <= top {
        return 0.0;
    }
    (min_lag..=top)
        .map(|k| e[k..].iter().zip(e).map(|(a, b)| a * b).sum::<f64>() / r0)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Smallest-lag local maximum at `best / m` that keeps most of the peak
/// correlation; guards against picking a multiple of the period when the
/// waveform repeats exactly over several cycles.
fn submultiple_lag(rho: &[f64], best: usize, min_lag: usize, top: usize) -> usize {
    let threshold = SUBMULTIPLE_RATIO * rho[best];
    for m in (2..=best / min_lag.max(1)).rev() {
        let guess = best as f64 / m as f64;
        let reach = (0.1 * guess).ceil() as usize + 1;
        let lo = (guess.round() as usize).saturating_sub(reach).max(min_lag);
        let hi = ((guess.round() as usize) + reach).min(top);
        if lo > hi {
            continue;
        }
        let cand = (lo..=hi).max_by(|&a, &b| rho[a].total_cmp(&rho[b])).unwrap();
        let is_peak = cand > min_lag && cand < top && rho[cand] >= rho[cand - 1] && rho[cand] >= rho[cand + 1];
        if is_peak && rho[cand] >= threshold {
            return cand;
        }
    }
    best
}

pub(crate) fn parabolic_offset(left: f64, mid: f64, right: f64) -> f64 {
    let denom = left - 2.0 * mid + right;
    if denom.abs() < 1e-300 {
        0.0
    } else {
        (0.5 * (left - right) / denom).clamp(-0.5, 0.5)
    }
}

/// Order-12 LP residual of the whole signal, each sample inverse-filtered
/// with the autocorrelation-LP model of the frame whose centre is nearest.
pub fn lp_residual(signal: &Signal, grid: FrameGrid) -> Result<Vec<f64>> {
    let x = signal.samples();
    let n_frames = grid.frame_count(x.len());
    let mut e = vec![0.0; x.len()];
    if n_frames == 0 {
        return Ok(e);
    }
    let half = grid.frame_len / 2;
    for i in 0..n_frames {
        let start = grid.start(i);
        let frame = Frame::new(x[start..start + grid.frame_len].to_vec(), start);
        let model = lp_autocorrelation(&frame, GCI_LP_ORDER)?;
        let center = start + half;
        let lo = if i == 0 { 0 } else { center - grid.hop / 2 };
        let hi = if i + 1 == n_frames {
            x.len()
        } else {
            center + grid.hop - grid.hop / 2
        };
        for n in lo..hi {
            let mut acc = x[n];
            for (k, &a) in model.coefficients.iter().enumerate() {
                if n > k {
                    acc += a * x[n - k - 1];
                }
            }
            e[n] = acc;
        }
    }
    Ok(e)
}

fn argmax_abs(e: &[f64], lo: usize, hi: usize) -> Option<usize> {
    (lo..hi).max_by(|&a, &b| e[a].abs().total_cmp(&e[b].abs()).then(b.cmp(&a)))
}

/// One residual-magnitude peak per pitch period inside each voiced run,
/// searched within +-20% of the local period from the previous instant.
pub fn detect_gci(signal: &Signal, pitch: &PitchTrack) -> Result<GciSequence> {
    let runs = pitch.voiced_runs();
    if runs.is_empty() {
        return Ok(GciSequence::default());
    }
    let residual = lp_residual(signal, pitch.grid)?;
    let n = signal.len();
    let fs = pitch.sample_rate as f64;
    let period_at = |s: usize, first: usize, last: usize| -> f64 {
        let f = pitch.frame_at(s).clamp(first, last);
        fs / pitch.f0[f]
    };

    let min_gap = lag_range(pitch.sample_rate).0;
    let mut instants: Vec<usize> = Vec::new();
    for (first, last) in runs {
        // frames overlap, so a run may begin inside the span of the previous one
        let lo = match instants.last() {
            Some(&prev) => pitch.grid.start(first).max(prev + min_gap),
            None => pitch.grid.start(first),
        };
        let hi = (pitch.grid.start(last) + pitch.grid.frame_len).min(n);
        if lo >= hi {
            continue;
        }
        let t0 = period_at(lo, first, last);
        let Some(mut g) = argmax_abs(&residual, lo, (lo + t0.round() as usize).min(hi)) else {
            continue;
        };
        instants.push(g);
        loop {
            let t = period_at(g, first, last);
            let expected = g as f64 + t;
            let a = (expected - SEARCH_TOLERANCE * t).ceil() as usize;
            let b = ((expected + SEARCH_TOLERANCE * t).floor() as usize + 1).min(hi);
            if a >= b || a <= g {
                break;
            }
            match argmax_abs(&residual, a, b) {
                Some(next) => {
                    instants.push(next);
                    g = next;
                }
                None => break,
            }
        }
    }
    Ok(GciSequence { instants })
}
