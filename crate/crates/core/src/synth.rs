//! Source-filter vowel synthesis with known formants, used as an oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::{FrameGrid, Signal, ANALYSIS_RATE};
use crate::error::{Error, Result};
use crate::eval::GroundTruth;
use crate::poly::{allpole_filter, cascade};

const CROSSFADE_S: f64 = 0.010;
const PEAK_LEVEL: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration_s: f64,
    /// 0 selects white-noise excitation.
    pub f0_hz: f64,
    /// `(frequency, bandwidth)` pairs in Hz.
    pub formants: Vec<(f64, f64)>,
    /// Excitation gain; 0 renders silence, whose frames are masked out of
    /// the reference.
    #[serde(default = "unit_level")]
    pub level: f64,
}

fn unit_level() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    #[serde(default = "default_rate")]
    pub sample_rate: u32,
    #[serde(default)]
    pub seed: u64,
    pub segments: Vec<Segment>,
}

fn default_rate() -> u32 {
    ANALYSIS_RATE
}

impl SynthSpec {
    pub fn new(segments: Vec<Segment>) -> Self {
        Self {
            sample_rate: ANALYSIS_RATE,
            seed: 0,
            segments,
        }
    }

    /// Accepts either a bare list of segments or an object with `segments`.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Spec(format!("invalid JSON: {e}")))?;
        let spec = if value.is_array() {
            let segments: Vec<Segment> = serde_json::from_value(value).map_err(|e| Error::Spec(e.to_string()))?;
            Self::new(segments)
        } else {
            serde_json::from_value(value).map_err(|e| Error::Spec(e.to_string()))?
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let nyquist = self.sample_rate as f64 / 2.0;
        if self.sample_rate == 0 {
            return Err(Error::Spec("sample rate must be positive".into()));
        }
        if self.segments.is_empty() {
            return Err(Error::Spec("no segments".into()));
        }
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.duration_s > 0.0 && s.duration_s.is_finite()) {
                return Err(Error::Spec(format!("segment {i}: duration must be positive")));
            }
            if !(s.level >= 0.0 && s.level.is_finite()) {
                return Err(Error::Spec(format!(
                    "segment {i}: level must be non-negative, got {}",
                    s.level
                )));
            }
            if !(s.f0_hz >= 0.0 && s.f0_hz < nyquist) {
                return Err(Error::Spec(format!("segment {i}: f0 {} Hz out of range", s.f0_hz)));
            }
            if s.formants.len() < 3 {
                return Err(Error::Spec(format!("segment {i}: need at least three formants")));
            }
            for &(f, bw) in &s.formants {
                if !(f > 0.0 && f < nyquist) {
                    return Err(Error::Spec(format!(
                        "segment {i}: formant {f} Hz must lie in (0, {nyquist}) Hz"
                    )));
                }
                if !(bw > 0.0 && bw.is_finite()) {
                    return Err(Error::Spec(format!(
                        "segment {i}: bandwidth must be positive, got {bw}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn total_samples(&self) -> usize {
        self.boundaries().last().copied().unwrap_or(0)
    }

    /// Cumulative segment end positions in samples.
    fn boundaries(&self) -> Vec<usize> {
        let fs = self.sample_rate as f64;
        let mut t = 0.0;
        self.segments
            .iter()
            .map(|s| {
                t += s.duration_s;
                (t * fs).round() as usize
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub signal: Signal,
    /// Reference formants per analysis frame, taken at the frame centre.
    pub ground_truth: GroundTruth,
    /// Glottal pulse positions of voiced segments.
    pub pulses: Vec<usize>,
}

/// Excitation over the whole utterance: unit impulses at the running f0 in
/// voiced segments, uniform noise at matched power otherwise.
fn excitation(spec: &SynthSpec, ends: &[usize]) -> (Vec<f64>, Vec<usize>) {
    let fs = spec.sample_rate as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = vec![0.0; spec.total_samples()];
    let mut pulses = Vec::new();
    let mut next: Option<f64> = None;
    let noise_amp = (3.0 * 100.0 / fs).sqrt();
    let mut start = 0;
    for (seg, &end) in spec.segments.iter().zip(ends) {
        for (n, x) in out.iter_mut().enumerate().take(end).skip(start) {
            if seg.level == 0.0 {
                next = None;
            } else if seg.f0_hz > 0.0 {
                let due = next.get_or_insert(n as f64);
                if n as f64 >= *due - 1e-9 {
                    *x = seg.level;
                    pulses.push(n);
                    *due += fs / seg.f0_hz;
                }
            } else {
                *x = seg.level * noise_amp * rng.gen_range(-1.0..1.0);
                next = None;
            }
        }
        start = end;
    }
    (out, pulses)
}

pub fn synthesize(spec: &SynthSpec) -> Result<Synthesis> {
    spec.validate()?;
    let fs = spec.sample_rate as f64;
    let ends = spec.boundaries();
    let total = spec.total_samples();
    let (source, pulses) = excitation(spec, &ends);
    let half_fade = ((CROSSFADE_S * fs) / 2.0).round() as usize;

    let mut out = vec![0.0f64; total];
    let mut start = 0usize;
    for (k, (seg, &end)) in spec.segments.iter().zip(&ends).enumerate() {
        let first = k == 0;
        let last = k + 1 == spec.segments.len();
        let lo = if first { 0 } else { start.saturating_sub(half_fade) };
        let hi = if last { total } else { (end + half_fade).min(total) };
        let a = cascade(&seg.formants, fs);
        let y = allpole_filter(&a, &source[lo..hi]);
        for (i, v) in y.iter().enumerate() {
            let n = lo + i;
            let mut w = 1.0;
            if !first && n < start + half_fade {
                w *= ((n + half_fade - start) as f64 + 0.5) / (2 * half_fade) as f64;
            }
            if !last && n + half_fade >= end {
                w *= ((end + half_fade - n) as f64 - 0.5) / (2 * half_fade) as f64;
            }
            out[n] += w.clamp(0.0, 1.0) * v;
        }
        start = end;
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        out.iter_mut().for_each(|v| *v *= PEAK_LEVEL / peak);
    }

    let grid = FrameGrid::from_ms(25.0, 10.0, spec.sample_rate)?;
    let segs: Vec<&Segment> = (0..grid.frame_count(total))
        .map(|i| {
            let c = grid.center(i);
            &spec.segments[ends.iter().position(|&e| c < e).unwrap_or(ends.len() - 1)]
        })
        .collect();
    let mut ground_truth = GroundTruth::new(
        segs.iter()
            .map(|s| [s.formants[0].0, s.formants[1].0, s.formants[2].0])
            .collect(),
    );
    ground_truth.start_time = grid.center(0) as f64 / fs;
    if spec.segments.iter().any(|s| s.level == 0.0) {
        ground_truth.mask = Some(segs.iter().map(|s| s.level > 0.0).collect());
    }
    Ok(Synthesis {
        signal: Signal::new(out, spec.sample_rate)?,
        ground_truth,
        pulses,
    })
}

/// A single steady vowel.
pub fn vowel(formants: &[(f64, f64)], f0_hz: f64, duration_s: f64) -> SynthSpec {
    SynthSpec::new(vec![Segment {
        duration_s,
        f0_hz,
        formants: formants.to_vec(),
        level: 1.0,
    }])
}

/// `count` multi-vowel utterances with random targets: F1 in 300..850 Hz,
/// F2 and F3 at least 300 Hz above their predecessor, a fixed F4 near
/// 3600 Hz, and f0 drifting between 90 and 260 Hz. Each utterance starts and
/// ends with silence carrying the neighbouring vowel's formants.
pub fn random_corpus(count: usize, seed: u64) -> Vec<SynthSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|u| {
            let n_seg = rng.gen_range(3..=4);
            let base_f0: f64 = rng.gen_range(90.0..220.0);
            let mut segments: Vec<Segment> = (0..n_seg)
                .map(|_| {
                    let f1: f64 = rng.gen_range(300.0..850.0);
                    let f2: f64 = rng.gen_range((f1 + 300.0).max(850.0)..2300.0);
                    let f3: f64 = rng.gen_range((f2 + 300.0).max(2200.0)..3200.0);
                    let bw = |f: f64| 40.0 + 0.04 * f;
                    Segment {
                        duration_s: rng.gen_range(0.2..0.4),
                        f0_hz: (base_f0 * rng.gen_range(0.85..1.2)).min(260.0),
                        formants: vec![(f1, bw(f1)), (f2, bw(f2)), (f3, bw(f3)), (3600.0, 200.0)],
                        level: 1.0,
                    }
                })
                .collect();
            let silence = |seg: &Segment, duration_s: f64| Segment {
                duration_s,
                f0_hz: 0.0,
                formants: seg.formants.clone(),
                level: 0.0,
            };
            let lead = silence(&segments[0], rng.gen_range(0.15..0.3));
            let trail = silence(&segments[n_seg - 1], rng.gen_range(0.1..0.2));
            segments.insert(0, lead);
            segments.push(trail);
            SynthSpec {
                sample_rate: ANALYSIS_RATE,
                seed: seed.wrapping_mul(1000).wrapping_add(u as u64),
                segments,
            }
        })
        .collect()
}
