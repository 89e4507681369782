//! All-pole spectra and formant candidates.
//!
//! Peaks are the negative-going zero crossings of the dB spectrum convolved
//! with a derivative-of-Gaussian kernel. Each crossing is moved to the
//! nearest local maximum of the raw dB spectrum and refined to sub-bin
//! precision by a parabola.

use std::io::Write;

use crate::allpole::AllPoleModel;
use crate::dsp::{dft, DB_FLOOR};
use crate::error::{Error, Result};

pub const DEFAULT_NFFT: usize = 1024;
pub const DEFAULT_GAUSS_WIDTH_HZ: f64 = 100.0;
pub const DEFAULT_CANDIDATES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakCandidate {
    pub frequency: f64,
    pub level_db: f64,
}

/// `20 log10(gain / |A(e^jw)|)` on `nfft/2 + 1` bins.
pub fn allpole_spectrum_db(model: &AllPoleModel, nfft: usize) -> Result<Vec<f64>> {
    if nfft < 256 || !nfft.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "nfft must be a power of two >= 256, got {nfft}"
        )));
    }
    let mut poly = Vec::with_capacity(model.order + 1);
    poly.push(1.0);
    poly.extend_from_slice(&model.coefficients);
    if poly.len() > nfft {
        return Err(Error::InvalidArgument("model order exceeds nfft".into()));
    }
    let gain_db = 20.0 * model.gain.max(DB_FLOOR).log10();
    Ok(dft(&poly, nfft)?
        .into_iter()
        .take(nfft / 2 + 1)
        .map(|c| gain_db - 20.0 * c.norm().max(DB_FLOOR).log10())
        .collect())
}

/// Derivative-of-Gaussian kernel `g'(k)` for `k in [-h, h]`, `h = ceil(3 sigma)`.
fn gaussian_derivative(sigma_bins: f64) -> Vec<f64> {
    let half = (3.0 * sigma_bins).ceil() as isize;
    (-half..=half)
        .map(|k| {
            let k = k as f64;
            -k / (sigma_bins * sigma_bins) * (-k * k / (2.0 * sigma_bins * sigma_bins)).exp()
        })
        .collect()
}

fn reflect(i: isize, len: usize) -> usize {
    let last = len as isize - 1;
    if last == 0 {
        return 0;
    }
    let period = 2 * last;
    let mut j = i.rem_euclid(period);
    if j > last {
        j = period - j;
    }
    j as usize
}

/// Smoothed derivative of the spectrum (reflected boundaries).
pub fn smoothed_slope(spectrum_db: &[f64], sample_rate: f64, gauss_width_hz: f64) -> Vec<f64> {
    let len = spectrum_db.len();
    let nfft = 2 * (len - 1);
    let sigma = gauss_width_hz * nfft as f64 / sample_rate;
    let kernel = gaussian_derivative(sigma);
    let half = (kernel.len() / 2) as isize;
    (0..len as isize)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .map(|(j, &g)| {
                    let k = j as isize - half;
                    g * spectrum_db[reflect(i - k, len)]
                })
                .sum()
        })
        .collect()
}

/// Spectral peaks, ascending in frequency.
pub fn pick_peaks(spectrum_db: &[f64], sample_rate: f64, gauss_width_hz: f64) -> Result<Vec<PeakCandidate>> {
    if !(gauss_width_hz > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gaussian width must be positive, got {gauss_width_hz}"
        )));
    }
    let len = spectrum_db.len();
    if len < 3 {
        return Ok(Vec::new());
    }
    let bin_hz = sample_rate / (2 * (len - 1)) as f64;
    let slope = smoothed_slope(spectrum_db, sample_rate, gauss_width_hz);
    let reach = (3.0 * gauss_width_hz / bin_hz).ceil() as usize;
    let mut peaks: Vec<PeakCandidate> = Vec::new();

    let mut i = 0;
    while i + 1 < len {
        if slope[i] > 0.0 {
            // skip an exact-zero plateau to find where the sign turns
            let mut j = i + 1;
            while j < len && slope[j] == 0.0 {
                j += 1;
            }
            if j < len && slope[j] < 0.0 {
                // the crossing lies in [i, j]; climb the raw spectrum from the
                // larger bin inside it, since wide smoothing pulls the crossing
                // toward a stronger neighbour
                let mut top = (i..=j)
                    .max_by(|&a, &b| spectrum_db[a].total_cmp(&spectrum_db[b]).then(b.cmp(&a)))
                    .unwrap();
                let start = top;
                while top + 1 < len && spectrum_db[top + 1] > spectrum_db[top] && top + 1 - start <= reach {
                    top += 1;
                }
                while top > 0 && spectrum_db[top - 1] > spectrum_db[top] && start - (top - 1) <= reach && top <= start {
                    top -= 1;
                }
                let (pos, level) = refine(spectrum_db, top);
                let frequency = pos * bin_hz;
                if frequency > 0.0 && frequency < sample_rate / 2.0 {
                    peaks.push(PeakCandidate {
                        frequency,
                        level_db: level,
                    });
                }
            }
            i = j;
        } else {
            i += 1;
        }
    }
    peaks.dedup_by(|b, a| b.frequency == a.frequency);
    peaks.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
    peaks.dedup_by(|b, a| b.frequency == a.frequency);
    Ok(peaks)
}

/// Parabolic vertex through bins `k-1, k, k+1`.
fn refine(s: &[f64], k: usize) -> (f64, f64) {
    if k == 0 || k + 1 >= s.len() {
        return (k as f64, s[k]);
    }
    let (l, c, r) = (s[k - 1], s[k], s[k + 1]);
    let denom = l - 2.0 * c + r;
    let d = if denom < 0.0 {
        (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let level = c + 0.5 * (r - l) * d + 0.5 * denom * d * d;
    (k as f64 + d, level)
}

/// The `k` highest peaks, re-sorted by frequency.
pub fn select_candidates(peaks: &[PeakCandidate], k: usize) -> Vec<PeakCandidate> {
    let mut by_level = peaks.to_vec();
    by_level.sort_by(|a, b| {
        b.level_db
            .total_cmp(&a.level_db)
            .then(a.frequency.total_cmp(&b.frequency))
    });
    by_level.truncate(k.max(1));
    by_level.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
    by_level
}

/// Formant candidates for every frame of an utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateLattice {
    pub frames: Vec<Vec<PeakCandidate>>,
    /// Seconds between frames.
    pub frame_period: f64,
    pub max_candidates: usize,
}

impl CandidateLattice {
    pub fn new(frames: Vec<Vec<PeakCandidate>>, frame_period: f64, max_candidates: usize) -> Self {
        Self {
            frames,
            frame_period,
            max_candidates,
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// `frame_index, f1..fK, level1..levelK`; missing candidates are empty cells.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let k = self.max_candidates;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["frame_index".to_string()];
        header.extend((1..=k).map(|i| format!("f{i}")));
        header.extend((1..=k).map(|i| format!("level{i}")));
        w.write_record(&header)?;
        for (idx, cands) in self.frames.iter().enumerate() {
            let mut row = vec![idx.to_string()];
            row.extend((0..k).map(|i| cands.get(i).map_or(String::new(), |c| format!("{:.3}", c.frequency))));
            row.extend((0..k).map(|i| cands.get(i).map_or(String::new(), |c| format!("{:.3}", c.level_db))));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
