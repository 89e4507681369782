//! RASTA-PLP cepstra and context stacking for the neural tracker.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::allpole::levinson_durbin;
use crate::dsp::{hamming, power_spectrum, Frame};
use crate::error::{Error, Result};

pub const CEPSTRA: usize = 13;
pub const CONTEXT_RADIUS: usize = 5;
pub const CONTEXT_DIM: usize = CEPSTRA * (2 * CONTEXT_RADIUS + 1);

const DUMP_MAGIC: &[u8; 4] = b"FPLP";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub nfft: usize,
    pub bands: usize,
    pub order: usize,
    pub log_floor: f64,
    pub sample_rate: u32,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            nfft: 256,
            bands: 15,
            order: 12,
            log_floor: 1e-10,
            sample_rate: 8000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFrame {
    /// `c0..c_order`.
    pub cepstra: Vec<f64>,
}

pub type ContextVector = Vec<f64>;

fn hz_to_bark(f: f64) -> f64 {
    6.0 * (f / 600.0).asinh()
}

fn bark_to_hz(b: f64) -> f64 {
    600.0 * (b / 6.0).sinh()
}

/// Trapezoidal critical-band weights, `bands x (nfft/2 + 1)`, centres spaced
/// evenly in Bark from 0 to Nyquist.
pub fn bark_filterbank(cfg: &FeatureConfig) -> Vec<Vec<f64>> {
    let bins = cfg.nfft / 2 + 1;
    let fs = cfg.sample_rate as f64;
    let nyq_bark = hz_to_bark(fs / 2.0);
    let step = nyq_bark / (cfg.bands - 1) as f64;
    let bin_bark: Vec<f64> = (0..bins).map(|k| hz_to_bark(k as f64 * fs / cfg.nfft as f64)).collect();
    (0..cfg.bands)
        .map(|i| {
            let mid = i as f64 * step;
            bin_bark
                .iter()
                .map(|&b| {
                    let lo = b - mid - 0.5;
                    let hi = b - mid + 0.5;
                    10f64.powf(hi.min(-2.5 * lo).min(0.0))
                })
                .collect()
        })
        .collect()
}

fn equal_loudness(cfg: &FeatureConfig) -> Vec<f64> {
    let nyq_bark = hz_to_bark(cfg.sample_rate as f64 / 2.0);
    (0..cfg.bands)
        .map(|i| {
            let f = bark_to_hz(i as f64 * nyq_bark / (cfg.bands - 1) as f64);
            let fsq = f * f;
            (fsq / (fsq + 1.6e5)).powi(2) * (fsq + 1.44e6) / (fsq + 9.61e6)
        })
        .collect()
}

/// Per-band RASTA band-pass `0.1 (2 + z^-1 - z^-3 - 2 z^-4) / (1 - 0.98 z^-1)`,
/// realised causally.
#[derive(Debug, Clone)]
pub struct RastaFilter {
    history: Vec<[f64; 4]>,
    prev_out: Vec<f64>,
}

impl RastaFilter {
    /// State as if `first` had been seen four times with zero output.
    pub fn primed(first: &[f64]) -> Self {
        Self {
            history: first.iter().map(|&x| [x; 4]).collect(),
            prev_out: vec![0.0; first.len()],
        }
    }

    pub fn zeroed(bands: usize) -> Self {
        Self {
            history: vec![[0.0; 4]; bands],
            prev_out: vec![0.0; bands],
        }
    }

    pub fn process(&mut self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(b, &v)| {
                let h = &mut self.history[b];
                let y = 0.1 * (2.0 * (v - h[3]) + (h[0] - h[2])) + 0.98 * self.prev_out[b];
                *h = [v, h[0], h[1], h[2]];
                self.prev_out[b] = y;
                y
            })
            .collect()
    }
}

/// Log critical-band energies of one frame.
pub fn log_bands(frame: &Frame, fb: &[Vec<f64>], cfg: &FeatureConfig) -> Result<Vec<f64>> {
    let windowed: Vec<f64> = frame
        .samples
        .iter()
        .zip(hamming(frame.len()))
        .map(|(s, w)| s * w)
        .collect();
    let spec = power_spectrum(&windowed, cfg.nfft)?;
    Ok(fb
        .iter()
        .map(|w| {
            w.iter()
                .zip(&spec)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                .max(cfg.log_floor)
                .ln()
        })
        .collect())
}

/// Auditory spectrum to `order + 1` cepstra through an all-pole fit.
fn plp_cepstra(aud: &[f64], cfg: &FeatureConfig) -> Vec<f64> {
    let m = aud.len();
    let period = 2 * (m - 1);
    let r: Vec<f64> = (0..=cfg.order)
        .map(|k| {
            let mut acc = aud[0] + if k % 2 == 0 { aud[m - 1] } else { -aud[m - 1] };
            for (j, &v) in aud.iter().enumerate().take(m - 1).skip(1) {
                acc += 2.0 * v * (std::f64::consts::PI * (k * j) as f64 / (m - 1) as f64).cos();
            }
            acc / period as f64
        })
        .collect();
    let (a, err) = match levinson_durbin(&r, cfg.order) {
        Some(sol) => (sol.coefficients, sol.error.max(f64::MIN_POSITIVE)),
        None => (vec![0.0; cfg.order], f64::MIN_POSITIVE),
    };
    let mut c = vec![0.0; cfg.order + 1];
    c[0] = err.ln();
    for n in 1..=cfg.order {
        let mut acc = -a[n - 1];
        for k in 1..n {
            acc -= (k as f64 / n as f64) * c[k] * a[n - k - 1];
        }
        c[n] = acc;
    }
    c
}

/// RASTA-filtered log band trajectories, one row per frame.
pub fn rasta_bands(frames: &[Frame], cfg: &FeatureConfig) -> Result<Vec<Vec<f64>>> {
    validate(cfg)?;
    let fb = bark_filterbank(cfg);
    let logs: Vec<Vec<f64>> = frames.iter().map(|f| log_bands(f, &fb, cfg)).collect::<Result<_>>()?;
    let Some(first) = logs.first() else {
        return Ok(Vec::new());
    };
    let mut filt = RastaFilter::primed(first);
    Ok(logs.iter().map(|x| filt.process(x)).collect())
}

pub fn rasta_plp(frames: &[Frame], cfg: &FeatureConfig) -> Result<Vec<FeatureFrame>> {
    let eql = equal_loudness(cfg);
    Ok(rasta_bands(frames, cfg)?
        .into_iter()
        .map(|bands| {
            let mut aud: Vec<f64> = bands
                .iter()
                .zip(&eql)
                .map(|(&b, &e)| (e * b.exp()).powf(0.33))
                .collect();
            // edge bands lie outside the usable range; copy their neighbours
            let n = aud.len();
            aud[0] = aud[1];
            aud[n - 1] = aud[n - 2];
            FeatureFrame {
                cepstra: plp_cepstra(&aud, cfg),
            }
        })
        .collect())
}

fn validate(cfg: &FeatureConfig) -> Result<()> {
    if cfg.bands < 4 || cfg.order + 1 > 2 * (cfg.bands - 1) {
        return Err(Error::InvalidArgument(format!(
            "need at least 4 bands and order < 2*(bands-1), got {} bands, order {}",
            cfg.bands, cfg.order
        )));
    }
    if !cfg.nfft.is_power_of_two() || !(cfg.log_floor > 0.0) {
        return Err(Error::InvalidArgument(
            "nfft must be a power of two and log floor positive".into(),
        ));
    }
    Ok(())
}

/// Concatenates each frame with its `radius` neighbours on both sides,
/// replicating edge frames.
pub fn stack_context(features: &[FeatureFrame], radius: usize) -> Vec<ContextVector> {
    let n = features.len() as isize;
    (0..n)
        .map(|i| {
            (i - radius as isize..=i + radius as isize)
                .flat_map(|j| features[j.clamp(0, n - 1) as usize].cepstra.iter().copied())
                .collect()
        })
        .collect()
}

/// Binary dump: `FPLP`, u32 rows, u32 dim, then row-major little-endian f32.
pub fn write_feature_dump<W: Write>(mut out: W, rows: &[Vec<f64>]) -> Result<()> {
    let dim = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidArgument("feature rows differ in length".into()));
    }
    out.write_all(DUMP_MAGIC)?;
    out.write_all(&(rows.len() as u32).to_le_bytes())?;
    out.write_all(&(dim as u32).to_le_bytes())?;
    for r in rows {
        for &v in r {
            out.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_feature_dump<R: Read>(mut input: R) -> Result<Vec<Vec<f64>>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() < 12 || &bytes[..4] != DUMP_MAGIC {
        return Err(Error::Format("not a feature dump (bad magic)".into()));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() != rows * dim * 4 {
        return Err(Error::Format(format!(
            "feature dump truncated: expected {} bytes of data, found {}",
            rows * dim * 4,
            body.len()
        )));
    }
    if dim == 0 {
        return Ok(vec![Vec::new(); rows]);
    }
    Ok(body
        .chunks_exact(4 * dim)
        .map(|row| {
            row.chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{frame_signal, Signal};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn frames(x: Vec<f64>) -> Vec<Frame> {
        frame_signal(&Signal::new(x, 8000).unwrap(), 25.0, 10.0).unwrap()
    }

    #[test]
    fn filterbank_shape() {
        let cfg = FeatureConfig::default();
        let fb = bark_filterbank(&cfg);
        assert_eq!(fb.len(), 15);
        assert!(fb.iter().all(|w| w.len() == 129));
        for w in &fb {
            let peak = w.iter().cloned().fold(0.0, f64::max);
            assert!((peak - 1.0).abs() < 0.2, "peak {peak}");
        }
        // every interior bin is covered by some band
        for k in 1..128 {
            assert!(fb.iter().map(|w| w[k]).fold(0.0, f64::max) > 0.3, "bin {k}");
        }
    }

    #[test]
    fn constant_spectrum_bands_vanish() {
        let period: Vec<f64> = (0..80)
            .map(|n| (n as f64 * 0.3).sin() + (n as f64 * 1.1).cos())
            .collect();
        let x: Vec<f64> = period.iter().cycle().take(80 * 260).copied().collect();
        let bands = rasta_bands(&frames(x), &FeatureConfig::default()).unwrap();
        assert!(bands.len() > 200);
        for b in &bands[200..] {
            assert!(b.iter().all(|v| v.abs() < 1e-3));
        }
    }

    #[test]
    fn step_response_decays_geometrically() {
        let mut f = RastaFilter::zeroed(1);
        let out: Vec<f64> = (0..400).map(|_| f.process(&[1.0])[0]).collect();
        for t in 5..399 {
            assert!((out[t + 1] / out[t] - 0.98).abs() < 1e-12);
        }
        assert!(out[399].abs() < 1e-3);
    }

    #[test]
    fn silence_gives_identical_frames() {
        let feats = rasta_plp(&frames(vec![0.0; 4000]), &FeatureConfig::default()).unwrap();
        assert!(feats.len() > 10);
        for f in &feats[4..] {
            assert_eq!(f, &feats[4]);
            assert!(f.cepstra.iter().all(|v| v.is_finite()));
            assert_eq!(f.cepstra.len(), CEPSTRA);
        }
    }

    #[test]
    fn cepstra_match_direct_log_spectrum_expansion() {
        // c_n is the n-th cosine coefficient of ln(err / |A|^2)
        let cfg = FeatureConfig::default();
        let aud: Vec<f64> = (0..15).map(|i| 1.0 + 0.5 * (i as f64 * 0.7).sin()).collect();
        let c = plp_cepstra(&aud, &cfg);
        let m = aud.len();
        let period = 2 * (m - 1);
        let r: Vec<f64> = (0..=12)
            .map(|k| {
                (0..period)
                    .map(|j| {
                        let v = if j < m { aud[j] } else { aud[period - j] };
                        v * (2.0 * std::f64::consts::PI * (k * j) as f64 / period as f64).cos()
                    })
                    .sum::<f64>()
                    / period as f64
            })
            .collect();
        let sol = levinson_durbin(&r, 12).unwrap();
        let n = 4096;
        let logspec: Vec<f64> = (0..n)
            .map(|j| {
                let w = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
                let mut re = 1.0;
                let mut im = 0.0;
                for (k, a) in sol.coefficients.iter().enumerate() {
                    re += a * (w * (k + 1) as f64).cos();
                    im -= a * (w * (k + 1) as f64).sin();
                }
                sol.error.ln() - (re * re + im * im).ln()
            })
            .collect();
        for q in 0..=12 {
            let coef = logspec
                .iter()
                .enumerate()
                .map(|(j, v)| v * (2.0 * std::f64::consts::PI * (q * j) as f64 / n as f64).cos())
                .sum::<f64>()
                / n as f64;
            assert!((c[q] - coef).abs() < 1e-8, "q={q} {} vs {}", c[q], coef);
        }
    }

    #[test]
    fn context_stacking() {
        let feats: Vec<FeatureFrame> = (0..20)
            .map(|i| FeatureFrame {
                cepstra: vec![i as f64; CEPSTRA],
            })
            .collect();
        let ctx = stack_context(&feats, CONTEXT_RADIUS);
        assert_eq!(ctx.len(), 20);
        assert!(ctx.iter().all(|v| v.len() == CONTEXT_DIM));
        assert_eq!(CONTEXT_DIM, 143);
        let firsts: Vec<f64> = ctx[10].chunks(CEPSTRA).map(|c| c[0]).collect();
        assert_eq!(firsts, (5..=15).map(|v| v as f64).collect::<Vec<_>>());
        let firsts: Vec<f64> = ctx[1].chunks(CEPSTRA).map(|c| c[0]).collect();
        assert_eq!(firsts, vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let one = stack_context(&feats[3..4], CONTEXT_RADIUS);
        assert_eq!(one, vec![vec![3.0; CONTEXT_DIM]]);
    }

    #[test]
    fn dump_round_trip_and_errors() {
        let rows = vec![vec![1.5, -2.0, 3.25], vec![0.0, 1e-3, 7.0]];
        let mut buf = Vec::new();
        write_feature_dump(&mut buf, &rows).unwrap();
        assert_eq!(&buf[..4], b"FPLP");
        assert_eq!(buf.len(), 12 + 6 * 4);
        let back = read_feature_dump(&buf[..]).unwrap();
        for (a, b) in back.iter().flatten().zip(rows.iter().flatten()) {
            assert_eq!(*a, *b as f32 as f64);
        }
        assert!(read_feature_dump(&buf[..buf.len() - 1]).is_err());
        assert!(read_feature_dump(&b"XXXX\0\0\0\0\0\0\0\0"[..]).is_err());
    }

    #[test]
    fn deterministic() {
        let f = frames(noise(4000, 3));
        let a = rasta_plp(&f, &FeatureConfig::default()).unwrap();
        let b = rasta_plp(&f, &FeatureConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn gain_invariance(gain in 0.1f64..10.0, seed in 0u64..1000) {
            let x = noise(3000, seed);
            let cfg = FeatureConfig::default();
            let a = rasta_bands(&frames(x.clone()), &cfg).unwrap();
            let b = rasta_bands(&frames(x.iter().map(|v| v * gain).collect()), &cfg).unwrap();
            for (ra, rb) in a.iter().zip(&b).skip(4) {
                for (p, q) in ra.iter().zip(rb) {
                    prop_assert!((p - q).abs() < 1e-6, "{} vs {}", p, q);
                }
            }
        }
    }
}
