use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsp::Signal;
use crate::error::{Error, Result};

const CLIP_WARN_FRACTION: f64 = 0.001;

#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    pub signal: Signal,
    /// Noise gain applied before adding.
    pub noise_scale: f64,
    pub clipped_fraction: f64,
}

/// Zero-mean uniform noise in [-1, 1).
pub fn white_noise(len: usize, sample_rate: u32, seed: u64) -> Result<Signal> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Signal::new((0..len).map(|_| rng.gen_range(-1.0..1.0)).collect(), sample_rate)
}

fn mean_square(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64
}

/// Adds `noise` at `snr_db` relative to the whole-utterance speech power.
/// The noise is read from a seeded offset and wraps around; an infinite SNR
/// returns the input unchanged.
pub fn mix_noise(speech: &Signal, noise: &Signal, snr_db: f64, seed: u64) -> Result<Mixture> {
    if snr_db == f64::INFINITY {
        return Ok(Mixture {
            signal: speech.clone(),
            noise_scale: 0.0,
            clipped_fraction: 0.0,
        });
    }
    if !snr_db.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "SNR must be finite or +inf, got {snr_db}"
        )));
    }
    if noise.sample_rate() != speech.sample_rate() {
        return Err(Error::InvalidArgument(format!(
            "noise rate {} differs from speech rate {}",
            noise.sample_rate(),
            speech.sample_rate()
        )));
    }
    let p_speech = mean_square(speech.samples());
    if !(p_speech > 0.0) {
        return Err(Error::InvalidArgument("speech is silent; SNR undefined".into()));
    }
    let n = noise.samples();
    if n.is_empty() {
        return Err(Error::InvalidArgument("noise signal is empty".into()));
    }
    let offset = ChaCha8Rng::seed_from_u64(seed).gen_range(0..n.len());
    let segment: Vec<f64> = (0..speech.len()).map(|i| n[(offset + i) % n.len()]).collect();
    let p_noise = mean_square(&segment);
    if !(p_noise > 0.0) {
        return Err(Error::InvalidArgument("noise is silent".into()));
    }
    let scale = (p_speech / (p_noise * 10f64.powf(snr_db / 10.0))).sqrt();
    let mut clipped = 0usize;
    let mixed: Vec<f64> = speech
        .samples()
        .iter()
        .zip(&segment)
        .map(|(s, v)| {
            let y = s + scale * v;
            if y.abs() > 1.0 {
                clipped += 1;
            }
            y.clamp(-1.0, 1.0)
        })
        .collect();
    let clipped_fraction = clipped as f64 / speech.len().max(1) as f64;
    if clipped_fraction > CLIP_WARN_FRACTION {
        log::warn!("{:.2}% of mixed samples clipped", 100.0 * clipped_fraction);
    }
    Ok(Mixture {
        signal: Signal::new(mixed, speech.sample_rate())?,
        noise_scale: scale,
        clipped_fraction,
    })
}

/// `10 log10(P_speech / P_(mixed - speech))`.
pub fn measured_snr_db(speech: &Signal, mixed: &Signal) -> f64 {
    let residual: Vec<f64> = mixed
        .samples()
        .iter()
        .zip(speech.samples())
        .map(|(m, s)| m - s)
        .collect();
    10.0 * (mean_square(speech.samples()) / mean_square(&residual)).log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(len: usize, amp: f64) -> Signal {
        Signal::new((0..len).map(|n| amp * (n as f64 * 0.05).sin()).collect(), 8000).unwrap()
    }

    #[test]
    fn infinite_snr_is_passthrough() {
        let s = tone(1000, 0.3);
        let m = mix_noise(&s, &white_noise(10, 8000, 1).unwrap(), f64::INFINITY, 0).unwrap();
        assert_eq!(m.signal, s);
    }

    #[test]
    fn equal_power_zero_db_has_unit_scale() {
        let s = tone(1600, 0.3);
        // a phase-shifted copy over whole periods has the same power
        let n = Signal::new((0..1600).map(|k| 0.3 * (k as f64 * 0.05 + 1.0).sin()).collect(), 8000).unwrap();
        let ps = mean_square(s.samples());
        let pn = mean_square(n.samples());
        let m = mix_noise(&s, &n, 0.0, 5).unwrap();
        assert!((m.noise_scale - (ps / pn).sqrt()).abs() < 1e-9);
        let same = mix_noise(&s, &s, 0.0, 0).unwrap();
        assert!((same.noise_scale - 1.0).abs() < 1e-9);
    }

    #[test]
    fn requested_snr_is_met() {
        let s = tone(16000, 0.25);
        let noise = white_noise(5000, 8000, 9).unwrap();
        for snr in [0.0, 5.0, 10.0, 20.0] {
            let m = mix_noise(&s, &noise, snr, 3).unwrap();
            assert_eq!(m.clipped_fraction, 0.0);
            assert!((measured_snr_db(&s, &m.signal) - snr).abs() < 0.1);
        }
    }

    #[test]
    fn white_noise_is_zero_mean_uniform() {
        let w = white_noise(100_000, 8000, 4).unwrap();
        let mean = w.samples().iter().sum::<f64>() / w.len() as f64;
        assert!(mean.abs() < 0.01);
        assert!((mean_square(w.samples()) - 1.0 / 3.0).abs() < 0.01);
        assert!(w.samples().iter().all(|v| (-1.0..1.0).contains(v)));
    }

    #[test]
    fn errors_and_clipping() {
        let silent = Signal::new(vec![0.0; 100], 8000).unwrap();
        assert!(mix_noise(&silent, &white_noise(100, 8000, 0).unwrap(), 10.0, 0).is_err());
        let s = tone(1000, 0.99);
        let m = mix_noise(&s, &white_noise(1000, 8000, 0).unwrap(), -10.0, 0).unwrap();
        assert!(m.clipped_fraction > 0.001);
        assert!(m.signal.samples().iter().all(|v| v.abs() <= 1.0));
        assert!(mix_noise(&s, &white_noise(10, 16000, 0).unwrap(), 5.0, 0).is_err());
    }
}
