//! 16-bit PCM mono WAV input/output.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::dsp::{resample, Signal, ANALYSIS_RATE};
use crate::error::{Error, Result};

/// Reads a 16-bit PCM mono file without resampling.
pub fn read_wav_raw(path: impl AsRef<Path>) -> Result<Signal> {
    let reader = WavReader::open(path.as_ref())?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::Wav(format!(
            "expected mono input, found {} channels",
            spec.channels
        )));
    }
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::Wav(format!(
            "expected 16-bit PCM, found {:?} {}-bit",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    let scale = 1.0 / (1u32 << (spec.bits_per_sample - 1)) as f64;
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 * scale))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Signal::new(samples, spec.sample_rate)
}

/// Reads a WAV file and brings it to the 8 kHz analysis rate.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Signal> {
    let raw = read_wav_raw(path)?;
    to_analysis_rate(raw)
}

pub fn to_analysis_rate(signal: Signal) -> Result<Signal> {
    if signal.sample_rate() == ANALYSIS_RATE {
        return Ok(signal);
    }
    let rate = signal.sample_rate();
    Signal::new(resample(signal.samples(), rate, ANALYSIS_RATE), ANALYSIS_RATE)
}

/// Writes 16-bit PCM mono; samples are clipped to [-1, 1].
pub fn write_wav(path: impl AsRef<Path>, signal: &Signal) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path.as_ref(), spec)?;
    for &s in signal.samples() {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer.write_sample(v)?;
    }
    writer.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_quantizes_to_16_bit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let x: Vec<f64> = (0..100).map(|n| (n as f64 / 50.0) - 1.0).collect();
        write_wav(&path, &Signal::new(x.clone(), 8000).unwrap()).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.sample_rate(), 8000);
        assert_eq!(back.len(), 100);
        for (a, b) in back.samples().iter().zip(&x) {
            assert!((a - b).abs() < 1.0 / 16384.0);
        }
    }

    #[test]
    fn stereo_is_rejected_with_channel_count() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("st.wav");
        let spec = WavSpec {
            channels: 2,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&path, spec).unwrap();
        for _ in 0..20 {
            w.write_sample(0i16).unwrap();
        }
        w.finalize().unwrap();
        let err = read_wav(&path).unwrap_err().to_string();
        assert!(err.contains("2 channels"), "{err}");
    }

    #[test]
    fn other_rates_are_resampled() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.wav");
        write_wav(&path, &Signal::new(vec![0.0; 1600], 16000).unwrap()).unwrap();
        let s = read_wav(&path).unwrap();
        assert_eq!(s.sample_rate(), 8000);
        assert_eq!(s.len(), 800);
    }

    #[test]
    fn garbage_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.wav");
        std::fs::write(&path, b"not a wav file at all").unwrap();
        assert!(read_wav(&path).is_err());
    }
}
