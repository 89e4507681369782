use std::io::{Read, Write};
use std::path::Path;

use super::metrics::FORMANTS;
use crate::error::{Error, Result};

pub const GT_PERIOD: f64 = 0.01;
const GRID_TOLERANCE: f64 = 1e-4;

/// Reference F1..F3 on a 10 ms grid with an optional inclusion mask.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub frames: Vec<[f64; FORMANTS]>,
    /// Time of the first row in seconds.
    pub start_time: f64,
    pub mask: Option<Vec<bool>>,
}

impl GroundTruth {
    pub fn new(frames: Vec<[f64; FORMANTS]>) -> Self {
        Self {
            frames,
            start_time: 0.0,
            mask: None,
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn includes(&self, i: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m.get(i).copied().unwrap_or(false))
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.frames.len() {
            return Err(Error::Format(format!(
                "mask has {} rows, ground truth has {}",
                mask.len(),
                self.frames.len()
            )));
        }
        self.mask = Some(mask);
        Ok(self)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time_s", "f1", "f2", "f3"])?;
        for (i, f) in self.frames.iter().enumerate() {
            w.write_record([
                format!("{:.4}", self.start_time + i as f64 * GT_PERIOD),
                format!("{:.3}", f[0]),
                format!("{:.3}", f[1]),
                format!("{:.3}", f[2]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn field(value: Option<&str>, row: usize, name: &str) -> Result<f64> {
    let raw = value.ok_or_else(|| Error::Format(format!("row {row}: missing column {name}")))?;
    raw.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Format(format!("row {row}: {name} is not a number ('{raw}')")))
}

/// Parses `time_s,f1,f2,f3` rows (header required).
pub fn parse_ground_truth<R: Read>(input: R) -> Result<GroundTruth> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = rdr.headers()?.clone();
    let expected = ["time_s", "f1", "f2", "f3"];
    if header.len() < 4
        || header
            .iter()
            .take(4)
            .zip(expected)
            .any(|(h, e)| !h.eq_ignore_ascii_case(e))
    {
        return Err(Error::Format(format!(
            "expected header time_s,f1,f2,f3, found {:?}",
            header
        )));
    }
    let mut times = Vec::new();
    let mut frames = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        times.push(field(rec.get(0), row, "time_s")?);
        let mut f = [0.0; FORMANTS];
        for (k, v) in f.iter_mut().enumerate() {
            *v = field(rec.get(k + 1), row, expected[k + 1])?;
            if *v <= 0.0 {
                return Err(Error::Format(format!(
                    "row {row}: {} must be positive, got {v}",
                    expected[k + 1]
                )));
            }
        }
        frames.push(f);
    }
    for (i, w) in times.windows(2).enumerate() {
        let step = w[1] - w[0];
        if (step - GT_PERIOD).abs() > GRID_TOLERANCE {
            return Err(Error::Format(format!(
                "rows {} and {} are {:.2} ms apart, expected 10 ms",
                i + 1,
                i + 2,
                step * 1000.0
            )));
        }
    }
    Ok(GroundTruth {
        frames,
        start_time: times.first().copied().unwrap_or(0.0),
        mask: None,
    })
}

pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<GroundTruth> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Format(format!("cannot open ground truth {}: {e}", path.display())))?;
    parse_ground_truth(file)
}

/// One 0/1 value per line; an optional first line `include` is skipped.
pub fn parse_mask<R: Read>(mut input: R) -> Result<Vec<bool>> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.eq_ignore_ascii_case("include")) {
            continue;
        }
        match line {
            "1" | "true" => out.push(true),
            "0" | "false" => out.push(false),
            other => {
                return Err(Error::Format(format!(
                    "mask line {}: expected 0 or 1, got '{other}'",
                    i + 1
                )))
            }
        }
    }
    Ok(out)
}

/// Converts a `.fb` resonance file (big-endian f32, 8 values per frame:
/// F1..F4 in kHz, then B1..B4) to ground truth in Hz.
pub fn convert_fb(bytes: &[u8], expected_frames: Option<usize>) -> Result<GroundTruth> {
    const FRAME_BYTES: usize = 8 * 4;
    if bytes.is_empty() || !bytes.len().is_multiple_of(FRAME_BYTES) {
        return Err(Error::Format(format!(
            "fb payload of {} bytes is not a whole number of 32-byte frames",
            bytes.len()
        )));
    }
    let n = bytes.len() / FRAME_BYTES;
    if let Some(want) = expected_frames {
        if want != n {
            return Err(Error::Format(format!("fb file has {n} frames, expected {want}")));
        }
    }
    let frames = bytes
        .chunks_exact(FRAME_BYTES)
        .enumerate()
        .map(|(i, chunk)| {
            let mut f = [0.0; FORMANTS];
            for (k, v) in f.iter_mut().enumerate() {
                let khz = f32::from_be_bytes(chunk[4 * k..4 * k + 4].try_into().unwrap()) as f64;
                if !(khz.is_finite() && khz > 0.0 && khz < 10.0) {
                    return Err(Error::Format(format!(
                        "fb frame {i}: implausible F{} of {khz} kHz",
                        k + 1
                    )));
                }
                *v = khz * 1000.0;
            }
            Ok(f)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GroundTruth::new(frames))
}
