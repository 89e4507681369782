//! Viterbi assignment of per-frame candidates to four formant contours.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::peaks::CandidateLattice;

pub const SLOTS: usize = 4;
pub const MAX_CANDIDATES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub nominal_hz: [f64; SLOTS],
    pub stationary_weight: f64,
    pub transition_weight: f64,
    pub missing_penalty: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            nominal_hz: [500.0, 1500.0, 2500.0, 3500.0],
            stationary_weight: 1.0,
            transition_weight: 4.0,
            missing_penalty: 1.5,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.nominal_hz.windows(2).all(|w| w[0] < w[1]) || self.nominal_hz[0] <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "tracker nominals must be positive and ascending, got {:?}",
                self.nominal_hz
            )));
        }
        for (name, v) in [
            ("stationary_weight", self.stationary_weight),
            ("transition_weight", self.transition_weight),
            ("missing_penalty", self.missing_penalty),
        ] {
            if !(v >= 0.0) {
                return Err(Error::InvalidArgument(format!("tracker.{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Slot `s` takes candidate `m[s]`, or stays empty.
pub type Mapping = [Option<usize>; SLOTS];

#[derive(Debug, Clone, PartialEq)]
pub struct FormantTrack {
    /// Per frame, `0.0` marks an empty slot.
    pub frames: Vec<[f64; SLOTS]>,
    pub frame_period: f64,
    /// Time of frame 0 in seconds.
    pub start_time: f64,
}

impl FormantTrack {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn formant(&self, slot: usize) -> Vec<f64> {
        self.frames.iter().map(|f| f[slot]).collect()
    }

    /// `frame_index, time_s, f1..f4`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["frame_index", "time_s", "f1", "f2", "f3", "f4"])?;
        for (i, f) in self.frames.iter().enumerate() {
            let mut row = vec![
                i.to_string(),
                format!("{:.4}", self.start_time + i as f64 * self.frame_period),
            ];
            row.extend(f.iter().map(|v| format!("{v:.3}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the layout written by [`FormantTrack::write_csv`]; a missing
    /// `f4` column reads as empty slots.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let header = rdr.headers()?.clone();
        let col = |name: &str| header.iter().position(|h| h.eq_ignore_ascii_case(name));
        let time = col("time_s").ok_or_else(|| Error::Format("track CSV has no time_s column".into()))?;
        let slots: Vec<Option<usize>> = (1..=SLOTS).map(|k| col(&format!("f{k}"))).collect();
        if slots[..3].iter().any(Option::is_none) {
            return Err(Error::Format(format!(
                "track CSV needs f1,f2,f3 columns, found {:?}",
                header
            )));
        }
        let mut times = Vec::new();
        let mut frames = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let num = |c: usize| -> Result<f64> {
                let raw = rec.get(c).unwrap_or("");
                raw.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Format(format!("track row {}: '{raw}' is not a number", i + 1)))
            };
            times.push(num(time)?);
            let mut f = [0.0; SLOTS];
            for (v, c) in f.iter_mut().zip(&slots) {
                if let Some(c) = *c {
                    *v = num(c)?;
                }
            }
            frames.push(f);
        }
        let frame_period = match times.as_slice() {
            [a, b, ..] => b - a,
            _ => 0.01,
        };
        Ok(Self {
            frames,
            frame_period,
            start_time: times.first().copied().unwrap_or(0.0),
        })
    }
}

/// All order-preserving, possibly partial, injective maps from `n`
/// candidates to the slots, in lexicographic order of the slot contents
/// (empty sorts first).
pub fn enumerate_mappings(n: usize) -> Vec<Mapping> {
    fn go(slot: usize, next: usize, n: usize, cur: &mut Mapping, out: &mut Vec<Mapping>) {
        if slot == SLOTS {
            out.push(*cur);
            return;
        }
        cur[slot] = None;
        go(slot + 1, next, n, cur, out);
        for c in next..n {
            cur[slot] = Some(c);
            go(slot + 1, c + 1, n, cur, out);
        }
        cur[slot] = None;
    }
    let mut out = Vec::new();
    go(0, 0, n, &mut [None; SLOTS], &mut out);
    out
}

fn assigned(m: &Mapping, freqs: &[f64]) -> [f64; SLOTS] {
    let mut f = [0.0; SLOTS];
    for (s, c) in m.iter().enumerate() {
        if let Some(c) = c {
            f[s] = freqs[*c];
        }
    }
    f
}

pub fn stationary_cost(f: &[f64; SLOTS], cfg: &TrackerConfig) -> f64 {
    f.iter()
        .zip(&cfg.nominal_hz)
        .map(|(&f, &nom)| {
            if f > 0.0 {
                cfg.stationary_weight * (f - nom).abs() / nom
            } else {
                cfg.missing_penalty
            }
        })
        .sum()
}

pub fn transition_cost(cur: &[f64; SLOTS], prev: &[f64; SLOTS], cfg: &TrackerConfig) -> f64 {
    cur.iter()
        .zip(prev)
        .filter(|(&a, &b)| a > 0.0 && b > 0.0)
        .map(|(&a, &b)| cfg.transition_weight * (a / b).ln().abs())
        .sum()
}

/// Total cost of a sequence of per-frame slot assignments.
pub fn path_cost(frames: &[[f64; SLOTS]], cfg: &TrackerConfig) -> f64 {
    frames
        .iter()
        .enumerate()
        .map(|(t, f)| {
            stationary_cost(f, cfg)
                + if t > 0 {
                    transition_cost(f, &frames[t - 1], cfg)
                } else {
                    0.0
                }
        })
        .sum()
}

fn candidate_freqs(lattice: &CandidateLattice, t: usize) -> Result<Vec<f64>> {
    let mut f: Vec<f64> = lattice.frames[t].iter().map(|c| c.frequency).collect();
    if f.len() > MAX_CANDIDATES {
        return Err(Error::InvalidArgument(format!(
            "frame {t} has {} candidates, at most {MAX_CANDIDATES} allowed",
            f.len()
        )));
    }
    if f.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "frame {t} has a non-positive candidate"
        )));
    }
    f.sort_by(f64::total_cmp);
    Ok(f)
}

/// Minimum-cost contour assignment over the whole lattice.
pub fn track_dp(lattice: &CandidateLattice, cfg: &TrackerConfig) -> Result<FormantTrack> {
    cfg.validate()?;
    if lattice.is_empty() {
        return Err(Error::InvalidArgument("empty candidate lattice".into()));
    }
    let tables: Vec<Vec<Mapping>> = (0..=MAX_CANDIDATES).map(enumerate_mappings).collect();

    let mut states: Vec<Vec<[f64; SLOTS]>> = Vec::with_capacity(lattice.len());
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(lattice.len());
    let mut cost: Vec<f64> = Vec::new();
    for t in 0..lattice.len() {
        let freqs = candidate_freqs(lattice, t)?;
        let cur: Vec<[f64; SLOTS]> = tables[freqs.len()].iter().map(|m| assigned(m, &freqs)).collect();
        let mut next_cost = Vec::with_capacity(cur.len());
        let mut ptr = Vec::with_capacity(cur.len());
        for f in &cur {
            let local = stationary_cost(f, cfg);
            if t == 0 {
                next_cost.push(local);
                ptr.push(0);
                continue;
            }
            let (mut best, mut arg) = (f64::INFINITY, 0);
            for (j, prev) in states[t - 1].iter().enumerate() {
                let c = cost[j] + transition_cost(f, prev, cfg);
                if c < best {
                    best = c;
                    arg = j;
                }
            }
            next_cost.push(best + local);
            ptr.push(arg);
        }
        cost = next_cost;
        states.push(cur);
        back.push(ptr);
    }

    let mut idx = (0..cost.len())
        .min_by(|&a, &b| cost[a].total_cmp(&cost[b]).then(a.cmp(&b)))
        .unwrap();
    let mut frames = vec![[0.0; SLOTS]; lattice.len()];
    for t in (0..lattice.len()).rev() {
        frames[t] = states[t][idx];
        idx = back[t][idx];
    }
    Ok(FormantTrack {
        frames,
        frame_period: lattice.frame_period,
        start_time: 0.0,
    })
}
