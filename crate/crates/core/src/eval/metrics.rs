use serde::{Deserialize, Serialize};

use super::GroundTruth;
use crate::error::{Error, Result};

pub const FORMANTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Relative deviation bound.
    pub tau_r: f64,
    /// Absolute deviation bound in Hz.
    pub tau_a: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            tau_r: 0.3,
            tau_a: 300.0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_r > 0.0 && self.tau_a > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "eval thresholds must be positive, got tau_r={} tau_a={}",
                self.tau_r, self.tau_a
            )));
        }
        Ok(())
    }
}

/// A frame counts as detected only when both bounds hold strictly.
pub fn detected(reference: f64, hypothesis: f64, cfg: &EvalConfig) -> bool {
    let d = (reference - hypothesis).abs();
    d / reference < cfg.tau_r && d < cfg.tau_a
}

/// Frame indices on the common grid that enter the metrics.
fn included(hyp_len: usize, gt: &GroundTruth) -> Result<Vec<usize>> {
    let n = hyp_len.min(gt.len());
    let idx: Vec<usize> = (0..n).filter(|&i| gt.includes(i)).collect();
    if idx.is_empty() {
        return Err(Error::InvalidArgument(
            "no frames to evaluate after alignment and masking".into(),
        ));
    }
    Ok(idx)
}

/// Formant detection rate in percent for F1..F3.
pub fn fdr(hyp: &[[f64; FORMANTS]], gt: &GroundTruth, cfg: &EvalConfig) -> Result<[f64; FORMANTS]> {
    cfg.validate()?;
    let idx = included(hyp.len(), gt)?;
    let mut out = [0.0; FORMANTS];
    for (k, o) in out.iter_mut().enumerate() {
        let hits = idx
            .iter()
            .filter(|&&i| detected(gt.frames[i][k], hyp[i][k], cfg))
            .count();
        *o = 100.0 * hits as f64 / idx.len() as f64;
    }
    Ok(out)
}

/// Mean absolute deviation in Hz over all included frames.
pub fn fee(hyp: &[[f64; FORMANTS]], gt: &GroundTruth) -> Result<[f64; FORMANTS]> {
    let idx = included(hyp.len(), gt)?;
    let mut out = [0.0; FORMANTS];
    for (k, o) in out.iter_mut().enumerate() {
        *o = idx.iter().map(|&i| (gt.frames[i][k] - hyp[i][k]).abs()).sum::<f64>() / idx.len() as f64;
    }
    Ok(out)
}

/// Mean absolute deviation over detected frames only; `NaN` where nothing
/// was detected.
pub fn fee_detected(hyp: &[[f64; FORMANTS]], gt: &GroundTruth, cfg: &EvalConfig) -> Result<[f64; FORMANTS]> {
    let idx = included(hyp.len(), gt)?;
    let mut out = [0.0; FORMANTS];
    for (k, o) in out.iter_mut().enumerate() {
        let d: Vec<f64> = idx
            .iter()
            .filter(|&&i| detected(gt.frames[i][k], hyp[i][k], cfg))
            .map(|&i| (gt.frames[i][k] - hyp[i][k]).abs())
            .collect();
        *o = if d.is_empty() {
            f64::NAN
        } else {
            d.iter().sum::<f64>() / d.len() as f64
        };
    }
    Ok(out)
}

pub fn included_frames(hyp_len: usize, gt: &GroundTruth) -> usize {
    included(hyp_len, gt).map_or(0, |v| v.len())
}
