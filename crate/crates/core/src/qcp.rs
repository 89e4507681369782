//! Quasi-closed-phase temporal weighting of the prediction error.
//!
//! Each glottal cycle `[g_i, g_{i+1})` of length `T` keeps full weight on a
//! window that opens `pq*T` samples after the closure and lasts `dq*T`
//! samples (the closed phase), with linear ramps of `ramp` samples on both
//! inner edges. The rest of the cycle, i.e. the open phase, the main
//! excitation and the samples right after it, drops to `d_floor`.

use serde::{Deserialize, Serialize};

use crate::allpole::Range;
use crate::dsp::Frame;
use crate::error::{Error, Result};
use crate::gci::{GciSequence, F0_MAX, F0_MIN};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QcpParams {
    /// Duration quotient: length of the full-weight window relative to the period.
    pub dq: f64,
    /// Position quotient: window offset after the closure, relative to the period.
    pub pq: f64,
    pub ramp_samples: usize,
    pub d_floor: f64,
}

impl Default for QcpParams {
    fn default() -> Self {
        Self {
            dq: 0.7,
            pq: 0.05,
            ramp_samples: 7,
            d_floor: 1e-5,
        }
    }
}

impl QcpParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dq > 0.0 && self.dq <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "qcp.dq must be in (0, 1], got {}",
                self.dq
            )));
        }
        if !(self.pq >= 0.0 && self.pq < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "qcp.pq must be in [0, 1), got {}",
                self.pq
            )));
        }
        if !(self.d_floor > 0.0 && self.d_floor <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "qcp.dfloor must be in (0, 1], got {}",
                self.d_floor
            )));
        }
        Ok(())
    }
}

/// Per-sample weights for one analysis span.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightingFunction {
    pub weights: Vec<f64>,
    /// Absolute sample index of `weights[0]`.
    pub start: usize,
    pub params: QcpParams,
}

impl WeightingFunction {
    pub fn ones(start: usize, len: usize, params: QcpParams) -> Self {
        Self {
            weights: vec![1.0; len],
            start,
            params,
        }
    }

    pub fn is_flat(&self) -> bool {
        self.weights.iter().all(|&w| w == 1.0)
    }
}

/// Glottal cycles `(start, period)` implied by the GCIs, including one
/// extrapolated cycle before and after every run of plausible periods.
fn cycles(gcis: &[usize], sample_rate: u32) -> Vec<(usize, usize)> {
    let fs = sample_rate as f64;
    let min_t = (0.75 * fs / F0_MAX).floor() as usize;
    let max_t = (1.25 * fs / F0_MIN).ceil() as usize;
    let plausible = |t: usize| t >= min_t.max(1) && t <= max_t;

    let mut out = Vec::new();
    let mut i = 0;
    while i + 1 < gcis.len() {
        let t = gcis[i + 1].saturating_sub(gcis[i]);
        if !plausible(t) {
            i += 1;
            continue;
        }
        // run of consecutive plausible cycles starting at i
        let run_start = i;
        if let Some(before) = gcis[i].checked_sub(t) {
            out.push((before, t));
        }
        let mut last_t = t;
        while i + 1 < gcis.len() && plausible(gcis[i + 1].saturating_sub(gcis[i])) {
            last_t = gcis[i + 1] - gcis[i];
            out.push((gcis[i], last_t));
            i += 1;
        }
        out.push((gcis[i], last_t));
        debug_assert!(i > run_start);
    }
    out
}

fn window_weight(offset: usize, len: usize, ramp: usize, floor: f64) -> f64 {
    let ramp = ramp.min(len / 2);
    let rise = offset + 1;
    let fall = len - offset;
    let edge = rise.min(fall);
    if edge > ramp {
        1.0
    } else {
        floor + (1.0 - floor) * edge as f64 / (ramp + 1) as f64
    }
}

/// Weights for the samples `[span_start, span_start + span_len)`.
///
/// Samples not covered by any glottal cycle keep weight 1, so a span without
/// GCIs gets a flat weighting and the weighted estimators reduce to their
/// unweighted counterparts.
pub fn build_qcp_weights(
    span_start: usize,
    span_len: usize,
    gcis: &GciSequence,
    params: &QcpParams,
    sample_rate: u32,
) -> Result<WeightingFunction> {
    params.validate()?;
    let mut wf = WeightingFunction::ones(span_start, span_len, *params);
    if params.d_floor == 1.0 {
        return Ok(wf);
    }
    let span_end = span_start + span_len;
    for (g, t) in cycles(&gcis.instants, sample_rate) {
        let cycle_end = g + t;
        if cycle_end <= span_start || g >= span_end {
            continue;
        }
        let open = g + (params.pq * t as f64).round() as usize;
        let len = ((params.dq * t as f64).round() as usize).min(cycle_end.saturating_sub(open));
        for n in g.max(span_start)..cycle_end.min(span_end) {
            let w = if n >= open && n < open + len {
                window_weight(n - open, len, params.ramp_samples, params.d_floor)
            } else {
                params.d_floor
            };
            wf.weights[n - span_start] = w;
        }
    }
    Ok(wf)
}

/// Weighting function sized for `frame` under the given summation range.
pub fn frame_weights(
    frame: &Frame,
    order: usize,
    range: Range,
    gcis: &GciSequence,
    params: &QcpParams,
    sample_rate: u32,
) -> Result<WeightingFunction> {
    build_qcp_weights(
        frame.start_index,
        range.weight_len(frame.len(), order),
        gcis,
        params,
        sample_rate,
    )
}
