use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::{fdr, fee, included_frames, EvalConfig, FORMANTS};
use super::GroundTruth;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceScore {
    pub name: String,
    pub fdr: [f64; FORMANTS],
    pub fee: [f64; FORMANTS],
    pub frames: usize,
}

/// Metrics averaged over utterances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub fdr: [f64; FORMANTS],
    pub fee: [f64; FORMANTS],
    pub frames: usize,
    pub utterances: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_utterance: Vec<UtteranceScore>,
}

pub fn score_utterance(
    name: &str,
    hyp: &[[f64; FORMANTS]],
    gt: &GroundTruth,
    cfg: &EvalConfig,
) -> Result<UtteranceScore> {
    Ok(UtteranceScore {
        name: name.to_string(),
        fdr: fdr(hyp, gt, cfg)?,
        fee: fee(hyp, gt)?,
        frames: included_frames(hyp.len(), gt),
    })
}

impl EvalReport {
    pub fn aggregate(method: &str, scores: Vec<UtteranceScore>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::InvalidArgument("no utterances to report".into()));
        }
        let n = scores.len() as f64;
        let mut fdr = [0.0; FORMANTS];
        let mut fee = [0.0; FORMANTS];
        for s in &scores {
            for k in 0..FORMANTS {
                fdr[k] += s.fdr[k] / n;
                fee[k] += s.fee[k] / n;
            }
        }
        Ok(Self {
            method: method.to_string(),
            fdr,
            fee,
            frames: scores.iter().map(|s| s.frames).sum(),
            utterances: scores.len(),
            per_utterance: scores,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "method: {}  utterances: {}  frames: {}",
            self.method, self.utterances, self.frames
        );
        let _ = writeln!(s, "{:<8}{:>10}{:>10}{:>10}", "", "F1", "F2", "F3");
        let _ = writeln!(
            s,
            "{:<8}{:>10.1}{:>10.1}{:>10.1}",
            "FDR %", self.fdr[0], self.fdr[1], self.fdr[2]
        );
        let _ = writeln!(
            s,
            "{:<8}{:>10.1}{:>10.1}{:>10.1}",
            "FEE Hz", self.fee[0], self.fee[1], self.fee[2]
        );
        s
    }
}
