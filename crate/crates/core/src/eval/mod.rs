//! Formant detection rate, estimation error, noise degradation and reports.

mod ground_truth;
mod metrics;
mod noise;
mod report;

pub use ground_truth::{convert_fb, load_ground_truth, parse_ground_truth, parse_mask, GroundTruth, GT_PERIOD};
pub use metrics::{detected, fdr, fee, fee_detected, included_frames, EvalConfig, FORMANTS};
pub use noise::{measured_snr_db, mix_noise, white_noise, Mixture};
pub use report::{score_utterance, EvalReport, UtteranceScore};
