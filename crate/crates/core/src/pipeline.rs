//! End-to-end analysis: pre-emphasis, framing, all-pole estimation, peak
//! picking, then either DP tracking or DNN prediction with optional peak
//! refinement.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde_json::Value;

use crate::allpole::{estimate, AllPoleModel, Method};
use crate::dnn::MlpModel;
use crate::dsp::{frames_on_grid, pre_emphasize, Frame, FrameGrid, Signal};
use crate::error::{Error, Result};
use crate::eval::{EvalConfig, GroundTruth, FORMANTS, GT_PERIOD};
use crate::features::{rasta_plp, stack_context, ContextVector, FeatureConfig, CONTEXT_RADIUS};
use crate::gci::{detect_gci, estimate_f0, GciSequence};
use crate::peaks::{allpole_spectrum_db, pick_peaks, select_candidates, CandidateLattice, PeakCandidate};
use crate::qcp::{frame_weights, QcpParams};
use crate::refine::refine_formants;
use crate::tracker::{track_dp, FormantTrack, TrackerConfig, MAX_CANDIDATES, SLOTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    AllPole(Method),
    Dnn,
    DnnLpFbcov,
    DnnQcpFbcov,
}

impl Estimator {
    pub const ALL: [Estimator; 9] = [
        Estimator::AllPole(Method::LpAcor),
        Estimator::AllPole(Method::LpCov),
        Estimator::AllPole(Method::LpFbcov),
        Estimator::AllPole(Method::QcpAcor),
        Estimator::AllPole(Method::QcpCov),
        Estimator::AllPole(Method::QcpFbcov),
        Estimator::Dnn,
        Estimator::DnnLpFbcov,
        Estimator::DnnQcpFbcov,
    ];

    pub fn needs_model(self) -> bool {
        !matches!(self, Estimator::AllPole(_))
    }

    /// The all-pole method whose spectrum supplies peaks, if any.
    pub fn spectrum_method(self) -> Option<Method> {
        match self {
            Estimator::AllPole(m) => Some(m),
            Estimator::Dnn => None,
            Estimator::DnnLpFbcov => Some(Method::LpFbcov),
            Estimator::DnnQcpFbcov => Some(Method::QcpFbcov),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimator::AllPole(m) => f.write_str(&m.tag().to_ascii_lowercase()),
            Estimator::Dnn => f.write_str("dnn"),
            Estimator::DnnLpFbcov => f.write_str("dnn-lp-fbcov"),
            Estimator::DnnQcpFbcov => f.write_str("dnn-qcp-fbcov"),
        }
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                let names: Vec<String> = Estimator::ALL.iter().map(|e| e.to_string()).collect();
                Error::InvalidArgument(format!("unknown estimator '{s}', expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub estimator: Estimator,
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub order: usize,
    pub preemphasis: f64,
    pub nfft: usize,
    pub gauss_width_hz: f64,
    pub candidates: usize,
    pub tracker: TrackerConfig,
    pub qcp: QcpParams,
    pub model: Option<PathBuf>,
    pub refine_max_distance_hz: Option<f64>,
    pub eval: EvalConfig,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            estimator: Estimator::AllPole(Method::QcpFbcov),
            frame_ms: 25.0,
            hop_ms: 10.0,
            order: 12,
            preemphasis: 0.5,
            nfft: crate::peaks::DEFAULT_NFFT,
            gauss_width_hz: crate::peaks::DEFAULT_GAUSS_WIDTH_HZ,
            candidates: crate::peaks::DEFAULT_CANDIDATES,
            tracker: TrackerConfig::default(),
            qcp: QcpParams::default(),
            model: None,
            refine_max_distance_hz: None,
            eval: EvalConfig::default(),
            seed: 0,
        }
    }
}

/// Keys accepted by [`PipelineConfig::set`].
pub const CONFIG_KEYS: &[&str] = &[
    "estimator",
    "frame_ms",
    "hop_ms",
    "order",
    "preemphasis",
    "nfft",
    "gauss_width_hz",
    "candidates",
    "tracker.nominal_hz",
    "tracker.stationary_weight",
    "tracker.transition_weight",
    "tracker.missing_penalty",
    "qcp.dq",
    "qcp.pq",
    "qcp.ramp",
    "qcp.dfloor",
    "model",
    "refine.max_distance_hz",
    "eval.tau_r",
    "eval.tau_a",
    "seed",
];

fn bad(key: &str, v: &Value, want: &str) -> Error {
    Error::InvalidArgument(format!("config key '{key}': expected {want}, got {v}"))
}

fn real(key: &str, v: &Value) -> Result<f64> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| bad(key, v, "a number"))
}

fn count(key: &str, v: &Value) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| bad(key, v, "a non-negative integer"))
}

impl PipelineConfig {
    /// Sets one dotted key.
    pub fn set(&mut self, key: &str, v: &Value) -> Result<()> {
        match key {
            "estimator" => self.estimator = v.as_str().ok_or_else(|| bad(key, v, "a string"))?.parse()?,
            "frame_ms" => self.frame_ms = real(key, v)?,
            "hop_ms" => self.hop_ms = real(key, v)?,
            "order" => self.order = count(key, v)?,
            "preemphasis" => self.preemphasis = real(key, v)?,
            "nfft" => self.nfft = count(key, v)?,
            "gauss_width_hz" => self.gauss_width_hz = real(key, v)?,
            "candidates" => self.candidates = count(key, v)?,
            "tracker.nominal_hz" => {
                let arr = v
                    .as_array()
                    .filter(|a| a.len() == SLOTS)
                    .ok_or_else(|| bad(key, v, "4 numbers"))?;
                for (slot, x) in self.tracker.nominal_hz.iter_mut().zip(arr) {
                    *slot = real(key, x)?;
                }
            }
            "tracker.stationary_weight" => self.tracker.stationary_weight = real(key, v)?,
            "tracker.transition_weight" => self.tracker.transition_weight = real(key, v)?,
            "tracker.missing_penalty" => self.tracker.missing_penalty = real(key, v)?,
            "qcp.dq" => self.qcp.dq = real(key, v)?,
            "qcp.pq" => self.qcp.pq = real(key, v)?,
            "qcp.ramp" => self.qcp.ramp_samples = count(key, v)?,
            "qcp.dfloor" => self.qcp.d_floor = real(key, v)?,
            "model" => {
                self.model = match v {
                    Value::Null => None,
                    Value::String(s) => Some(PathBuf::from(s)),
                    _ => return Err(bad(key, v, "a path string")),
                }
            }
            "refine.max_distance_hz" => {
                self.refine_max_distance_hz = if v.is_null() { None } else { Some(real(key, v)?) }
            }
            "eval.tau_r" => self.eval.tau_r = real(key, v)?,
            "eval.tau_a" => self.eval.tau_a = real(key, v)?,
            "seed" => self.seed = v.as_u64().ok_or_else(|| bad(key, v, "a non-negative integer"))?,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown config key '{key}'; known keys: {}",
                    CONFIG_KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// `key=value` where the value is JSON, or a bare string.
    pub fn set_str(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("expected key=value, got '{assignment}'")))?;
        let raw = raw.trim();
        let v = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        self.set(key.trim(), &v)
    }

    /// Applies a flat JSON object of dotted keys on top of `self`.
    pub fn merge_json(&mut self, text: &str) -> Result<()> {
        let v: Value =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("config is not valid JSON: {e}")))?;
        let obj = v
            .as_object()
            .ok_or_else(|| Error::Format("config must be a JSON object of dotted keys".into()))?;
        for (k, v) in obj {
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.merge_json(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Value {
        let t = &self.tracker;
        serde_json::json!({
            "estimator": self.estimator.to_string(),
            "frame_ms": self.frame_ms,
            "hop_ms": self.hop_ms,
            "order": self.order,
            "preemphasis": self.preemphasis,
            "nfft": self.nfft,
            "gauss_width_hz": self.gauss_width_hz,
            "candidates": self.candidates,
            "tracker.nominal_hz": t.nominal_hz,
            "tracker.stationary_weight": t.stationary_weight,
            "tracker.transition_weight": t.transition_weight,
            "tracker.missing_penalty": t.missing_penalty,
            "qcp.dq": self.qcp.dq,
            "qcp.pq": self.qcp.pq,
            "qcp.ramp": self.qcp.ramp_samples,
            "qcp.dfloor": self.qcp.d_floor,
            "model": self.model.as_ref().map(|p| p.display().to_string()),
            "refine.max_distance_hz": self.refine_max_distance_hz,
            "eval.tau_r": self.eval.tau_r,
            "eval.tau_a": self.eval.tau_a,
            "seed": self.seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.preemphasis) {
            return Err(Error::InvalidArgument(format!(
                "preemphasis must be in [0, 1), got {}",
                self.preemphasis
            )));
        }
        if self.order == 0 {
            return Err(Error::InvalidArgument("model order must be positive".into()));
        }
        if self.nfft < 256 || !self.nfft.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "nfft must be a power of two >= 256, got {}",
                self.nfft
            )));
        }
        if !(self.gauss_width_hz > 0.0) {
            return Err(Error::InvalidArgument("gauss_width_hz must be positive".into()));
        }
        if self.candidates == 0 || self.candidates > MAX_CANDIDATES {
            return Err(Error::InvalidArgument(format!(
                "candidates must be in 1..={MAX_CANDIDATES}, got {}",
                self.candidates
            )));
        }
        if let Some(d) = self.refine_max_distance_hz {
            if !(d > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "refine.max_distance_hz must be positive, got {d}"
                )));
            }
        }
        FrameGrid::from_ms(self.frame_ms, self.hop_ms, 8000)?;
        self.tracker.validate()?;
        self.qcp.validate()?;
        self.eval.validate()
    }

    pub fn grid(&self, sample_rate: u32) -> Result<FrameGrid> {
        FrameGrid::from_ms(self.frame_ms, self.hop_ms, sample_rate)
    }
}

/// Everything computed for one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub track: FormantTrack,
    /// Selected candidates per frame; empty frames for the plain DNN mode.
    pub lattice: CandidateLattice,
    /// All-pole spectra in dB, one row per frame (empty for the plain DNN mode).
    pub spectra: Vec<Vec<f64>>,
    pub gcis: GciSequence,
}

fn frames_or_error(signal: &Signal, grid: FrameGrid) -> Result<usize> {
    match grid.frame_count(signal.len()) {
        0 => Err(Error::SignalTooShort {
            samples: signal.len(),
            frame_len: grid.frame_len,
        }),
        n => Ok(n),
    }
}

/// Per-frame all-pole models of the pre-emphasized signal, with QCP weights
/// anchored on GCIs of the unmodified signal.
pub fn frame_models(signal: &Signal, method: Method, cfg: &PipelineConfig) -> Result<(Vec<AllPoleModel>, GciSequence)> {
    let grid = cfg.grid(signal.sample_rate())?;
    frames_or_error(signal, grid)?;
    let gcis = if method.is_weighted() {
        detect_gci(signal, &estimate_f0(signal, grid))?
    } else {
        GciSequence::default()
    };
    let emphasized = pre_emphasize(signal, cfg.preemphasis);
    let models = frames_on_grid(emphasized.samples(), grid)
        .iter()
        .map(|frame| model_for_frame(frame, method, &gcis, cfg, signal.sample_rate()))
        .collect::<Result<Vec<_>>>()?;
    Ok((models, gcis))
}

fn model_for_frame(
    frame: &Frame,
    method: Method,
    gcis: &GciSequence,
    cfg: &PipelineConfig,
    sample_rate: u32,
) -> Result<AllPoleModel> {
    if method.is_weighted() {
        let w = frame_weights(frame, cfg.order, method.range(), gcis, &cfg.qcp, sample_rate)?;
        estimate(frame, cfg.order, method, Some(&w.weights))
    } else {
        estimate(frame, cfg.order, method, None)
    }
}

fn spectra_and_peaks(
    models: &[AllPoleModel],
    cfg: &PipelineConfig,
    sample_rate: u32,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<PeakCandidate>>)> {
    let mut spectra = Vec::with_capacity(models.len());
    let mut peaks = Vec::with_capacity(models.len());
    for m in models {
        let s = allpole_spectrum_db(m, cfg.nfft)?;
        peaks.push(pick_peaks(&s, sample_rate as f64, cfg.gauss_width_hz)?);
        spectra.push(s);
    }
    Ok((spectra, peaks))
}

/// RASTA-PLP context vectors on the analysis grid.
pub fn context_features(signal: &Signal, cfg: &PipelineConfig) -> Result<Vec<ContextVector>> {
    let grid = cfg.grid(signal.sample_rate())?;
    frames_or_error(signal, grid)?;
    let fcfg = FeatureConfig {
        sample_rate: signal.sample_rate(),
        ..FeatureConfig::default()
    };
    let feats = rasta_plp(&frames_on_grid(signal.samples(), grid), &fcfg)?;
    Ok(stack_context(&feats, CONTEXT_RADIUS))
}

/// Runs the configured estimator on one utterance. `model` is required for
/// the DNN modes.
pub fn analyze_signal(signal: &Signal, cfg: &PipelineConfig, model: Option<&MlpModel>) -> Result<Analysis> {
    cfg.validate()?;
    let grid = cfg.grid(signal.sample_rate())?;
    let n = frames_or_error(signal, grid)?;
    let fs = signal.sample_rate() as f64;
    let period = grid.hop as f64 / fs;
    let start_time = grid.center(0) as f64 / fs;

    let (spectra, peaks, gcis) = match cfg.estimator.spectrum_method() {
        Some(method) => {
            let (models, gcis) = frame_models(signal, method, cfg)?;
            let (s, p) = spectra_and_peaks(&models, cfg, signal.sample_rate())?;
            (s, p, gcis)
        }
        None => (Vec::new(), vec![Vec::new(); n], GciSequence::default()),
    };
    let lattice = CandidateLattice::new(
        peaks.iter().map(|p| select_candidates(p, cfg.candidates)).collect(),
        period,
        cfg.candidates,
    );

    let mut track = match cfg.estimator {
        Estimator::AllPole(_) => track_dp(&lattice, &cfg.tracker)?,
        _ => {
            let model = model.ok_or_else(|| {
                Error::InvalidArgument(format!("estimator {} needs a trained model (--model)", cfg.estimator))
            })?;
            let predictions = model.forward_batch(&context_features(signal, cfg)?)?;
            let frames = predictions
                .iter()
                .zip(&peaks)
                .map(|(pred, pk)| {
                    let mut p = pred.clone();
                    p.sort_by(f64::total_cmp);
                    let f = if cfg.estimator == Estimator::Dnn {
                        p
                    } else {
                        refine_formants(&p, pk, cfg.refine_max_distance_hz)
                    };
                    let mut out = [0.0; SLOTS];
                    out[..FORMANTS].copy_from_slice(&f[..FORMANTS]);
                    out
                })
                .collect();
            FormantTrack {
                frames,
                frame_period: period,
                start_time: 0.0,
            }
        }
    };
    track.start_time = start_time;
    Ok(Analysis {
        track,
        lattice,
        spectra,
        gcis,
    })
}

/// F1..F3 of a track, checked against the 10 ms reference grid.
pub fn hypothesis_frames(track: &FormantTrack) -> Result<Vec<[f64; FORMANTS]>> {
    if (track.frame_period - GT_PERIOD).abs() > 1e-4 {
        return Err(Error::Format(format!(
            "grid mismatch: track frame period is {:.2} ms, reference grid is 10 ms",
            track.frame_period * 1000.0
        )));
    }
    Ok(track.frames.iter().map(|f| [f[0], f[1], f[2]]).collect())
}

/// Training pairs for one utterance: context vectors and reference F1..F3,
/// aligned by frame index and restricted to included frames.
pub fn training_pairs(
    signal: &Signal,
    gt: &GroundTruth,
    cfg: &PipelineConfig,
) -> Result<(Vec<ContextVector>, Vec<Vec<f64>>)> {
    let x = context_features(signal, cfg)?;
    let n = x.len().min(gt.len());
    let idx: Vec<usize> = (0..n).filter(|&i| gt.includes(i)).collect();
    Ok((
        idx.iter().map(|&i| x[i].clone()).collect(),
        idx.iter().map(|&i| gt.frames[i].to_vec()).collect(),
    ))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub wav: PathBuf,
    pub ground_truth: PathBuf,
    pub mask: Option<PathBuf>,
}

impl ManifestRow {
    /// The reference with its mask applied, if the row names one.
    pub fn load_ground_truth(&self) -> Result<GroundTruth> {
        let gt = crate::eval::load_ground_truth(&self.ground_truth)?;
        match &self.mask {
            None => Ok(gt),
            Some(m) => {
                let file = std::fs::File::open(m)
                    .map_err(|e| Error::Format(format!("cannot open mask {}: {e}", m.display())))?;
                gt.with_mask(crate::eval::parse_mask(file)?)
            }
        }
    }
}

/// Rows of `wav_path,ground_truth_path[,mask_path]`; relative paths resolve
/// against the manifest's directory. An optional header row is skipped.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Format(format!("cannot read manifest {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if !(2..=3).contains(&cols.len()) || cols.iter().any(|c| c.is_empty()) {
            return Err(Error::Format(format!(
                "manifest row {}: expected wav_path,ground_truth_path[,mask_path]",
                i + 1
            )));
        }
        if i == 0 && cols[0].eq_ignore_ascii_case("wav_path") {
            continue;
        }
        let resolve = |p: &str| {
            if Path::new(p).is_absolute() {
                PathBuf::from(p)
            } else {
                base.join(p)
            }
        };
        let paths: Vec<PathBuf> = cols.iter().map(|c| resolve(c)).collect();
        if let Some(f) = paths.iter().find(|f| !f.is_file()) {
            return Err(Error::Format(format!(
                "manifest row {}: missing file {}",
                i + 1,
                f.display()
            )));
        }
        rows.push(ManifestRow {
            wav: paths[0].clone(),
            ground_truth: paths[1].clone(),
            mask: paths.get(2).cloned(),
        });
    }
    if rows.is_empty() {
        return Err(Error::Format(format!(
            "manifest {} lists no utterances",
            path.display()
        )));
    }
    Ok(rows)
}

/// Binary PGM, one column per frame, low frequencies at the bottom, 80 dB
/// of dynamic range below the global maximum.
pub fn write_spectrogram_pgm<W: Write>(mut out: W, spectra: &[Vec<f64>]) -> Result<()> {
    let width = spectra.len();
    let height = spectra.first().map_or(0, Vec::len);
    if width == 0 || height == 0 {
        return Err(Error::InvalidArgument("no spectra to draw".into()));
    }
    let top = spectra.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    write!(out, "P5\n{width} {height}\n255\n")?;
    let mut pixels = Vec::with_capacity(width * height);
    for row in (0..height).rev() {
        for col in spectra {
            let level = ((col[row] - top + 80.0) / 80.0).clamp(0.0, 1.0);
            pixels.push((level * 255.0).round() as u8);
        }
    }
    out.write_all(&pixels)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synthesize, vowel};

    const VOWEL: [(f64, f64); 4] = [(600.0, 70.0), (1300.0, 90.0), (2500.0, 120.0), (3500.0, 200.0)];

    #[test]
    fn estimator_names_round_trip() {
        for e in Estimator::ALL {
            assert_eq!(e.to_string().parse::<Estimator>().unwrap(), e);
        }
        assert_eq!(
            "QCP-FBCOV".parse::<Estimator>().unwrap(),
            Estimator::AllPole(Method::QcpFbcov)
        );
        assert!("lpc".parse::<Estimator>().is_err());
    }

    #[test]
    fn dotted_config_keys() {
        let cfg = PipelineConfig::from_json(
            r#"{"estimator": "lp-cov", "qcp.dq": 0.6, "qcp.ramp": 3, "tracker.nominal_hz": [400, 1400, 2400, 3400], "model": "m.fmlp"}"#,
        )
        .unwrap();
        assert_eq!(cfg.estimator, Estimator::AllPole(Method::LpCov));
        assert_eq!(cfg.qcp.dq, 0.6);
        assert_eq!(cfg.qcp.ramp_samples, 3);
        assert_eq!(cfg.tracker.nominal_hz[0], 400.0);
        assert_eq!(cfg.model.as_deref(), Some(Path::new("m.fmlp")));
        let mut c = cfg.clone();
        c.set_str("qcp.dfloor=1").unwrap();
        c.set_str("estimator=dnn").unwrap();
        assert_eq!(c.qcp.d_floor, 1.0);
        assert_eq!(c.estimator, Estimator::Dnn);
        assert!(c.set_str("qcp.nope=1").is_err());
        assert!(PipelineConfig::from_json(r#"{"qcp.dq": 2.0}"#).is_err());
        assert!(PipelineConfig::from_json("[1]").is_err());
        let back = PipelineConfig::from_json(&cfg.to_json().to_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn short_signal_is_rejected() {
        let s = Signal::new(vec![0.1; 100], 8000).unwrap();
        let err = analyze_signal(&s, &PipelineConfig::default(), None).unwrap_err();
        assert!(err.to_string().contains("signal shorter than one frame"), "{err}");
    }

    #[test]
    fn dnn_mode_requires_model() {
        let syn = synthesize(&vowel(&VOWEL, 150.0, 0.2)).unwrap();
        let cfg = PipelineConfig {
            estimator: Estimator::DnnQcpFbcov,
            ..PipelineConfig::default()
        };
        let err = analyze_signal(&syn.signal, &cfg, None).unwrap_err();
        assert!(err.to_string().contains("--model"));
    }

    #[test]
    fn qcp_fbcov_tracks_a_synthetic_vowel() {
        let syn = synthesize(&vowel(&VOWEL, 150.0, 0.6)).unwrap();
        let a = analyze_signal(&syn.signal, &PipelineConfig::default(), None).unwrap();
        assert_eq!(a.track.len(), syn.ground_truth.len());
        assert!((a.track.start_time - 0.0125).abs() < 1e-12);
        let interior = &a.track.frames[5..a.track.len() - 5];
        for (k, target) in VOWEL.iter().take(3).enumerate() {
            let err = interior.iter().map(|f| (f[k] - target.0).abs()).sum::<f64>() / interior.len() as f64;
            assert!(err < 30.0, "F{} error {err}", k + 1);
        }
        assert!(!a.gcis.is_empty());
    }

    #[test]
    fn unit_floor_matches_unweighted_estimator() {
        let syn = synthesize(&vowel(&VOWEL, 220.0, 0.3)).unwrap();
        let mut qcp = PipelineConfig {
            estimator: Estimator::AllPole(Method::QcpCov),
            ..PipelineConfig::default()
        };
        qcp.qcp.d_floor = 1.0;
        let lp = PipelineConfig {
            estimator: Estimator::AllPole(Method::LpCov),
            ..PipelineConfig::default()
        };
        let a = analyze_signal(&syn.signal, &qcp, None).unwrap();
        let b = analyze_signal(&syn.signal, &lp, None).unwrap();
        assert_eq!(a.track, b.track);
        assert_eq!(a.spectra, b.spectra);
    }

    #[test]
    fn grid_and_pgm() {
        let track = FormantTrack {
            frames: vec![[1.0; 4]; 3],
            frame_period: 0.005,
            start_time: 0.0,
        };
        assert!(hypothesis_frames(&track).is_err());
        let mut buf = Vec::new();
        write_spectrogram_pgm(&mut buf, &[vec![0.0, -100.0], vec![-40.0, 0.0]]).unwrap();
        assert!(buf.starts_with(b"P5\n2 2\n255\n"));
        // bottom row is bin 0
        assert_eq!(&buf[buf.len() - 4..], &[0, 255, 255, 128]);
    }

    #[test]
    fn manifest_rows() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.wav"), b"").unwrap();
        std::fs::write(dir.path().join("a.csv"), b"").unwrap();
        let m = dir.path().join("m.csv");
        std::fs::write(&m, "wav_path,ground_truth_path\na.wav,a.csv\n").unwrap();
        assert_eq!(read_manifest(&m).unwrap().len(), 1);
        std::fs::write(&m, "a.wav,a.csv,a.csv\n").unwrap();
        assert_eq!(read_manifest(&m).unwrap()[0].mask, Some(dir.path().join("a.csv")));
        std::fs::write(&m, "a.wav\n").unwrap();
        assert!(read_manifest(&m).is_err());
        std::fs::write(&m, "a.wav,a.csv\nb.wav,a.csv\n").unwrap();
        let err = read_manifest(&m).unwrap_err().to_string();
        assert!(err.contains("row 2") && err.contains("b.wav"), "{err}");
        std::fs::write(&m, "").unwrap();
        assert!(read_manifest(&m).is_err());
    }
}
