use std::path::{Path, PathBuf};

use clap::Args;
use formant_core::dnn::MlpModel;
use formant_core::dsp::Signal;
use formant_core::eval::{
    load_ground_truth, mix_noise, parse_mask, score_utterance, white_noise, EvalReport, GroundTruth, UtteranceScore,
};
use formant_core::pipeline::{analyze_signal, hypothesis_frames, read_manifest, PipelineConfig};
use formant_core::tracker::FormantTrack;
use formant_core::wav::read_wav;
use rayon::prelude::*;

use crate::{at, io_context, load_model, CliResult, Context, Failure, PipelineArgs};

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Reference CSV (time_s,f1,f2,f3) for a single utterance.
    #[arg(long, requires = "hypothesis")]
    gt: Option<PathBuf>,
    /// Track CSV to score.
    #[arg(long, group = "hypothesis")]
    track: Option<PathBuf>,
    /// WAV to analyze with the pipeline settings, then score.
    #[arg(long, group = "hypothesis")]
    wav: Option<PathBuf>,
    /// Score every wav_path,ground_truth_path[,mask_path] row of a manifest.
    #[arg(long, conflicts_with_all = ["gt", "track", "wav", "mask"])]
    manifest: Option<PathBuf>,
    /// 0/1 per reference frame; frames marked 0 are left out.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Degrade the speech before analysis: white or babble:<WAV>.
    #[arg(long)]
    noise: Option<String>,
    /// Signal-to-noise ratio in dB for --noise (white noise if --noise is omitted).
    #[arg(long)]
    snr: Option<f64>,
    /// Write the JSON report to this path ('-' prints it instead of the table).
    #[arg(long)]
    json: Option<PathBuf>,
}

enum Noise {
    White,
    Babble(Signal),
}

impl Noise {
    fn parse(spec: &str) -> CliResult<Self> {
        match spec.split_once(':') {
            None if spec == "white" => Ok(Noise::White),
            Some(("babble", path)) => {
                let path = Path::new(path);
                Ok(Noise::Babble(read_wav(path).map_err(at(path))?))
            }
            _ => Err(Failure::usage(format!(
                "--noise must be 'white' or 'babble:<WAV>', got '{spec}'"
            ))),
        }
    }
}

struct Degrade {
    noise: Noise,
    snr_db: f64,
    seed: u64,
}

impl Degrade {
    fn apply(&self, speech: &Signal, utterance: u64) -> CliResult<Signal> {
        let seed = self.seed.wrapping_add(utterance);
        let white;
        let noise = match &self.noise {
            Noise::White => {
                white = white_noise(speech.len(), speech.sample_rate(), seed)?;
                &white
            }
            Noise::Babble(s) => s,
        };
        Ok(mix_noise(speech, noise, self.snr_db, seed)?.signal)
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().unwrap_or_default().to_string_lossy().into_owned()
}

fn score_wav(
    wav: &Path,
    gt: &GroundTruth,
    cfg: &PipelineConfig,
    model: Option<&MlpModel>,
    degrade: Option<&Degrade>,
    index: u64,
) -> CliResult<UtteranceScore> {
    let mut signal = read_wav(wav).map_err(at(wav))?;
    if let Some(d) = degrade {
        signal = d.apply(&signal, index)?;
    }
    let analysis = analyze_signal(&signal, cfg, model).map_err(at(wav))?;
    let hyp = hypothesis_frames(&analysis.track).map_err(at(wav))?;
    score_utterance(&stem(wav), &hyp, gt, &cfg.eval).map_err(at(wav))
}

pub fn run(args: &EvalArgs, ctx: &Context) -> CliResult<()> {
    let cfg = args.pipeline.resolve(ctx)?;
    let degrade = match (&args.noise, args.snr) {
        (None, None) => None,
        (Some(_), None) => return Err(Failure::usage("--noise needs --snr <DB>")),
        (noise, Some(snr_db)) => Some(Degrade {
            noise: Noise::parse(noise.as_deref().unwrap_or("white"))?,
            snr_db,
            seed: ctx.seed,
        }),
    };
    if degrade.is_some() && args.track.is_some() {
        return Err(Failure::usage(
            "--noise/--snr need audio input (--wav or --manifest), not --track",
        ));
    }
    let mask = match &args.mask {
        Some(p) => {
            let file = std::fs::File::open(p).map_err(io_context("open", p))?;
            Some(parse_mask(file).map_err(at(p))?)
        }
        None => None,
    };

    let (label, scores) = if let Some(manifest) = &args.manifest {
        let rows = read_manifest(manifest).map_err(|e| Failure::usage(e.to_string()))?;
        let model = load_model(&cfg)?;
        let scores = rows
            .par_iter()
            .enumerate()
            .map(|(i, row)| {
                let gt = row.load_ground_truth().map_err(at(&row.ground_truth))?;
                score_wav(&row.wav, &gt, &cfg, model.as_ref(), degrade.as_ref(), i as u64)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .collect::<CliResult<Vec<_>>>()?;
        (cfg.estimator.to_string(), scores)
    } else {
        let gt_path = args
            .gt
            .as_ref()
            .ok_or_else(|| Failure::usage("pass --gt with --track or --wav, or use --manifest"))?;
        let mut gt = load_ground_truth(gt_path).map_err(at(gt_path))?;
        if let Some(m) = mask {
            gt = gt.with_mask(m).map_err(at(gt_path))?;
        }
        if let Some(track_path) = &args.track {
            let file = std::fs::File::open(track_path).map_err(io_context("open", track_path))?;
            let track = FormantTrack::read_csv(file).map_err(at(track_path))?;
            let hyp = hypothesis_frames(&track).map_err(at(track_path))?;
            let score = score_utterance(&stem(track_path), &hyp, &gt, &cfg.eval).map_err(at(track_path))?;
            ("track".to_string(), vec![score])
        } else {
            let wav = args.wav.as_ref().expect("clap requires --track or --wav with --gt");
            let model = load_model(&cfg)?;
            let score = score_wav(wav, &gt, &cfg, model.as_ref(), degrade.as_ref(), 0)?;
            (cfg.estimator.to_string(), vec![score])
        }
    };

    let report = EvalReport::aggregate(&label, scores)?;
    match args.json.as_deref() {
        Some(p) if p == Path::new("-") => println!("{}", report.to_json()),
        Some(p) => {
            std::fs::write(p, report.to_json()).map_err(io_context("write", p))?;
            print!("{}", report.table());
        }
        None => print!("{}", report.table()),
    }
    Ok(())
}
