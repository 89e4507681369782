use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use formant_core::synth::{random_corpus, synthesize, SynthSpec};
use formant_core::wav::write_wav;
use rayon::prelude::*;

use crate::{at, io_context, CliResult, Context, Failure};

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// JSON list of segments {duration_s, f0_hz (0 = noise), formants: [[freq, bw], ...]}.
    #[arg(required_unless_present = "random")]
    spec: Option<PathBuf>,
    /// Output WAV.
    #[arg(required_unless_present = "random")]
    output: Option<PathBuf>,
    /// Reference CSV (default: the output path with a .csv extension).
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    /// Render this many random multi-vowel utterances plus manifest.csv into --out-dir.
    #[arg(long, conflicts_with_all = ["spec", "output", "ground_truth"], requires = "out_dir")]
    random: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

/// Writes the WAV, the reference CSV and, when silent segments are present,
/// a `.mask` file next to the CSV. Returns the mask path if written.
fn render(spec: &SynthSpec, wav: &Path, gt: &Path) -> CliResult<Option<PathBuf>> {
    let syn = synthesize(spec).map_err(at(wav))?;
    write_wav(wav, &syn.signal).map_err(at(wav))?;
    let file = std::fs::File::create(gt).map_err(io_context("create", gt))?;
    syn.ground_truth.write_csv(std::io::BufWriter::new(file))?;
    let Some(mask) = &syn.ground_truth.mask else {
        return Ok(None);
    };
    let path = gt.with_extension("mask");
    let mut text = String::from("include\n");
    for &m in mask {
        text.push_str(if m { "1\n" } else { "0\n" });
    }
    std::fs::write(&path, text).map_err(io_context("write", &path))?;
    Ok(Some(path))
}

pub fn run(args: &SynthArgs, ctx: &Context, seed: Option<u64>) -> CliResult<()> {
    if let Some(n) = args.random {
        if n == 0 {
            return Err(Failure::usage("--random needs at least one utterance"));
        }
        let dir = args.out_dir.as_ref().expect("clap enforces --out-dir");
        std::fs::create_dir_all(dir).map_err(io_context("create directory", dir))?;
        let specs = random_corpus(n, ctx.seed);
        let masks = specs
            .par_iter()
            .enumerate()
            .map(|(i, spec)| {
                render(
                    spec,
                    &dir.join(format!("utt{i:03}.wav")),
                    &dir.join(format!("utt{i:03}.csv")),
                )
            })
            .collect::<Vec<_>>()
            .into_iter()
            .collect::<CliResult<Vec<_>>>()?;
        let mut manifest = String::from("wav_path,ground_truth_path,mask_path\n");
        for (i, mask) in masks.iter().enumerate() {
            match mask {
                Some(_) => writeln!(manifest, "utt{i:03}.wav,utt{i:03}.csv,utt{i:03}.mask"),
                None => writeln!(manifest, "utt{i:03}.wav,utt{i:03}.csv"),
            }
            .expect("writing to a String");
        }
        let path = dir.join("manifest.csv");
        std::fs::write(&path, manifest).map_err(io_context("write", &path))?;
        log::info!("wrote {n} utterances and {}", path.display());
        return Ok(());
    }

    let spec_path = args.spec.as_ref().expect("clap enforces the spec");
    let output = args.output.as_ref().expect("clap enforces the output");
    let text = std::fs::read_to_string(spec_path).map_err(io_context("read", spec_path))?;
    let mut spec = SynthSpec::from_json(&text).map_err(at(spec_path))?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let gt = args
        .ground_truth
        .clone()
        .unwrap_or_else(|| output.with_extension("csv"));
    render(&spec, output, &gt).map(|_| ())
}
