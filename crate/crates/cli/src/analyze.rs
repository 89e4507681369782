use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use formant_core::dnn::MlpModel;
use formant_core::pipeline::{analyze_signal, write_spectrogram_pgm, Analysis, PipelineConfig};
use formant_core::wav::read_wav;
use rayon::prelude::*;

use crate::{at, io_context, load_model, CliResult, Context, Failure, PipelineArgs};

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Input WAV files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Track CSV for one input (stdout if omitted), or a directory for several.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Write the per-frame candidate lattice as CSV (one input only).
    #[arg(long)]
    candidates: Option<PathBuf>,
    /// Write the all-pole spectrogram as a PGM image (one input only).
    #[arg(long)]
    spectrogram: Option<PathBuf>,
}

pub fn analyze_file(path: &Path, cfg: &PipelineConfig, model: Option<&MlpModel>) -> CliResult<Analysis> {
    let signal = read_wav(path).map_err(at(path))?;
    analyze_signal(&signal, cfg, model).map_err(at(path))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(io_context("create", path))?))
}

pub fn run(args: &AnalyzeArgs, ctx: &Context) -> CliResult<()> {
    let cfg = args.pipeline.resolve(ctx)?;
    let model = load_model(&cfg)?;
    let single = args.inputs.len() == 1;
    if !single && (args.candidates.is_some() || args.spectrogram.is_some()) {
        return Err(Failure::usage("--candidates and --spectrogram take a single input"));
    }
    if single {
        let a = analyze_file(&args.inputs[0], &cfg, model.as_ref())?;
        match &args.output {
            Some(path) => a.track.write_csv(create(path)?)?,
            None => {
                let stdout = std::io::stdout();
                a.track.write_csv(stdout.lock())?;
            }
        }
        if let Some(path) = &args.candidates {
            a.lattice.write_csv(create(path)?)?;
        }
        if let Some(path) = &args.spectrogram {
            let mut out = create(path)?;
            write_spectrogram_pgm(&mut out, &a.spectra)?;
            out.flush().map_err(io_context("write", path))?;
        }
        return Ok(());
    }

    let dir = args
        .output
        .as_ref()
        .ok_or_else(|| Failure::usage("several inputs need --output <DIR>"))?;
    std::fs::create_dir_all(dir).map_err(io_context("create directory", dir))?;
    args.inputs
        .par_iter()
        .map(|path| {
            let a = analyze_file(path, &cfg, model.as_ref())?;
            let stem = path.file_stem().unwrap_or_default().to_string_lossy();
            let out = dir.join(format!("{stem}.track.csv"));
            a.track.write_csv(create(&out)?)?;
            Ok(())
        })
        .collect::<Vec<CliResult<()>>>()
        .into_iter()
        .collect()
}
