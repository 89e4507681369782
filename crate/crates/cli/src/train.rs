use std::path::PathBuf;

use clap::Args;
use formant_core::dnn::{train, TrainConfig};
use formant_core::features::write_feature_dump;
use formant_core::pipeline::{read_manifest, training_pairs};
use formant_core::wav::read_wav;
use rayon::prelude::*;

use crate::{at, io_context, CliResult, Context, Failure, PipelineArgs};

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// CSV rows of wav_path,ground_truth_path[,mask_path] (relative to the manifest).
    manifest: PathBuf,
    /// Model file to write.
    #[arg(short, long)]
    output: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    learning_rate: f64,
    /// Factor applied to the learning rate when validation loss stalls.
    #[arg(long, default_value_t = 0.5)]
    lr_decay: f64,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.2)]
    dropout: f64,
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', default_value = "300,300,300")]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 0.1)]
    validation_fraction: f64,
    /// Also write the stacked training features as an FPLP dump.
    #[arg(long)]
    features_dump: Option<PathBuf>,
}

pub fn run(args: &TrainArgs, ctx: &Context) -> CliResult<()> {
    let cfg = args.pipeline.resolve(ctx)?;
    let rows = read_manifest(&args.manifest).map_err(|e| Failure::usage(e.to_string()))?;
    let tcfg = TrainConfig {
        hidden: args.hidden.clone(),
        learning_rate: args.learning_rate,
        lr_decay: args.lr_decay,
        epochs: args.epochs,
        batch_size: args.batch_size,
        dropout_prob: args.dropout,
        validation_fraction: args.validation_fraction,
        seed: ctx.seed,
    };
    tcfg.validate()?;

    let pairs = rows
        .par_iter()
        .map(|row| {
            let signal = read_wav(&row.wav).map_err(at(&row.wav))?;
            let reference = row.load_ground_truth().map_err(at(&row.ground_truth))?;
            training_pairs(&signal, &reference, &cfg).map_err(at(&row.wav))
        })
        .collect::<Vec<CliResult<_>>>();
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for p in pairs {
        let (x, y) = p?;
        inputs.extend(x);
        targets.extend(y);
    }
    if inputs.is_empty() {
        return Err(Failure::usage("manifest yields no training frames"));
    }
    log::info!("{} utterances, {} frames", rows.len(), inputs.len());
    if let Some(path) = &args.features_dump {
        let file = std::fs::File::create(path).map_err(io_context("create", path))?;
        write_feature_dump(std::io::BufWriter::new(file), &inputs)?;
    }

    let (model, report) = train(&inputs, &targets, &tcfg)?;
    model.save(&args.output).map_err(at(&args.output))?;
    let last = |v: &[f64]| v.last().copied().unwrap_or(f64::NAN);
    println!(
        "frames {}  epochs {}  best epoch {}  final train loss {:.5}  validation loss {:.5}",
        inputs.len(),
        report.train_loss.len(),
        report.best_epoch + 1,
        last(&report.train_loss),
        report
            .validation_loss
            .get(report.best_epoch)
            .copied()
            .unwrap_or(f64::NAN),
    );
    Ok(())
}
