use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod analyze;
mod eval;
mod synth;
mod train;

/// Formant estimation and tracking with quasi-closed-phase forward-backward
/// linear prediction.
#[derive(Parser, Debug)]
#[command(name = "formant", version)]
struct Cli {
    /// Seed for every random choice (noise, corpus synthesis, training).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for multi-utterance commands (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Track formants in WAV files.
    Analyze(analyze::AnalyzeArgs),
    /// Render test vowels with known formants.
    Synth(synth::SynthArgs),
    /// Train the formant MLP from a manifest of WAV and reference CSV pairs.
    Train(train::TrainArgs),
    /// Score tracks against reference formants.
    Eval(eval::EvalArgs),
    /// Convert a binary .fb resonance file to a reference CSV.
    ConvertFb(ConvertFbArgs),
}

/// Pipeline settings shared by analyze, train and eval.
#[derive(Args, Debug, Clone, Default)]
pub struct PipelineArgs {
    /// JSON file of dotted keys, e.g. {"qcp.dq": 0.7, "tracker.missing_penalty": 1.5}.
    #[arg(long)]
    config: Option<PathBuf>,
    /// lp-acor, lp-cov, lp-fbcov, qcp-acor, qcp-cov, qcp-fbcov, dnn, dnn-lp-fbcov or dnn-qcp-fbcov.
    #[arg(long)]
    estimator: Option<String>,
    /// Trained model for the dnn estimators.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Override one config key, repeatable: --set qcp.dfloor=1.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args, Debug)]
struct ConvertFbArgs {
    input: PathBuf,
    output: PathBuf,
    /// Fail unless the file holds exactly this many frames.
    #[arg(long)]
    frames: Option<usize>,
}

/// A message and the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<formant_core::Error> for Failure {
    fn from(e: formant_core::Error) -> Self {
        Self {
            code: if e.is_numerical() { 3 } else { 2 },
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, Failure>;

pub fn io_context<'a>(what: &str, path: &'a std::path::Path) -> impl FnOnce(std::io::Error) -> Failure + 'a {
    let what = what.to_string();
    move |e| Failure::usage(format!("cannot {what} {}: {e}", path.display()))
}

/// Prefixes a core error with the file it concerns, keeping its exit code.
pub fn at(path: &std::path::Path) -> impl FnOnce(formant_core::Error) -> Failure + '_ {
    move |e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    }
}

pub struct Context {
    pub seed: u64,
}

impl PipelineArgs {
    /// Defaults, then the config file, then --estimator/--model/--set.
    pub fn resolve(&self, ctx: &Context) -> CliResult<formant_core::pipeline::PipelineConfig> {
        let mut cfg = formant_core::pipeline::PipelineConfig {
            seed: ctx.seed,
            ..Default::default()
        };
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(io_context("read config", path))?;
            cfg.merge_json(&text)
                .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        }
        if let Some(e) = &self.estimator {
            cfg.estimator = e.parse()?;
        }
        if let Some(m) = &self.model {
            cfg.model = Some(m.clone());
        }
        for o in &self.overrides {
            cfg.set_str(o)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Loads the model a DNN estimator needs.
pub fn load_model(cfg: &formant_core::pipeline::PipelineConfig) -> CliResult<Option<formant_core::dnn::MlpModel>> {
    if !cfg.estimator.needs_model() {
        return Ok(None);
    }
    let path = cfg.model.as_ref().ok_or_else(|| {
        Failure::usage(format!(
            "estimator {} needs a trained model: pass --model <PATH>",
            cfg.estimator
        ))
    })?;
    let model = formant_core::dnn::MlpModel::load(path)
        .map_err(|e| Failure::usage(format!("cannot load model {}: {e}", path.display())))?;
    Ok(Some(model))
}

fn convert_fb(args: &ConvertFbArgs) -> CliResult<()> {
    let bytes = std::fs::read(&args.input).map_err(io_context("read", &args.input))?;
    let gt = formant_core::eval::convert_fb(&bytes, args.frames)
        .map_err(|e| Failure::usage(format!("{}: {e}", args.input.display())))?;
    let file = std::fs::File::create(&args.output).map_err(io_context("create", &args.output))?;
    gt.write_csv(std::io::BufWriter::new(file))?;
    log::info!("wrote {} frames to {}", gt.len(), args.output.display());
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::usage(format!("cannot start worker pool: {e}")))?;
    }
    let ctx = Context {
        seed: cli.seed.unwrap_or(0),
    };
    match &cli.command {
        Command::Analyze(a) => analyze::run(a, &ctx),
        Command::Synth(a) => synth::run(a, &ctx, cli.seed),
        Command::Train(a) => train::run(a, &ctx),
        Command::Eval(a) => eval::run(a, &ctx),
        Command::ConvertFb(a) => convert_fb(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
