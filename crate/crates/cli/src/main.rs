use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use gprb_core::captioner::ArchitectureKind;
use gprb_core::pipeline::{
    cmd_analyze, cmd_generate, cmd_synth, cmd_train, AnalyzeConfig, FoilMode, GenerateConfig, SynthConfig,
    TrainConfig,
};
use gprb_core::report::Manifest;
use gprb_core::synthworld::DatasetConfig;
use gprb_core::trainer::Hyperparams;

/// Train image caption generators on synthetic grounded data and measure how
/// much visual information they use per generated word.
#[derive(Parser)]
#[command(name = "gprb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic train/val/test dataset.
    Synth(SynthArgs),
    /// Train one caption generator.
    Train(TrainArgs),
    /// Greedily caption every image of a split.
    Generate(GenerateArgs),
    /// Sensitivity and omission analysis of generated captions.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Dataset config as JSON (a bare config or a synth manifest); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_val: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    /// Image feature width D.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    noise_std: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Arch {
    Init,
    Pre,
    Par,
    Merge,
}

impl From<Arch> for ArchitectureKind {
    fn from(a: Arch) -> Self {
        match a {
            Arch::Init => ArchitectureKind::InitInject,
            Arch::Pre => ArchitectureKind::PreInject,
            Arch::Par => ArchitectureKind::ParInject,
            Arch::Merge => ArchitectureKind::Merge,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset directory written by `synth`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    arch: Arch,
    /// Output model directory.
    #[arg(long)]
    out: PathBuf,
    /// Continue from this checkpoint; its architecture must match --arch.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    min_count: usize,
    #[arg(long, default_value_t = 64)]
    embed: usize,
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 40)]
    max_epochs: usize,
    #[arg(long, default_value_t = 5)]
    patience: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 5.0)]
    clip_norm: f64,
}

#[derive(Args)]
struct GenerateArgs {
    /// Model directory written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
    #[arg(long, default_value_t = 20)]
    max_len: usize,
    /// Output JSONL; defaults to <model>/captions.jsonl.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Foil {
    Farthest,
    #[value(name = "self")]
    SelfFoil,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Model directory; repeat to compare architectures.
    #[arg(long = "model", required = true)]
    models: Vec<PathBuf>,
    /// Caption file per model, in --model order; defaults to <model>/captions.jsonl.
    #[arg(long = "captions")]
    captions: Vec<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
    #[arg(long, value_enum, default_value = "farthest")]
    foil: Foil,
    #[arg(long)]
    out: PathBuf,
    /// Also write one SVG line chart per metric.
    #[arg(long)]
    svg: bool,
}

fn synth(args: SynthArgs) -> Result<()> {
    let mut dataset = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            match serde_json_config(&text) {
                Some(cfg) => cfg,
                None => anyhow::bail!("{} is neither a dataset config nor a synth manifest", path.display()),
            }
        }
        None => DatasetConfig::default(),
    };
    if let Some(v) = args.seed {
        dataset.seed = v;
    }
    if let Some(v) = args.n_train {
        dataset.n_train = v;
    }
    if let Some(v) = args.n_val {
        dataset.n_val = v;
    }
    if let Some(v) = args.n_test {
        dataset.n_test = v;
    }
    if let Some(v) = args.dim {
        dataset.dim = v;
    }
    if let Some(v) = args.noise_std {
        dataset.noise_std = v;
    }
    cmd_synth(&SynthConfig { out: args.out, dataset })?;
    Ok(())
}

fn serde_json_config(text: &str) -> Option<DatasetConfig> {
    if let Ok(manifest) = serde_json::from_str::<Manifest>(text) {
        let cfg: SynthConfig = serde_json::from_value(manifest.config).ok()?;
        return Some(cfg.dataset);
    }
    serde_json::from_str(text).ok()
}

fn train(args: TrainArgs) -> Result<()> {
    let cfg = TrainConfig {
        data: args.data,
        out: args.out,
        arch: args.arch.into(),
        min_count: args.min_count,
        resume: args.resume,
        hyper: Hyperparams {
            embed: args.embed,
            hidden: args.hidden,
            learning_rate: args.lr,
            max_epochs: args.max_epochs,
            patience: args.patience,
            seed: args.seed,
            clip_norm: args.clip_norm,
            ..Hyperparams::default()
        },
    };
    let (_, log) = cmd_train(&cfg, |e| {
        eprintln!(
            "epoch {:>3}  train {:.4}  val {:.4}  ({:.1}s)",
            e.epoch, e.train_loss, e.val_loss, e.seconds
        )
    })?;
    eprintln!("best epoch {} (val loss {:.4})", log.best_epoch, log.best_val_loss);
    Ok(())
}

fn generate(args: GenerateArgs) -> Result<()> {
    let captions = cmd_generate(&GenerateConfig {
        model: args.model,
        data: args.data,
        split: args.split,
        max_len: args.max_len,
        out: args.out,
    })?;
    eprintln!("generated {} captions", captions.len());
    Ok(())
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let results = cmd_analyze(&AnalyzeConfig {
        models: args.models,
        captions: args.captions,
        data: args.data,
        split: args.split,
        foil: match args.foil {
            Foil::Farthest => FoilMode::Farthest,
            Foil::SelfFoil => FoilMode::SelfFoil,
        },
        out: args.out,
        svg: args.svg,
    })?;
    for r in &results {
        eprintln!(
            "{}: {} sensitivity records, {} omission records, {} captions skipped (no END)",
            r.label,
            r.sensitivity.len(),
            r.omission.len(),
            r.skipped
        );
    }
    Ok(())
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("GPRB_THREADS") {
        let n: usize = v.parse().with_context(|| format!("GPRB_THREADS={v:?} is not a count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| match cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Generate(a) => generate(a),
        Command::Analyze(a) => analyze(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
