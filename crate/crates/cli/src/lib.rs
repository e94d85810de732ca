//! The `octav` command line: sound-anchored data generation, prompt
//! assembly, toy time-encoding experiments and evaluation.
//!
//! Exit codes: 0 success, 1 runtime or I/O failure, 2 usage error,
//! 3 gradient check above tolerance.

pub mod config;
pub mod error;
pub mod files;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use octav_core::client::{ClientConfig, CompletionClient, HttpClient, AUTH_TOKEN_ENV};
use octav_core::{assemble, PromptSpec};
use octav_eval::{evaluate_dataset, EvalConfig, Judge, JudgeMode, Prediction, SpanRule};
use octav_synth::{
    convert_mt, generate_mt, generate_st, AnnotatedVideo, CaptionManifest, GenConfig, OctavRecord, SoundLibrary,
};
use octav_toy::{grad_check, run_experiment, small_config, ExperimentConfig, FrameRateMode, ModelConfig, TimeEncoding};
use serde::Serialize;

use config::{pick, RunConfig};
use error::{CliError, EXIT_USAGE};
use files::{read_items, read_one, Output};

#[derive(Debug, Parser)]
#[command(name = "octav", version, about = "Sound-anchored audio-visual dialogue data, time encodings and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate single-turn records (one sound between two captions) as JSONL.
    GenSt(GenArgs),
    /// Generate multi-turn records (two sounds across three captions) as JSONL.
    GenMt(GenArgs),
    /// Convert annotated audio-visual videos into multi-turn records as JSONL.
    ConvertMt(ConvertArgs),
    /// Print the instruction prompt with modality marker tokens.
    AssemblePrompt(PromptArgs),
    /// Train the toy model on synthetic clips and print a JSON report.
    TrainToy(TrainArgs),
    /// Score predictions against reference records and print a JSON report.
    Eval(EvalArgs),
    /// Compare analytic and finite-difference gradients of the toy model.
    GradCheck(GradArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON config file; flags override its keys
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output file [default: stdout]
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Seed for all randomness [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Caption manifests: a JSON object, array or JSON lines
    #[arg(long, value_name = "PATH")]
    pub manifest: PathBuf,
    /// Sound library JSON ({"sounds": [...]})
    #[arg(long, value_name = "PATH")]
    pub sounds: PathBuf,
    /// Largest gap in seconds between selected captions, exclusive [default: 10]
    #[arg(long)]
    pub m: Option<f64>,
    /// Longest chunk span in seconds [default: 30]
    #[arg(long = "T", value_name = "T")]
    pub t_max: Option<f64>,
    /// Selections kept per starting caption, 0 keeps all [default: 1]
    #[arg(long)]
    pub max_per_start: Option<usize>,
    /// Chance that a multi-turn chunk reuses the first sound's label [default: 0.3]
    #[arg(long)]
    pub equal_label_prob: Option<f64>,
    /// Absent sound named by refusal turns; repeat for several [default: built-in list of 18]
    #[arg(long = "negative-label", value_name = "LABEL")]
    pub negative_labels: Vec<String>,
    /// Paraphrasing endpoint; no network I/O without it [default: none]
    #[arg(long, value_name = "URL")]
    pub llm_endpoint: Option<String>,
    /// Worker threads, 0 uses all cores [default: 0]
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Annotated videos: a JSON object, array or JSON lines
    #[arg(long, value_name = "PATH")]
    pub manifest: PathBuf,
    /// Absent sound named by refusal turns; repeat for several [default: built-in list of 18]
    #[arg(long = "negative-label", value_name = "LABEL")]
    pub negative_labels: Vec<String>,
    /// Paraphrasing endpoint; no network I/O without it [default: none]
    #[arg(long, value_name = "URL")]
    pub llm_endpoint: Option<String>,
    /// Worker threads, 0 uses all cores [default: 0]
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PromptArgs {
    /// Prompt spec JSON; flags override its fields
    #[arg(long, value_name = "PATH")]
    pub spec: Option<PathBuf>,
    /// Output file [default: stdout]
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// System prompt text [default: empty]
    #[arg(long)]
    pub system_prompt: Option<String>,
    /// Question text [default: empty]
    #[arg(long)]
    pub question: Option<String>,
    /// Video patch tokens; a positive count enables video [default: 0]
    #[arg(long)]
    pub video_tokens: Option<usize>,
    /// Audio patch tokens; a positive count enables audio [default: 0]
    #[arg(long)]
    pub audio_tokens: Option<usize>,
    /// Wrap both modalities in one joint block [default: false]
    #[arg(long)]
    pub joint: bool,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Time encoding: rote, rope-index, itt or none [default: rote]
    #[arg(long)]
    pub time_encoding: Option<TimeEncoding>,
    /// Number of discrete time tokens [default: 100]
    #[arg(long = "K", value_name = "K")]
    pub k: Option<usize>,
    /// Model width [default: 32]
    #[arg(long)]
    pub dim: Option<usize>,
    /// Transformer layers [default: 2]
    #[arg(long)]
    pub layers: Option<usize>,
    /// Attention heads [default: 4]
    #[arg(long)]
    pub heads: Option<usize>,
    /// Feed-forward width [default: 64]
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Event classes [default: 8]
    #[arg(long)]
    pub classes: Option<usize>,
    /// Rotary frequency base [default: 100]
    #[arg(long)]
    pub rotary_base: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Training samples [default: 2000]
    #[arg(long)]
    pub train_size: Option<usize>,
    /// Held-out samples [default: 500]
    #[arg(long)]
    pub test_size: Option<usize>,
    /// Frame sampling: uniform or variable [default: variable]
    #[arg(long)]
    pub frame_rate: Option<FrameRateMode>,
    /// Training epochs [default: 12]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// SGD learning rate [default: 0.02]
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Minibatch size [default: 8]
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Reference records (JSON lines as written by gen-st / gen-mt)
    #[arg(long, value_name = "PATH")]
    pub records: PathBuf,
    /// Predictions: {"id": ..., "text": ...} per line
    #[arg(long, value_name = "PATH")]
    pub predictions: PathBuf,
    /// Judge: deterministic or llm-client [default: deterministic]
    #[arg(long)]
    pub judge_mode: Option<JudgeMode>,
    /// Judge endpoint, required by llm-client; token from OCTAV_LLM_TOKEN [default: none]
    #[arg(long, value_name = "URL")]
    pub llm_endpoint: Option<String>,
    /// Lowest score (0-5) counted as accurate [default: 3]
    #[arg(long)]
    pub threshold: Option<u8>,
    /// Which parsed span is the top-1 grounding: first or last [default: last]
    #[arg(long)]
    pub span_rule: Option<SpanRule>,
    /// Concurrent scoring workers and judge requests, 0 uses all cores [default: 0]
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GradArgs {
    /// Output file [default: stdout]
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// JSON config file; flags override its keys
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for initialisation and samples [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Time encoding to check [default: all four]
    #[arg(long)]
    pub time_encoding: Option<TimeEncoding>,
    /// Number of discrete time tokens [default: 100]
    #[arg(long = "K", value_name = "K")]
    pub k: Option<usize>,
    /// Largest accepted relative error [default: 1e-4]
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

/// Parse `args` (program name first), run, report errors on stderr and
/// return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenSt(args) => gen(args, false),
        Command::GenMt(args) => gen(args, true),
        Command::ConvertMt(args) => convert(args),
        Command::AssemblePrompt(args) => prompt(args),
        Command::TrainToy(args) => train_toy(args),
        Command::Eval(args) => eval(args),
        Command::GradCheck(args) => grad(args),
    }
}

fn http_client(endpoint: Option<String>) -> Option<HttpClient> {
    endpoint.map(|url| {
        log::info!("using endpoint {url} (token from {AUTH_TOKEN_ENV})");
        HttpClient::new(ClientConfig::from_env(url))
    })
}

fn labels(flags: Vec<String>, config: Option<Vec<String>>, default: Vec<String>) -> Vec<String> {
    pick((!flags.is_empty()).then_some(flags), config, default)
}

fn gen(args: GenArgs, multi_turn: bool) -> Result<(), CliError> {
    let file = RunConfig::load(args.common.config.as_deref())?;
    let d = GenConfig::default();
    let cfg = GenConfig {
        m: pick(args.m, file.m, d.m),
        t_max: pick(args.t_max, file.t_max, d.t_max),
        seed: pick(args.common.seed, file.seed, d.seed),
        max_per_start: pick(args.max_per_start, file.max_per_start, d.max_per_start),
        equal_label_prob: pick(args.equal_label_prob, file.equal_label_prob, d.equal_label_prob),
        negative_labels: labels(args.negative_labels, file.negative_labels, d.negative_labels),
        jobs: pick(args.jobs, file.jobs, d.jobs),
    };
    cfg.validate()?;
    let manifests: Vec<CaptionManifest> = read_items(&args.manifest)?;
    let library: SoundLibrary = read_one(&args.sounds)?;
    let client = http_client(args.llm_endpoint.or(file.llm_endpoint));
    let client = client.as_ref().map(|c| c as &dyn CompletionClient);
    let records = if multi_turn {
        generate_mt(&manifests, &library, &cfg, client)?
    } else {
        generate_st(&manifests, &library, &cfg, client)?
    };
    log::info!("{} records from {} videos", records.len(), manifests.len());
    let mut out = Output::open(args.common.out.as_deref())?;
    out.jsonl(&records)?;
    out.finish()
}

fn convert(args: ConvertArgs) -> Result<(), CliError> {
    let file = RunConfig::load(args.common.config.as_deref())?;
    let d = GenConfig::default();
    let cfg = GenConfig {
        seed: pick(args.common.seed, file.seed, d.seed),
        negative_labels: labels(args.negative_labels, file.negative_labels, d.negative_labels.clone()),
        jobs: pick(args.jobs, file.jobs, d.jobs),
        ..d
    };
    let videos: Vec<AnnotatedVideo> = read_items(&args.manifest)?;
    let client = http_client(args.llm_endpoint.or(file.llm_endpoint));
    let client = client.as_ref().map(|c| c as &dyn CompletionClient);
    let records = convert_mt(&videos, &cfg, client)?;
    let mut out = Output::open(args.common.out.as_deref())?;
    out.jsonl(&records)?;
    out.finish()
}

fn prompt(args: PromptArgs) -> Result<(), CliError> {
    let mut spec: PromptSpec = match &args.spec {
        Some(path) => read_one(path)?,
        None => PromptSpec::default(),
    };
    if let Some(s) = args.system_prompt {
        spec.system_prompt = s;
    }
    if let Some(q) = args.question {
        spec.question = q;
    }
    if let Some(n) = args.video_tokens {
        spec.video_token_count = n;
        spec.has_video = n > 0;
    }
    if let Some(n) = args.audio_tokens {
        spec.audio_token_count = n;
        spec.has_audio = n > 0;
    }
    spec.joint |= args.joint;
    let text = assemble(&spec)?;
    let mut out = Output::open(args.out.as_deref())?;
    out.line(&text)?;
    out.finish()
}

fn model_config(args: &ModelArgs, seed: Option<u64>, file: &RunConfig) -> ModelConfig {
    let d = ModelConfig::default();
    ModelConfig {
        dim: pick(args.dim, file.dim, d.dim),
        layers: pick(args.layers, file.layers, d.layers),
        heads: pick(args.heads, file.heads, d.heads),
        hidden: pick(args.hidden, file.hidden, d.hidden),
        time_encoding: pick(args.time_encoding, file.time_encoding, d.time_encoding),
        k: pick(args.k, file.k, d.k),
        seed: pick(seed, file.seed, d.seed),
        classes: pick(args.classes, file.classes, d.classes),
        rotary_base: pick(args.rotary_base, file.rotary_base, d.rotary_base),
        ..d
    }
}

fn train_toy(args: TrainArgs) -> Result<(), CliError> {
    let file = RunConfig::load(args.common.config.as_deref())?;
    let mut cfg = model_config(&args.model, args.common.seed, &file);
    cfg.epochs = pick(args.epochs, file.epochs, cfg.epochs);
    cfg.learning_rate = pick(args.learning_rate, file.learning_rate, cfg.learning_rate);
    cfg.batch_size = pick(args.batch_size, file.batch_size, cfg.batch_size);
    let d = ExperimentConfig::default();
    let experiment = ExperimentConfig {
        train_size: pick(args.train_size, file.train_size, d.train_size),
        test_size: pick(args.test_size, file.test_size, d.test_size),
        frame_rate: pick(args.frame_rate, file.frame_rate, d.frame_rate),
    };
    if experiment.train_size == 0 {
        return Err(CliError::Usage("--train-size must be positive".into()));
    }
    let report = run_experiment(&cfg, &experiment)?;
    for (epoch, loss) in report.epoch_losses.iter().enumerate() {
        log::info!("epoch {epoch}: loss {loss:.5}");
    }
    let mut out = Output::open(args.common.out.as_deref())?;
    out.json(&report)?;
    out.finish()
}

fn eval(args: EvalArgs) -> Result<(), CliError> {
    let file = RunConfig::load(args.common.config.as_deref())?;
    let d = EvalConfig::default();
    let cfg = EvalConfig {
        threshold: pick(args.threshold, file.threshold, d.threshold),
        span_rule: pick(args.span_rule, file.span_rule, d.span_rule),
        jobs: pick(args.jobs, file.jobs, d.jobs),
    };
    if cfg.threshold > 5 {
        return Err(CliError::Usage(format!("--threshold must lie in 0..=5, got {}", cfg.threshold)));
    }
    let mode = pick(args.judge_mode, file.judge_mode, JudgeMode::Deterministic);
    let endpoint = args.llm_endpoint.or(file.llm_endpoint);
    let client = match (mode, endpoint) {
        (JudgeMode::Deterministic, _) => None,
        (JudgeMode::LlmClient, Some(url)) => http_client(Some(url)),
        (JudgeMode::LlmClient, None) => {
            return Err(CliError::Usage("--judge-mode llm-client requires --llm-endpoint".into()));
        }
    };
    let judge = match &client {
        Some(c) => Judge::Client(c),
        None => Judge::Deterministic,
    };
    let records: Vec<OctavRecord> = read_items(&args.records)?;
    let predictions: Vec<Prediction> = read_items(&args.predictions)?;
    let report = evaluate_dataset(&records, &predictions, &cfg, &judge)?;
    let mut out = Output::open(args.common.out.as_deref())?;
    out.json(&report)?;
    out.finish()
}

#[derive(Debug, Serialize)]
struct GradResult {
    time_encoding: TimeEncoding,
    max_relative_error: f64,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct GradReport {
    step: f64,
    tolerance: f64,
    results: Vec<GradResult>,
}

fn grad(args: GradArgs) -> Result<(), CliError> {
    let file = RunConfig::load(args.config.as_deref())?;
    if args.tolerance.is_nan() || args.tolerance <= 0.0 {
        return Err(CliError::Usage(format!("--tolerance must be positive, got {}", args.tolerance)));
    }
    let base = ModelConfig {
        seed: pick(args.seed, file.seed, 0),
        k: pick(args.k, file.k, ModelConfig::default().k),
        ..ModelConfig::default()
    };
    let encodings = match args.time_encoding.or(file.time_encoding) {
        Some(e) => vec![e],
        None => TimeEncoding::ALL.to_vec(),
    };
    let results = encodings
        .into_iter()
        .map(|time_encoding| {
            let cfg = small_config(&ModelConfig { time_encoding, ..base.clone() });
            let err = grad_check(&cfg)?;
            Ok(GradResult { time_encoding, max_relative_error: err, pass: err < args.tolerance })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let failed: Vec<&str> = results.iter().filter(|r| !r.pass).map(|r| r.time_encoding.name()).collect();
    let report = GradReport { step: octav_toy::gradcheck::STEP, tolerance: args.tolerance, results };
    let mut out = Output::open(args.out.as_deref())?;
    out.json(&report)?;
    out.finish()?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::CheckFailed(failed.join(", ")))
    }
}
