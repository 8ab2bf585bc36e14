// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line entry points. `main.rs` only parses and reports errors.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::concepts::{self, ConceptCard, DEFAULT_TOP_K};
use crate::engine::{
    self, read_class_set, ScoreMode, Scoring, SteeringConfig, DEFAULT_LOGIT_SCALE,
};
use crate::error::{Error, Result};
use crate::ingest::{self, EmbeddingCorpus};
use crate::sae::{self, synthetic, TrainConfig};
use crate::service::{http, Service, Workbench, WorkbenchConfig};

pub const DEFAULT_PORT: u16 = 8765;
/// Minimum score accepted by `train --recovery-benchmark`.
pub const RECOVERY_THRESHOLD: f64 = 0.9;

#[derive(Debug, Parser)]
#[command(
    name = "steerlab",
    version,
    about = "Attribute, name and steer SAE components of embedding models"
)]
pub struct Cli {
    /// Seed for every random choice (training init, shuffling, benchmarks).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Only print warnings and errors to stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a sparse autoencoder and write an SAE1 checkpoint.
    Train(TrainArgs),
    /// Build concept cards for every component and write a CRD1 cache.
    Name(NameArgs),
    /// Print the attribution ranking for one sample.
    Attribute(AttributeArgs),
    /// Write dose-response curves for selected components as CSV.
    Sweep(SweepArgs),
    /// Run the HTTP workbench service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// EMB1 training corpus (not needed with --recovery-benchmark).
    #[arg(long, required_unless_present = "recovery_benchmark")]
    pub corpus: Option<PathBuf>,
    /// Number of SAE components.
    #[arg(long)]
    pub dim_sae: Option<usize>,
    #[arg(long)]
    pub sparsity: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Resample dead components every N epochs.
    #[arg(long)]
    pub resample_interval: Option<usize>,
    /// Train on synthetic sparse data with known directions and report how
    /// well they are recovered.
    #[arg(long)]
    pub recovery_benchmark: bool,
    #[arg(long, required_unless_present = "recovery_benchmark")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NameArgs {
    #[arg(long)]
    pub sae: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    pub k: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoringArgs {
    #[arg(long, default_value = "cosine")]
    pub mode: ScoreMode,
    /// Logit scale applied to similarities.
    #[arg(long, default_value_t = DEFAULT_LOGIT_SCALE)]
    pub tau: f64,
}

impl ScoringArgs {
    fn scoring(&self) -> Result<Scoring> {
        Scoring::new(self.mode, self.tau)
    }
}

#[derive(Debug, Args)]
pub struct AttributeArgs {
    #[arg(long)]
    pub sae: PathBuf,
    /// EMB1 corpus holding the sample.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Sample id, or `#N` for the N-th row.
    #[arg(long)]
    pub sample: String,
    /// EMB1 class-set file.
    #[arg(long)]
    pub classes: PathBuf,
    /// Target class; defaults to the predicted class.
    #[arg(long)]
    pub target: Option<String>,
    #[command(flatten)]
    pub scoring: ScoringArgs,
    /// Steering applied before attributing, e.g. `3=-1,7=0.5`.
    #[arg(long, default_value = "")]
    pub steer: String,
    /// CRD1 cache used to show component labels.
    #[arg(long)]
    pub cards: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub limit: usize,
    /// Print the full attribution result as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub sae: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub sample: String,
    #[arg(long)]
    pub classes: PathBuf,
    /// Comma-separated component indices.
    #[arg(long, value_delimiter = ',', required = true)]
    pub components: Vec<usize>,
    #[arg(long, default_value_t = 11)]
    pub steps: usize,
    #[command(flatten)]
    pub scoring: ScoringArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PORT)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => cmd_train(&args, cli.seed),
        Command::Name(args) => cmd_name(&args),
        Command::Attribute(args) => cmd_attribute(&args, &mut std::io::stdout().lock()),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Serve(args) => cmd_serve(&args),
    }
}

pub fn cmd_train(args: &TrainArgs, seed: u64) -> Result<()> {
    if args.recovery_benchmark {
        let data = synthetic::generate(&synthetic::SyntheticSpec {
            seed,
            ..synthetic::SyntheticSpec::default()
        })?;
        let cfg = TrainConfig {
            sparsity_weight: args.sparsity.unwrap_or(0.05),
            epochs: args.epochs.unwrap_or(20),
            batch_size: args.batch_size.unwrap_or(32),
            learning_rate: args.lr.unwrap_or(0.05),
            seed,
            dead_resample_interval: args.resample_interval,
        };
        let width = args.dim_sae.unwrap_or(data.directions.len());
        let model = sae::train(&data.corpus, width, &cfg)?;
        let score = sae::synthetic::recovery_score(&model, &data.directions);
        println!("recovery score: {score:.6} (threshold {RECOVERY_THRESHOLD})");
        if let Some(out) = &args.out {
            sae::write_sae(&model, out)?;
        }
        if score < RECOVERY_THRESHOLD {
            return Err(Error::InvalidArgument(format!(
                "recovery score {score:.6} below {RECOVERY_THRESHOLD}"
            )));
        }
        return Ok(());
    }

    let (Some(corpus_path), Some(out)) = (&args.corpus, &args.out) else {
        return Err(Error::InvalidArgument(
            "--corpus and --out are required".into(),
        ));
    };
    let corpus = ingest::read_corpus(corpus_path)?;
    let defaults = TrainConfig::default();
    let cfg = TrainConfig {
        sparsity_weight: args.sparsity.unwrap_or(defaults.sparsity_weight),
        epochs: args.epochs.unwrap_or(defaults.epochs),
        batch_size: args.batch_size.unwrap_or(defaults.batch_size),
        learning_rate: args.lr.unwrap_or(defaults.learning_rate),
        seed,
        dead_resample_interval: args.resample_interval,
    };
    let width = args.dim_sae.unwrap_or(corpus.dim());
    let (model, report) = sae::train_with_report(&corpus, width, &cfg)?;
    tracing::info!(
        final_loss = report.epoch_losses.last().copied().unwrap_or_default(),
        reconstruction = report.final_reconstruction_error,
        "training finished"
    );
    sae::write_sae(&model, out)
}

pub fn cmd_name(args: &NameArgs) -> Result<()> {
    let model = sae::read_sae(&args.sae)?;
    let reference = ingest::read_corpus(&args.reference)?;
    let vocab = ingest::read_vocabulary(&args.vocab)?;
    let cards = concepts::build_all_cards(&model, &reference, &vocab, args.k)?;
    let dead = cards.iter().filter(|c| c.dead).count();
    tracing::info!(cards = cards.len(), dead, "concept cards built");
    concepts::write_cards(&cards, &args.out)
}

fn select_sample<'a>(corpus: &'a EmbeddingCorpus, selector: &str) -> Result<&'a [f32]> {
    let index = match selector.strip_prefix('#') {
        Some(n) => n.parse::<usize>().ok().filter(|&i| i < corpus.len()),
        None => corpus.index_of(selector),
    };
    index
        .map(|i| corpus.vector(i))
        .ok_or_else(|| Error::InvalidArgument(format!("no sample {selector:?} in corpus")))
}

/// Parses `j=m,j=m`.
pub fn parse_steering(spec: &str) -> Result<SteeringConfig> {
    let mods = spec
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let (j, m) = pair.split_once('=').ok_or_else(|| {
                Error::InvalidArgument(format!("steering entry {pair:?} is not j=m"))
            })?;
            let j = j
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad component in {pair:?}")))?;
            let m = m
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad value in {pair:?}")))?;
            Ok((j, m))
        })
        .collect::<Result<Vec<(usize, f64)>>>()?;
    SteeringConfig::new(mods)
}

pub fn cmd_attribute(args: &AttributeArgs, out: &mut dyn Write) -> Result<()> {
    let model = sae::read_sae(&args.sae)?;
    let corpus = ingest::read_corpus(&args.corpus)?;
    let classes = read_class_set(&args.classes)?;
    let x = select_sample(&corpus, &args.sample)?;
    let steering = parse_steering(&args.steer)?;
    let scoring = args.scoring.scoring()?;
    let result = engine::attribute(
        &model,
        x,
        &classes,
        &steering,
        args.target.as_deref(),
        scoring,
    )?;
    let io = |e| Error::io("<stdout>", e);

    if args.json {
        serde_json::to_writer_pretty(&mut *out, &result)
            .map_err(|e| Error::Malformed(e.to_string()))?;
        writeln!(out).map_err(io)?;
        return Ok(());
    }

    let cards: Option<Vec<ConceptCard>> = args
        .cards
        .as_deref()
        .map(concepts::read_cards)
        .transpose()?;
    let prediction = engine::predict(&model, x, &classes, &steering, scoring)?;
    writeln!(
        out,
        "predicted {} (p = {:.4}); attributing logit of {} = {:.6}",
        prediction.predicted,
        prediction.probabilities[prediction.predicted_index],
        result.target_class,
        result.logit
    )
    .map_err(io)?;
    writeln!(
        out,
        "{:>4}  {:>9}  {:>12}  {:>12}  label",
        "rank", "component", "activation", "attribution"
    )
    .map_err(io)?;
    for (rank, c) in result.ranked().take(args.limit).enumerate() {
        let label = cards
            .as_ref()
            .and_then(|cards| cards.get(c.component))
            .and_then(|card| card.top_label())
            .map_or("-", |l| l.label.as_str());
        writeln!(
            out,
            "{:>4}  {:>9}  {:>12.6}  {:>12.6}  {label}",
            rank + 1,
            c.component,
            c.activation,
            c.attribution
        )
        .map_err(io)?;
    }

    if scoring.mode == ScoreMode::Dot {
        let gap = completeness_gap(&model, x, &classes, &steering, &result, scoring)?;
        let verdict = if gap <= COMPLETENESS_TOLERANCE {
            "ok"
        } else {
            "FAILED"
        };
        writeln!(
            out,
            "completeness: |sum R - (y - tau*(b+eps).t)| = {gap:.3e} {verdict}"
        )
        .map_err(io)?;
    }
    Ok(())
}

pub const COMPLETENESS_TOLERANCE: f64 = 1e-5;

/// `|sum_j R_j - (y - tau * (b + eps) . t)|`; zero up to rounding in dot mode.
pub fn completeness_gap(
    model: &sae::SaeModel,
    x: &[f32],
    classes: &engine::ClassSet,
    steering: &SteeringConfig,
    result: &engine::AttributionResult,
    scoring: Scoring,
) -> Result<f64> {
    let state = engine::steer(model, x, steering)?;
    let t = classes.embedding(result.target_index);
    let offset: f64 = model
        .dec_bias()
        .iter()
        .zip(&state.code.residual)
        .zip(t)
        .map(|((&b, &e), &ti)| (f64::from(b) + e) * ti)
        .sum();
    Ok((result.total() - (result.logit - scoring.logit_scale * offset)).abs())
}

/// Shortest representation that parses back to the same `f64`.
fn fmt_float(v: f64) -> String {
    format!("{v:?}")
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let model = sae::read_sae(&args.sae)?;
    let corpus = ingest::read_corpus(&args.corpus)?;
    let classes = read_class_set(&args.classes)?;
    let x = select_sample(&corpus, &args.sample)?;
    let grid = engine::uniform_grid(args.steps)?;
    let scoring = args.scoring.scoring()?;
    write_sweep_csv(
        &args.out,
        &model,
        x,
        &classes,
        &args.components,
        &grid,
        scoring,
    )
}

pub fn write_sweep_csv(
    path: &Path,
    model: &sae::SaeModel,
    x: &[f32],
    classes: &engine::ClassSet,
    components: &[usize],
    grid: &[f64],
    scoring: Scoring,
) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Malformed(format!("csv: {e}"));
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(csv_err)?;
    let mut header = vec![
        "component".to_owned(),
        "m".to_owned(),
        "predicted".to_owned(),
    ];
    header.extend(classes.labels().iter().map(|l| format!("logit:{l}")));
    header.extend(classes.labels().iter().map(|l| format!("prob:{l}")));
    w.write_record(&header).map_err(csv_err)?;
    for &j in components {
        for point in engine::dose_response(model, x, classes, j, grid, scoring)? {
            let p = &point.prediction;
            let mut row = vec![j.to_string(), fmt_float(point.m), p.predicted.clone()];
            row.extend(p.logits.iter().map(|&v| fmt_float(v)));
            row.extend(p.probabilities.iter().map(|&v| fmt_float(v)));
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn cmd_serve(args: &ServeArgs) -> Result<()> {
    let cfg = WorkbenchConfig::read(&args.config)?;
    let workbench = Workbench::load(&cfg)?;
    let service = Arc::new(Service::new(workbench));
    let addr = SocketAddr::new(args.host, args.port);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::io("<runtime>", e))?;
    runtime
        .block_on(http::serve(service, addr))
        .map_err(|e| Error::io(addr.to_string(), e))
}
