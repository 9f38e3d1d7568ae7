//! Command-line front end. Exit codes: 0 success, 1 invalid input or
//! config, 2 runtime failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ilc::config::{load_config, validate_config};
use ilc::corpus::{docs_in_split, load_corpus, read_corpus, sample_corpus, split_corpus, write_corpus, Domain, Format, LabelMap, Split};
use ilc::eval::{compute_metrics, MetricsReport};
use ilc::features::{concat_ilc, read_store, write_store, FeatureStore, IlcSpec};
use ilc::head::{fit_head, Head};
use ilc::lstm::{extract_representations, train_lstm_baseline, LstmConfig, LstmEncoder, Pooling};
use ilc::mlp::MlpConfig;
use ilc::pipeline::{run_pipeline, RunOptions};
use ilc::projection::{centroid_distance, centroid_distance_full, emit_scatter, svd_project, ProjectionMode};
use ilc::Error;

#[derive(Parser)]
#[command(name = "ilc", version, about = "Cross-domain deception detection by intermediate-layer concatenation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Corpus preparation
    Corpus {
        #[command(subcommand)]
        command: CorpusCommand,
    },
    /// Train an LSTM baseline on a prepared corpus
    TrainEncoder(TrainEncoderArgs),
    /// Apply a trained encoder to a prepared corpus and store the vectors
    Extract(ExtractArgs),
    /// Concatenate stored vectors into a feature matrix (CSV)
    Concat(ConcatArgs),
    /// Train a classifier head on concatenated vectors
    TrainHead(TrainHeadArgs),
    /// Score a head or an LSTM baseline on one split
    Eval(EvalArgs),
    /// 2-D SVD projection with centroid distances and a scatter plot
    Project(ProjectArgs),
    /// Run a whole experiment from a config file
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Recompute cached stages
        #[arg(long)]
        force: bool,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
    /// Check a config file without running anything
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum CorpusCommand {
    /// Load a raw corpus, map labels, sample and split it
    Load(CorpusLoadArgs),
}

#[derive(Args)]
struct CorpusLoadArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    format: Format,
    #[arg(long)]
    domain: Domain,
    /// `builtin:<liar|pheme|iwspa|binary>` or a file of `label = target` lines
    #[arg(long, default_value = "builtin:binary")]
    label_map: String,
    #[arg(long)]
    sample_n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.8)]
    train_frac: f64,
    #[arg(long, default_value_t = 0.2)]
    val_frac: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainEncoderArgs {
    /// Prepared corpus written by `ilc corpus load`
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    embed_dim: usize,
    #[arg(long, default_value_t = 128)]
    hidden: usize,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 256)]
    max_len: usize,
    #[arg(long, default_value_t = 2)]
    min_freq: usize,
    #[arg(long, default_value_t = 20_000)]
    max_vocab: usize,
    /// last or mean
    #[arg(long, default_value = "last")]
    pooling: String,
    #[arg(long, default_value_t = 0.0)]
    dropout: f64,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 3)]
    patience: usize,
    #[arg(long, default_value_t = 5.0)]
    clip_norm: f64,
    #[arg(long)]
    no_class_weights: bool,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// `.ilcf` selects the binary format, anything else JSON lines
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SelectArgs {
    /// Store files (repeatable)
    #[arg(long = "store", required = true)]
    stores: Vec<PathBuf>,
    #[arg(long)]
    target: Domain,
    /// Comma-separated encoder ids such as `lstm:Email:7,lstm:News:7`
    #[arg(long, value_delimiter = ',', required = true)]
    encoders: Vec<String>,
}

#[derive(Args)]
struct ConcatArgs {
    #[command(flatten)]
    select: SelectArgs,
    #[arg(long, default_value = "test")]
    split: Split,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainHeadArgs {
    #[command(flatten)]
    select: SelectArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 5)]
    patience: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    zscore: bool,
    #[arg(long)]
    no_class_weights: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Head checkpoint; needs --store
    #[arg(long, conflicts_with = "model")]
    head: Option<PathBuf>,
    #[arg(long = "store")]
    stores: Vec<PathBuf>,
    /// LSTM checkpoint; needs --corpus
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    split: Split,
    /// Report of the reference model, for deltas
    #[arg(long)]
    baseline: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProjectArgs {
    #[command(flatten)]
    select: SelectArgs,
    #[arg(long, default_value = "test")]
    split: Split,
    /// Skip mean-centering
    #[arg(long)]
    raw: bool,
    /// Output stem: writes `<stem>.csv`, `<stem>.svg` and `<stem>.json`
    #[arg(long)]
    out: PathBuf,
}

fn merged_store(paths: &[PathBuf]) -> ilc::Result<FeatureStore> {
    let mut store = FeatureStore::new();
    for p in paths {
        store.extend(read_store(p)?.into_records())?;
    }
    Ok(store)
}

fn spec_of(select: &SelectArgs) -> ilc::Result<(FeatureStore, IlcSpec)> {
    let store = merged_store(&select.stores)?;
    let spec = IlcSpec::canonical(select.target, select.encoders.clone())?;
    Ok((store, spec))
}

fn write_json(path: Option<&Path>, value: &impl serde::Serialize) -> ilc::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match path {
        Some(p) => fs::write(p, text).map_err(|source| Error::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn corpus_load(a: CorpusLoadArgs) -> ilc::Result<()> {
    let map = LabelMap::resolve(&a.label_map)?;
    let (docs, report) = load_corpus(&a.input, a.format, &map, a.domain)?;
    let docs = match a.sample_n {
        Some(n) => sample_corpus(&docs, n, a.seed)?,
        None => docs,
    };
    let docs = split_corpus(docs, a.train_frac, a.val_frac, a.seed)?;
    write_corpus(&a.out, &docs)?;
    for s in &report.skipped {
        eprintln!("skipped row {}: {}", s.row, s.reason);
    }
    let count = |s| docs_in_split(&docs, s).len();
    println!(
        "loaded {} skipped {} kept {} (train {} val {} test {}) -> {}",
        report.loaded,
        report.skipped.len(),
        docs.len(),
        count(Split::Train),
        count(Split::Val),
        count(Split::Test),
        a.out.display()
    );
    Ok(())
}

fn train_encoder(a: TrainEncoderArgs) -> ilc::Result<()> {
    let docs = read_corpus(&a.corpus)?;
    let domain = docs[0].domain;
    if docs.iter().any(|d| d.domain != domain) {
        return Err(Error::InvalidArgument("corpus mixes domains".into()));
    }
    let pooling = match a.pooling.as_str() {
        "last" => Pooling::Last,
        "mean" => Pooling::Mean,
        other => return Err(Error::InvalidArgument(format!("pooling must be last or mean, got {other:?}"))),
    };
    let cfg = LstmConfig {
        embed_dim: a.embed_dim,
        hidden: a.hidden,
        layers: a.layers,
        max_len: a.max_len,
        min_freq: a.min_freq,
        max_vocab: a.max_vocab,
        pooling,
        dropout: a.dropout,
        lr: a.lr,
        batch: a.batch,
        max_epochs: a.epochs,
        patience: a.patience,
        clip_norm: a.clip_norm,
        class_weights: !a.no_class_weights,
        seed: a.seed,
    };
    let train = docs_in_split(&docs, Split::Train);
    let val = docs_in_split(&docs, Split::Val);
    let trained = train_lstm_baseline(&train, &val, domain, &cfg)?;
    trained.encoder.save(&a.out)?;
    eprintln!("{} best epoch {} -> {}", trained.encoder.id, trained.best_epoch, a.out.display());
    write_json(None, &trained.report)
}

fn extract(a: ExtractArgs) -> ilc::Result<()> {
    let encoder = LstmEncoder::load(&a.model)?;
    let docs = read_corpus(&a.corpus)?;
    let records = extract_representations(&docs, &encoder)?;
    write_store(&a.out, &records)?;
    println!(
        "{} records of dim {} from {} -> {}",
        records.len(),
        encoder.output_dim(),
        encoder.id,
        a.out.display()
    );
    Ok(())
}

fn concat(a: ConcatArgs) -> ilc::Result<()> {
    let (store, spec) = spec_of(&a.select)?;
    let m = concat_ilc(&store, &spec, a.split)?;
    fs::write(&a.out, m.to_csv()).map_err(|source| Error::Io { path: a.out.clone(), source })?;
    println!("{}: {} rows x {} columns -> {}", spec.name(), m.rows(), m.dim, a.out.display());
    Ok(())
}

fn train_head(a: TrainHeadArgs) -> ilc::Result<()> {
    let (store, spec) = spec_of(&a.select)?;
    let cfg = MlpConfig {
        hidden: a.hidden,
        lr: a.lr,
        batch: a.batch,
        max_epochs: a.epochs,
        patience: a.patience,
        class_weights: !a.no_class_weights,
        seed: a.seed,
    };
    let head = fit_head(&store, &spec, &cfg, a.zscore)?;
    head.save(&a.out)?;
    eprintln!("{} best epoch {} -> {}", spec.name(), head.best_epoch, a.out.display());
    write_json(None, &head.val_report)
}

fn eval(a: EvalArgs) -> ilc::Result<()> {
    let report = match (&a.head, &a.model) {
        (Some(head), None) => {
            if a.stores.is_empty() {
                return Err(Error::InvalidArgument("--head needs at least one --store".into()));
            }
            Head::load(head)?.evaluate(&merged_store(&a.stores)?, a.split)?
        }
        (None, Some(model)) => {
            let corpus = a.corpus.as_ref().ok_or_else(|| Error::InvalidArgument("--model needs --corpus".into()))?;
            let encoder = LstmEncoder::load(model)?;
            let docs = read_corpus(corpus)?;
            let chosen = docs_in_split(&docs, a.split);
            let labels: Vec<_> = chosen.iter().map(|d| d.label).collect();
            compute_metrics(&encoder.predict_docs(&chosen)?, &labels)?
        }
        _ => return Err(Error::InvalidArgument("give exactly one of --head or --model".into())),
    };
    let report = match &a.baseline {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|source| Error::Io { path: p.clone(), source })?;
            let base: MetricsReport = serde_json::from_str(&text)?;
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            report.with_baseline(&name, &base)
        }
        None => report,
    };
    write_json(a.out.as_deref(), &report)
}

fn project(a: ProjectArgs) -> ilc::Result<()> {
    let (store, spec) = spec_of(&a.select)?;
    let m = concat_ilc(&store, &spec, a.split)?;
    let mode = if a.raw { ProjectionMode::Raw } else { ProjectionMode::Centered };
    let p = svd_project(&m, mode)?;
    let (csv, svg) = emit_scatter(&p, &a.out)?;
    let summary = serde_json::json!({
        "name": spec.name(),
        "encoder_ids": spec.encoder_ids,
        "points": p.points.len(),
        "centroid_distance": centroid_distance(&p)?,
        "centroid_distance_full": centroid_distance_full(&m)?,
        "singular_values": p.singular_values,
        "captured_variance": p.captured_fraction(),
    });
    let json = a.out.with_extension("json");
    write_json(Some(&json), &summary)?;
    println!("{} {} {}", csv.display(), svg.display(), json.display());
    Ok(())
}

/// Validation problems map to exit code 1, everything else to 2.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) => 1,
        Error::Stage { source, .. } => exit_code(source),
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Corpus {
            command: CorpusCommand::Load(a),
        } => corpus_load(a),
        Command::TrainEncoder(a) => train_encoder(a),
        Command::Extract(a) => extract(a),
        Command::Concat(a) => concat(a),
        Command::TrainHead(a) => train_head(a),
        Command::Eval(a) => eval(a),
        Command::Project(a) => project(a),
        Command::Validate { config } => match validate_config(&config) {
            Ok(diags) if diags.is_empty() => {
                println!("{}: ok", config.display());
                return ExitCode::SUCCESS;
            }
            Ok(diags) => {
                for d in diags {
                    println!("{d}");
                }
                return ExitCode::from(1);
            }
            Err(e) => Err(e),
        },
        Command::Run { config, force, cache_dir } => load_config(&config).and_then(|cfg| {
            let manifest = run_pipeline(&cfg, &RunOptions { cache_dir, force })?;
            for s in &manifest.stages {
                println!("{:<32} {:<6} {:>8.2}s", s.name, format!("{:?}", s.status).to_lowercase(), s.seconds);
            }
            println!("reports in {}", manifest.output.display());
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
