use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod run;

use run::{Logger, MissingInput, Run};

#[derive(Parser, Debug)]
#[command(name = "taxoprobe", version, about = "Hypernymy probing and taxonomy reconstruction")]
struct Cli {
    /// Worker threads for parallel stages; falls back to TAXOPROBE_THREADS.
    #[arg(long, global = true, env = "TAXOPROBE_THREADS", default_value_t = 1)]
    threads: usize,
    /// Emit log lines on stderr as JSON objects.
    #[arg(long, global = true)]
    log_json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a synsets/edges pair and write a normalized taxonomy directory.
    Import(ImportArgs),
    /// Build splits and labeled edge examples.
    Sample(SampleArgs),
    /// Generate a synthetic embedding store.
    Emb(EmbArgs),
    /// Train a probe.
    Train(TrainArgs),
    /// Evaluate a probe on labeled examples.
    Eval(EvalArgs),
    /// Score all ordered node pairs with a probe.
    Score(ScoreArgs),
    /// Rebuild a tree from a score matrix.
    Reconstruct(ReconstructArgs),
    /// Compare a predicted tree against the taxonomy.
    EvalTed(EvalTedArgs),
    /// Per-concept F1 binned by a concept factor.
    ReportFactors(ReportFactorsArgs),
    /// Mean F1 of semantic categories.
    ReportCategories(ReportCategoriesArgs),
    /// Per-layer F1 with confidence intervals.
    ReportLayers(ReportLayersArgs),
    /// Full pipeline on a synthetic tree with planted embeddings.
    E2eSynthetic(E2eArgs),
}

#[derive(Args, Debug)]
struct ImportArgs {
    #[arg(long)]
    synsets: PathBuf,
    #[arg(long)]
    edges: PathBuf,
    /// Output directory for synsets.tsv and edges.tsv.
    #[arg(long)]
    out: PathBuf,
    /// Synset added above all roots when the input has more than one.
    #[arg(long)]
    virtual_root: Option<String>,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long)]
    taxonomy: PathBuf,
    #[arg(long)]
    glosses: PathBuf,
    #[arg(long)]
    seed: u64,
    /// examples.tsv output.
    #[arg(long)]
    out: PathBuf,
    /// Sampling rounds over each split.
    #[arg(long, default_value_t = 1)]
    triplets_per_synset: usize,
    /// Cap on validation and test triplets per split.
    #[arg(long)]
    max_triplets: Option<usize>,
    /// Also write the split of every synset.
    #[arg(long)]
    splits_out: Option<PathBuf>,
    /// Also write one occurrence key per line, in gloss order.
    #[arg(long)]
    keys_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EmbArgs {
    kind: EmbKind,
    /// One occurrence key per line.
    #[arg(long)]
    keys: PathBuf,
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Taxonomy directory (planted only).
    #[arg(long, required_if_eq("kind", "planted"))]
    taxonomy: Option<PathBuf>,
    /// Occurrence noise of layer 0 (planted only).
    #[arg(long, default_value_t = 0.05)]
    sigma: f64,
    /// Number of layers (planted only).
    #[arg(long, default_value_t = 1)]
    layers: usize,
    /// Relative noise increase per layer (planted only).
    #[arg(long, default_value_t = 0.0)]
    layer_growth: f64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum EmbKind {
    Random,
    Planted,
}

#[derive(Args, Debug, Clone, Default)]
struct ProbeFlags {
    /// TOML file with probe settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    projection_dim: Option<usize>,
    #[arg(long)]
    hidden_units: Option<usize>,
    #[arg(long)]
    dropout_rate: Option<f64>,
    #[arg(long)]
    l2_lambda: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    emb: PathBuf,
    #[arg(long)]
    examples: PathBuf,
    /// `all` or a layer index.
    #[arg(long, default_value = "all")]
    layer: String,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch loss and validation F1 as JSON.
    #[arg(long)]
    history: Option<PathBuf>,
    #[command(flatten)]
    probe: ProbeFlags,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    emb: PathBuf,
    #[arg(long)]
    examples: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
    /// Report with metrics and per-pair predictions.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    emb: PathBuf,
    /// One synset id per line.
    #[arg(long)]
    nodes: PathBuf,
    /// SCM1 score matrix output.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReconstructArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long, default_value = "tim")]
    metric: String,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// `parent \t child` edge list.
    #[arg(long)]
    out_tree: PathBuf,
    #[arg(long)]
    out_dot: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalTedArgs {
    /// `parent \t child` edge list.
    #[arg(long)]
    pred: PathBuf,
    /// Taxonomy directory.
    #[arg(long)]
    truth: PathBuf,
    /// One synset id per line; defaults to the nodes of the predicted tree.
    #[arg(long)]
    nodes: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportCommon {
    #[arg(long)]
    taxonomy: PathBuf,
    /// JSON report written by `eval --json`.
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportFactorsArgs {
    #[command(flatten)]
    common: ReportCommon,
    /// Factor name, or `all`.
    #[arg(long, default_value = "all")]
    factor: String,
    /// `lemma \t count` table, needed for the frequency factor.
    #[arg(long)]
    frequencies: Option<PathBuf>,
    /// Number of equal-population bins.
    #[arg(long, default_value_t = 10, conflicts_with = "edges")]
    bins: usize,
    /// Explicit ascending bin edges, comma separated.
    #[arg(long, value_delimiter = ',')]
    edges: Option<Vec<f64>>,
    #[arg(long, default_value_t = 100)]
    min_samples: usize,
    #[arg(long, default_value_t = 1000)]
    resamples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct ReportCategoriesArgs {
    #[command(flatten)]
    common: ReportCommon,
    /// Category root synset ids, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    roots: Vec<String>,
}

#[derive(Args, Debug)]
struct ReportLayersArgs {
    /// Saved sweep results; when absent the sweep is run from --emb/--examples.
    #[arg(long, conflicts_with_all = ["emb", "examples"])]
    sweep: Option<PathBuf>,
    #[arg(long, requires = "examples")]
    emb: Option<PathBuf>,
    #[arg(long, requires = "emb")]
    examples: Option<PathBuf>,
    #[arg(long, required_unless_present = "sweep")]
    seed: Option<u64>,
    #[arg(long, default_value = "test")]
    split: String,
    /// Where to save the raw sweep results.
    #[arg(long)]
    sweep_out: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    probe: ProbeFlags,
}

#[derive(Args, Debug)]
struct E2eArgs {
    #[arg(long, default_value_t = 50)]
    nodes: usize,
    #[arg(long, default_value_t = 0.05)]
    sigma: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "tim")]
    metric: String,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// 0 picks the default planted dimension.
    #[arg(long, default_value_t = 0)]
    dim: usize,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    out_tree: Option<PathBuf>,
    #[command(flatten)]
    probe: ProbeFlags,
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Import(_) => "import",
        Command::Sample(_) => "sample",
        Command::Emb(_) => "emb",
        Command::Train(_) => "train",
        Command::Eval(_) => "eval",
        Command::Score(_) => "score",
        Command::Reconstruct(_) => "reconstruct",
        Command::EvalTed(_) => "eval-ted",
        Command::ReportFactors(_) => "report-factors",
        Command::ReportCategories(_) => "report-categories",
        Command::ReportLayers(_) => "report-layers",
        Command::E2eSynthetic(_) => "e2e-synthetic",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let log = Logger { json: cli.log_json };
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.max(1))
        .build_global()
    {
        log.error(&format!("thread pool: {e}"), 1);
        return ExitCode::from(1);
    }
    let mut run = Run::new(command_name(&cli.command), log);
    match commands::dispatch(cli.command, &mut run) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            run.cleanup();
            let code = if is_missing_input(&e) { 2 } else { 1 };
            log.error(&format!("{e:#}"), code);
            ExitCode::from(code as u8)
        }
    }
}

fn is_missing_input(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<MissingInput>().is_some()
            || matches!(
                c.downcast_ref::<taxoprobe_core::Error>(),
                Some(taxoprobe_core::Error::Io { source, .. }) if source.kind() == std::io::ErrorKind::NotFound
            )
    })
}
