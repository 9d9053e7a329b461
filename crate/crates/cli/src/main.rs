mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use socialvec::{EmbeddingFormat, Mode};

#[derive(Debug, Parser)]
#[command(name = "socialvec", version, about = "Train and probe social entity embeddings from follow graphs")]
struct Cli {
    /// TOML pipeline config; explicit flags override its values. The
    /// synthetic-data commands also accept a bare generator config here.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for every random choice made by the command.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Count followers per account and write the entity vocabulary.
    BuildVocab {
        #[arg(long)]
        edges: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        threshold: ThresholdArgs,
    },
    /// Turn each user's follows into an entity context and write the corpus.
    BuildCorpus {
        #[arg(long)]
        edges: Option<PathBuf>,
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        min_entities: Option<usize>,
        #[arg(long)]
        max_entities: Option<usize>,
    },
    /// Print context-length statistics of a corpus.
    Stats {
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Train entity embeddings.
    Train(TrainArgs),
    /// List the entities most similar to one entity.
    Nearest {
        id: String,
        #[arg(short, default_value_t = 10)]
        k: usize,
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Rank entities against `b - a + c`.
    Analogy {
        a: String,
        b: String,
        c: String,
        #[arg(short, default_value_t = 10)]
        k: usize,
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Political orientation scores of entities.
    Bias {
        #[arg(required = true)]
        ids: Vec<String>,
        #[command(flatten)]
        anchors: AnchorArgs,
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Rank sources by political orientation and compare with poll scores.
    RankBias {
        /// File with one source id per line; defaults to the truth ids.
        #[arg(long)]
        sources: Option<PathBuf>,
        /// `account_id,score` CSV of poll scores.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Write `id<TAB>po<TAB>poll` rows for plotting.
        #[arg(long)]
        plot: Option<PathBuf>,
        #[command(flatten)]
        anchors: AnchorArgs,
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Train one classifier per trait and report held-out ROC AUC.
    PredictTraits {
        /// `user_id,trait,label` CSV.
        #[arg(long, alias = "data")]
        labels: Option<PathBuf>,
        /// Edge list of the labeled users' follows.
        #[arg(long)]
        follows: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Restrict to these traits.
        #[arg(long = "trait")]
        traits: Vec<String>,
    },
    /// Accounts most distinctive of one trait value by PMI.
    Pmi {
        #[arg(long = "trait")]
        trait_name: String,
        /// Trait value to characterize (1 or 0).
        #[arg(long, default_value_t = 1)]
        value: u8,
        #[arg(short, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = socialvec::traits::DEFAULT_MIN_SUPPORT)]
        min_support: u64,
        #[arg(long, alias = "data")]
        labels: Option<PathBuf>,
        #[arg(long)]
        follows: Option<PathBuf>,
    },
    /// Generate a synthetic follow graph with planted structure.
    SynthGen {
        #[command(flatten)]
        source: SynthSource,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score embeddings against planted structure, or run the whole
    /// synthetic benchmark when no embeddings are given.
    Bench {
        #[command(flatten)]
        source: SynthSource,
        /// Directory written by `synth-gen`.
        #[arg(long, requires = "embeddings")]
        data: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Skip the co-follow oracle comparison.
        #[arg(long)]
        no_oracle: bool,
    },
}

#[derive(Debug, Args)]
struct ThresholdArgs {
    /// Minimum follower count for an account to become an entity.
    #[arg(long)]
    threshold: Option<u64>,
    /// Require strictly more followers than the threshold.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct AnchorArgs {
    /// Conservative anchor entity.
    #[arg(long)]
    rep: Option<String>,
    /// Liberal anchor entity.
    #[arg(long)]
    dem: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    Default,
    Polarity,
    Traits,
}

#[derive(Debug, Args)]
struct SynthSource {
    /// Built-in generator settings, used when `--config` gives none.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Build vocabulary and corpus from an edge list instead.
    #[arg(long, conflicts_with = "corpus")]
    edges: Option<PathBuf>,
    #[command(flatten)]
    threshold: ThresholdArgs,
    #[arg(long)]
    min_entities: Option<usize>,
    /// Embedding output; `.bin` selects the binary format.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<EmbeddingFormat>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    min_lr: Option<f64>,
    #[arg(long, conflicts_with = "no_downsample")]
    downsample: Option<f64>,
    #[arg(long)]
    no_downsample: bool,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) if is_broken_pipe(&err) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn is_broken_pipe(err: &anyhow::Error) -> bool {
    err.chain()
        .filter_map(|e| e.downcast_ref::<std::io::Error>())
        .any(|e| e.kind() == std::io::ErrorKind::BrokenPipe)
}
