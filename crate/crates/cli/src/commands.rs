use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use socialvec::corpus::LengthSummary;
use socialvec::query::{binary_polarity_accuracy, load_id_list, political_orientation, rank_sources, spearman, NeighborIndex, Neighbor};
use socialvec::synth::{self, GroundTruth, RecoveryOptions, SynthConfig, EDGES_FILE};
use socialvec::train::train_with_progress;
use socialvec::traits::{predict_trait, top_distinctive, trait_definition, ClassifierHyper, LabeledUserDataset};
use socialvec::{
    build_contexts, corpus_stats, ContextCorpus, CorpusOptions, EmbeddingFormat, EmbeddingModel, EntityVocabulary,
    FollowGraph, KeyedVectors, PollGroundTruth, Threshold, TrainConfig,
};

/// `println!` that reports write failures, so a closed pipe ends the
/// command instead of panicking.
macro_rules! out {
    ($($arg:tt)*) => {
        writeln!(std::io::stdout().lock(), $($arg)*)?
    };
}

use crate::config::{require, PipelineConfig, DEFAULT_THRESHOLD};
use crate::{AnchorArgs, Cli, Command, Preset, SynthSource, ThresholdArgs, TrainArgs};

pub fn run(cli: Cli) -> Result<()> {
    let synth_command = matches!(cli.command, Command::SynthGen { .. } | Command::Bench { .. });
    let (config, synth_config) = match (&cli.config, synth_command) {
        (None, _) => (PipelineConfig::default(), None),
        (Some(path), false) => (PipelineConfig::load(path)?, None),
        (Some(path), true) => (PipelineConfig::default(), PipelineConfig::load_synth(path)?),
    };
    let ctx = Ctx {
        config,
        synth: synth_config,
        seed: cli.seed,
    };
    match cli.command {
        Command::BuildVocab { edges, out, threshold } => ctx.build_vocab(edges, out, threshold),
        Command::BuildCorpus {
            edges,
            vocab,
            out,
            min_entities,
            max_entities,
        } => ctx.build_corpus(edges, vocab, out, min_entities, max_entities),
        Command::Stats { corpus } => ctx.stats(corpus),
        Command::Train(args) => ctx.train(args),
        Command::Nearest { id, k, embeddings } => {
            let vectors = ctx.embeddings(embeddings)?;
            print_neighbors(&NeighborIndex::new(&vectors).nearest(&id, k)?)
        }
        Command::Analogy { a, b, c, k, embeddings } => {
            let vectors = ctx.embeddings(embeddings)?;
            print_neighbors(&NeighborIndex::new(&vectors).analogy(&a, &b, &c, k)?)
        }
        Command::Bias { ids, anchors, embeddings } => ctx.bias(ids, anchors, embeddings),
        Command::RankBias {
            sources,
            truth,
            plot,
            anchors,
            embeddings,
        } => ctx.rank_bias(sources, truth, plot, anchors, embeddings),
        Command::PredictTraits {
            labels,
            follows,
            embeddings,
            traits,
        } => ctx.predict_traits(labels, follows, embeddings, traits),
        Command::Pmi {
            trait_name,
            value,
            k,
            min_support,
            labels,
            follows,
        } => ctx.pmi(&trait_name, value, k, min_support, labels, follows),
        Command::SynthGen { source, out } => ctx.synth_gen(source, &out),
        Command::Bench {
            source,
            data,
            embeddings,
            out,
            no_oracle,
        } => ctx.bench(source, data, embeddings, out, no_oracle),
    }
}

struct Ctx {
    config: PipelineConfig,
    synth: Option<SynthConfig>,
    seed: Option<u64>,
}

fn print_neighbors(neighbors: &[Neighbor]) -> Result<()> {
    for (rank, n) in neighbors.iter().enumerate() {
        out!("{:>3}  {:<24} {:.4}", rank + 1, n.id, n.similarity);
    }
    Ok(())
}

fn load_graph(path: &Path) -> Result<FollowGraph> {
    FollowGraph::load_edges(path).with_context(|| format!("loading edge list {}", path.display()))
}

impl Ctx {
    fn threshold(&self, args: &ThresholdArgs) -> Threshold {
        let k = args.threshold.or(self.config.threshold).unwrap_or(DEFAULT_THRESHOLD);
        if args.strict || self.config.strict_threshold {
            Threshold::greater_than(k)
        } else {
            Threshold::at_least(k)
        }
    }

    fn corpus_options(&self, min_entities: Option<usize>, max_entities: Option<usize>) -> CorpusOptions {
        let defaults = CorpusOptions::default();
        CorpusOptions {
            min_entities: min_entities.or(self.config.min_entities).unwrap_or(defaults.min_entities),
            max_entities,
        }
    }

    fn embeddings(&self, flag: Option<PathBuf>) -> Result<KeyedVectors> {
        let path = require(flag, &self.config.paths.embeddings, "embeddings")?;
        KeyedVectors::load(&path, EmbeddingFormat::from_path(&path))
            .with_context(|| format!("loading embeddings {}", path.display()))
    }

    fn build_vocab(&self, edges: Option<PathBuf>, out: Option<PathBuf>, threshold: ThresholdArgs) -> Result<()> {
        let edges = require(edges, &self.config.paths.edges, "edges")?;
        let out = require(out, &self.config.paths.vocab, "vocab")?;
        let graph = load_graph(&edges)?;
        let popularity = graph.compute_popularity();
        let rule = self.threshold(&threshold);
        let vocab = popularity.select_entities(rule);
        vocab.save(&out).with_context(|| format!("writing vocabulary {}", out.display()))?;
        out!("users\t{}", graph.num_users());
        out!("edges\t{}", graph.num_edges());
        out!("accounts\t{}", popularity.len());
        out!("entities\t{}", vocab.len());
        Ok(())
    }

    fn build_corpus(
        &self,
        edges: Option<PathBuf>,
        vocab: Option<PathBuf>,
        out: Option<PathBuf>,
        min_entities: Option<usize>,
        max_entities: Option<usize>,
    ) -> Result<()> {
        let edges = require(edges, &self.config.paths.edges, "edges")?;
        let vocab_path = require(vocab, &self.config.paths.vocab, "vocab")?;
        let out = require(out, &self.config.paths.corpus, "corpus")?;
        let graph = load_graph(&edges)?;
        let vocab = EntityVocabulary::load(&vocab_path)
            .with_context(|| format!("loading vocabulary {}", vocab_path.display()))?;
        let corpus = build_contexts(&graph, &vocab, self.corpus_options(min_entities, max_entities))?;
        corpus.save(&out).with_context(|| format!("writing corpus {}", out.display()))?;
        out!("contexts\t{}", corpus.len());
        out!("dropped\t{}", corpus.dropped());
        out!("tokens\t{}", corpus.total_tokens());
        Ok(())
    }

    fn stats(&self, corpus: Option<PathBuf>) -> Result<()> {
        let path = require(corpus, &self.config.paths.corpus, "corpus")?;
        let corpus = ContextCorpus::load(&path).with_context(|| format!("loading corpus {}", path.display()))?;
        let stats = corpus_stats(&corpus)?;
        out!("users retained\t{}", stats.retained);
        out!("users dropped\t{}", stats.dropped);
        out!("entities\t{}", corpus.vocab_size());
        out!("mean entities per user\t{:.2}", stats.mean);
        out!("median entities per user\t{}", stats.median);
        out!("std dev\t{:.2}", stats.std_dev);
        let followers: Vec<usize> = corpus.token_counts().iter().map(|&c| c as usize).collect();
        if let Some(f) = LengthSummary::of(&followers) {
            out!("mean users per entity\t{:.2}", f.mean);
            out!("median users per entity\t{}", f.median);
        }
        Ok(())
    }

    fn train_config(&self, args: &TrainArgs) -> TrainConfig {
        let mut cfg = self.config.train.clone().unwrap_or_default();
        macro_rules! set {
            ($field:ident, $value:expr) => {
                if let Some(v) = $value {
                    cfg.$field = v;
                }
            };
        }
        set!(dim, args.dim);
        set!(epochs, args.epochs);
        set!(negatives, args.negatives);
        set!(mode, args.mode);
        set!(initial_lr, args.lr);
        set!(min_lr, args.min_lr);
        set!(workers, args.workers);
        set!(seed, self.seed.or(self.config.seed));
        if args.no_downsample {
            cfg.downsample = None;
        } else if args.downsample.is_some() {
            cfg.downsample = args.downsample;
        }
        if args.window.is_some() {
            cfg.window = args.window;
        }
        cfg
    }

    fn train(&self, args: TrainArgs) -> Result<()> {
        let cfg = self.train_config(&args);
        let out = require(args.out.clone(), &self.config.paths.embeddings, "out")?;
        let (vocab, corpus) = match args.edges.clone() {
            Some(edges) => {
                let graph = load_graph(&edges)?;
                let vocab = graph.compute_popularity().select_entities(self.threshold(&args.threshold));
                let corpus = build_contexts(&graph, &vocab, self.corpus_options(args.min_entities, None))?;
                (vocab, corpus)
            }
            None => {
                let corpus_path = require(args.corpus.clone(), &self.config.paths.corpus, "corpus")?;
                let vocab_path = require(args.vocab.clone(), &self.config.paths.vocab, "vocab")?;
                let corpus = ContextCorpus::load(&corpus_path)
                    .with_context(|| format!("loading corpus {}", corpus_path.display()))?;
                let vocab = EntityVocabulary::load(&vocab_path)
                    .with_context(|| format!("loading vocabulary {}", vocab_path.display()))?;
                (vocab, corpus)
            }
        };
        eprintln!(
            "training {} on {} contexts, {} entities, dim {}, {} worker(s)",
            cfg.mode,
            corpus.len(),
            vocab.len(),
            cfg.dim,
            cfg.workers
        );
        let epochs = cfg.epochs;
        let mut model = EmbeddingModel::init(vocab, cfg)?;
        let report = train_with_progress(&mut model, &corpus, |e| {
            eprintln!(
                "epoch {}/{epochs}  loss {:.4}  lr {:.5}  updates {}  {:.1}s",
                e.epoch + 1,
                e.mean_loss,
                e.lr,
                e.updates,
                e.elapsed.as_secs_f64()
            );
        })?;
        let format = args.format.unwrap_or_else(|| EmbeddingFormat::from_path(&out));
        model
            .save_embeddings(&out, format)
            .with_context(|| format!("writing embeddings {}", out.display()))?;
        eprintln!(
            "{} updates in {:.1}s ({:.0}/s)",
            report.updates,
            report.elapsed.as_secs_f64(),
            report.updates_per_second()
        );
        out!("wrote {} vectors to {}", model.len(), out.display());
        Ok(())
    }

    fn bias(&self, ids: Vec<String>, anchors: AnchorArgs, embeddings: Option<PathBuf>) -> Result<()> {
        let vectors = self.embeddings(embeddings)?;
        let anchors = self.config.anchors(anchors.rep, anchors.dem)?;
        for id in ids {
            out!("{id}\t{:+.4}", political_orientation(&vectors, &id, &anchors)?);
        }
        Ok(())
    }

    fn rank_bias(
        &self,
        sources: Option<PathBuf>,
        truth: Option<PathBuf>,
        plot: Option<PathBuf>,
        anchors: AnchorArgs,
        embeddings: Option<PathBuf>,
    ) -> Result<()> {
        let vectors = self.embeddings(embeddings)?;
        let anchors = self.config.anchors(anchors.rep, anchors.dem)?;
        let truth = match truth.or_else(|| self.config.paths.truth.clone()) {
            Some(path) => Some(PollGroundTruth::load(&path).with_context(|| format!("loading poll scores {}", path.display()))?),
            None => None,
        };
        let ids = match (sources.or_else(|| self.config.paths.sources.clone()), &truth) {
            (Some(path), _) => load_id_list(&path).with_context(|| format!("loading sources {}", path.display()))?,
            (None, Some(t)) => t.ids().map(str::to_owned).collect(),
            (None, None) => bail!("missing --sources or --truth"),
        };
        let ranked = rank_sources(&vectors, &ids, &anchors)?;
        let poll = |id: &str| truth.as_ref().and_then(|t| t.rows().iter().find(|(t, _)| t == id).map(|(_, s)| *s));

        out!("rank\tsource\tPO\tpoll");
        for (i, (id, po)) in ranked.iter().enumerate() {
            let score = poll(id).map_or("-".to_string(), |s| format!("{s:+.3}"));
            out!("{}\t{id}\t{po:+.4}\t{score}", i + 1);
        }
        if truth.is_some() {
            let scored: Vec<(String, f64)> = ranked.iter().filter(|(id, _)| poll(id).is_some()).cloned().collect();
            let matched = PollGroundTruth::new(scored.iter().map(|(id, _)| (id.clone(), poll(id).expect("filtered"))).collect())?;
            out!("spearman\t{:.4}", spearman(&scored, matched.rows())?);
            out!("binary accuracy\t{:.4}", binary_polarity_accuracy(&scored, &matched)?);
        }
        if let Some(path) = plot {
            let mut out = String::from("source\tpo\tpoll\n");
            for (id, po) in &ranked {
                let score = poll(id).map_or(String::new(), |s| s.to_string());
                out.push_str(&format!("{id}\t{po}\t{score}\n"));
            }
            fs::write(&path, out).with_context(|| format!("writing plot data {}", path.display()))?;
        }
        Ok(())
    }

    fn labeled_dataset(&self, labels: Option<PathBuf>, follows: Option<PathBuf>) -> Result<LabeledUserDataset> {
        let labels = require(labels, &self.config.paths.labels, "labels")?;
        let follows = require(follows, &self.config.paths.follows, "follows")?;
        LabeledUserDataset::load(&labels, &follows)
            .with_context(|| format!("loading labeled users {} with follows {}", labels.display(), follows.display()))
    }

    fn predict_traits(
        &self,
        labels: Option<PathBuf>,
        follows: Option<PathBuf>,
        embeddings: Option<PathBuf>,
        traits: Vec<String>,
    ) -> Result<()> {
        let dataset = self.labeled_dataset(labels, follows)?;
        let vectors = self.embeddings(embeddings)?;
        let names = if traits.is_empty() { dataset.trait_names() } else { traits };
        let seed = self.seed.or(self.config.seed).unwrap_or(1);
        if dataset.without_follows > 0 {
            eprintln!("{} labeled user(s) without follows were dropped", dataset.without_follows);
        }
        out!("trait\tclasses\tAUC\ttrain\ttest\tuncovered");
        for name in names {
            let classes = trait_definition(&name).map_or("0/1".to_string(), |d| format!("{}/{}", d.negative, d.positive));
            let r = predict_trait(&dataset, &name, &vectors, &ClassifierHyper::default(), seed)
                .with_context(|| format!("trait {name}"))?;
            out!(
                "{name}\t{classes}\t{:.3}\t{}\t{}\t{}",
                r.report.auc,
                r.train_size,
                r.report.evaluated,
                r.report.uncovered + r.train_uncovered
            );
        }
        Ok(())
    }

    fn pmi(
        &self,
        trait_name: &str,
        value: u8,
        k: usize,
        min_support: u64,
        labels: Option<PathBuf>,
        follows: Option<PathBuf>,
    ) -> Result<()> {
        let value = match value {
            0 => false,
            1 => true,
            v => bail!("--value must be 0 or 1, got {v}"),
        };
        let dataset = self.labeled_dataset(labels, follows)?;
        let class = trait_definition(trait_name).map_or_else(
            || u8::from(value).to_string(),
            |d| if value { d.positive } else { d.negative }.to_string(),
        );
        out!("{trait_name} = {class}");
        for (i, (id, pmi)) in top_distinctive(trait_name, value, &dataset, k, min_support).iter().enumerate() {
            out!("{:>3}  {id:<24} {:.4}", i + 1, pmi.as_f64());
        }
        Ok(())
    }

    fn synth_config(&self, source: &SynthSource) -> Result<SynthConfig> {
        let mut config = match (source.preset, &self.synth) {
            (Some(preset), _) => preset_config(preset),
            (None, Some(config)) => config.clone(),
            (None, None) => SynthConfig::default_benchmark(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        Ok(config)
    }

    fn synth_gen(&self, source: SynthSource, out: &Path) -> Result<()> {
        let config = self.synth_config(&source)?;
        let data = synth::generate(&config)?;
        data.write(out).with_context(|| format!("writing synthetic data to {}", out.display()))?;
        out!("users\t{}", data.truth.users.len());
        out!("entities\t{}", data.truth.entities.len());
        out!("edges\t{}", data.edges.len());
        Ok(())
    }

    fn bench(
        &self,
        source: SynthSource,
        data: Option<PathBuf>,
        embeddings: Option<PathBuf>,
        out: Option<PathBuf>,
        no_oracle: bool,
    ) -> Result<()> {
        let seed = self.seed.unwrap_or(1);
        let options = RecoveryOptions {
            seed,
            oracle: !no_oracle,
            ..RecoveryOptions::default()
        };
        let report = match data {
            Some(dir) => {
                let vectors = self.embeddings(embeddings)?;
                let truth = GroundTruth::read_dir(&dir).with_context(|| format!("loading ground truth from {}", dir.display()))?;
                let graph = load_graph(&dir.join(EDGES_FILE))?;
                synth::evaluate_recovery(&vectors, &truth, &graph, &options)?
            }
            None => {
                if embeddings.is_some() {
                    bail!("--embeddings needs --data");
                }
                let config = self.synth_config(&source)?;
                let run = synth::run_benchmark(&config, &synth::benchmark_train_config(seed), &options)?;
                eprintln!(
                    "trained {} entities: {} updates in {:.1}s",
                    run.vectors.len(),
                    run.train.updates,
                    run.train.elapsed.as_secs_f64()
                );
                run.report
            }
        };
        let text = report.to_tsv();
        write!(std::io::stdout().lock(), "{text}")?;
        if let Some(path) = out {
            let file = File::create(&path).with_context(|| format!("writing report {}", path.display()))?;
            let mut w = BufWriter::new(file);
            w.write_all(text.as_bytes())
                .and_then(|_| w.flush())
                .map_err(|e| anyhow!("writing report {}: {e}", path.display()))?;
        }
        Ok(())
    }
}

fn preset_config(preset: Preset) -> SynthConfig {
    match preset {
        Preset::Default => SynthConfig::default_benchmark(),
        Preset::Polarity => SynthConfig::polarity_benchmark(),
        Preset::Traits => SynthConfig::trait_benchmark(),
    }
}
