use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use seven::autoenc::{self, AutoencoderParams, TrainConfig};
use seven::corpus::{read_sentences, OovMode, StopWords, Tokenizer, Vocabulary};
use seven::embeddings::EmbeddingStore;
use seven::graph::{self, EdgeGraph, SelectionParams};
use seven::pipeline::{self, PipelineConfig};
use seven::query::{self, SearchSpace};
use seven::relvec::{build_relation_records, relation_strength, RelationStore};
use seven::simeval::{self, RelationSpace, SimilarityDataset, Variant};
use seven::{par, synth, Error, Result};

#[derive(Parser)]
#[command(name = "seven", version, about = "Build and query semantic vector networks")]
struct Cli {
    /// Worker threads (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run single-threaded.
    #[arg(long, global = true)]
    deterministic: bool,
    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct TokenArgs {
    /// Stopword list: a file, `default` or `none`.
    #[arg(long, default_value = "default")]
    stopwords: String,
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    lowercase: bool,
    /// Out-of-vocabulary handling: `drop` or `gap`.
    #[arg(long, default_value = "drop")]
    oov: OovMode,
}

impl TokenArgs {
    fn tokenizer(&self) -> Result<Tokenizer> {
        let stop = match self.stopwords.as_str() {
            "default" => StopWords::english(),
            "none" => StopWords::empty(),
            path => StopWords::load(path)?,
        };
        Ok(Tokenizer::new(stop).lowercase(self.lowercase).oov(self.oov))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Count tokens and write the vocabulary.
    BuildVocab {
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        #[arg(long, default_value_t = 100_000)]
        vocab_size: usize,
        #[command(flatten)]
        tokens: TokenArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Count co-occurrences and select PMI edges.
    BuildGraph {
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        #[arg(long, default_value_t = graph::DEFAULT_WINDOW)]
        window: usize,
        #[arg(long, default_value_t = graph::DEFAULT_MIN_COUNT)]
        min_count: u64,
        #[arg(long, default_value_t = graph::DEFAULT_TOP_K)]
        top_k: usize,
        /// Defaults to ten times the vocabulary size.
        #[arg(long)]
        edge_target: Option<usize>,
        #[command(flatten)]
        tokens: TokenArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Average sentence contexts into raw relation vectors.
    BuildRelvecs {
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        #[arg(long, default_value_t = graph::DEFAULT_WINDOW)]
        window: usize,
        #[command(flatten)]
        tokens: TokenArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the relation autoencoder.
    TrainAutoencoder {
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        relvecs: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        /// Code dimension m.
        #[arg(long, default_value_t = 10)]
        dim: usize,
        #[arg(long, default_value_t = 0.01)]
        lambda: f64,
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        #[arg(long, default_value_t = 256)]
        batch_size: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode both directions of every usable edge.
    Compress {
        #[arg(long)]
        relvecs: PathBuf,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every stage into a network directory.
    Build {
        #[arg(long)]
        config: PathBuf,
        /// Override a config entry, `key=value`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Correlate similarity scores with a graded word-pair dataset.
    #[command(name = "similarity-eval", alias = "eval")]
    SimilarityEval {
        #[arg(long)]
        network: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        dataset: Vec<PathBuf>,
        /// baseline, word or relation.
        #[arg(long, default_value = "relation")]
        variant: Variant,
        #[arg(long, default_value_t = simeval::DEFAULT_MU)]
        mu: f64,
        /// Relation vectors for neighbor matching: `r` (compressed) or `z` (raw).
        #[arg(long, default_value = "r")]
        space: String,
    },
    /// Inspect a network.
    Query {
        #[command(subcommand)]
        query: Query,
    },
    /// Write enriched per-word feature vectors.
    #[command(name = "export-enriched", alias = "export")]
    ExportEnriched {
        #[arg(long)]
        network: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a seeded synthetic corpus, embeddings and similarity set.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        sentences: Option<usize>,
        #[arg(long)]
        dim: Option<usize>,
    },
}

#[derive(Subcommand)]
enum Query {
    /// PMI neighbors of a word.
    Neighbors {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        word: String,
    },
    /// Nearest stored pairs to a probe pair.
    Relations {
        #[arg(long)]
        network: PathBuf,
        /// `a,b`
        #[arg(long)]
        pair: String,
        /// `z`, `r` or `diffvec`.
        #[arg(long, default_value = "r")]
        space: SearchSpace,
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn relation_space(s: &str) -> Result<RelationSpace> {
    match s {
        "r" | "compressed" => Ok(RelationSpace::Compressed),
        "z" | "raw" => Ok(RelationSpace::Raw),
        other => Err(Error::Config(format!("unknown relation space `{other}`"))),
    }
}

/// `threads` is the command-line setting, which wins over a build config.
fn run(command: Command, threads: Option<usize>) -> Result<()> {
    match command {
        Command::BuildVocab {
            input,
            vocab_size,
            tokens,
            out,
        } => {
            let tok = tokens.tokenizer()?;
            let sentences = read_sentences(&input)?;
            let counts = tok.count_tokens(&sentences);
            let vocab = Vocabulary::from_counts(&counts, vocab_size, &tok.stopwords);
            log::info!("{} sentences, {} words kept", sentences.len(), vocab.len());
            vocab.save(&out)
        }
        Command::BuildGraph {
            vocab,
            input,
            window,
            min_count,
            top_k,
            edge_target,
            tokens,
            out,
        } => {
            let vocab = Vocabulary::load(&vocab)?;
            let sentences = tokens.tokenizer()?.encode_all(&read_sentences(&input)?, &vocab);
            let counts = graph::count_cooccurrences(&sentences, window);
            let params = SelectionParams {
                top_k,
                edge_target: edge_target.unwrap_or(10 * vocab.len()),
                min_count,
            };
            let graph = graph::select_edges(&counts, params);
            log::info!("{} pairs counted, {} edges selected", counts.len(), graph.len());
            graph.save(&vocab, &out)
        }
        Command::BuildRelvecs {
            vocab,
            graph,
            embeddings,
            input,
            window,
            tokens,
            out,
        } => {
            let vocab = Vocabulary::load(&vocab)?;
            let graph = EdgeGraph::load(&graph, &vocab)?;
            let store = EmbeddingStore::load(&embeddings, &vocab)?;
            let sentences = tokens.tokenizer()?.encode_all(&read_sentences(&input)?, &vocab);
            let relations = build_relation_records(&sentences, &graph, &store, window);
            let norms: Vec<f64> = relations
                .records()
                .iter()
                .filter(|r| r.usable)
                .map(|r| relation_strength(&r.z))
                .collect();
            log::info!(
                "{} records, {} usable, mean |z| {:.4}",
                relations.len(),
                norms.len(),
                norms.iter().sum::<f64>() / norms.len().max(1) as f64
            );
            relations.save(&out)
        }
        Command::TrainAutoencoder {
            vocab,
            relvecs,
            embeddings,
            dim,
            lambda,
            epochs,
            batch_size,
            lr,
            seed,
            out,
        } => {
            let vocab = Vocabulary::load(&vocab)?;
            let store = EmbeddingStore::load(&embeddings, &vocab)?;
            let mut relations = RelationStore::load(&relvecs)?;
            relations.mark_usable(&store);
            let config = TrainConfig {
                code_dim: dim,
                lambda,
                epochs,
                batch_size,
                learning_rate: lr,
                seed,
                ..Default::default()
            };
            let (params, log) = autoenc::train(&relations, &store, &config)?;
            let mut stderr = io::stderr().lock();
            for e in &log.epochs {
                let held = e.holdout.map_or("-".to_string(), |h| format!("{:.6e}", h.total));
                writeln!(stderr, "epoch {}\ttrain {:.6e}\theld-out {held}", e.epoch, e.train.total)?;
            }
            params.save(&out)
        }
        Command::Compress { relvecs, params, out } => {
            let relations = RelationStore::load(&relvecs)?;
            let params = AutoencoderParams::load(&params)?;
            autoenc::compress_store(&relations, &params)?.save(&out)
        }
        Command::Build { config, overrides } => {
            let mut cfg = PipelineConfig::load(&config)?;
            let cwd = std::env::current_dir().map_err(|e| Error::io(".", e))?;
            for o in &overrides {
                let (k, v) = o
                    .split_once('=')
                    .ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
                cfg.set(k, v, &cwd)?;
            }
            cfg.validate()?;
            if threads.is_none() {
                par::configure_threads(cfg.effective_threads());
            }
            let report = pipeline::run_pipeline(&cfg)?;
            let mut out = io::stdout().lock();
            for s in &report.stages {
                let state = if s.skipped { "skipped" } else { "built" };
                writeln!(out, "{}\t{}\t{}\t{:.2}s", s.stage, s.file, state, s.seconds)?;
            }
            Ok(())
        }
        Command::SimilarityEval {
            network,
            dataset,
            variant,
            mu,
            space,
        } => {
            let net = pipeline::load_network(&network)?
                .with_mu(mu)
                .with_space(relation_space(&space)?);
            let mut out = io::stdout().lock();
            writeln!(out, "dataset\tvariant\tpearson\tspearman\taverage\tcoverage")?;
            for path in &dataset {
                let data = SimilarityDataset::load(path)?;
                let r = simeval::evaluate(&net, &data, variant)?;
                writeln!(
                    out,
                    "{}\t{:?}\t{:.4}\t{:.4}\t{:.4}\t{:.4}",
                    data.name, variant, r.pearson, r.spearman, r.average, r.coverage
                )?;
            }
            Ok(())
        }
        Command::Query { query } => match query {
            Query::Neighbors { network, word } => {
                let net = pipeline::load_network(&network)?;
                let mut out = io::stdout().lock();
                for (n, pmi) in query::neighbors_of(&net, &word)? {
                    writeln!(out, "{}\t{pmi:.4}", net.vocab.word(n))?;
                }
                Ok(())
            }
            Query::Relations {
                network,
                pair,
                space,
                top,
            } => {
                let net = pipeline::load_network(&network)?;
                let (a, b) = pair
                    .split_once(',')
                    .ok_or_else(|| Error::Config(format!("pair `{pair}` is not a,b")))?;
                let probe = (net.vocab.require(a.trim())?, net.vocab.require(b.trim())?);
                let mut out = io::stdout().lock();
                for hit in query::nearest_relations(&net, probe, top, space)? {
                    let (x, y) = hit.pair;
                    writeln!(out, "{}\t{}\t{:.4}", net.vocab.word(x), net.vocab.word(y), hit.cosine)?;
                }
                Ok(())
            }
        },
        Command::ExportEnriched { network, k, out } => {
            let net = pipeline::load_network(&network)?;
            let summary = query::export_enriched(&net, k, create(&out)?)?;
            log::info!(
                "wrote {} rows, {} without usable edges",
                summary.written,
                summary.isolated.len()
            );
            Ok(())
        }
        Command::Synth {
            out,
            seed,
            sentences,
            dim,
        } => {
            let mut cfg = synth::SynthConfig {
                seed,
                ..Default::default()
            };
            if let Some(n) = sentences {
                cfg.sentences = n;
            }
            if let Some(d) = dim {
                cfg.dim = d;
            }
            let corpus = synth::generate(&cfg)?;
            log::info!("{} tokens", corpus.tokens);
            corpus.write_all(&out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let threads = if cli.deterministic { Some(1) } else { cli.threads };
    if threads.is_some() {
        par::configure_threads(threads);
    }
    match run(cli.command, threads) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
