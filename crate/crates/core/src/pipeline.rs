//! End-to-end build into a network directory, and loading it back.
//!
//! A directory holds one file per stage plus `config.txt` and
//! `manifest.tsv`. Each manifest line records a file, the fingerprint of
//! everything the stage read (upstream file digests and its own settings)
//! and the SHA-256 of the file. A stage is skipped when its fingerprint and
//! file digest both still match.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::autoenc::{self, AutoencoderParams, LrSchedule, Optimizer, TrainConfig};
use crate::corpus::{read_sentences, OovMode, StopWords, TokenizedSentence, Tokenizer, Vocabulary};
use crate::embeddings::EmbeddingStore;
use crate::error::{Error, Result};
use crate::graph::{self, EdgeGraph, SelectionParams};
use crate::relvec::{build_relation_records, RelationStore};
use crate::simeval::NetworkHandle;

pub const VOCAB_FILE: &str = "vocab.tsv";
pub const EMBEDDINGS_FILE: &str = "embeddings.txt";
pub const EDGES_FILE: &str = "edges.tsv";
pub const RELVECS_FILE: &str = "relvecs.bin";
pub const PARAMS_FILE: &str = "params.bin";
pub const COMPRESSED_FILE: &str = "relvecs-compressed.bin";
pub const CONFIG_FILE: &str = "config.txt";
pub const MANIFEST_FILE: &str = "manifest.tsv";

const MANIFEST_HEADER: &str = "# seven network manifest v1";

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum StopwordSource {
    #[default]
    Bundled,
    Disabled,
    File(PathBuf),
}

impl StopwordSource {
    pub fn load(&self) -> Result<StopWords> {
        match self {
            StopwordSource::Bundled => Ok(StopWords::english()),
            StopwordSource::Disabled => Ok(StopWords::empty()),
            StopwordSource::File(p) => StopWords::load(p),
        }
    }

    fn describe(&self) -> String {
        match self {
            StopwordSource::Bundled => "default".into(),
            StopwordSource::Disabled => "none".into(),
            StopwordSource::File(p) => p.display().to_string(),
        }
    }
}

/// Every tunable of a build. Text form is flat `key = value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub inputs: Vec<PathBuf>,
    pub embeddings: PathBuf,
    pub out: PathBuf,
    pub stopwords: StopwordSource,
    pub lowercase: bool,
    pub oov: OovMode,
    pub vocab_size: usize,
    pub window: usize,
    pub min_count: u64,
    pub top_k: usize,
    /// Defaults to ten edges per vocabulary slot.
    pub edge_target: Option<usize>,
    pub train: TrainConfig,
    pub threads: Option<usize>,
    pub deterministic: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            inputs: Vec::new(),
            embeddings: PathBuf::new(),
            out: PathBuf::from("network"),
            stopwords: StopwordSource::Bundled,
            lowercase: false,
            oov: OovMode::Drop,
            vocab_size: 100_000,
            window: graph::DEFAULT_WINDOW,
            min_count: graph::DEFAULT_MIN_COUNT,
            top_k: graph::DEFAULT_TOP_K,
            edge_target: None,
            train: TrainConfig::default(),
            threads: None,
            deterministic: false,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("bad value `{value}` for `{key}`"))),
    }
}

fn resolve(base: &Path, value: &str) -> PathBuf {
    let p = PathBuf::from(value);
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

impl PipelineConfig {
    pub fn edge_target(&self) -> usize {
        self.edge_target.unwrap_or(10 * self.vocab_size)
    }

    pub fn selection(&self) -> SelectionParams {
        SelectionParams {
            top_k: self.top_k,
            edge_target: self.edge_target(),
            min_count: self.min_count,
        }
    }

    pub fn tokenizer(&self) -> Result<Tokenizer> {
        Ok(Tokenizer::new(self.stopwords.load()?)
            .lowercase(self.lowercase)
            .oov(self.oov))
    }

    /// Applies one `key = value` setting. Relative paths resolve against
    /// `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "inputs" | "input" => {
                self.inputs = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| resolve(base, s))
                    .collect()
            }
            "embeddings" => self.embeddings = resolve(base, v),
            "out" => self.out = resolve(base, v),
            "stopwords" => {
                self.stopwords = match v {
                    "default" => StopwordSource::Bundled,
                    "none" => StopwordSource::Disabled,
                    p => StopwordSource::File(resolve(base, p)),
                }
            }
            "lowercase" => self.lowercase = parse_bool(key, v)?,
            "oov" => self.oov = v.parse()?,
            "vocab_size" => self.vocab_size = parse_value(key, v)?,
            "window" => self.window = parse_value(key, v)?,
            "min_count" => self.min_count = parse_value(key, v)?,
            "top_k" => self.top_k = parse_value(key, v)?,
            "edge_target" => {
                self.edge_target = match v {
                    "auto" => None,
                    n => Some(parse_value(key, n)?),
                }
            }
            "code_dim" => self.train.code_dim = parse_value(key, v)?,
            "lambda" => self.train.lambda = parse_value(key, v)?,
            "epochs" => self.train.epochs = parse_value(key, v)?,
            "batch_size" => self.train.batch_size = parse_value(key, v)?,
            "learning_rate" => self.train.learning_rate = parse_value(key, v)?,
            "lr_decay" => {
                let f: f64 = parse_value(key, v)?;
                self.train.schedule = if f == 1.0 {
                    LrSchedule::Constant
                } else {
                    LrSchedule::Exponential { factor: f }
                };
            }
            "optimizer" => {
                self.train.optimizer = match v {
                    "adam" => match self.train.optimizer {
                        o @ Optimizer::Adam { .. } => o,
                        Optimizer::Sgd => Optimizer::default(),
                    },
                    "sgd" => Optimizer::Sgd,
                    _ => return Err(Error::Config(format!("unknown optimizer `{v}`"))),
                }
            }
            k @ ("beta1" | "beta2" | "epsilon") => {
                let x: f64 = parse_value(k, v)?;
                match &mut self.train.optimizer {
                    Optimizer::Adam {
                        beta1,
                        beta2,
                        epsilon,
                    } => match k {
                        "beta1" => *beta1 = x,
                        "beta2" => *beta2 = x,
                        _ => *epsilon = x,
                    },
                    Optimizer::Sgd => log::warn!("`{k}` ignored with sgd"),
                }
            }
            "seed" => self.train.seed = parse_value(key, v)?,
            "holdout" => self.train.holdout = parse_value(key, v)?,
            "threads" => {
                self.threads = match v {
                    "auto" => None,
                    n => Some(parse_value(key, n)?),
                }
            }
            "deterministic" => self.deterministic = parse_bool(key, v)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut config = PipelineConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            config
                .set(k, v, base)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Every key in a fixed order, so the snapshot diffs cleanly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let inputs: Vec<String> = self.inputs.iter().map(|p| p.display().to_string()).collect();
        let t = &self.train;
        let _ = writeln!(s, "inputs = {}", inputs.join(","));
        let _ = writeln!(s, "embeddings = {}", self.embeddings.display());
        let _ = writeln!(s, "out = {}", self.out.display());
        let _ = writeln!(s, "stopwords = {}", self.stopwords.describe());
        let _ = writeln!(s, "lowercase = {}", self.lowercase);
        let _ = writeln!(s, "oov = {}", self.oov);
        let _ = writeln!(s, "vocab_size = {}", self.vocab_size);
        let _ = writeln!(s, "window = {}", self.window);
        let _ = writeln!(s, "min_count = {}", self.min_count);
        let _ = writeln!(s, "top_k = {}", self.top_k);
        match self.edge_target {
            Some(e) => writeln!(s, "edge_target = {e}"),
            None => writeln!(s, "edge_target = auto"),
        }
        .ok();
        let _ = writeln!(s, "code_dim = {}", t.code_dim);
        let _ = writeln!(s, "lambda = {}", t.lambda);
        let _ = writeln!(s, "epochs = {}", t.epochs);
        let _ = writeln!(s, "batch_size = {}", t.batch_size);
        let _ = writeln!(s, "learning_rate = {}", t.learning_rate);
        let decay = match t.schedule {
            LrSchedule::Constant => 1.0,
            LrSchedule::Exponential { factor } => factor,
        };
        let _ = writeln!(s, "lr_decay = {decay}");
        match t.optimizer {
            Optimizer::Sgd => {
                let _ = writeln!(s, "optimizer = sgd");
            }
            Optimizer::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                let _ = writeln!(s, "optimizer = adam");
                let _ = writeln!(s, "beta1 = {beta1}");
                let _ = writeln!(s, "beta2 = {beta2}");
                let _ = writeln!(s, "epsilon = {epsilon}");
            }
        }
        let _ = writeln!(s, "seed = {}", t.seed);
        let _ = writeln!(s, "holdout = {}", t.holdout);
        match self.threads {
            Some(n) => writeln!(s, "threads = {n}"),
            None => writeln!(s, "threads = auto"),
        }
        .ok();
        let _ = writeln!(s, "deterministic = {}", self.deterministic);
        s
    }

    /// Checks every setting and that the input files exist.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.inputs.is_empty() {
            return bad("no input files".into());
        }
        for p in self.inputs.iter().chain([&self.embeddings]) {
            if !p.is_file() {
                return bad(format!("{} does not exist", p.display()));
            }
        }
        if let StopwordSource::File(p) = &self.stopwords {
            if !p.is_file() {
                return bad(format!("stopword list {} does not exist", p.display()));
            }
        }
        if self.vocab_size == 0 || self.window == 0 || self.top_k == 0 || self.edge_target() == 0 {
            return bad("vocab_size, window, top_k and edge_target must be positive".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        if let Optimizer::Adam { beta1, beta2, epsilon } = self.train.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || epsilon.is_nan() || epsilon <= 0.0 {
                return bad("adam needs beta1, beta2 in [0, 1) and epsilon > 0".into());
            }
        }
        if let LrSchedule::Exponential { factor } = self.train.schedule {
            if !(factor > 0.0 && factor.is_finite()) {
                return bad("lr_decay must be positive".into());
            }
        }
        self.train.validate()
    }

    /// Thread count to use: one when deterministic mode is on.
    pub fn effective_threads(&self) -> Option<usize> {
        if self.deterministic {
            Some(1)
        } else {
            self.threads
        }
    }
}

fn hex_digest(h: Sha256) -> String {
    hex::encode(h.finalize())
}

pub fn file_digest(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex_digest(h))
}

/// Order-sensitive hash over a list of `key=value` settings.
struct Fingerprint(Sha256);

impl Fingerprint {
    fn new(stage: &str) -> Self {
        let mut h = Sha256::new();
        h.update(stage.as_bytes());
        Fingerprint(h)
    }

    fn field(mut self, key: &str, value: impl std::fmt::Display) -> Self {
        self.0.update(format!("\n{key}={value}").as_bytes());
        self
    }

    fn finish(self) -> String {
        hex_digest(self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub fingerprint: String,
    pub sha256: String,
}

/// `file<TAB>fingerprint<TAB>sha256` lines in build order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    entries: BTreeMap<String, ManifestEntry>,
}

const BUILD_ORDER: [&str; 7] = [
    CONFIG_FILE,
    VOCAB_FILE,
    EMBEDDINGS_FILE,
    EDGES_FILE,
    RELVECS_FILE,
    PARAMS_FILE,
    COMPRESSED_FILE,
];

impl Manifest {
    pub fn get(&self, file: &str) -> Option<&ManifestEntry> {
        self.entries.get(file)
    }

    pub fn files(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    fn set(&mut self, file: &str, fingerprint: String, sha256: String) {
        self.entries.insert(file.to_string(), ManifestEntry { fingerprint, sha256 });
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{MANIFEST_HEADER}\n");
        for f in BUILD_ORDER {
            if let Some(e) = self.entries.get(f) {
                let _ = writeln!(s, "{f}\t{}\t{}", e.fingerprint, e.sha256);
            }
        }
        s
    }

    pub fn read<R: BufRead>(reader: R, name: &str) -> Result<Self> {
        let mut m = Manifest::default();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 || !BUILD_ORDER.contains(&f[0]) {
                return Err(Error::format(name, n + 1, "expected `file<TAB>fingerprint<TAB>sha256`"));
            }
            m.set(f[0], f[1].to_string(), f[2].to_string());
        }
        Ok(m)
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(MANIFEST_FILE);
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        Self::read(BufReader::new(file), &path.display().to_string())
    }

    fn save(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join(MANIFEST_FILE), self.to_text().as_bytes())
    }

    /// Recomputes the digest of every listed file that exists. Missing
    /// files are reported by the caller.
    pub fn verify(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        for (f, e) in &self.entries {
            let path = dir.join(f);
            if path.exists() && file_digest(&path)? != e.sha256 {
                return Err(Error::Checksum(path.display().to_string()));
            }
        }
        Ok(())
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Peak resident set size in KiB, where the platform reports it.
pub fn peak_memory_kib() -> Option<u64> {
    let status = fs::read_to_string("/proc/self/status").ok()?;
    status
        .lines()
        .find_map(|l| l.strip_prefix("VmHWM:"))?
        .split_whitespace()
        .next()?
        .parse()
        .ok()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub stage: &'static str,
    pub file: &'static str,
    pub skipped: bool,
    pub seconds: f64,
    pub peak_kib: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildReport {
    pub dir: PathBuf,
    pub stages: Vec<StageReport>,
    pub training: Option<autoenc::TrainingLog>,
}

impl BuildReport {
    /// Names of the stages that actually ran.
    pub fn ran(&self) -> Vec<&'static str> {
        self.stages.iter().filter(|s| !s.skipped).map(|s| s.stage).collect()
    }
}

struct Build<'a> {
    config: &'a PipelineConfig,
    dir: PathBuf,
    manifest: Manifest,
    sentences: Option<Vec<String>>,
    tokenized: Option<Vec<TokenizedSentence>>,
    corpus_digest: String,
    stop_digest: String,
    report: BuildReport,
}

impl Build<'_> {
    fn digest(&self, file: &str) -> String {
        self.manifest
            .get(file)
            .map(|e| e.sha256.clone())
            .unwrap_or_default()
    }

    fn sentences(&mut self) -> Result<&[String]> {
        if self.sentences.is_none() {
            let s = read_sentences(&self.config.inputs)?;
            log::info!("read {} sentences", s.len());
            self.sentences = Some(s);
        }
        Ok(self.sentences.as_deref().unwrap())
    }

    fn tokenized(&mut self) -> Result<&[TokenizedSentence]> {
        if self.tokenized.is_none() {
            let vocab = Vocabulary::load(self.dir.join(VOCAB_FILE))?;
            let tok = self.config.tokenizer()?;
            let t = tok.encode_all(self.sentences()?, &vocab);
            self.tokenized = Some(t);
        }
        Ok(self.tokenized.as_deref().unwrap())
    }

    fn embeddings(&self) -> Result<(Vocabulary, EmbeddingStore)> {
        let vocab = Vocabulary::load(self.dir.join(VOCAB_FILE))?;
        let store = EmbeddingStore::load(self.dir.join(EMBEDDINGS_FILE), &vocab)?;
        Ok((vocab, store))
    }

    fn up_to_date(&self, file: &str, fingerprint: &str) -> Result<bool> {
        let Some(e) = self.manifest.get(file) else {
            return Ok(false);
        };
        let path = self.dir.join(file);
        Ok(e.fingerprint == fingerprint && path.is_file() && file_digest(&path)? == e.sha256)
    }

    fn stage<F>(&mut self, stage: &'static str, file: &'static str, fingerprint: String, run: F) -> Result<()>
    where
        F: FnOnce(&mut Self, &Path) -> Result<()>,
    {
        let wrap = |e: Error| Error::Stage {
            stage,
            source: Box::new(e),
        };
        if self.up_to_date(file, &fingerprint).map_err(wrap)? {
            log::info!("{stage}: up to date, skipped");
            self.report.stages.push(StageReport {
                stage,
                file,
                skipped: true,
                seconds: 0.0,
                peak_kib: None,
            });
            return Ok(());
        }
        let start = Instant::now();
        let path = self.dir.join(file);
        let tmp = self.dir.join(format!("{file}.partial"));
        run(self, &tmp).map_err(wrap)?;
        fs::rename(&tmp, &path).map_err(|e| wrap(Error::io(&path, e)))?;
        let sha = file_digest(&path).map_err(wrap)?;
        self.manifest.set(file, fingerprint, sha);
        self.manifest.save(&self.dir).map_err(wrap)?;
        let seconds = start.elapsed().as_secs_f64();
        let peak_kib = peak_memory_kib();
        log::info!(
            "{stage}: wrote {file} in {seconds:.2}s, peak memory {}",
            peak_kib.map_or("n/a".into(), |k| format!("{:.1} MiB", k as f64 / 1024.0))
        );
        self.report.stages.push(StageReport {
            stage,
            file,
            skipped: false,
            seconds,
            peak_kib,
        });
        Ok(())
    }
}

fn corpus_digest(inputs: &[PathBuf]) -> Result<String> {
    let mut h = Sha256::new();
    for p in inputs {
        h.update(file_digest(p)?.as_bytes());
        h.update(b"\n");
    }
    Ok(hex_digest(h))
}

/// Runs every stage whose inputs changed since the last build of
/// `config.out`, writing the manifest after each one.
pub fn run_pipeline(config: &PipelineConfig) -> Result<BuildReport> {
    config.validate()?;
    let dir = config.out.clone();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let manifest = match Manifest::load(&dir) {
        Ok(m) => m,
        Err(Error::Io { .. }) => Manifest::default(),
        Err(e) => {
            log::warn!("ignoring unreadable manifest: {e}");
            Manifest::default()
        }
    };
    let stop_digest = match &config.stopwords {
        StopwordSource::File(p) => file_digest(p)?,
        other => other.describe(),
    };
    let mut b = Build {
        config,
        dir: dir.clone(),
        manifest,
        sentences: None,
        tokenized: None,
        corpus_digest: corpus_digest(&config.inputs)?,
        stop_digest,
        report: BuildReport {
            dir,
            stages: Vec::new(),
            training: None,
        },
    };

    let snapshot = config.to_text();
    let fp = Fingerprint::new("config").field("text", &snapshot).finish();
    b.stage("config", CONFIG_FILE, fp, |_, path| {
        fs::write(path, snapshot.as_bytes()).map_err(|e| Error::io(path, e))
    })?;

    let fp = Fingerprint::new("vocab")
        .field("corpus", &b.corpus_digest)
        .field("stopwords", &b.stop_digest)
        .field("lowercase", config.lowercase)
        .field("vocab_size", config.vocab_size)
        .finish();
    b.stage("vocab", VOCAB_FILE, fp, |b, path| {
        let tok = b.config.tokenizer()?;
        let counts = tok.count_tokens(b.sentences()?);
        let vocab = Vocabulary::from_counts(&counts, b.config.vocab_size, &tok.stopwords);
        log::info!("vocabulary: {} words from {} distinct tokens", vocab.len(), counts.distinct());
        vocab.save(path)
    })?;

    let fp = Fingerprint::new("embeddings")
        .field("vocab", b.digest(VOCAB_FILE))
        .field("source", file_digest(&config.embeddings)?)
        .finish();
    b.stage("embeddings", EMBEDDINGS_FILE, fp, |b, path| {
        let vocab = Vocabulary::load(b.dir.join(VOCAB_FILE))?;
        let store = EmbeddingStore::load(&b.config.embeddings, &vocab)?;
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        store.write_text(&vocab, std::io::BufWriter::new(file))
    })?;

    let tokens = |f: Fingerprint, b: &Build| {
        f.field("vocab", b.digest(VOCAB_FILE))
            .field("corpus", &b.corpus_digest)
            .field("stopwords", &b.stop_digest)
            .field("lowercase", config.lowercase)
            .field("oov", config.oov)
            .field("window", config.window)
    };
    let fp = tokens(Fingerprint::new("graph"), &b)
        .field("min_count", config.min_count)
        .field("top_k", config.top_k)
        .field("edge_target", config.edge_target())
        .finish();
    b.stage("graph", EDGES_FILE, fp, |b, path| {
        let window = b.config.window;
        let selection = b.config.selection();
        let counts = graph::count_cooccurrences(b.tokenized()?, window);
        log::info!("{} co-occurring pairs", counts.len());
        let graph = graph::select_edges(&counts, selection);
        log::info!("selected {} edges", graph.len());
        let vocab = Vocabulary::load(b.dir.join(VOCAB_FILE))?;
        graph.save(&vocab, path)
    })?;

    let fp = tokens(Fingerprint::new("relvecs"), &b)
        .field("edges", b.digest(EDGES_FILE))
        .field("embeddings", b.digest(EMBEDDINGS_FILE))
        .finish();
    b.stage("relvecs", RELVECS_FILE, fp, |b, path| {
        let (vocab, store) = b.embeddings()?;
        let graph = EdgeGraph::load(b.dir.join(EDGES_FILE), &vocab)?;
        let window = b.config.window;
        let relations = build_relation_records(b.tokenized()?, &graph, &store, window);
        let usable = relations.records().iter().filter(|r| r.usable).count();
        log::info!("{} relation records, {usable} usable", relations.len());
        relations.save(path)
    })?;

    let t = &config.train;
    let fp = Fingerprint::new("train")
        .field("relvecs", b.digest(RELVECS_FILE))
        .field("embeddings", b.digest(EMBEDDINGS_FILE))
        .field("vocab", b.digest(VOCAB_FILE))
        .field("config", format!("{t:?}"))
        .finish();
    b.stage("train", PARAMS_FILE, fp, |b, path| {
        let (_, store) = b.embeddings()?;
        let mut relations = RelationStore::load(b.dir.join(RELVECS_FILE))?;
        relations.mark_usable(&store);
        let (params, log) = autoenc::train(&relations, &store, &b.config.train)?;
        if let (Some(first), Some(last)) = (log.initial(), log.last()) {
            log::info!(
                "training loss {:.6e} -> {:.6e} over {} examples",
                first.train.total,
                last.train.total,
                log.train_examples
            );
        }
        b.report.training = Some(log);
        params.save(path)
    })?;

    let fp = Fingerprint::new("compress")
        .field("params", b.digest(PARAMS_FILE))
        .field("relvecs", b.digest(RELVECS_FILE))
        .field("embeddings", b.digest(EMBEDDINGS_FILE))
        .finish();
    b.stage("compress", COMPRESSED_FILE, fp, |b, path| {
        let (_, store) = b.embeddings()?;
        let mut relations = RelationStore::load(b.dir.join(RELVECS_FILE))?;
        relations.mark_usable(&store);
        let params = AutoencoderParams::load(b.dir.join(PARAMS_FILE))?;
        autoenc::compress_store(&relations, &params)?.save(path)
    })?;

    Ok(b.report)
}

/// Loads a network directory after checking every listed file against the
/// manifest. Relation stores and parameters are optional; without the
/// compressed store, queries that need codes report it as missing.
pub fn load_network(dir: impl AsRef<Path>) -> Result<NetworkHandle> {
    let dir = dir.as_ref();
    let manifest = Manifest::load(dir)?;
    manifest.verify(dir)?;
    let listed = |f: &str| manifest.get(f).is_some() && dir.join(f).is_file();
    for f in [VOCAB_FILE, EMBEDDINGS_FILE, EDGES_FILE] {
        if !listed(f) {
            return Err(Error::Missing(dir.join(f).display().to_string()));
        }
    }
    let vocab = Vocabulary::load(dir.join(VOCAB_FILE))?;
    let embeddings = EmbeddingStore::load(dir.join(EMBEDDINGS_FILE), &vocab)?;
    let graph = EdgeGraph::load(dir.join(EDGES_FILE), &vocab)?;
    let d = embeddings.dim();
    let check_d = |what: &'static str, got: usize| {
        if got == d {
            Ok(())
        } else {
            Err(Error::Dimension { what, expected: d, got })
        }
    };

    let mut net = NetworkHandle::new(vocab, embeddings, graph);
    if listed(RELVECS_FILE) {
        let mut raw = RelationStore::load(dir.join(RELVECS_FILE))?;
        check_d("relation store vs embeddings", raw.dim())?;
        raw.mark_usable(&net.embeddings);
        net = net.with_raw(raw);
    }
    let params = if listed(PARAMS_FILE) {
        let p = AutoencoderParams::load(dir.join(PARAMS_FILE))?;
        check_d("autoencoder vs embeddings", p.dim)?;
        Some(p)
    } else {
        None
    };
    if listed(COMPRESSED_FILE) {
        let mut c = RelationStore::load(dir.join(COMPRESSED_FILE))?;
        check_d("compressed store vs embeddings", c.dim())?;
        if let Some(p) = &params {
            if p.code_dim != c.code_dim() {
                return Err(Error::Dimension {
                    what: "compressed codes vs autoencoder",
                    expected: p.code_dim,
                    got: c.code_dim(),
                });
            }
        }
        c.mark_usable(&net.embeddings);
        net = net.with_compressed(c);
    } else {
        log::warn!("{}: no compressed relation store; compressed queries disabled", dir.display());
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text_round_trips() {
        let base = Path::new("/data");
        let mut c = PipelineConfig::default();
        c.set("inputs", "a.txt, b.txt.gz", base).unwrap();
        c.set("embeddings", "/abs/vec.bin", base).unwrap();
        c.set("lambda", "0.1", base).unwrap();
        c.set("edge_target", "500", base).unwrap();
        c.set("lr_decay", "0.9", base).unwrap();
        c.set("stopwords", "none", base).unwrap();
        c.set("out", "net", base).unwrap();
        assert_eq!(c.inputs, vec![PathBuf::from("/data/a.txt"), PathBuf::from("/data/b.txt.gz")]);
        assert_eq!(c.embeddings, PathBuf::from("/abs/vec.bin"));
        let back = PipelineConfig::parse(&c.to_text(), base).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn config_rejects_unknown_keys_and_values() {
        let base = Path::new(".");
        assert!(matches!(PipelineConfig::parse("colour = red", base), Err(Error::Config(_))));
        assert!(matches!(PipelineConfig::parse("window = -3", base), Err(Error::Config(_))));
        assert!(matches!(PipelineConfig::parse("window 3", base), Err(Error::Config(_))));
        let c = PipelineConfig::parse("# comment\n\nwindow = 4 # trailing\n", base).unwrap();
        assert_eq!(c.window, 4);
    }

    #[test]
    fn edge_target_defaults_to_ten_per_word() {
        let c = PipelineConfig {
            vocab_size: 5000,
            ..Default::default()
        };
        assert_eq!(c.edge_target(), 50_000);
    }

    #[test]
    fn manifest_round_trip() {
        let mut m = Manifest::default();
        m.set(EDGES_FILE, "f2".into(), "s2".into());
        m.set(VOCAB_FILE, "f1".into(), "s1".into());
        let text = m.to_text();
        assert!(text.find(VOCAB_FILE).unwrap() < text.find(EDGES_FILE).unwrap());
        assert_eq!(Manifest::read(text.as_bytes(), "m").unwrap(), m);
        assert!(Manifest::read(&b"bogus.txt\ta\tb\n"[..], "m").is_err());
    }
}
