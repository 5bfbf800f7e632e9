//! Decoder-conditioned linear autoencoder for relation vectors.
//!
//! The encoder maps a `6d` relation vector to an `m`-dimensional code,
//! `r = A z + b`. The decoder reconstructs `z` from the code together with
//! both word vectors, `z* = B (v_i ⊕ r ⊕ v_j) + c`, so the code only has to
//! carry what the words themselves do not explain. Training minimizes
//! `‖z − z*‖² + λ‖r‖²` averaged over examples.

use std::borrow::Cow;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embeddings::EmbeddingStore;
use crate::error::{Error, Result};
use crate::par;
use crate::relvec::{block_swap, RelationStore};
use crate::WordId;

const MAGIC: &[u8; 4] = b"SVNP";

/// Examples per gradient shard. Fixed so that sums are reduced in the same
/// order whatever the thread count.
const GRAD_SHARD: usize = 32;

/// Code sizes evaluated for the released networks.
pub const CODE_DIM_PRESETS: [usize; 3] = [10, 20, 50];

/// Encoder `A` (`m × 6d`), `b` (`m`); decoder `B` (`6d × (m+2d)`), `c` (`6d`).
/// Matrices are row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderParams {
    pub dim: usize,
    pub code_dim: usize,
    pub lambda: f64,
    pub enc_w: Vec<f64>,
    pub enc_b: Vec<f64>,
    pub dec_w: Vec<f64>,
    pub dec_b: Vec<f64>,
}

impl AutoencoderParams {
    pub fn zeros(dim: usize, code_dim: usize, lambda: f64) -> Self {
        let (z, u) = (6 * dim, code_dim + 2 * dim);
        AutoencoderParams {
            dim,
            code_dim,
            lambda,
            enc_w: vec![0.0; code_dim * z],
            enc_b: vec![0.0; code_dim],
            dec_w: vec![0.0; z * u],
            dec_b: vec![0.0; z],
        }
    }

    /// Uniform `±sqrt(6 / (fan_in + fan_out))` weights, zero biases.
    pub fn init<R: Rng>(dim: usize, code_dim: usize, lambda: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(dim, code_dim, lambda);
        let (z, u) = (6 * dim, code_dim + 2 * dim);
        let a = (6.0 / (z + code_dim) as f64).sqrt();
        p.enc_w.iter_mut().for_each(|x| *x = rng.gen_range(-a..=a));
        let a = (6.0 / (u + z) as f64).sqrt();
        p.dec_w.iter_mut().for_each(|x| *x = rng.gen_range(-a..=a));
        p
    }

    pub fn z_dim(&self) -> usize {
        6 * self.dim
    }

    /// Width of the decoder input `v_i ⊕ r ⊕ v_j`.
    pub fn input_dim(&self) -> usize {
        self.code_dim + 2 * self.dim
    }

    pub fn is_finite(&self) -> bool {
        [&self.enc_w, &self.enc_b, &self.dec_w, &self.dec_b]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    fn check(&self, what: &'static str, expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::Dimension {
                what,
                expected,
                got,
            })
        }
    }

    /// `r = A z + b`.
    pub fn encode(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check("encoder input", self.z_dim(), z.len())?;
        Ok(self.encode_unchecked(z))
    }

    fn encode_unchecked(&self, z: &[f64]) -> Vec<f64> {
        self.enc_w
            .chunks_exact(z.len())
            .zip(&self.enc_b)
            .map(|(row, b)| dot(row, z) + b)
            .collect()
    }

    /// `z* = B (v_i ⊕ r ⊕ v_j) + c`.
    pub fn decode(&self, vi: &[f64], r: &[f64], vj: &[f64]) -> Result<Vec<f64>> {
        self.check("decoder word vector", self.dim, vi.len())?;
        self.check("decoder word vector", self.dim, vj.len())?;
        self.check("decoder code", self.code_dim, r.len())?;
        let mut out = Vec::with_capacity(self.z_dim());
        self.decode_into(vi, r, vj, &mut out);
        Ok(out)
    }

    fn decode_into(&self, vi: &[f64], r: &[f64], vj: &[f64], out: &mut Vec<f64>) {
        let (d, m) = (self.dim, self.code_dim);
        out.clear();
        for (row, c) in self.dec_w.chunks_exact(self.input_dim()).zip(&self.dec_b) {
            out.push(dot(&row[..d], vi) + dot(&row[d..d + m], r) + dot(&row[d + m..], vj) + c);
        }
    }

    /// `‖z − z*‖² + λ‖r‖²` for one example.
    pub fn loss(&self, ex: &TrainingExample) -> f64 {
        self.loss_parts(ex).total(self.lambda)
    }

    fn loss_parts(&self, ex: &TrainingExample) -> LossParts {
        let r = self.encode_unchecked(&ex.z);
        let mut zs = Vec::with_capacity(self.z_dim());
        self.decode_into(&ex.vi, &r, &ex.vj, &mut zs);
        LossParts {
            reconstruction: zs.iter().zip(&ex.z).map(|(a, b)| (a - b) * (a - b)).sum(),
            code_norm_sq: dot(&r, &r),
        }
    }

    /// Little-endian binary: `SVNP`, `d` and `m` as `u32`, `λ` as `f32`,
    /// then `A`, `b`, `B`, `c` as row-major `f32`.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.code_dim as u32).to_le_bytes())?;
        w.write_all(&(self.lambda as f32).to_le_bytes())?;
        for v in [&self.enc_w, &self.enc_b, &self.dec_w, &self.dec_b] {
            for &x in v.iter() {
                w.write_all(&(x as f32).to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut head = [0u8; 16];
        r.read_exact(&mut head)?;
        if &head[..4] != MAGIC {
            return Err(Error::format("autoencoder params", 0, "bad magic, expected SVNP"));
        }
        let word = |k: usize| [head[k], head[k + 1], head[k + 2], head[k + 3]];
        let dim = u32::from_le_bytes(word(4)) as usize;
        let code_dim = u32::from_le_bytes(word(8)) as usize;
        let lambda = f32::from_le_bytes(word(12)) as f64;
        let mut p = Self::zeros(dim, code_dim, lambda);
        for v in [&mut p.enc_w, &mut p.enc_b, &mut p.dec_w, &mut p.dec_b] {
            let mut buf = vec![0u8; v.len() * 4];
            r.read_exact(&mut buf)
                .map_err(|_| Error::format("autoencoder params", 0, "truncated"))?;
            for (x, c) in v.iter_mut().zip(buf.chunks_exact(4)) {
                *x = f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64;
            }
        }
        if !p.is_finite() {
            return Err(Error::NonFinite("stored autoencoder parameters".into()));
        }
        Ok(p)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(BufWriter::new(file))
            .map_err(|e| crate::corpus::at_path(e, path))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(file)).map_err(|e| crate::corpus::at_path(e, path))
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, Default)]
struct LossParts {
    reconstruction: f64,
    code_norm_sq: f64,
}

impl LossParts {
    fn total(&self, lambda: f64) -> f64 {
        self.reconstruction + lambda * self.code_norm_sq
    }
}

/// One directed pair: its relation vector and both word vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub z: Vec<f64>,
    pub vi: Vec<f64>,
    pub vj: Vec<f64>,
    pub pair: (WordId, WordId),
}

/// Indexed access to training examples without materializing all of them.
pub trait ExampleSource: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn example(&self, idx: usize) -> Cow<'_, TrainingExample>;
}

impl ExampleSource for [TrainingExample] {
    fn len(&self) -> usize {
        <[TrainingExample]>::len(self)
    }

    fn example(&self, idx: usize) -> Cow<'_, TrainingExample> {
        Cow::Borrowed(&self[idx])
    }
}

impl ExampleSource for Vec<TrainingExample> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }

    fn example(&self, idx: usize) -> Cow<'_, TrainingExample> {
        Cow::Borrowed(&self[idx])
    }
}

/// Both directions of every usable record, built on demand.
pub struct RelationExamples<'a> {
    relations: &'a RelationStore,
    embeddings: &'a EmbeddingStore,
    refs: Vec<(u32, bool)>,
}

impl<'a> RelationExamples<'a> {
    pub fn new(relations: &'a RelationStore, embeddings: &'a EmbeddingStore) -> Self {
        let refs = relations
            .records()
            .iter()
            .enumerate()
            .filter(|(_, r)| r.usable && embeddings.contains(r.a) && embeddings.contains(r.b))
            .flat_map(|(k, _)| [(k as u32, true), (k as u32, false)])
            .collect();
        RelationExamples {
            relations,
            embeddings,
            refs,
        }
    }

    /// Ordered pair of example `idx`.
    pub fn pair(&self, idx: usize) -> (WordId, WordId) {
        let (k, fwd) = self.refs[idx];
        let r = &self.relations.records()[k as usize];
        if fwd {
            (r.a, r.b)
        } else {
            (r.b, r.a)
        }
    }
}

impl ExampleSource for RelationExamples<'_> {
    fn len(&self) -> usize {
        self.refs.len()
    }

    fn example(&self, idx: usize) -> Cow<'_, TrainingExample> {
        let (k, fwd) = self.refs[idx];
        let r = &self.relations.records()[k as usize];
        let (from, to) = if fwd { (r.a, r.b) } else { (r.b, r.a) };
        let v = |w| self.embeddings.get_f64(w).expect("usable examples are embedded");
        Cow::Owned(TrainingExample {
            z: if fwd { r.z.clone() } else { block_swap(&r.z) },
            vi: v(from),
            vj: v(to),
            pair: (from, to),
        })
    }
}

/// Gradient bundle with the same shapes as [`AutoencoderParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub enc_w: Vec<f64>,
    pub enc_b: Vec<f64>,
    pub dec_w: Vec<f64>,
    pub dec_b: Vec<f64>,
}

impl Gradients {
    fn zeros_like(p: &AutoencoderParams) -> Self {
        Gradients {
            enc_w: vec![0.0; p.enc_w.len()],
            enc_b: vec![0.0; p.enc_b.len()],
            dec_w: vec![0.0; p.dec_w.len()],
            dec_b: vec![0.0; p.dec_b.len()],
        }
    }

    fn add(&mut self, other: &Gradients) {
        for (a, b) in self.parts_mut().into_iter().zip(other.parts()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    fn scale(&mut self, s: f64) {
        for v in self.parts_mut() {
            v.iter_mut().for_each(|x| *x *= s);
        }
    }

    fn parts(&self) -> [&Vec<f64>; 4] {
        [&self.enc_w, &self.enc_b, &self.dec_w, &self.dec_b]
    }

    fn parts_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.enc_w, &mut self.enc_b, &mut self.dec_w, &mut self.dec_b]
    }

    pub fn max_abs(&self) -> f64 {
        self.parts()
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// Adds one example's gradient into `g` and returns its loss.
fn accumulate(p: &AutoencoderParams, ex: &TrainingExample, g: &mut Gradients) -> Result<f64> {
    let (d, m, u_dim) = (p.dim, p.code_dim, p.input_dim());
    let r = p.encode_unchecked(&ex.z);
    let mut u = Vec::with_capacity(u_dim);
    u.extend_from_slice(&ex.vi);
    u.extend_from_slice(&r);
    u.extend_from_slice(&ex.vj);

    let mut grad_r: Vec<f64> = r.iter().map(|x| 2.0 * p.lambda * x).collect();
    let mut rec = 0.0;
    for (k, row) in p.dec_w.chunks_exact(u_dim).enumerate() {
        let e = dot(row, &u) + p.dec_b[k] - ex.z[k];
        rec += e * e;
        let ge = 2.0 * e;
        g.dec_b[k] += ge;
        let grow = &mut g.dec_w[k * u_dim..(k + 1) * u_dim];
        grow.iter_mut().zip(&u).for_each(|(gw, x)| *gw += ge * x);
        grad_r
            .iter_mut()
            .zip(&row[d..d + m])
            .for_each(|(gr, w)| *gr += ge * w);
    }
    let loss = rec + p.lambda * dot(&r, &r);
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!(
            "loss for pair ({}, {})",
            ex.pair.0, ex.pair.1
        )));
    }
    let z_dim = ex.z.len();
    for (i, gr) in grad_r.iter().enumerate() {
        g.enc_b[i] += gr;
        g.enc_w[i * z_dim..(i + 1) * z_dim]
            .iter_mut()
            .zip(&ex.z)
            .for_each(|(gw, z)| *gw += gr * z);
    }
    Ok(loss)
}

/// Mean gradient and mean loss over `idx` examples of `src`.
fn batch_gradient<S: ExampleSource + ?Sized>(
    p: &AutoencoderParams,
    src: &S,
    idx: &[usize],
) -> Result<(Gradients, f64)> {
    let shards = par::map_chunks(idx, GRAD_SHARD, |chunk| {
        let mut g = Gradients::zeros_like(p);
        let mut loss = 0.0;
        for &i in chunk {
            loss += accumulate(p, &src.example(i), &mut g)?;
        }
        Ok::<_, Error>((g, loss))
    });
    let mut total = Gradients::zeros_like(p);
    let mut loss = 0.0;
    for s in shards {
        let (g, l) = s?;
        total.add(&g);
        loss += l;
    }
    let inv = 1.0 / idx.len() as f64;
    total.scale(inv);
    Ok((total, loss * inv))
}

/// Mean over `batch` of the exact gradient of the loss with respect to
/// `A`, `b`, `B` and `c`.
pub fn gradients(p: &AutoencoderParams, batch: &[TrainingExample]) -> Result<Gradients> {
    if batch.is_empty() {
        return Err(Error::InsufficientData("empty batch".into()));
    }
    for ex in batch {
        p.check("example z", p.z_dim(), ex.z.len())?;
        p.check("example word vector", p.dim, ex.vi.len())?;
        p.check("example word vector", p.dim, ex.vj.len())?;
    }
    let idx: Vec<usize> = (0..batch.len()).collect();
    batch_gradient(p, batch, &idx).map(|(g, _)| g)
}

/// Mean loss terms over a set of examples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSummary {
    /// Mean `‖z − z*‖² + λ‖r‖²`.
    pub total: f64,
    /// Mean `‖z − z*‖²`.
    pub reconstruction: f64,
    /// Mean `‖r‖²`.
    pub code_norm_sq: f64,
}

pub fn evaluate<S: ExampleSource + ?Sized>(p: &AutoencoderParams, src: &S, idx: &[usize]) -> LossSummary {
    let parts = par::map_chunks(idx, GRAD_SHARD * 4, |chunk| {
        chunk.iter().fold(LossParts::default(), |mut acc, &i| {
            let l = p.loss_parts(&src.example(i));
            acc.reconstruction += l.reconstruction;
            acc.code_norm_sq += l.code_norm_sq;
            acc
        })
    });
    let sum = parts.into_iter().fold(LossParts::default(), |mut acc, l| {
        acc.reconstruction += l.reconstruction;
        acc.code_norm_sq += l.code_norm_sq;
        acc
    });
    let n = idx.len().max(1) as f64;
    let mean = LossParts {
        reconstruction: sum.reconstruction / n,
        code_norm_sq: sum.code_norm_sq / n,
    };
    LossSummary {
        total: mean.total(p.lambda),
        reconstruction: mean.reconstruction,
        code_norm_sq: mean.code_norm_sq,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    /// Plain gradient descent.
    Sgd,
    /// Adaptive moment estimation.
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Multiply the step size by `factor` after every epoch.
    Exponential { factor: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub code_dim: usize,
    pub lambda: f64,
    pub epochs: usize,
    /// Examples per step; anything at least the training set size is full batch.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub schedule: LrSchedule,
    pub optimizer: Optimizer,
    pub seed: u64,
    /// Fraction of pairs held out for logging.
    pub holdout: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            code_dim: 10,
            lambda: 0.01,
            epochs: 20,
            batch_size: 256,
            learning_rate: 1e-3,
            schedule: LrSchedule::Constant,
            optimizer: Optimizer::default(),
            seed: 0,
            holdout: 0.05,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.code_dim == 0 {
            return bad("code dimension must be positive");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be finite and non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.holdout) {
            return bad("holdout fraction must be in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    /// Zero is the state before the first update.
    pub epoch: usize,
    pub train: LossSummary,
    pub holdout: Option<LossSummary>,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
    pub train_examples: usize,
    pub holdout_examples: usize,
}

impl TrainingLog {
    pub fn initial(&self) -> Option<&EpochLog> {
        self.epochs.first()
    }

    pub fn last(&self) -> Option<&EpochLog> {
        self.epochs.last()
    }
}

/// Deterministic per-pair hash in `[0, 1)`; decides the held-out split.
fn holdout_score(pair: (WordId, WordId), seed: u64) -> f64 {
    let (a, b) = if pair.0 <= pair.1 { pair } else { (pair.1, pair.0) };
    let mut x = seed ^ ((a as u64) << 32 | b as u64);
    // splitmix64 finalizer
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^= x >> 31;
    (x >> 11) as f64 / (1u64 << 53) as f64
}

struct Moments {
    first: Gradients,
    second: Gradients,
    step: i32,
}

/// Mini-batch training from a seeded initialization. Both directions of a
/// pair always land on the same side of the held-out split.
pub fn train_on<S: ExampleSource + ?Sized>(
    src: &S,
    dim: usize,
    config: &TrainConfig,
) -> Result<(AutoencoderParams, TrainingLog)> {
    config.validate()?;
    if src.is_empty() {
        return Err(Error::InsufficientData("no usable relation records to train on".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = AutoencoderParams::init(dim, config.code_dim, config.lambda, &mut rng);

    let (mut train, mut held): (Vec<usize>, Vec<usize>) = (0..src.len())
        .partition(|&i| holdout_score(src.example(i).pair, config.seed) >= config.holdout);
    if train.is_empty() {
        train = std::mem::take(&mut held);
    }

    let mut log = TrainingLog {
        train_examples: train.len(),
        holdout_examples: held.len(),
        ..Default::default()
    };
    let mut lr = config.learning_rate;
    let snapshot = |p: &AutoencoderParams, epoch: usize, lr: f64| EpochLog {
        epoch,
        train: evaluate(p, src, &train),
        holdout: (!held.is_empty()).then(|| evaluate(p, src, &held)),
        learning_rate: lr,
    };
    let initial = snapshot(&params, 0, lr);
    log.epochs.push(initial);
    let initial_loss = initial.train.total;

    let mut moments = Moments {
        first: Gradients::zeros_like(&params),
        second: Gradients::zeros_like(&params),
        step: 0,
    };
    let mut order = train.clone();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let (g, _) = batch_gradient(&params, src, batch)?;
            apply_update(&mut params, &g, &mut moments, config.optimizer, lr);
            if !params.is_finite() {
                return Err(Error::NonFinite(format!("parameters after epoch {epoch} update")));
            }
        }
        let entry = snapshot(&params, epoch, lr);
        log::debug!(
            "epoch {epoch}: train {:.6e} holdout {:?}",
            entry.train.total,
            entry.holdout.map(|h| h.total)
        );
        log.epochs.push(entry);
        if !entry.train.total.is_finite() {
            return Err(Error::NonFinite(format!("training loss at epoch {epoch}")));
        }
        if entry.train.total > 1e3 * initial_loss {
            return Err(Error::Diverged {
                epoch,
                loss: entry.train.total,
                initial: initial_loss,
            });
        }
        if let LrSchedule::Exponential { factor } = config.schedule {
            lr *= factor;
        }
    }
    Ok((params, log))
}

fn apply_update(
    p: &mut AutoencoderParams,
    g: &Gradients,
    moments: &mut Moments,
    optimizer: Optimizer,
    lr: f64,
) {
    let params = [&mut p.enc_w, &mut p.enc_b, &mut p.dec_w, &mut p.dec_b];
    match optimizer {
        Optimizer::Sgd => {
            for (w, gw) in params.into_iter().zip(g.parts()) {
                w.iter_mut().zip(gw).for_each(|(x, d)| *x -= lr * d);
            }
        }
        Optimizer::Adam {
            beta1,
            beta2,
            epsilon,
        } => {
            moments.step += 1;
            let c1 = 1.0 - beta1.powi(moments.step);
            let c2 = 1.0 - beta2.powi(moments.step);
            let firsts = moments.first.parts_mut();
            let seconds = moments.second.parts_mut();
            for (((w, gw), m1), m2) in params.into_iter().zip(g.parts()).zip(firsts).zip(seconds) {
                for (((x, &d), a), b) in w.iter_mut().zip(gw).zip(m1.iter_mut()).zip(m2.iter_mut()) {
                    *a = beta1 * *a + (1.0 - beta1) * d;
                    *b = beta2 * *b + (1.0 - beta2) * d * d;
                    *x -= lr * (*a / c1) / ((*b / c2).sqrt() + epsilon);
                }
            }
        }
    }
}

/// Trains on both directions of every usable record.
pub fn train(
    relations: &RelationStore,
    embeddings: &EmbeddingStore,
    config: &TrainConfig,
) -> Result<(AutoencoderParams, TrainingLog)> {
    if relations.dim() != embeddings.dim() {
        return Err(Error::Dimension {
            what: "relation store vs embeddings",
            expected: embeddings.dim(),
            got: relations.dim(),
        });
    }
    let examples = RelationExamples::new(relations, embeddings);
    train_on(&examples, embeddings.dim(), config)
}

/// Encodes both directions of every usable record: `r_ab = encode(z)`,
/// `r_ba = encode(block_swap(z))`. Unusable records are left out, so call
/// [`RelationStore::mark_usable`] first on a store read from disk.
pub fn compress_store(relations: &RelationStore, params: &AutoencoderParams) -> Result<RelationStore> {
    if relations.dim() != params.dim {
        return Err(Error::Dimension {
            what: "relation store vs autoencoder",
            expected: params.dim,
            got: relations.dim(),
        });
    }
    let kept: Vec<_> = relations
        .records()
        .iter()
        .filter(|r| r.usable)
        .cloned()
        .collect();
    let codes: Vec<Vec<f64>> = par::map(&kept, |r| {
        let mut c = params.encode_unchecked(&r.z);
        c.extend(params.encode_unchecked(&block_swap(&r.z)));
        c
    });
    RelationStore::new(relations.dim(), kept).with_codes(params.code_dim, codes.concat())
}
