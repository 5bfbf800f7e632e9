//! Raw relation vectors: for each edge, the mean embeddings of the words
//! before, between and after the two endpoints, in both orders.

use std::borrow::Cow;
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::corpus::TokenizedSentence;
use crate::embeddings::EmbeddingStore;
use crate::error::{Error, Result};
use crate::graph::EdgeGraph;
use crate::par;
use crate::WordId;

const MAGIC: &[u8; 4] = b"SVN1";

/// Context averages for one occurrence pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextVectors {
    pub pre: Vec<f64>,
    pub mid: Vec<f64>,
    pub post: Vec<f64>,
}

/// Means of the embeddings strictly before `p`, strictly between `p` and
/// `q`, and strictly after `q`. Tokens without a vector are left out of both
/// sum and count; an empty segment gives the zero vector.
pub fn sentence_context_vectors(
    sentence: &TokenizedSentence,
    p: usize,
    q: usize,
    store: &EmbeddingStore,
) -> ContextVectors {
    assert!(p < q && q < sentence.len(), "need p < q < sentence length");
    let mean = |range: std::ops::Range<usize>| {
        let mut sum = vec![0.0; store.dim()];
        let mut n = 0usize;
        for t in range {
            if let Some(v) = sentence.get(t).and_then(|w| store.get(w)) {
                for (s, &x) in sum.iter_mut().zip(v) {
                    *s += x as f64;
                }
                n += 1;
            }
        }
        if n > 0 {
            sum.iter_mut().for_each(|s| *s /= n as f64);
        }
        sum
    };
    ContextVectors {
        pre: mean(0..p),
        mid: mean(p + 1..q),
        post: mean(q + 1..sentence.len()),
    }
}

/// Swaps the `(pre, mid, post)` halves of a `6d` vector, giving the vector
/// of the reversed pair.
pub fn block_swap<T: Clone>(z: &[T]) -> Vec<T> {
    let half = z.len() / 2;
    let mut out = Vec::with_capacity(z.len());
    out.extend_from_slice(&z[half..]);
    out.extend_from_slice(&z[..half]);
    out
}

/// Euclidean norm; the strength of a relation.
pub fn relation_strength(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One edge's raw relation vector.
///
/// `z` is `pre_ab ⊕ mid_ab ⊕ post_ab ⊕ pre_ba ⊕ mid_ba ⊕ post_ba` where
/// `a < b` are word ids and `_ab` averages over occurrences with `a` first.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationRecord {
    pub a: WordId,
    pub b: WordId,
    pub count_ab: u32,
    pub count_ba: u32,
    pub z: Vec<f64>,
    /// Both endpoints embedded and at least one occurrence in either order.
    pub usable: bool,
}

impl RelationRecord {
    pub fn pair(&self) -> (WordId, WordId) {
        (self.a, self.b)
    }

    /// `z` seen from `first`: as stored if `first == a`, block-swapped if
    /// `first == b`.
    pub fn directed_z(&self, first: WordId) -> Cow<'_, [f64]> {
        if first == self.a {
            Cow::Borrowed(&self.z)
        } else {
            debug_assert_eq!(first, self.b);
            Cow::Owned(block_swap(&self.z))
        }
    }
}

/// Relation vectors for every edge, optionally with compressed codes for
/// both directions.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationStore {
    dim: usize,
    code_dim: usize,
    records: Vec<RelationRecord>,
    /// `r_ab ⊕ r_ba` per record when compressed.
    codes: Vec<f64>,
    index: HashMap<(WordId, WordId), usize>,
}

impl RelationStore {
    pub fn new(dim: usize, records: Vec<RelationRecord>) -> Self {
        let index = records.iter().enumerate().map(|(k, r)| (r.pair(), k)).collect();
        RelationStore {
            dim,
            code_dim: 0,
            records,
            codes: Vec::new(),
            index,
        }
    }

    /// Attaches codes, `2 * code_dim` values per record.
    pub fn with_codes(mut self, code_dim: usize, codes: Vec<f64>) -> Result<Self> {
        if codes.len() != self.records.len() * 2 * code_dim {
            return Err(Error::Dimension {
                what: "relation codes",
                expected: self.records.len() * 2 * code_dim,
                got: codes.len(),
            });
        }
        self.code_dim = code_dim;
        self.codes = codes;
        Ok(self)
    }

    /// Embedding dimension `d`; every `z` has `6d` entries.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Code dimension `m`, zero when uncompressed.
    pub fn code_dim(&self) -> usize {
        self.code_dim
    }

    pub fn is_compressed(&self) -> bool {
        self.code_dim > 0
    }

    pub fn records(&self) -> &[RelationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn find(&self, i: WordId, j: WordId) -> Option<usize> {
        let key = if i <= j { (i, j) } else { (j, i) };
        self.index.get(&key).copied()
    }

    pub fn get(&self, i: WordId, j: WordId) -> Option<&RelationRecord> {
        self.find(i, j).map(|k| &self.records[k])
    }

    /// `z` of the ordered pair `(from, to)`.
    pub fn directed_z(&self, from: WordId, to: WordId) -> Option<Cow<'_, [f64]>> {
        self.get(from, to).map(|r| r.directed_z(from))
    }

    /// Code of record `k` with its `a` word first (`forward`) or `b` first.
    pub fn code_at(&self, k: usize, forward: bool) -> &[f64] {
        let m = self.code_dim;
        let base = k * 2 * m + if forward { 0 } else { m };
        &self.codes[base..base + m]
    }

    /// Directed code `r_{from,to}`.
    pub fn code(&self, from: WordId, to: WordId) -> Option<&[f64]> {
        if !self.is_compressed() {
            return None;
        }
        let k = self.find(from, to)?;
        Some(self.code_at(k, self.records[k].a == from))
    }

    /// Little-endian binary: `SVN1`, `d`, `m`, record count as `u32`; per
    /// record `a`, `b`, `count_ab`, `count_ba` as `u32`, `6d` `f32`s of `z`
    /// and, when `m > 0`, `2m` `f32`s of `r_ab ⊕ r_ba`.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        for x in [self.dim, self.code_dim, self.records.len()] {
            w.write_all(&(x as u32).to_le_bytes())?;
        }
        for (k, r) in self.records.iter().enumerate() {
            for x in [r.a, r.b, r.count_ab, r.count_ba] {
                w.write_all(&x.to_le_bytes())?;
            }
            for &x in &r.z {
                w.write_all(&(x as f32).to_le_bytes())?;
            }
            if self.is_compressed() {
                for fwd in [true, false] {
                    for &x in self.code_at(k, fwd) {
                        w.write_all(&(x as f32).to_le_bytes())?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::format("relation store", 0, "bad magic, expected SVN1"));
        }
        let u32s = |r: &mut R, n: usize| -> Result<Vec<u32>> {
            let mut buf = vec![0u8; 4 * n];
            r.read_exact(&mut buf)?;
            Ok(buf.chunks_exact(4).map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
        };
        let head = u32s(&mut r, 3)?;
        let (dim, m, count) = (head[0] as usize, head[1] as usize, head[2] as usize);
        let floats = |r: &mut R, n: usize| -> Result<Vec<f64>> {
            let mut buf = vec![0u8; 4 * n];
            r.read_exact(&mut buf)?;
            Ok(buf
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect())
        };
        let mut records = Vec::with_capacity(count);
        let mut codes = Vec::with_capacity(count * 2 * m);
        for k in 0..count {
            let h = u32s(&mut r, 4).map_err(|_| truncated(k))?;
            let z = floats(&mut r, 6 * dim).map_err(|_| truncated(k))?;
            if z.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("relation record {k}")));
            }
            if h[0] >= h[1] {
                return Err(Error::format("relation store", k, "pair not in canonical order"));
            }
            if m > 0 {
                codes.extend(floats(&mut r, 2 * m).map_err(|_| truncated(k))?);
            }
            records.push(RelationRecord {
                a: h[0],
                b: h[1],
                count_ab: h[2],
                count_ba: h[3],
                z,
                usable: h[2] + h[3] > 0,
            });
        }
        let mut extra = [0u8; 1];
        if r.read(&mut extra)? != 0 {
            return Err(Error::format("relation store", count, "trailing bytes"));
        }
        RelationStore::new(dim, records).with_codes(m, codes)
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

    /// Re-evaluates `usable` against an embedding store.
    pub fn mark_usable(&mut self, store: &EmbeddingStore) {
        for r in &mut self.records {
            r.usable = r.count_ab + r.count_ba > 0 && store.contains(r.a) && store.contains(r.b);
        }
    }
}

fn truncated(k: usize) -> Error {
    Error::format("relation store", k, "truncated record")
}

/// Per-edge running sums for one shard.
struct EdgeSums {
    sums: Vec<f64>,
    counts: [u32; 2],
}

/// Prefix sums of the embeddings of one sentence, so each segment mean is a
/// difference of two rows.
struct Prefix {
    dim: usize,
    sums: Vec<f64>,
    counts: Vec<u32>,
}

impl Prefix {
    fn new(sentence: &TokenizedSentence, store: &EmbeddingStore) -> Self {
        let dim = store.dim();
        let n = sentence.len();
        let mut sums = vec![0.0; (n + 1) * dim];
        let mut counts = vec![0u32; n + 1];
        for t in 0..n {
            let (head, tail) = sums.split_at_mut((t + 1) * dim);
            let prev = &head[t * dim..];
            let next = &mut tail[..dim];
            next.copy_from_slice(prev);
            counts[t + 1] = counts[t];
            if let Some(v) = sentence.get(t).and_then(|w| store.get(w)) {
                for (s, &x) in next.iter_mut().zip(v) {
                    *s += x as f64;
                }
                counts[t + 1] += 1;
            }
        }
        Prefix { dim, sums, counts }
    }

    /// Adds the mean over positions `lo..hi` to `out`.
    fn add_mean(&self, lo: usize, hi: usize, out: &mut [f64]) {
        let n = self.counts[hi] - self.counts[lo.min(hi)];
        if n == 0 {
            return;
        }
        let inv = 1.0 / n as f64;
        let a = &self.sums[lo * self.dim..(lo + 1) * self.dim];
        let b = &self.sums[hi * self.dim..(hi + 1) * self.dim];
        for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
            *o += (y - x) * inv;
        }
    }
}

/// Averages sentence-level contexts over every qualifying occurrence pair of
/// every edge. Each ordered position pair within `window` contributes one
/// term. Sharded over sentences with an ordered merge.
pub fn build_relation_records(
    sentences: &[TokenizedSentence],
    graph: &EdgeGraph,
    store: &EmbeddingStore,
    window: usize,
) -> RelationStore {
    let d = store.dim();
    let shard = |chunk: &[TokenizedSentence]| {
        let mut acc: HashMap<usize, EdgeSums> = HashMap::new();
        for s in chunk {
            let mut prefix: Option<Prefix> = None;
            let n = s.len();
            for p in 0..n {
                let Some(x) = s.get(p).filter(|&x| store.contains(x)) else {
                    continue;
                };
                for q in p + 1..=(p + window).min(n.saturating_sub(1)) {
                    let Some(y) = s.get(q).filter(|&y| y != x && store.contains(y)) else {
                        continue;
                    };
                    let Some(e) = graph.edge_index(x, y) else { continue };
                    let pre = prefix.get_or_insert_with(|| Prefix::new(s, store));
                    let dir = usize::from(x > y);
                    let slot = acc.entry(e).or_insert_with(|| EdgeSums {
                        sums: vec![0.0; 6 * d],
                        counts: [0, 0],
                    });
                    let blocks = &mut slot.sums[dir * 3 * d..(dir + 1) * 3 * d];
                    let (b_pre, rest) = blocks.split_at_mut(d);
                    let (b_mid, b_post) = rest.split_at_mut(d);
                    pre.add_mean(0, p, b_pre);
                    pre.add_mean(p + 1, q, b_mid);
                    pre.add_mean(q + 1, n, b_post);
                    slot.counts[dir] += 1;
                }
            }
        }
        acc
    };

    // a few shards in flight at a time keeps memory bounded; shard
    // boundaries and merge order are the same as one big pass
    let wave = par::SHARD_SIZE * 2 * par::current_threads();
    let mut total: Vec<Option<EdgeSums>> = (0..graph.len()).map(|_| None).collect();
    for part in sentences.chunks(wave.max(1)) {
        for acc in par::map_chunks(part, par::SHARD_SIZE, shard) {
            for (e, s) in acc {
                match &mut total[e] {
                    Some(t) => {
                        for (a, b) in t.sums.iter_mut().zip(&s.sums) {
                            *a += b;
                        }
                        t.counts[0] += s.counts[0];
                        t.counts[1] += s.counts[1];
                    }
                    slot @ None => *slot = Some(s),
                }
            }
        }
    }

    let records = graph
        .edges()
        .iter()
        .zip(total)
        .map(|(edge, sums)| {
            let (mut z, counts) = match sums {
                Some(s) => (s.sums, s.counts),
                None => (vec![0.0; 6 * d], [0, 0]),
            };
            for dir in 0..2 {
                if counts[dir] > 0 {
                    let inv = 1.0 / counts[dir] as f64;
                    z[dir * 3 * d..(dir + 1) * 3 * d].iter_mut().for_each(|x| *x *= inv);
                }
            }
            let embedded = store.contains(edge.a) && store.contains(edge.b);
            RelationRecord {
                a: edge.a,
                b: edge.b,
                count_ab: counts[0],
                count_ba: counts[1],
                usable: embedded && counts[0] + counts[1] > 0,
                z,
            }
        })
        .collect();
    RelationStore::new(d, records)
}
