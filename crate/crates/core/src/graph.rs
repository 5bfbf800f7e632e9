//! Distance-weighted co-occurrence counting, PMI and edge selection.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::corpus::{TokenizedSentence, Vocabulary};
use crate::error::{Error, Result};
use crate::numfmt::format_sig;
use crate::par;
use crate::WordId;

pub const DEFAULT_WINDOW: usize = 10;
pub const DEFAULT_MIN_COUNT: u64 = 10;
pub const DEFAULT_TOP_K: usize = 10;

/// Weight of a co-occurrence between positions `p` and `q`: `1/|p-q|` inside
/// the window of one sentence, zero otherwise.
///
/// # Panics
/// If `p == q`.
pub fn pair_weight(p: usize, q: usize, same_sentence: bool, window: usize) -> f64 {
    assert_ne!(p, q, "pair_weight needs two distinct positions");
    let dist = p.abs_diff(q);
    if !same_sentence || dist > window {
        0.0
    } else {
        1.0 / dist as f64
    }
}

#[inline]
fn canonical(i: WordId, j: WordId) -> (WordId, WordId) {
    if i <= j {
        (i, j)
    } else {
        (j, i)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PairCount {
    /// Sum of `1/distance` over co-occurring position pairs.
    pub weighted: f64,
    /// Number of co-occurring position pairs.
    pub raw: u64,
}

/// Mergeable sparse accumulator over the upper triangle.
#[derive(Debug, Clone)]
pub struct CooccurrenceAccumulator {
    window: usize,
    pairs: HashMap<(WordId, WordId), PairCount>,
}

impl CooccurrenceAccumulator {
    pub fn new(window: usize) -> Self {
        CooccurrenceAccumulator {
            window,
            pairs: HashMap::new(),
        }
    }

    pub fn add_sentence(&mut self, sentence: &TokenizedSentence) {
        let toks = sentence.raw();
        for p in 0..toks.len() {
            let a = toks[p];
            if a == TokenizedSentence::GAP {
                continue;
            }
            let last = (p + self.window).min(toks.len() - 1);
            for (q, &b) in toks.iter().enumerate().take(last + 1).skip(p + 1) {
                if b == TokenizedSentence::GAP || a == b {
                    continue;
                }
                let c = self.pairs.entry(canonical(a, b)).or_default();
                c.weighted += 1.0 / (q - p) as f64;
                c.raw += 1;
            }
        }
    }

    /// Adds `other` into `self`. Per key the result is `self + other`.
    pub fn merge(&mut self, other: CooccurrenceAccumulator) {
        for (k, v) in other.pairs {
            let c = self.pairs.entry(k).or_default();
            c.weighted += v.weighted;
            c.raw += v.raw;
        }
    }

    pub fn finish(self) -> CooccurrenceCounts {
        let mut entries: Vec<((WordId, WordId), PairCount)> = self.pairs.into_iter().collect();
        entries.sort_unstable_by_key(|(k, _)| *k);
        CooccurrenceCounts::from_sorted(entries)
    }
}

/// Finalized symmetric counts: `x(i,j)`, the row sums `x_i` and the total
/// `x_*`. Each unordered pair is stored once under `(min, max)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceCounts {
    entries: Vec<((WordId, WordId), PairCount)>,
    row: Vec<f64>,
    total: f64,
}

impl CooccurrenceCounts {
    fn from_sorted(entries: Vec<((WordId, WordId), PairCount)>) -> Self {
        let n = entries.iter().map(|((_, j), _)| *j as usize + 1).max().unwrap_or(0);
        let mut row = vec![0.0; n];
        for ((i, j), c) in &entries {
            row[*i as usize] += c.weighted;
            row[*j as usize] += c.weighted;
        }
        let total = row.iter().sum();
        CooccurrenceCounts {
            entries,
            row,
            total,
        }
    }

    /// Counts built directly from pair totals; used for synthetic fixtures.
    pub fn from_pairs<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = ((WordId, WordId), PairCount)>,
    {
        let mut acc = CooccurrenceAccumulator::new(0);
        for ((i, j), c) in pairs {
            assert_ne!(i, j, "self-pairs are not counted");
            let e = acc.pairs.entry(canonical(i, j)).or_default();
            e.weighted += c.weighted;
            e.raw += c.raw;
        }
        acc.finish()
    }

    pub fn get(&self, i: WordId, j: WordId) -> Option<PairCount> {
        let key = canonical(i, j);
        self.entries
            .binary_search_by_key(&key, |(k, _)| *k)
            .ok()
            .map(|idx| self.entries[idx].1)
    }

    /// `x(i,j)`, zero for pairs never seen.
    pub fn weighted(&self, i: WordId, j: WordId) -> f64 {
        self.get(i, j).map_or(0.0, |c| c.weighted)
    }

    pub fn raw(&self, i: WordId, j: WordId) -> u64 {
        self.get(i, j).map_or(0, |c| c.raw)
    }

    /// `x_i = sum_j x(i,j)`.
    pub fn row(&self, i: WordId) -> f64 {
        self.row.get(i as usize).copied().unwrap_or(0.0)
    }

    /// `x_* = sum_i x_i`.
    pub fn total(&self) -> f64 {
        self.total
    }

    /// Distinct pairs with nonzero count.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// All pairs in ascending canonical key order.
    pub fn iter(&self) -> impl Iterator<Item = ((WordId, WordId), PairCount)> + '_ {
        self.entries.iter().copied()
    }

    /// Natural-log PMI, `ln(x_ij x_* / (x_i x_j))`.
    pub fn pmi(&self, i: WordId, j: WordId) -> Result<f64> {
        match self.get(i, j) {
            Some(c) if c.weighted > 0.0 => Ok(pmi_value(c.weighted, self.row(i), self.row(j), self.total)),
            _ => Err(Error::UndefinedPair(i, j)),
        }
    }
}

#[inline]
fn pmi_value(xij: f64, xi: f64, xj: f64, total: f64) -> f64 {
    (xij * total / (xi * xj)).ln()
}

/// Counts every sentence in fixed-size shards and merges the shard results
/// in order, so the output does not depend on the thread count.
pub fn count_cooccurrences(sentences: &[TokenizedSentence], window: usize) -> CooccurrenceCounts {
    par::map_chunks(sentences, par::SHARD_SIZE, |chunk| {
        let mut acc = CooccurrenceAccumulator::new(window);
        for s in chunk {
            acc.add_sentence(s);
        }
        acc
    })
    .into_iter()
    .reduce(|mut a, b| {
        a.merge(b);
        a
    })
    .unwrap_or_else(|| CooccurrenceAccumulator::new(window))
    .finish()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    /// Smaller word id of the pair.
    pub a: WordId,
    /// Larger word id of the pair.
    pub b: WordId,
    pub pmi: f64,
    pub weighted: f64,
    pub raw: u64,
}

impl Edge {
    pub fn pair(&self) -> (WordId, WordId) {
        (self.a, self.b)
    }

    pub fn other(&self, w: WordId) -> WordId {
        if w == self.a {
            self.b
        } else {
            self.a
        }
    }
}

/// Selection order: higher PMI, then higher raw count, then smaller pair.
pub fn edge_order(x: &Edge, y: &Edge) -> Ordering {
    y.pmi
        .total_cmp(&x.pmi)
        .then_with(|| y.raw.cmp(&x.raw))
        .then_with(|| x.pair().cmp(&y.pair()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectionParams {
    /// Neighbors guaranteed per word in the first phase.
    pub top_k: usize,
    /// Total edge count the second phase fills up to.
    pub edge_target: usize,
    /// Minimum raw co-occurrence count for a pair to be eligible.
    pub min_count: u64,
}

impl Default for SelectionParams {
    fn default() -> Self {
        SelectionParams {
            top_k: DEFAULT_TOP_K,
            edge_target: 0,
            min_count: DEFAULT_MIN_COUNT,
        }
    }
}

/// Undirected word graph. Edges are kept in selection order, and each
/// adjacency list is sorted the same way (descending PMI).
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeGraph {
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(WordId, u32)>>,
    index: HashMap<(WordId, WordId), u32>,
}

impl EdgeGraph {
    /// Builds the graph from edges already in selection order.
    pub fn from_ranked(edges: Vec<Edge>) -> Self {
        let n = edges.iter().map(|e| e.b as usize + 1).max().unwrap_or(0);
        let mut adjacency = vec![Vec::new(); n];
        let mut index = HashMap::with_capacity(edges.len());
        for (k, e) in edges.iter().enumerate() {
            debug_assert!(e.a < e.b);
            adjacency[e.a as usize].push((e.b, k as u32));
            adjacency[e.b as usize].push((e.a, k as u32));
            index.insert(e.pair(), k as u32);
        }
        EdgeGraph {
            edges,
            adjacency,
            index,
        }
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// `N_w` as `(neighbor, edge index)`, descending PMI.
    pub fn neighbors(&self, w: WordId) -> &[(WordId, u32)] {
        self.adjacency.get(w as usize).map_or(&[], Vec::as_slice)
    }

    pub fn edge_index(&self, i: WordId, j: WordId) -> Option<usize> {
        self.index.get(&canonical(i, j)).map(|&k| k as usize)
    }

    pub fn edge(&self, i: WordId, j: WordId) -> Option<&Edge> {
        self.edge_index(i, j).map(|k| &self.edges[k])
    }

    /// `word_i<TAB>word_j<TAB>pmi<TAB>weighted_count<TAB>raw_count`, with
    /// `word_i < word_j` as strings, in selection order, 9 significant digits.
    pub fn write_tsv<W: Write>(&self, vocab: &Vocabulary, mut w: W) -> Result<()> {
        for e in &self.edges {
            let (x, y) = (vocab.word(e.a), vocab.word(e.b));
            let (x, y) = if x <= y { (x, y) } else { (y, x) };
            writeln!(
                w,
                "{x}\t{y}\t{}\t{}\t{}",
                format_sig(e.pmi, 9),
                format_sig(e.weighted, 9),
                e.raw
            )?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(reader: R, vocab: &Vocabulary, name: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = n + 1;
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 5 {
                return Err(Error::format(name, lineno, "expected 5 tab-separated fields"));
            }
            let id = |w: &str| {
                vocab
                    .id(w)
                    .ok_or_else(|| Error::format(name, lineno, format!("`{w}` not in vocabulary")))
            };
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::format(name, lineno, format!("bad number `{s}`")))
            };
            let (i, j) = canonical(id(f[0])?, id(f[1])?);
            if i == j {
                return Err(Error::format(name, lineno, "self-loop"));
            }
            edges.push(Edge {
                a: i,
                b: j,
                pmi: num(f[2])?,
                weighted: num(f[3])?,
                raw: f[4]
                    .parse()
                    .map_err(|_| Error::format(name, lineno, "bad raw count"))?,
            });
        }
        Ok(Self::from_ranked(edges))
    }

    pub fn save(&self, vocab: &Vocabulary, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_tsv(vocab, BufWriter::new(file))
            .map_err(|e| crate::corpus::at_path(e, path))
    }

    pub fn load(path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_tsv(BufReader::new(file), vocab, &path.display().to_string())
            .map_err(|e| crate::corpus::at_path(e, path))
    }
}

/// Two-phase edge selection over pairs with `raw >= min_count`:
/// every word first gets its `top_k` best pairs, then the best remaining
/// pairs overall are added until `edge_target` edges exist.
pub fn select_edges(counts: &CooccurrenceCounts, params: SelectionParams) -> EdgeGraph {
    let mut ranked: Vec<Edge> = counts
        .iter()
        .filter(|(_, c)| c.raw >= params.min_count && c.weighted > 0.0)
        .map(|((a, b), c)| Edge {
            a,
            b,
            pmi: pmi_value(c.weighted, counts.row(a), counts.row(b), counts.total()),
            weighted: c.weighted,
            raw: c.raw,
        })
        .collect();
    ranked.sort_unstable_by(edge_order);

    let n = ranked.iter().map(|e| e.b as usize + 1).max().unwrap_or(0);
    let mut seen = vec![0usize; n];
    let mut selected = vec![false; ranked.len()];
    let mut count = 0;
    for (k, e) in ranked.iter().enumerate() {
        let in_a = seen[e.a as usize] < params.top_k;
        let in_b = seen[e.b as usize] < params.top_k;
        seen[e.a as usize] += 1;
        seen[e.b as usize] += 1;
        if in_a || in_b {
            selected[k] = true;
            count += 1;
        }
    }
    if count > params.edge_target {
        log::warn!(
            "first selection phase yielded {count} edges, above the target {}; nothing added",
            params.edge_target
        );
    }
    for flag in selected.iter_mut() {
        if count >= params.edge_target {
            break;
        }
        if !*flag {
            *flag = true;
            count += 1;
        }
    }
    let edges = ranked
        .into_iter()
        .zip(selected)
        .filter_map(|(e, s)| s.then_some(e))
        .collect();
    EdgeGraph::from_ranked(edges)
}
