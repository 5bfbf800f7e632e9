//! Word similarity through matched graph neighbors, and the benchmark
//! harness scoring it against human judgements.

use std::borrow::Cow;
use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};

use crate::corpus::Vocabulary;
use crate::embeddings::EmbeddingStore;
use crate::error::{Error, Result};
use crate::graph::EdgeGraph;
use crate::par;
use crate::relvec::RelationStore;
use crate::WordId;

/// Neighbor-vector weight inside the concatenated cosine.
pub const DEFAULT_MU: f64 = 0.5;

static ZERO_COSINE_WARNED: AtomicBool = AtomicBool::new(false);

/// Cosine similarity; zero when either vector is zero.
pub fn cosine(u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    let (mut uv, mut uu, mut vv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        uv += a * b;
        uu += a * a;
        vv += b * b;
    }
    ratio(uv, uu, vv)
}

fn ratio(uv: f64, uu: f64, vv: f64) -> f64 {
    if uu == 0.0 || vv == 0.0 {
        if !ZERO_COSINE_WARNED.swap(true, Ordering::Relaxed) {
            log::warn!("cosine with a zero vector; defined as 0");
        }
        return 0.0;
    }
    (uv / (uu.sqrt() * vv.sqrt())).clamp(-1.0, 1.0)
}

/// Which relation vectors label the edges at query time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RelationSpace {
    /// Autoencoder codes `r`.
    #[default]
    Compressed,
    /// Uncompressed `6d` averages `z`.
    Raw,
}

/// Everything the query and evaluation code reads. Immutable once loaded.
#[derive(Debug, Clone)]
pub struct NetworkHandle {
    pub vocab: Vocabulary,
    pub embeddings: EmbeddingStore,
    pub graph: EdgeGraph,
    /// Uncompressed relation vectors, when present.
    pub raw: Option<RelationStore>,
    /// Relation store with codes, when present.
    pub compressed: Option<RelationStore>,
    pub mu: f64,
    pub space: RelationSpace,
}

impl NetworkHandle {
    pub fn new(vocab: Vocabulary, embeddings: EmbeddingStore, graph: EdgeGraph) -> Self {
        NetworkHandle {
            vocab,
            embeddings,
            graph,
            raw: None,
            compressed: None,
            mu: DEFAULT_MU,
            space: RelationSpace::Compressed,
        }
    }

    pub fn with_raw(mut self, raw: RelationStore) -> Self {
        self.raw = Some(raw);
        self
    }

    pub fn with_compressed(mut self, compressed: RelationStore) -> Self {
        self.compressed = Some(compressed);
        self
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_space(mut self, space: RelationSpace) -> Self {
        self.space = space;
        self
    }

    pub fn vector(&self, w: WordId) -> Option<Vec<f64>> {
        self.embeddings.get_f64(w)
    }

    /// Directed relation vector `r_{from,to}` in the configured space, for
    /// usable edges only.
    pub fn relation(&self, from: WordId, to: WordId) -> Option<Cow<'_, [f64]>> {
        match self.space {
            RelationSpace::Compressed => self.compressed.as_ref()?.code(from, to).map(Cow::Borrowed),
            RelationSpace::Raw => {
                let rec = self.raw.as_ref()?.get(from, to)?;
                rec.usable.then(|| rec.directed_z(from))
            }
        }
    }

    /// `N_w` restricted to neighbors with a vector and a relation, in
    /// descending PMI order.
    pub fn usable_neighbors(&self, w: WordId) -> impl Iterator<Item = WordId> + '_ {
        self.graph
            .neighbors(w)
            .iter()
            .map(|&(n, _)| n)
            .filter(move |&n| self.embeddings.contains(n) && self.relation(w, n).is_some())
    }

    fn embedded(&self, word: &str) -> Result<WordId> {
        self.vocab
            .id(word)
            .filter(|&w| self.embeddings.contains(w))
            .ok_or_else(|| Error::UnknownWord(word.to_string()))
    }
}

struct Candidate<'a> {
    id: WordId,
    vector: Vec<f64>,
    relation: Cow<'a, [f64]>,
}

fn candidates(net: &NetworkHandle, w: WordId) -> Vec<Candidate<'_>> {
    net.usable_neighbors(w)
        .map(|n| Candidate {
            id: n,
            vector: net.vector(n).expect("usable neighbors are embedded"),
            relation: net.relation(w, n).expect("usable neighbors have relations"),
        })
        .collect()
}

/// The neighbor pair maximizing `cos(v_n1, v_n2) + cos(r_{w1,n1}, r_{w2,n2})`.
/// Ties go to the higher word-vector cosine, then to the smaller
/// `(min, max)` id pair. `None` when either word has no usable neighbor.
pub fn match_neighbors(net: &NetworkHandle, w1: WordId, w2: WordId) -> Option<(WordId, WordId)> {
    let c1 = candidates(net, w1);
    let c2 = candidates(net, w2);
    best_match(&c1, &c2).map(|(a, b, _)| (c1[a].id, c2[b].id))
}

fn best_match(c1: &[Candidate], c2: &[Candidate]) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64, f64)> = None;
    for (i, a) in c1.iter().enumerate() {
        for (j, b) in c2.iter().enumerate() {
            let word = cosine(&a.vector, &b.vector);
            let score = word + cosine(&a.relation, &b.relation);
            let better = match best {
                None => true,
                Some((bi, bj, bs, bw)) => {
                    let key = |x: WordId, y: WordId| (x.min(y), x.max(y), x);
                    score > bs
                        || (score == bs && word > bw)
                        || (score == bs
                            && word == bw
                            && key(a.id, b.id) < key(c1[bi].id, c2[bj].id))
                }
            };
            if better {
                best = Some((i, j, score, word));
            }
        }
    }
    best.map(|(i, j, s, _)| (i, j, s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Cosine of the two word vectors.
    Baseline,
    /// Cosine of `v_w ⊕ µ v_n`; relations only pick the neighbors.
    WordOnly,
    /// Cosine of `v_w ⊕ µ v_n ⊕ r_{w,n}`.
    WithRelation,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" | "cosine" => Ok(Variant::Baseline),
            "word" => Ok(Variant::WordOnly),
            "relation" => Ok(Variant::WithRelation),
            other => Err(Error::Config(format!("unknown similarity variant `{other}`"))),
        }
    }
}

/// Similarity of two word ids. Falls back to the baseline when no neighbor
/// pair can be matched.
pub fn similarity(net: &NetworkHandle, w1: WordId, w2: WordId, variant: Variant) -> Result<f64> {
    let v1 = net.vector(w1).ok_or_else(|| Error::UnknownWord(net.vocab.word(w1).into()))?;
    let v2 = net.vector(w2).ok_or_else(|| Error::UnknownWord(net.vocab.word(w2).into()))?;
    if variant == Variant::Baseline {
        return Ok(cosine(&v1, &v2));
    }
    let c1 = candidates(net, w1);
    let c2 = candidates(net, w2);
    let Some((i, j, _)) = best_match(&c1, &c2) else {
        return Ok(cosine(&v1, &v2));
    };
    let (n1, n2) = (&c1[i], &c2[j]);
    let mu2 = net.mu * net.mu;
    let parts = |a: &[f64], b: &[f64]| {
        a.iter().zip(b).fold((0.0, 0.0, 0.0), |(ab, aa, bb), (x, y)| {
            (ab + x * y, aa + x * x, bb + y * y)
        })
    };
    let (mut uv, mut uu, mut vv) = parts(&v1, &v2);
    let (nuv, nuu, nvv) = parts(&n1.vector, &n2.vector);
    uv += mu2 * nuv;
    uu += mu2 * nuu;
    vv += mu2 * nvv;
    if variant == Variant::WithRelation {
        let (ruv, ruu, rvv) = parts(&n1.relation, &n2.relation);
        uv += ruv;
        uu += ruu;
        vv += rvv;
    }
    Ok(ratio(uv, uu, vv))
}

/// [`similarity`] on surface forms; unknown or unembedded words are errors.
pub fn similarity_words(net: &NetworkHandle, w1: &str, w2: &str, variant: Variant) -> Result<f64> {
    similarity(net, net.embedded(w1)?, net.embedded(w2)?, variant)
}

/// Word pairs with human similarity scores.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityDataset {
    pub name: String,
    pub pairs: Vec<(String, String, f64)>,
}

impl SimilarityDataset {
    /// `word1<TAB>word2<TAB>score`; a first line whose score does not parse is
    /// a header. Repeated pairs keep their first score.
    pub fn read<R: BufRead>(reader: R, name: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut seen = HashSet::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() < 3 {
                return Err(Error::format(name, n + 1, "expected word1<TAB>word2<TAB>score"));
            }
            let score = match f[2].trim().parse::<f64>() {
                Ok(s) if s.is_finite() => s,
                _ if n == 0 => continue,
                _ => return Err(Error::format(name, n + 1, format!("bad score `{}`", f[2]))),
            };
            let (a, b) = (f[0].trim().to_string(), f[1].trim().to_string());
            let key = if a <= b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
            if !seen.insert(key) {
                log::warn!("{name}: duplicate pair ({a}, {b}) ignored");
                continue;
            }
            pairs.push((a, b, score));
        }
        Ok(SimilarityDataset {
            name: name.to_string(),
            pairs,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let name = path
            .file_stem()
            .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        Self::read(BufReader::new(file), &name).map_err(|e| crate::corpus::at_path(e, path))
    }

    /// Pairs whose entries are single words (no whitespace or `_`).
    pub fn single_word_pairs(&self) -> impl Iterator<Item = &(String, String, f64)> {
        let single = |w: &str| !w.contains(|c: char| c.is_whitespace() || c == '_');
        self.pairs.iter().filter(move |(a, b, _)| single(a) && single(b))
    }
}

/// Pearson correlation; NaN when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return f64::NAN;
    }
    sxy / (sxx.sqrt() * syy.sqrt())
}

/// 1-based ranks, ties sharing the mean of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman correlation: Pearson on average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&average_ranks(x), &average_ranks(y))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub pearson: f64,
    pub spearman: f64,
    /// `(pearson + spearman) / 2`.
    pub average: f64,
    /// Covered pairs over single-word pairs.
    pub coverage: f64,
    pub covered: usize,
    pub total: usize,
}

/// Correlations between predicted and gold scores over the pairs whose words
/// are both in the network; other pairs are skipped and counted against
/// coverage.
pub fn evaluate(net: &NetworkHandle, dataset: &SimilarityDataset, variant: Variant) -> Result<EvalReport> {
    let pairs: Vec<_> = dataset.single_word_pairs().collect();
    let scored = par::map(&pairs, |(a, b, gold)| {
        similarity_words(net, a, b, variant).ok().map(|s| (s, *gold))
    });
    let (pred, gold): (Vec<f64>, Vec<f64>) = scored.into_iter().flatten().unzip();
    if pred.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{}: {} of {} pairs covered, need at least 2",
            dataset.name,
            pred.len(),
            pairs.len()
        )));
    }
    let p = pearson(&pred, &gold);
    let s = spearman(&pred, &gold);
    Ok(EvalReport {
        pearson: p,
        spearman: s,
        average: (p + s) / 2.0,
        coverage: pred.len() as f64 / pairs.len() as f64,
        covered: pred.len(),
        total: pairs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_basics() {
        assert!((cosine(&[1.0, 2.0], &[1.0, 2.0]) - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
        assert_eq!(cosine(&[0.0, 0.0], &[0.0, 1.0]), 0.0);
        assert_eq!(cosine(&[1.0, 0.0], &[-3.0, 0.0]), -1.0);
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 20.0, 5.0]), vec![2.0, 3.5, 3.5, 1.0]);
    }

    #[test]
    fn perfect_and_inverse_correlation() {
        let gold = [1.0, 3.0, 2.0, 7.0, 4.0];
        let neg: Vec<f64> = gold.iter().map(|x| -x).collect();
        assert!((pearson(&gold, &gold) - 1.0).abs() < 1e-15);
        assert!((spearman(&gold, &gold) - 1.0).abs() < 1e-15);
        assert!((pearson(&neg, &gold) + 1.0).abs() < 1e-15);
        assert!((spearman(&neg, &gold) + 1.0).abs() < 1e-15);
        assert!(pearson(&[1.0, 1.0], &[1.0, 2.0]).is_nan());
    }

    #[test]
    fn dataset_header_and_duplicates() {
        let text = "w1\tw2\tscore\na\tb\t1.5\nb\ta\t2\nnew york\tc\t3\nc_d\te\t1\nx\ty\t0\n";
        let ds = SimilarityDataset::read(text.as_bytes(), "t").unwrap();
        assert_eq!(ds.pairs.len(), 4);
        assert_eq!(ds.single_word_pairs().count(), 2);
        assert!(SimilarityDataset::read("a\tb\tfoo\na\tc\tbar\n".as_bytes(), "t").is_err());
    }

    #[test]
    fn variant_names() {
        assert_eq!("word".parse::<Variant>().unwrap(), Variant::WordOnly);
        assert_eq!("relation".parse::<Variant>().unwrap(), Variant::WithRelation);
        assert!("x".parse::<Variant>().is_err());
    }
}
