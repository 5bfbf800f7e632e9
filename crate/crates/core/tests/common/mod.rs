//! Brute-force reference implementations and fixtures shared by the
//! integration tests. Nothing here calls into the library's own counting,
//! selection, averaging or matching code.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use seven::autoenc::{compress_store, AutoencoderParams, TrainingExample};
use seven::corpus::{TokenizedSentence, Vocabulary};
use seven::embeddings::EmbeddingStore;
use seven::graph::{edge_order, CooccurrenceCounts, Edge, EdgeGraph, SelectionParams};
use seven::relvec::{RelationRecord, RelationStore};
use seven::simeval::{NetworkHandle, RelationSpace, Variant};
use seven::WordId;

pub const GAP: WordId = TokenizedSentence::GAP;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `w000 … w{n-1}` with strictly decreasing frequencies, so id = index.
pub fn vocab(n: usize) -> Vocabulary {
    let text: String = (0..n).map(|i| format!("w{i:03}\t{}\n", 10 * (n - i))).collect();
    Vocabulary::read_tsv(text.as_bytes(), "fixture").unwrap()
}

/// Random id sentences. `gap` is the chance of an OOV gap at each position.
pub fn random_corpus(r: &mut ChaCha8Rng, sentences: usize, v: u32, max_len: usize, gap: f64) -> Vec<TokenizedSentence> {
    (0..sentences)
        .map(|_| {
            let len = r.gen_range(0..=max_len);
            let toks = (0..len)
                .map(|_| {
                    if r.gen_bool(gap) {
                        GAP
                    } else {
                        // skewed so some pairs repeat a lot
                        let u: f64 = r.gen();
                        ((u * u) * v as f64) as u32
                    }
                })
                .collect();
            TokenizedSentence::new(toks)
        })
        .collect()
}

pub fn random_embeddings(r: &mut ChaCha8Rng, v: usize, d: usize, coverage: f64) -> EmbeddingStore {
    let mut rows: Vec<(WordId, Vec<f32>)> = Vec::new();
    for w in 0..v as u32 {
        if r.gen_bool(coverage) {
            rows.push((w, (0..d).map(|_| r.gen_range(-1.0f32..1.0)).collect()));
        }
    }
    EmbeddingStore::from_rows(d, v, rows).unwrap()
}

/// Weighted and raw counts from every position pair of every sentence.
pub fn brute_counts(corpus: &[TokenizedSentence], window: usize) -> BTreeMap<(WordId, WordId), (f64, u64)> {
    let mut out: BTreeMap<(WordId, WordId), (f64, u64)> = BTreeMap::new();
    for s in corpus {
        let t = s.raw();
        for p in 0..t.len() {
            for q in 0..t.len() {
                if p >= q || t[p] == GAP || t[q] == GAP || t[p] == t[q] {
                    continue;
                }
                let dist = q - p;
                if dist > window {
                    continue;
                }
                let key = (t[p].min(t[q]), t[p].max(t[q]));
                let e = out.entry(key).or_default();
                e.0 += 1.0 / dist as f64;
                e.1 += 1;
            }
        }
    }
    out
}

/// `ln(x_ij x_* / (x_i x_j))` straight from a pair table.
pub fn brute_pmi(counts: &BTreeMap<(WordId, WordId), (f64, u64)>, i: WordId, j: WordId) -> f64 {
    let row = |w: WordId| -> f64 {
        counts
            .iter()
            .filter(|((a, b), _)| *a == w || *b == w)
            .map(|(_, c)| c.0)
            .sum()
    };
    let total: f64 = 2.0 * counts.values().map(|c| c.0).sum::<f64>();
    let xij = counts[&(i.min(j), i.max(j))].0;
    (xij * total / (row(i) * row(j))).ln()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs())
}

/// Naive two-phase selection: per-word top K, then global fill.
pub fn brute_select(counts: &CooccurrenceCounts, params: SelectionParams) -> Vec<(WordId, WordId)> {
    struct Cand {
        pair: (WordId, WordId),
        pmi: f64,
        raw: u64,
    }
    let cands: Vec<Cand> = counts
        .iter()
        .filter(|(_, c)| c.raw >= params.min_count)
        .map(|((a, b), c)| Cand {
            pair: (a, b),
            pmi: (c.weighted * counts.total() / (counts.row(a) * counts.row(b))).ln(),
            raw: c.raw,
        })
        .collect();
    let better = |x: &Cand, y: &Cand| {
        // true when x ranks before y
        x.pmi > y.pmi || (x.pmi == y.pmi && (x.raw > y.raw || (x.raw == y.raw && x.pair < y.pair)))
    };
    let rank = |mut idx: Vec<usize>| {
        // insertion sort keeps this obviously correct
        for i in 1..idx.len() {
            let mut j = i;
            while j > 0 && better(&cands[idx[j]], &cands[idx[j - 1]]) {
                idx.swap(j, j - 1);
                j -= 1;
            }
        }
        idx
    };
    let mut chosen = BTreeSet::new();
    let words: BTreeSet<WordId> = cands.iter().flat_map(|c| [c.pair.0, c.pair.1]).collect();
    for w in words {
        let mine: Vec<usize> = (0..cands.len())
            .filter(|&k| cands[k].pair.0 == w || cands[k].pair.1 == w)
            .collect();
        for k in rank(mine).into_iter().take(params.top_k) {
            chosen.insert(k);
        }
    }
    let all = rank((0..cands.len()).collect());
    for &k in &all {
        if chosen.len() >= params.edge_target {
            break;
        }
        chosen.insert(k);
    }
    all.into_iter().filter(|k| chosen.contains(k)).map(|k| cands[k].pair).collect()
}

/// Per edge: `z` and the two direction counts, by direct enumeration.
pub fn brute_relations(
    corpus: &[TokenizedSentence],
    graph: &EdgeGraph,
    store: &EmbeddingStore,
    window: usize,
) -> HashMap<(WordId, WordId), (Vec<f64>, u32, u32)> {
    let d = store.dim();
    let emb = |w: WordId| if w == GAP { None } else { store.get(w) };
    let mean = |t: &[WordId], lo: usize, hi: usize| {
        let mut acc = vec![0.0f64; d];
        let mut n = 0;
        for &w in &t[lo.min(hi)..hi] {
            if let Some(v) = emb(w) {
                for k in 0..d {
                    acc[k] += v[k] as f64;
                }
                n += 1;
            }
        }
        if n > 0 {
            for x in &mut acc {
                *x /= n as f64;
            }
        }
        acc
    };
    let mut out = HashMap::new();
    for e in graph.edges() {
        let (a, b) = e.pair();
        let mut sums = [vec![0.0f64; 3 * d], vec![0.0f64; 3 * d]];
        let mut counts = [0u32; 2];
        for s in corpus {
            let t = s.raw();
            for p in 0..t.len() {
                for q in p + 1..t.len() {
                    if q - p > window {
                        break;
                    }
                    let dir = if (t[p], t[q]) == (a, b) {
                        0
                    } else if (t[p], t[q]) == (b, a) {
                        1
                    } else {
                        continue;
                    };
                    if emb(a).is_none() || emb(b).is_none() {
                        continue;
                    }
                    let blocks = [mean(t, 0, p), mean(t, p + 1, q), mean(t, q + 1, t.len())];
                    for (k, blk) in blocks.iter().enumerate() {
                        for i in 0..d {
                            sums[dir][k * d + i] += blk[i];
                        }
                    }
                    counts[dir] += 1;
                }
            }
        }
        let mut z = Vec::with_capacity(6 * d);
        for dir in 0..2 {
            let n = counts[dir].max(1) as f64;
            z.extend(sums[dir].iter().map(|x| x / n));
        }
        out.insert((a, b), (z, counts[0], counts[1]));
    }
    out
}

/// Random network: `v` words (a few unembedded), about `deg` edges per
/// word with random PMI, random raw relation vectors and codes from a
/// random encoder.
pub fn toy_network(seed: u64, v: usize, d: usize, m: usize, deg: usize) -> NetworkHandle {
    let mut r = rng(seed);
    let vocab = vocab(v);
    let emb = random_embeddings(&mut r, v, d, 0.9);
    let mut pairs = BTreeSet::new();
    for a in 0..v as u32 {
        for _ in 0..deg / 2 + 1 {
            let b = r.gen_range(0..v as u32);
            if a != b {
                pairs.insert((a.min(b), a.max(b)));
            }
        }
    }
    let mut edges: Vec<Edge> = pairs
        .iter()
        .map(|&(a, b)| Edge {
            a,
            b,
            // coarse values so PMI ties happen
            pmi: r.gen_range(0..20) as f64 / 4.0,
            weighted: r.gen_range(1.0..50.0),
            raw: r.gen_range(10..60),
        })
        .collect();
    edges.sort_by(edge_order);
    let graph = EdgeGraph::from_ranked(edges);
    let records = graph
        .edges()
        .iter()
        .map(|e| RelationRecord {
            a: e.a,
            b: e.b,
            count_ab: 1,
            count_ba: 1,
            z: (0..6 * d).map(|_| r.gen_range(-1.0..1.0)).collect(),
            usable: emb.contains(e.a) && emb.contains(e.b),
        })
        .collect();
    let raw = RelationStore::new(d, records);
    let params = AutoencoderParams::init(d, m, 0.01, &mut r);
    let compressed = compress_store(&raw, &params).unwrap();
    NetworkHandle::new(vocab, emb, graph).with_raw(raw).with_compressed(compressed)
}

pub fn plain_cosine(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        0.0
    } else {
        (dot / (nu * nv)).clamp(-1.0, 1.0)
    }
}

/// Directed relation of an edge read straight from the stores.
pub fn brute_relation(net: &NetworkHandle, from: WordId, to: WordId) -> Option<Vec<f64>> {
    let (a, b) = (from.min(to), from.max(to));
    match net.space {
        RelationSpace::Raw => {
            let rec = net.raw.as_ref()?.records().iter().find(|r| (r.a, r.b) == (a, b) && r.usable)?;
            let d3 = rec.z.len() / 2;
            Some(if from == a {
                rec.z.clone()
            } else {
                [&rec.z[d3..], &rec.z[..d3]].concat()
            })
        }
        RelationSpace::Compressed => {
            let c = net.compressed.as_ref()?;
            let k = c.records().iter().position(|r| (r.a, r.b) == (a, b))?;
            Some(if from == a {
                c.code_at(k, true).to_vec()
            } else {
                c.code_at(k, false).to_vec()
            })
        }
    }
}

/// Usable neighbors of `w` in adjacency order.
pub fn brute_neighbors(net: &NetworkHandle, w: WordId) -> Vec<WordId> {
    net.graph
        .neighbors(w)
        .iter()
        .map(|&(n, _)| n)
        .filter(|&n| net.embeddings.contains(n) && brute_relation(net, w, n).is_some())
        .collect()
}

/// Exhaustive argmax with the documented tie-break.
pub fn brute_match(net: &NetworkHandle, w1: WordId, w2: WordId) -> Option<(WordId, WordId, f64)> {
    let mut best: Option<(f64, f64, (WordId, WordId, WordId), WordId, WordId)> = None;
    for n1 in brute_neighbors(net, w1) {
        for n2 in brute_neighbors(net, w2) {
            let word = plain_cosine(&net.vector(n1).unwrap(), &net.vector(n2).unwrap());
            let rel = plain_cosine(
                &brute_relation(net, w1, n1).unwrap(),
                &brute_relation(net, w2, n2).unwrap(),
            );
            let score = word + rel;
            let key = (n1.min(n2), n1.max(n2), n1);
            let take = match &best {
                None => true,
                Some((bs, bw, bk, _, _)) => {
                    score > *bs || (score == *bs && (word > *bw || (word == *bw && key < *bk)))
                }
            };
            if take {
                best = Some((score, word, key, n1, n2));
            }
        }
    }
    best.map(|(s, _, _, a, b)| (a, b, s))
}

/// Similarity by explicitly building both concatenated vectors.
pub fn brute_similarity(net: &NetworkHandle, w1: WordId, w2: WordId, variant: Variant) -> f64 {
    let v1 = net.vector(w1).unwrap();
    let v2 = net.vector(w2).unwrap();
    if variant == Variant::Baseline {
        return plain_cosine(&v1, &v2);
    }
    let Some((n1, n2, _)) = brute_match(net, w1, w2) else {
        return plain_cosine(&v1, &v2);
    };
    let build = |v: &[f64], w: WordId, n: WordId| {
        let mut out = v.to_vec();
        out.extend(net.vector(n).unwrap().iter().map(|x| net.mu * x));
        if variant == Variant::WithRelation {
            out.extend(brute_relation(net, w, n).unwrap());
        }
        out
    };
    plain_cosine(&build(&v1, w1, n1), &build(&v2, w2, n2))
}

pub fn random_params(r: &mut rand_chacha::ChaCha8Rng, d: usize, m: usize, lambda: f64) -> AutoencoderParams {
    let mut p = AutoencoderParams::init(d, m, lambda, r);
    p.enc_b.iter_mut().for_each(|x| *x = r.gen_range(-0.5..0.5));
    p.dec_b.iter_mut().for_each(|x| *x = r.gen_range(-0.5..0.5));
    p
}

pub fn random_example(r: &mut rand_chacha::ChaCha8Rng, d: usize) -> TrainingExample {
    let mut v = |n: usize| (0..n).map(|_| r.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
    TrainingExample {
        z: v(6 * d),
        vi: v(d),
        vj: v(d),
        pair: (0, 1),
    }
}

pub fn naive_encode(p: &AutoencoderParams, z: &[f64]) -> Vec<f64> {
    let n = 6 * p.dim;
    (0..p.code_dim)
        .map(|i| {
            let mut s = p.enc_b[i];
            for k in 0..n {
                s += p.enc_w[i * n + k] * z[k];
            }
            s
        })
        .collect()
}

pub fn naive_decode(p: &AutoencoderParams, vi: &[f64], r: &[f64], vj: &[f64]) -> Vec<f64> {
    let u: Vec<f64> = vi.iter().chain(r).chain(vj).copied().collect();
    (0..6 * p.dim)
        .map(|i| {
            let mut s = p.dec_b[i];
            for k in 0..u.len() {
                s += p.dec_w[i * u.len() + k] * u[k];
            }
            s
        })
        .collect()
}

pub fn naive_loss(p: &AutoencoderParams, ex: &TrainingExample) -> f64 {
    let r = naive_encode(p, &ex.z);
    let zs = naive_decode(p, &ex.vi, &r, &ex.vj);
    let rec: f64 = ex.z.iter().zip(&zs).map(|(a, b)| (a - b) * (a - b)).sum();
    rec + p.lambda * r.iter().map(|x| x * x).sum::<f64>()
}

pub fn mean_loss(p: &AutoencoderParams, batch: &[TrainingExample]) -> f64 {
    batch.iter().map(|ex| naive_loss(p, ex)).sum::<f64>() / batch.len() as f64
}

/// Records whose `z` depends linearly on a low-dimensional latent, plus a
/// little noise.
pub fn toy_examples(seed: u64, n: usize, d: usize, noise: f64) -> Vec<TrainingExample> {
    let mut r = rng(seed);
    let basis: Vec<Vec<f64>> = (0..4).map(|_| (0..6 * d).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
    (0..n as u32)
        .map(|k| {
            let coef: Vec<f64> = (0..4).map(|_| r.gen_range(-1.0..1.0)).collect();
            let z = (0..6 * d)
                .map(|i| coef.iter().zip(&basis).map(|(c, b)| c * b[i]).sum::<f64>() + noise * r.gen_range(-1.0..1.0))
                .collect();
            TrainingExample {
                z,
                vi: (0..d).map(|_| r.gen_range(-1.0..1.0)).collect(),
                vj: (0..d).map(|_| r.gen_range(-1.0..1.0)).collect(),
                pair: (2 * k, 2 * k + 1),
            }
        })
        .collect()
}
