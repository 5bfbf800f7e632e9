//! Exploration of a finished network: PMI neighbors, nearest relations and
//! the enriched per-word feature export.

use std::borrow::Cow;
use std::cmp::Ordering;
use std::io::Write;

use crate::error::{Error, Result};
use crate::numfmt::format_sig;
use crate::par;
use crate::simeval::{cosine, NetworkHandle};
use crate::WordId;

/// Vector space searched by [`nearest_relations`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchSpace {
    /// Raw `6d` relation vectors.
    Raw,
    /// Autoencoder codes.
    Compressed,
    /// Word vector differences `v_a − v_b`.
    DiffVec,
}

impl std::str::FromStr for SearchSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "z" | "raw" => Ok(SearchSpace::Raw),
            "r" | "compressed" => Ok(SearchSpace::Compressed),
            "diffvec" => Ok(SearchSpace::DiffVec),
            other => Err(Error::Config(format!("unknown search space `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelationHit {
    /// Candidate pair in stored order (smaller id first).
    pub pair: (WordId, WordId),
    pub cosine: f64,
}

fn hit_order(x: &RelationHit, y: &RelationHit) -> Ordering {
    y.cosine.total_cmp(&x.cosine).then_with(|| x.pair.cmp(&y.pair))
}

fn top_k(mut hits: Vec<RelationHit>, k: usize) -> Vec<RelationHit> {
    if hits.len() > k && k > 0 {
        hits.select_nth_unstable_by(k - 1, hit_order);
        hits.truncate(k);
    } else if k == 0 {
        hits.clear();
    }
    hits.sort_unstable_by(hit_order);
    hits
}

fn unknown_pair(net: &NetworkHandle, (a, b): (WordId, WordId)) -> Error {
    Error::UnknownPair(net.vocab.word(a).to_string(), net.vocab.word(b).to_string())
}

fn scan<'a, F>(
    cands: &[(WordId, WordId)],
    skip: (WordId, WordId),
    vec_of: F,
    target: &[f64],
    k: usize,
) -> Vec<RelationHit>
where
    F: Fn(usize) -> Option<Cow<'a, [f64]>> + Sync,
{
    let idx: Vec<usize> = (0..cands.len()).collect();
    let shards = par::map_chunks(&idx, 4096, |chunk| {
        let hits = chunk
            .iter()
            .filter(|&&i| cands[i] != skip)
            .filter_map(|&i| {
                vec_of(i).map(|v| RelationHit {
                    pair: cands[i],
                    cosine: cosine(target, &v),
                })
            })
            .collect();
        top_k(hits, k)
    });
    top_k(shards.concat(), k)
}

/// Top `k` stored pairs by cosine to the probe's vector, probe excluded.
///
/// The probe is directed as given; candidates use their stored direction.
/// Ties are broken by the smaller pair, so the result does not depend on
/// record order.
pub fn nearest_relations(
    net: &NetworkHandle,
    probe: (WordId, WordId),
    k: usize,
    space: SearchSpace,
) -> Result<Vec<RelationHit>> {
    let (pa, pb) = probe;
    let skip = (pa.min(pb), pa.max(pb));
    match space {
        SearchSpace::Raw | SearchSpace::Compressed => {
            let store = match space {
                SearchSpace::Raw => net.raw.as_ref(),
                _ => net.compressed.as_ref(),
            }
            .ok_or_else(|| Error::Missing("relation store for this search space".into()))?;
            if space == SearchSpace::Compressed && !store.is_compressed() {
                return Err(Error::Missing("compressed relation codes".into()));
            }
            let k_probe = store.find(pa, pb).ok_or_else(|| unknown_pair(net, probe))?;
            let rec = &store.records()[k_probe];
            let target: Cow<[f64]> = match space {
                SearchSpace::Raw => rec.directed_z(pa),
                _ => Cow::Borrowed(store.code_at(k_probe, rec.a == pa)),
            };
            let cands: Vec<(WordId, WordId)> = store.records().iter().map(|r| r.pair()).collect();
            let vec_of = |i: usize| -> Option<Cow<'_, [f64]>> {
                Some(match space {
                    SearchSpace::Raw => Cow::Borrowed(store.records()[i].z.as_slice()),
                    _ => Cow::Borrowed(store.code_at(i, true)),
                })
            };
            Ok(scan(&cands, skip, vec_of, &target, k))
        }
        SearchSpace::DiffVec => {
            let diff = |a: WordId, b: WordId| -> Option<Vec<f64>> {
                let (va, vb) = (net.embeddings.get(a)?, net.embeddings.get(b)?);
                Some(va.iter().zip(vb).map(|(x, y)| *x as f64 - *y as f64).collect())
            };
            let target = diff(pa, pb).ok_or_else(|| unknown_pair(net, probe))?;
            let cands: Vec<(WordId, WordId)> = net.graph.edges().iter().map(|e| e.pair()).collect();
            let vec_of = |i: usize| -> Option<Cow<'_, [f64]>> {
                let (a, b) = cands[i];
                diff(a, b).map(Cow::Owned)
            };
            Ok(scan(&cands, skip, vec_of, &target, k))
        }
    }
}

/// `N_w` with PMI scores, highest first.
pub fn neighbors_of(net: &NetworkHandle, word: &str) -> Result<Vec<(WordId, f64)>> {
    let w = net.vocab.require(word)?;
    Ok(net
        .graph
        .neighbors(w)
        .iter()
        .map(|&(n, e)| (n, net.graph.edges()[e as usize].pmi))
        .collect())
}

/// `v_w ⊕ v_n1 ⊕ … ⊕ v_nK ⊕ r_{w,n1} ⊕ … ⊕ r_{w,nK}` over the first `k`
/// usable neighbors by PMI, zero-padded. Also returns how many neighbor
/// slots were filled. `None` when `w` has no vector.
pub fn enriched_vector(net: &NetworkHandle, w: WordId, k: usize) -> Option<(Vec<f64>, usize)> {
    let d = net.embeddings.dim();
    let m = net.compressed.as_ref().map_or(0, |c| c.code_dim());
    let mut out = net.vector(w)?;
    out.resize(d + k * (d + m), 0.0);
    let mut filled = 0;
    for (slot, n) in net.usable_neighbors(w).take(k).enumerate() {
        let v = net.embeddings.get(n).expect("usable neighbors are embedded");
        for (o, x) in out[d + slot * d..d + (slot + 1) * d].iter_mut().zip(v) {
            *o = *x as f64;
        }
        let r = net.relation(w, n).expect("usable neighbors have relations");
        out[d + k * d + slot * m..d + k * d + (slot + 1) * m].copy_from_slice(&r);
        filled += 1;
    }
    Some((out, filled))
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExportSummary {
    pub written: usize,
    /// Words written without any usable edge (all neighbor blocks zero).
    pub isolated: Vec<WordId>,
}

/// Writes `#SVN-ENRICHED d K m`, then one `word<TAB>values` row per embedded
/// vocabulary word with 6 significant digits.
pub fn export_enriched<W: Write>(net: &NetworkHandle, k: usize, mut out: W) -> Result<ExportSummary> {
    let store = net
        .compressed
        .as_ref()
        .filter(|c| c.is_compressed())
        .ok_or_else(|| Error::Missing("compressed relation store; run training first".into()))?;
    if net.space != crate::simeval::RelationSpace::Compressed {
        return Err(Error::Config("enriched export uses compressed relations".into()));
    }
    writeln!(out, "#SVN-ENRICHED {} {} {}", net.embeddings.dim(), k, store.code_dim())?;
    let mut summary = ExportSummary::default();
    let words = net.embeddings.words().to_vec();
    for chunk in words.chunks(4096) {
        let rows = par::map(chunk, |&w| {
            let (v, filled) = enriched_vector(net, w, k).expect("embedded word");
            let mut line = String::with_capacity(v.len() * 10);
            line.push_str(net.vocab.word(w));
            line.push('\t');
            for (i, x) in v.iter().enumerate() {
                if i > 0 {
                    line.push(' ');
                }
                line.push_str(&format_sig(*x, 6));
            }
            line.push('\n');
            (w, line, filled)
        });
        for (w, line, filled) in rows {
            out.write_all(line.as_bytes())?;
            summary.written += 1;
            if filled == 0 {
                summary.isolated.push(w);
            }
        }
    }
    out.flush()?;
    if !summary.isolated.is_empty() {
        log::warn!("{} words have no usable edge; neighbor blocks left zero", summary.isolated.len());
    }
    Ok(summary)
}
