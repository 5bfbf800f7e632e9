mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;

use common::*;
use seven::corpus::{segment_sentences, StopWords, TokenCounts, TokenizedSentence, Tokenizer, Vocabulary};
use seven::graph::{count_cooccurrences, select_edges, CooccurrenceAccumulator, SelectionParams};
use seven::query::{enriched_vector, nearest_relations, SearchSpace};
use seven::relvec::{build_relation_records, RelationStore};
use seven::simeval::{pearson, similarity, spearman, Variant};
use seven::WordId;

fn corpus_strategy(v: u32, max_sentences: usize) -> impl Strategy<Value = Vec<TokenizedSentence>> {
    let token = prop_oneof![20 => 0..v, 1 => Just(GAP)];
    prop::collection::vec(prop::collection::vec(token, 0..25), 1..max_sentences)
        .prop_map(|ss| ss.into_iter().map(TokenizedSentence::new).collect())
}

fn accumulate(parts: &[&[TokenizedSentence]], window: usize) -> CooccurrenceAccumulator {
    let mut acc = CooccurrenceAccumulator::new(window);
    for part in parts {
        let mut shard = CooccurrenceAccumulator::new(window);
        for s in *part {
            shard.add_sentence(s);
        }
        acc.merge(shard);
    }
    acc
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pmi_is_symmetric(corpus in corpus_strategy(15, 60)) {
        let c = count_cooccurrences(&corpus, 10);
        for ((i, j), _) in c.iter() {
            prop_assert_eq!(c.get(i, j), c.get(j, i));
            prop_assert_eq!(c.pmi(i, j).unwrap().to_bits(), c.pmi(j, i).unwrap().to_bits());
        }
    }

    #[test]
    fn shard_merge_order_does_not_matter(corpus in corpus_strategy(12, 80), cut in 0usize..80) {
        let cut = cut.min(corpus.len());
        let (a, b) = corpus.split_at(cut);
        let ab = accumulate(&[a, b], 10).finish();
        let ba = accumulate(&[b, a], 10).finish();
        let whole = accumulate(&[&corpus], 10).finish();
        prop_assert_eq!(ab.len(), whole.len());
        for ((i, j), c) in whole.iter() {
            for other in [&ab, &ba] {
                let o = other.get(i, j).unwrap();
                prop_assert!(rel_err(o.weighted, c.weighted) <= 1e-9);
                prop_assert_eq!(o.raw, c.raw);
            }
        }
    }

    #[test]
    fn doubling_the_corpus_keeps_pmi(corpus in corpus_strategy(12, 60)) {
        let once = count_cooccurrences(&corpus, 10);
        let twice_corpus: Vec<_> = corpus.iter().chain(&corpus).cloned().collect();
        let twice = count_cooccurrences(&twice_corpus, 10);
        prop_assert!(rel_err(twice.total(), 2.0 * once.total()) <= 1e-12);
        for ((i, j), c) in once.iter() {
            prop_assert!(rel_err(twice.weighted(i, j), 2.0 * c.weighted) <= 1e-12);
            prop_assert!(rel_err(twice.row(i), 2.0 * once.row(i)) <= 1e-12);
            prop_assert!((twice.pmi(i, j).unwrap() - once.pmi(i, j).unwrap()).abs() <= 1e-12);
        }
    }

    #[test]
    fn every_word_keeps_its_best_pairs(
        corpus in corpus_strategy(20, 120),
        top_k in 1usize..5,
        edge_target in 0usize..60,
        min_count in 1u64..4,
    ) {
        let c = count_cooccurrences(&corpus, 10);
        let g = select_edges(&c, SelectionParams { top_k, edge_target, min_count });
        let mut eligible = std::collections::HashMap::<WordId, usize>::new();
        for ((i, j), pc) in c.iter() {
            if pc.raw >= min_count {
                *eligible.entry(i).or_default() += 1;
                *eligible.entry(j).or_default() += 1;
            }
        }
        for (&w, &n) in &eligible {
            prop_assert!(g.neighbors(w).len() >= n.min(top_k));
        }
        for e in g.edges() {
            prop_assert!(e.raw >= min_count);
            prop_assert!(g.neighbors(e.a).iter().any(|&(n, _)| n == e.b));
            prop_assert!(g.neighbors(e.b).iter().any(|&(n, _)| n == e.a));
        }
        let pmis: Vec<f64> = g.edges().iter().map(|e| e.pmi).collect();
        prop_assert!(pmis.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn context_means_stay_inside_their_inputs(corpus in corpus_strategy(10, 40), seed in 0u64..1000) {
        let mut r = rng(seed);
        let store = random_embeddings(&mut r, 10, 2, 0.8);
        let g = select_edges(&count_cooccurrences(&corpus, 10), SelectionParams { top_k: 3, edge_target: 20, min_count: 1 });
        let rel = build_relation_records(&corpus, &g, &store, 10);
        // per edge, direction and block: componentwise range of contributing
        // vectors, widened to 0 when some segment was empty
        for rec in rel.records() {
            let mut lo = vec![f64::INFINITY; 12];
            let mut hi = vec![f64::NEG_INFINITY; 12];
            for s in &corpus {
                let t = s.raw();
                for p in 0..t.len() {
                    for q in p + 1..t.len().min(p + 11) {
                        let dir = match (t[p], t[q]) {
                            (x, y) if (x, y) == (rec.a, rec.b) => 0,
                            (x, y) if (x, y) == (rec.b, rec.a) => 1,
                            _ => continue,
                        };
                        if !store.contains(rec.a) || !store.contains(rec.b) {
                            continue;
                        }
                        for (blk, range) in [(0, 0..p), (1, p + 1..q), (2, q + 1..t.len())] {
                            let vs: Vec<&[f32]> = t[range].iter().filter(|&&w| w != GAP).filter_map(|&w| store.get(w)).collect();
                            for k in 0..2 {
                                let slot = dir * 6 + blk * 2 + k;
                                if vs.is_empty() {
                                    lo[slot] = lo[slot].min(0.0);
                                    hi[slot] = hi[slot].max(0.0);
                                }
                                for v in &vs {
                                    lo[slot] = lo[slot].min(v[k] as f64);
                                    hi[slot] = hi[slot].max(v[k] as f64);
                                }
                            }
                        }
                    }
                }
            }
            for (k, x) in rec.z.iter().enumerate() {
                if lo[k].is_finite() {
                    prop_assert!(*x >= lo[k] - 1e-12 && *x <= hi[k] + 1e-12);
                } else {
                    prop_assert_eq!(*x, 0.0);
                }
            }
        }
    }

    #[test]
    fn sentence_split_keeps_every_token(words in prop::collection::vec("[A-Za-z]{1,6}|[.!?,;]|Dr\\.|\"", 0..60)) {
        let text = words.join(" ");
        let tok = Tokenizer::new(StopWords::english());
        let whole = tok.words(&text);
        let split: Vec<String> = segment_sentences(&text).iter().flat_map(|s| tok.words(s)).collect();
        prop_assert_eq!(split, whole);
    }

    #[test]
    fn vocabulary_is_ranked(tokens in prop::collection::vec("[a-e]{1,2}", 0..200), size in 1usize..20) {
        let mut counts = TokenCounts::default();
        counts.add_all(tokens.iter().cloned());
        let v = Vocabulary::from_counts(&counts, size, &StopWords::empty());
        prop_assert!(v.len() <= size);
        for i in 1..v.len() as WordId {
            let (a, b) = (v.freq(i - 1), v.freq(i));
            prop_assert!(a > b || (a == b && v.word(i - 1) < v.word(i)));
        }
        let mut buf = Vec::new();
        v.write_tsv(&mut buf).unwrap();
        prop_assert_eq!(Vocabulary::read_tsv(&buf[..], "t").unwrap(), v);
    }

    #[test]
    fn pearson_ignores_positive_affine_maps(
        xs in prop::collection::vec(-100.0f64..100.0, 3..30),
        a in 0.01f64..50.0,
        b in -50.0f64..50.0,
        seed in 0u64..100,
    ) {
        let mut r = rng(seed);
        let mut ys = xs.clone();
        ys.shuffle(&mut r);
        ys.iter_mut().for_each(|y| *y += 1.0);
        let p = pearson(&xs, &ys);
        prop_assume!(p.is_finite());
        let mapped: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        prop_assert!((pearson(&mapped, &ys) - p).abs() <= 1e-12);
    }

    #[test]
    fn spearman_ignores_monotone_maps(xs in prop::collection::vec(-3.0f64..3.0, 3..30), seed in 0u64..100) {
        let mut r = rng(seed);
        let mut ys = xs.clone();
        ys.shuffle(&mut r);
        let s = spearman(&xs, &ys);
        prop_assume!(s.is_finite());
        let mapped: Vec<f64> = xs.iter().map(|x| x.exp() + x * x * x).collect();
        prop_assert!((spearman(&mapped, &ys) - s).abs() <= 1e-12);
    }

    #[test]
    fn similarity_stays_in_range(seed in 0u64..500) {
        let net = toy_network(seed, 25, 3, 2, 5);
        let words = net.embeddings.words().to_vec();
        let mut r = rng(seed);
        for _ in 0..10 {
            let (a, b) = (*words.choose(&mut r).unwrap(), *words.choose(&mut r).unwrap());
            for v in [Variant::Baseline, Variant::WordOnly, Variant::WithRelation] {
                let s = similarity(&net, a, b, v).unwrap();
                prop_assert!((-1.0..=1.0).contains(&s));
                prop_assert!((s - similarity(&net, b, a, v).unwrap()).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn relation_search_ignores_record_order(seed in 0u64..500) {
        let net = toy_network(seed, 20, 3, 2, 4);
        let raw = net.raw.as_ref().unwrap();
        let mut recs = raw.records().to_vec();
        recs.shuffle(&mut rng(seed + 1));
        let shuffled = net.clone().with_raw(RelationStore::new(raw.dim(), recs));
        let probe = raw.records()[0].pair();
        for p in [probe, (probe.1, probe.0)] {
            let a = nearest_relations(&net, p, 5, SearchSpace::Raw).unwrap();
            let b = nearest_relations(&shuffled, p, 5, SearchSpace::Raw).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn diffvec_flips_sign_with_probe_order(seed in 0u64..500) {
        let net = toy_network(seed, 20, 3, 2, 4);
        let e = net.graph.edges().iter().find(|e| net.embeddings.contains(e.a) && net.embeddings.contains(e.b)).unwrap();
        let all = net.graph.len();
        let fwd = nearest_relations(&net, (e.a, e.b), all, SearchSpace::DiffVec).unwrap();
        let bwd = nearest_relations(&net, (e.b, e.a), all, SearchSpace::DiffVec).unwrap();
        prop_assert_eq!(fwd.len(), bwd.len());
        for h in &fwd {
            let g = bwd.iter().find(|x| x.pair == h.pair).unwrap();
            prop_assert!((h.cosine + g.cosine).abs() <= 1e-12);
        }
    }

    #[test]
    fn enriched_width_is_fixed(seed in 0u64..200, k in 0usize..12) {
        let (d, m) = (3, 2);
        let net = toy_network(seed, 20, d, m, 4);
        for &w in net.embeddings.words() {
            let (v, filled) = enriched_vector(&net, w, k).unwrap();
            prop_assert_eq!(v.len(), d + k * (d + m));
            prop_assert!(filled <= k);
        }
    }
}

#[cfg(feature = "parallel")]
#[test]
fn results_do_not_depend_on_thread_count() {
    use seven::autoenc::{train, TrainConfig};

    let mut r = rng(77);
    let corpus = random_corpus(&mut r, 6000, 60, 20, 0.02);
    let store = random_embeddings(&mut r, 60, 4, 0.9);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let counts = count_cooccurrences(&corpus, 10);
            let g = select_edges(&counts, SelectionParams { top_k: 5, edge_target: 300, min_count: 5 });
            let rel = build_relation_records(&corpus, &g, &store, 10);
            let cfg = TrainConfig { epochs: 2, code_dim: 3, ..TrainConfig::default() };
            let (params, _) = train(&rel, &store, &cfg).unwrap();
            (counts, g, rel, params)
        })
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one.0, four.0);
    assert_eq!(one.1, four.1);
    assert_eq!(one.2, four.2);
    assert_eq!(one.3, four.3);
}
