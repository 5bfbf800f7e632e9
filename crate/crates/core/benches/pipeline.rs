//! Hot paths on one worker against the default pool.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seven::autoenc::{compress_store, gradients, AutoencoderParams, TrainingExample};
use seven::corpus::{segment_sentences, StopWords, TokenizedSentence, Tokenizer, Vocabulary};
use seven::embeddings::EmbeddingStore;
use seven::graph::{count_cooccurrences, select_edges, EdgeGraph, SelectionParams};
use seven::query::{nearest_relations, SearchSpace};
use seven::relvec::{build_relation_records, RelationStore};
use seven::simeval::NetworkHandle;
use seven::synth::{generate, SynthConfig};

struct Fixture {
    sentences: Vec<TokenizedSentence>,
    vocab: Vocabulary,
    store: EmbeddingStore,
    graph: EdgeGraph,
    relations: RelationStore,
}

fn fixture() -> Fixture {
    let synth = generate(&SynthConfig { sentences: 20_000, ..SynthConfig::default() }).unwrap();
    let raw: Vec<&str> = segment_sentences(&synth.text);
    let tok = Tokenizer::new(StopWords::english());
    let vocab = Vocabulary::from_counts(&tok.count_tokens(&raw), 3000, &tok.stopwords);
    let sentences = tok.encode_all(&raw, &vocab);
    let rows = synth
        .embeddings
        .iter()
        .filter_map(|(w, v)| vocab.id(w).map(|id| (id, v.clone())));
    let store = EmbeddingStore::from_rows(synth.dim(), vocab.len(), rows).unwrap();
    let graph = select_edges(
        &count_cooccurrences(&sentences, 10),
        SelectionParams { top_k: 10, edge_target: 20_000, min_count: 5 },
    );
    let relations = build_relation_records(&sentences, &graph, &store, 10);
    Fixture { sentences, vocab, store, graph, relations }
}

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let n = rayon::current_num_threads();
    let pool = |t| rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap();
    vec![("sequential".to_string(), pool(1)), (format!("pool-{n}"), pool(n))]
}

fn benches(c: &mut Criterion) {
    let f = fixture();
    let d = f.store.dim();
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let params = AutoencoderParams::init(d, 10, 0.01, &mut r);
    let batch: Vec<TrainingExample> = (0..256)
        .map(|k| {
            let mut v = |n: usize| (0..n).map(|_| r.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
            TrainingExample { z: v(6 * d), vi: v(d), vj: v(d), pair: (k, k + 1) }
        })
        .collect();
    let net = NetworkHandle::new(f.vocab.clone(), f.store.clone(), f.graph.clone())
        .with_compressed(compress_store(&f.relations, &params).unwrap())
        .with_raw(f.relations.clone());
    let probe = f.relations.records().iter().find(|r| r.usable).unwrap().pair();

    let mut g = c.benchmark_group("pipeline");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::new("count", &name), |b| {
            b.iter(|| pool.install(|| count_cooccurrences(&f.sentences, 10)))
        });
        g.bench_function(BenchmarkId::new("relvecs", &name), |b| {
            b.iter(|| pool.install(|| build_relation_records(&f.sentences, &f.graph, &f.store, 10)))
        });
        g.bench_function(BenchmarkId::new("gradient", &name), |b| {
            b.iter(|| pool.install(|| gradients(&params, &batch).unwrap()))
        });
        for (label, space) in [("search-raw", SearchSpace::Raw), ("search-codes", SearchSpace::Compressed)] {
            g.bench_function(BenchmarkId::new(label, &name), |b| {
                b.iter(|| pool.install(|| nearest_relations(&net, probe, 10, space).unwrap()))
            });
        }
    }
    g.finish();
}

criterion_group!(pipeline, benches);
criterion_main!(pipeline);
