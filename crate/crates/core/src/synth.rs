//! Seeded synthetic corpora with matching embeddings and a graded similarity
//! set, for tests, benchmarks and offline demonstration runs.
//!
//! Every content word has a latent vector: its topic center plus a private
//! component. Published embeddings are the latents plus isotropic noise, and
//! gold similarity is the cosine of the noiseless latents. Sentences either
//! describe a topic with a handful of its words or state a typed relation
//! `head connector tail`, where the tail is the topic word nearest to
//! `head + offset(relation)` in latent space.

use std::collections::HashSet;
use std::io::{self, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, WeightedAliasIndex};

use crate::corpus::StopWords;
use crate::error::{Error, Result};
use crate::numfmt::format_sig;

const FILLERS: [&str; 16] = [
    "the", "of", "and", "in", "to", "a", "was", "is", "for", "with", "on", "by", "as", "at", "from", "its",
];
const OPENERS: [&str; 6] = ["The", "In", "A", "This", "Its", "From"];
const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub sentences: usize,
    pub topics: usize,
    pub words_per_topic: usize,
    pub relations: usize,
    /// Relation pairs per (topic, relation).
    pub pairs_per_relation: usize,
    pub dim: usize,
    /// Weight of the shared topic center in each latent.
    pub topic_weight: f64,
    /// Standard deviation of the embedding noise.
    pub noise: f64,
    /// Share of sentences that state a relation.
    pub relational_share: f64,
    pub gold_pairs: usize,
    /// Random embedded words that never occur in the corpus.
    pub distractors: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            sentences: 95_000,
            topics: 50,
            words_per_topic: 120,
            relations: 8,
            pairs_per_relation: 6,
            dim: 50,
            topic_weight: 0.8,
            noise: 0.7,
            relational_share: 0.5,
            gold_pairs: 400,
            distractors: 200,
        }
    }
}

impl SynthConfig {
    /// A few thousand sentences; enough for end-to-end tests.
    pub fn small(seed: u64) -> Self {
        SynthConfig {
            seed,
            sentences: 3_000,
            topics: 8,
            words_per_topic: 30,
            relations: 3,
            pairs_per_relation: 4,
            dim: 12,
            gold_pairs: 60,
            distractors: 10,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub text: String,
    pub tokens: usize,
    /// `(word, vector)` in generation order.
    pub embeddings: Vec<(String, Vec<f32>)>,
    /// `(word1, word2, score in [0, 10])`.
    pub gold: Vec<(String, String, f64)>,
    /// `(head, connector, tail)` statements used in the corpus.
    pub relations: Vec<(String, String, String)>,
}

fn normal_vec<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let x: f64 = StandardNormal.sample(rng);
            scale * x
        })
        .collect()
}

fn cos(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    dot / (nu * nv)
}

fn pseudo_word<R: Rng>(rng: &mut R) -> String {
    let syllables = rng.gen_range(2..=4);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push(*CONSONANTS.choose(rng).unwrap() as char);
        w.push(*VOWELS.choose(rng).unwrap() as char);
    }
    if rng.gen_bool(0.3) {
        w.push(*CONSONANTS.choose(rng).unwrap() as char);
    }
    w
}

struct Lexicon {
    seen: HashSet<String>,
    stop: StopWords,
}

impl Lexicon {
    fn fresh<R: Rng>(&mut self, rng: &mut R) -> String {
        loop {
            let w = pseudo_word(rng);
            if !self.stop.contains(&w) && self.seen.insert(w.clone()) {
                return w;
            }
        }
    }
}

fn push_topic_words<'a>(
    rng: &mut ChaCha8Rng,
    out: &mut Vec<&'a str>,
    topic: &'a [String],
    picker: &WeightedAliasIndex<f64>,
    n: usize,
) {
    for _ in 0..n {
        if rng.gen_bool(0.45) {
            out.push(FILLERS.choose(rng).unwrap());
        }
        out.push(&topic[picker.sample(rng)]);
    }
}

pub fn generate(config: &SynthConfig) -> Result<SynthCorpus> {
    if config.topics == 0 || config.words_per_topic < 2 || config.dim == 0 {
        return Err(Error::Config("synthetic corpus needs topics, two words per topic and d > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut lex = Lexicon {
        seen: HashSet::new(),
        stop: StopWords::english(),
    };
    let d = config.dim;
    let private = (1.0 - config.topic_weight * config.topic_weight).max(0.0).sqrt();

    let mut words: Vec<Vec<String>> = Vec::with_capacity(config.topics);
    let mut latents: Vec<Vec<Vec<f64>>> = Vec::with_capacity(config.topics);
    for _ in 0..config.topics {
        let center = normal_vec(&mut rng, d, config.topic_weight);
        let mut ws = Vec::new();
        let mut ls = Vec::new();
        for _ in 0..config.words_per_topic {
            ws.push(lex.fresh(&mut rng));
            let own = normal_vec(&mut rng, d, private);
            ls.push(center.iter().zip(own).map(|(c, o)| c + o).collect::<Vec<f64>>());
        }
        words.push(ws);
        latents.push(ls);
    }

    let offsets: Vec<Vec<f64>> = (0..config.relations).map(|_| normal_vec(&mut rng, d, 0.6)).collect();
    let connectors: Vec<String> = (0..config.relations).map(|_| lex.fresh(&mut rng)).collect();
    let connector_latents: Vec<Vec<f64>> = (0..config.relations).map(|_| normal_vec(&mut rng, d, 1.0)).collect();

    // Zipf-like word frequencies within a topic
    let zipf: Vec<f64> = (0..config.words_per_topic).map(|r| 1.0 / (r as f64 + 1.0).powf(0.9)).collect();
    let picker = WeightedAliasIndex::new(zipf).map_err(|e| Error::Config(e.to_string()))?;

    let mut pairs: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); config.topics];
    let mut statements = Vec::new();
    for (t, ls) in latents.iter().enumerate() {
        for (rel, off) in offsets.iter().enumerate() {
            for _ in 0..config.pairs_per_relation {
                let h = picker.sample(&mut rng);
                let target: Vec<f64> = ls[h].iter().zip(off).map(|(a, b)| a + b).collect();
                let tail = (0..ls.len())
                    .filter(|&k| k != h)
                    .max_by(|&x, &y| cos(&ls[x], &target).total_cmp(&cos(&ls[y], &target)))
                    .unwrap();
                pairs[t].push((h, rel, tail));
                statements.push((words[t][h].clone(), connectors[rel].clone(), words[t][tail].clone()));
            }
        }
    }

    let mut text = String::new();
    let mut tokens = 0usize;
    let mut sentence: Vec<&str> = Vec::with_capacity(32);
    for s in 0..config.sentences {
        sentence.clear();
        sentence.push(OPENERS.choose(&mut rng).unwrap());
        let t = rng.gen_range(0..config.topics);
        let fill = |rng: &mut ChaCha8Rng, out: &mut Vec<_>, n: usize| push_topic_words(rng, out, &words[t], &picker, n);
        if !pairs[t].is_empty() && rng.gen_bool(config.relational_share) {
            let &(h, rel, tail) = pairs[t].choose(&mut rng).unwrap();
            let before = rng.gen_range(0..3);
            fill(&mut rng, &mut sentence, before);
            sentence.push(&words[t][h]);
            if rng.gen_bool(0.5) {
                sentence.push(FILLERS.choose(&mut rng).unwrap());
            }
            sentence.push(&connectors[rel]);
            sentence.push(FILLERS.choose(&mut rng).unwrap());
            sentence.push(&words[t][tail]);
            let after = rng.gen_range(0..4);
            fill(&mut rng, &mut sentence, after);
        } else {
            let n = rng.gen_range(5..12);
            fill(&mut rng, &mut sentence, n);
        }
        tokens += sentence.len();
        text.push_str(&sentence.join(" "));
        text.push_str(match rng.gen_range(0..20) {
            0 => "!",
            1 => "?",
            _ => ".",
        });
        text.push(if s % 9 == 8 { '\n' } else { ' ' });
        if s % 9 == 8 {
            text.push('\n');
        }
    }

    let mut embeddings = Vec::new();
    let noisy = |rng: &mut ChaCha8Rng, l: &[f64]| -> Vec<f32> {
        l.iter()
            .map(|x| {
                let e: f64 = StandardNormal.sample(rng);
                (x + config.noise * e) as f32
            })
            .collect()
    };
    for (ws, ls) in words.iter().zip(&latents) {
        for (w, l) in ws.iter().zip(ls) {
            embeddings.push((w.clone(), noisy(&mut rng, l)));
        }
    }
    for (w, l) in connectors.iter().zip(&connector_latents) {
        embeddings.push((w.clone(), noisy(&mut rng, l)));
    }
    for _ in 0..config.distractors {
        let w = lex.fresh(&mut rng);
        let l = normal_vec(&mut rng, d, 1.0);
        embeddings.push((w, noisy(&mut rng, &l)));
    }

    // gold pairs drawn from frequent words so they survive vocabulary cuts
    let frequent = config.words_per_topic.min(40);
    let mut gold = Vec::with_capacity(config.gold_pairs);
    let mut used = HashSet::new();
    let mut attempts = 0;
    while gold.len() < config.gold_pairs && attempts < config.gold_pairs * 50 {
        attempts += 1;
        let t1 = rng.gen_range(0..config.topics);
        let t2 = if rng.gen_bool(0.5) { t1 } else { rng.gen_range(0..config.topics) };
        let (i, j) = (rng.gen_range(0..frequent), rng.gen_range(0..frequent));
        if (t1, i) == (t2, j) {
            continue;
        }
        let key = if (t1, i) < (t2, j) { (t1, i, t2, j) } else { (t2, j, t1, i) };
        if !used.insert(key) {
            continue;
        }
        let c = cos(&latents[t1][i], &latents[t2][j]);
        let score = (5.0 * (c + 1.0) * 100.0).round() / 100.0;
        gold.push((words[t1][i].clone(), words[t2][j].clone(), score));
    }

    Ok(SynthCorpus {
        text,
        tokens,
        embeddings,
        gold,
        relations: statements,
    })
}

impl SynthCorpus {
    pub fn dim(&self) -> usize {
        self.embeddings.first().map_or(0, |(_, v)| v.len())
    }

    /// word2vec text format with a `count dim` header.
    pub fn write_embeddings<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{} {}", self.embeddings.len(), self.dim())?;
        for (word, v) in &self.embeddings {
            w.write_all(word.as_bytes())?;
            for x in v {
                write!(w, " {}", format_sig(*x as f64, 9))?;
            }
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    pub fn write_gold<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "word1\tword2\tscore")?;
        for (a, b, s) in &self.gold {
            writeln!(w, "{a}\t{b}\t{s}")?;
        }
        w.flush()
    }

    /// Writes `corpus.txt`, `embeddings.txt` and `gold.tsv` into `dir`.
    pub fn write_all(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let put = |name: &str, f: &dyn Fn(&mut Vec<u8>) -> io::Result<()>| -> Result<()> {
            let path = dir.join(name);
            let mut buf = Vec::new();
            f(&mut buf)?;
            std::fs::write(&path, buf).map_err(|e| Error::io(&path, e))
        };
        put("corpus.txt", &|b| b.write_all(self.text.as_bytes()))?;
        put("embeddings.txt", &|b| self.write_embeddings(b))?;
        put("gold.tsv", &|b| self.write_gold(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::segment_sentences;

    #[test]
    fn seeded_output_is_reproducible() {
        let a = generate(&SynthConfig::small(3)).unwrap();
        let b = generate(&SynthConfig::small(3)).unwrap();
        assert_eq!(a.text, b.text);
        assert_eq!(a.embeddings, b.embeddings);
        let c = generate(&SynthConfig::small(4)).unwrap();
        assert_ne!(a.text, c.text);
    }

    #[test]
    fn sentences_segment_as_generated() {
        let cfg = SynthConfig::small(1);
        let s = generate(&cfg).unwrap();
        assert_eq!(segment_sentences(&s.text).len(), cfg.sentences);
        assert_eq!(s.dim(), cfg.dim);
        assert!(s.gold.iter().all(|g| (0.0..=10.0).contains(&g.2)));
    }
}
