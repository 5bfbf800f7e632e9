//! Sentence segmentation, tokenization, stopword filtering and the
//! frequency-ranked vocabulary.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;

use crate::error::{Error, Result};
use crate::par;
use crate::WordId;

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// Abbreviations whose trailing period never ends a sentence. Compared
/// case-insensitively against the word preceding the period.
const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "mt", "ft", "vs", "e.g", "i.e",
    "cf", "approx", "dept", "est", "fig", "gen", "gov", "inc", "ltd", "co", "corp", "vol",
    "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec", "col",
    "lt", "capt", "sgt", "rev", "hon", "u.s", "u.k", "a.m", "p.m",
];

/// A set of tokens removed before any position is assigned. Matching is
/// case-insensitive.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopWords {
    words: HashSet<String>,
}

impl StopWords {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The bundled English list.
    pub fn english() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }

    /// One token per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        StopWords { words }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        StopWords {
            words: words.into_iter().map(|w| w.as_ref().to_lowercase()).collect(),
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        if token.chars().any(char::is_uppercase) {
            self.words.contains(&token.to_lowercase())
        } else {
            self.words.contains(token)
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Splits raw bytes into sentences after validating the encoding.
pub fn segment_bytes(bytes: &[u8]) -> Result<Vec<&str>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::InvalidUtf8 {
        offset: e.valid_up_to(),
    })?;
    Ok(segment_sentences(text))
}

/// Rule-based sentence splitter.
///
/// A boundary is a run of `.`, `!` or `?` (optionally followed by closing
/// quotes or brackets), then whitespace, then an uppercase letter, a digit or
/// an opening quote/bracket. A lone period after a known abbreviation or a
/// single-letter initial is not a boundary. Blank lines always are. Returned
/// slices are trimmed and never empty.
pub fn segment_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let n = chars.len();
    let byte_at = |k: usize| if k < n { chars[k].0 } else { text.len() };

    let mut k = 0;
    while k < n {
        let c = chars[k].1;
        if c == '\n' {
            // paragraph break: newline, optional horizontal space, newline
            let mut m = k + 1;
            while m < n && chars[m].1.is_whitespace() && chars[m].1 != '\n' {
                m += 1;
            }
            if m < n && chars[m].1 == '\n' {
                push_trimmed(&mut out, &text[start..byte_at(k)]);
                start = byte_at(m);
                k = m + 1;
                continue;
            }
        }
        if matches!(c, '.' | '!' | '?') {
            let run_start = k;
            let mut m = k;
            while m < n && matches!(chars[m].1, '.' | '!' | '?') {
                m += 1;
            }
            let single_period = m - run_start == 1 && c == '.';
            while m < n && is_closer(chars[m].1) {
                m += 1;
            }
            let end = m;
            if end >= n {
                break;
            }
            if !chars[end].1.is_whitespace() {
                k = end;
                continue;
            }
            let mut look = end;
            while look < n && chars[look].1.is_whitespace() {
                look += 1;
            }
            if look >= n {
                break;
            }
            let next = chars[look].1;
            let opens = next.is_uppercase() || next.is_ascii_digit() || is_opener(next);
            let abbreviated = single_period && is_abbreviation(&text[start..byte_at(run_start)]);
            if opens && !abbreviated {
                push_trimmed(&mut out, &text[start..byte_at(end)]);
                start = byte_at(end);
            }
            k = end;
            continue;
        }
        k += 1;
    }
    push_trimmed(&mut out, &text[start..]);
    out
}

fn push_trimmed<'a>(out: &mut Vec<&'a str>, s: &'a str) {
    let s = s.trim();
    if !s.is_empty() {
        out.push(s);
    }
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}')
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'' | '(' | '[' | '\u{201c}' | '\u{2018}')
}

/// `prefix` is the sentence text up to (not including) the candidate period.
fn is_abbreviation(prefix: &str) -> bool {
    let word = prefix
        .rsplit(|c: char| c.is_whitespace() || is_opener(c))
        .next()
        .unwrap_or("");
    if word.is_empty() {
        return false;
    }
    let mut cs = word.chars();
    if let (Some(first), None) = (cs.next(), cs.next()) {
        // initials: "J. Smith"
        if first.is_uppercase() {
            return true;
        }
    }
    let lower = word.to_lowercase();
    ABBREVIATIONS.iter().any(|a| a.trim_end_matches('.') == lower)
}

/// What to do with in-sentence tokens missing from the vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OovMode {
    /// Remove them before positions are assigned.
    #[default]
    Drop,
    /// Keep them as gaps: they occupy a position but never pair.
    Gap,
}

impl std::str::FromStr for OovMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "drop" => Ok(OovMode::Drop),
            "gap" => Ok(OovMode::Gap),
            other => Err(Error::Config(format!("unknown oov mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for OovMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OovMode::Drop => "drop",
            OovMode::Gap => "gap",
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct Tokenizer {
    pub stopwords: StopWords,
    pub lowercase: bool,
    pub oov: OovMode,
}

impl Tokenizer {
    pub fn new(stopwords: StopWords) -> Self {
        Tokenizer {
            stopwords,
            ..Default::default()
        }
    }

    pub fn lowercase(mut self, yes: bool) -> Self {
        self.lowercase = yes;
        self
    }

    pub fn oov(mut self, mode: OovMode) -> Self {
        self.oov = mode;
        self
    }

    /// Surface tokens of `sentence` with stopwords removed, cased per config.
    pub fn words(&self, sentence: &str) -> Vec<String> {
        split_tokens(sentence)
            .filter(|t| !self.stopwords.contains(t))
            .map(|t| {
                if self.lowercase {
                    t.to_lowercase()
                } else {
                    t.to_string()
                }
            })
            .collect()
    }

    /// Maps a sentence to vocabulary ids, handling OOV tokens per config.
    pub fn encode(&self, sentence: &str, vocab: &Vocabulary) -> TokenizedSentence {
        let mut tokens = Vec::new();
        for t in split_tokens(sentence) {
            if self.stopwords.contains(t) {
                continue;
            }
            let id = if self.lowercase {
                vocab.id(&t.to_lowercase())
            } else {
                vocab.id(t)
            };
            match (id, self.oov) {
                (Some(id), _) => tokens.push(id),
                (None, OovMode::Gap) => tokens.push(TokenizedSentence::GAP),
                (None, OovMode::Drop) => {}
            }
        }
        TokenizedSentence { tokens }
    }

    /// Encodes every sentence, sharded across threads.
    pub fn encode_all<S: AsRef<str> + Sync>(
        &self,
        sentences: &[S],
        vocab: &Vocabulary,
    ) -> Vec<TokenizedSentence> {
        par::map_chunks(sentences, par::SHARD_SIZE, |chunk| {
            chunk
                .iter()
                .map(|s| self.encode(s.as_ref(), vocab))
                .collect::<Vec<_>>()
        })
        .into_iter()
        .flatten()
        .collect()
    }

    /// Token frequency counts over all sentences, merged in shard order.
    pub fn count_tokens<S: AsRef<str> + Sync>(&self, sentences: &[S]) -> TokenCounts {
        par::map_chunks(sentences, par::SHARD_SIZE, |chunk| {
            let mut counts = TokenCounts::default();
            for s in chunk {
                counts.add_all(self.words(s.as_ref()));
            }
            counts
        })
        .into_iter()
        .fold(TokenCounts::default(), |mut acc, c| {
            acc.merge(c);
            acc
        })
    }
}

/// Splits on whitespace and punctuation. Word characters are alphanumerics
/// and `_`; a hyphen or apostrophe is kept when it sits between two word
/// characters ("double-elimination", "don't").
pub fn split_tokens(sentence: &str) -> impl Iterator<Item = &str> {
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    let mut iter = sentence.char_indices().peekable();
    let mut prev_word = false;
    while let Some((i, c)) = iter.next() {
        let word_char = c.is_alphanumeric() || c == '_';
        let joiner = matches!(c, '-' | '\'' | '\u{2019}')
            && prev_word
            && iter
                .peek()
                .is_some_and(|&(_, n)| n.is_alphanumeric() || n == '_');
        if word_char || joiner {
            if start.is_none() {
                start = Some(i);
            }
            prev_word = word_char;
        } else {
            if let Some(s) = start.take() {
                spans.push(&sentence[s..i]);
            }
            prev_word = false;
        }
    }
    if let Some(s) = start {
        spans.push(&sentence[s..]);
    }
    spans.into_iter()
}

/// Mergeable token frequency accumulator.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenCounts {
    counts: HashMap<String, u64>,
}

impl TokenCounts {
    pub fn add(&mut self, token: impl Into<String>) {
        *self.counts.entry(token.into()).or_insert(0) += 1;
    }

    pub fn add_all<I, S>(&mut self, tokens: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        for t in tokens {
            self.add(t);
        }
    }

    pub fn merge(&mut self, other: TokenCounts) {
        if self.counts.len() < other.counts.len() {
            let mine = std::mem::replace(&mut self.counts, other.counts);
            for (k, v) in mine {
                *self.counts.entry(k).or_insert(0) += v;
            }
        } else {
            for (k, v) in other.counts {
                *self.counts.entry(k).or_insert(0) += v;
            }
        }
    }

    pub fn get(&self, token: &str) -> u64 {
        self.counts.get(token).copied().unwrap_or(0)
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(k, &v)| (k.as_str(), v))
    }
}

/// Frequency-ranked word list. Id `i` is the word's rank: frequencies are
/// non-increasing in id, ties ordered lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    freq: Vec<u64>,
    index: HashMap<String, WordId>,
}

impl Vocabulary {
    /// Keeps the `size` most frequent non-stopword entries of `counts`.
    /// Returns all of them, with a warning, when fewer exist.
    pub fn from_counts(counts: &TokenCounts, size: usize, stopwords: &StopWords) -> Self {
        assert!(size >= 1, "vocabulary size must be at least 1");
        let mut ranked: Vec<(&str, u64)> =
            counts.iter().filter(|(w, _)| !stopwords.contains(w)).collect();
        ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        if ranked.len() < size {
            log::warn!(
                "corpus has {} distinct tokens, fewer than the requested vocabulary size {}",
                ranked.len(),
                size
            );
        }
        ranked.truncate(size);
        Self::from_ranked(ranked.into_iter().map(|(w, f)| (w.to_string(), f)))
    }

    fn from_ranked(entries: impl IntoIterator<Item = (String, u64)>) -> Self {
        let mut words = Vec::new();
        let mut freq = Vec::new();
        let mut index = HashMap::new();
        for (w, f) in entries {
            index.insert(w.clone(), words.len() as WordId);
            words.push(w);
            freq.push(f);
        }
        Vocabulary { words, freq, index }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<WordId> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: WordId) -> &str {
        &self.words[id as usize]
    }

    pub fn freq(&self, id: WordId) -> u64 {
        self.freq[id as usize]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Lookup that turns a missing word into an error.
    pub fn require(&self, word: &str) -> Result<WordId> {
        self.id(word).ok_or_else(|| Error::UnknownWord(word.to_string()))
    }

    /// `word<TAB>frequency`, one line per id.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        for (word, f) in self.words.iter().zip(&self.freq) {
            writeln!(w, "{word}\t{f}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_tsv(std::io::BufWriter::new(file))
            .map_err(|e| at_path(e, path))
    }

    pub fn read_tsv<R: BufRead>(reader: R, name: &str) -> Result<Self> {
        let mut entries: Vec<(String, u64)> = Vec::new();
        let mut seen = HashSet::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = n + 1;
            let (word, f) = line
                .split_once('\t')
                .ok_or_else(|| Error::format(name, lineno, "expected word<TAB>frequency"))?;
            let f: u64 = f
                .trim()
                .parse()
                .map_err(|_| Error::format(name, lineno, format!("bad frequency `{f}`")))?;
            if let Some((_, prev)) = entries.last() {
                if *prev < f {
                    return Err(Error::format(name, lineno, "frequencies must be non-increasing"));
                }
            }
            if !seen.insert(word.to_string()) {
                return Err(Error::format(name, lineno, format!("duplicate word `{word}`")));
            }
            entries.push((word.to_string(), f));
        }
        Ok(Self::from_ranked(entries))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_tsv(BufReader::new(file), &path.display().to_string())
    }
}

/// Builds the vocabulary from an already tokenized stream.
pub fn build_vocabulary<I, S>(tokens: I, size: usize, stopwords: &StopWords) -> Vocabulary
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let mut counts = TokenCounts::default();
    counts.add_all(tokens);
    Vocabulary::from_counts(&counts, size, stopwords)
}

/// Sequence of vocabulary ids for one sentence. With [`OovMode::Gap`] some
/// positions hold [`TokenizedSentence::GAP`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenizedSentence {
    tokens: Vec<WordId>,
}

impl TokenizedSentence {
    pub const GAP: WordId = WordId::MAX;

    pub fn new(tokens: Vec<WordId>) -> Self {
        TokenizedSentence { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// The word at `pos`, or `None` for a gap.
    pub fn get(&self, pos: usize) -> Option<WordId> {
        match self.tokens[pos] {
            Self::GAP => None,
            id => Some(id),
        }
    }

    pub fn raw(&self) -> &[WordId] {
        &self.tokens
    }

    /// Same sentence, back to front.
    pub fn reversed(&self) -> Self {
        let mut tokens = self.tokens.clone();
        tokens.reverse();
        TokenizedSentence { tokens }
    }
}

/// Reads a UTF-8 corpus file, transparently decompressing gzip input.
pub fn read_text(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let mut raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        MultiGzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        raw = out;
    }
    String::from_utf8(raw).map_err(|e| Error::InvalidUtf8 {
        offset: e.utf8_error().valid_up_to(),
    })
}

/// Reads and segments every input file. Sentences never span files.
pub fn read_sentences<P: AsRef<Path>>(paths: &[P]) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for p in paths {
        let text = read_text(p)?;
        out.extend(segment_sentences(&text).into_iter().map(str::to_string));
    }
    Ok(out)
}

pub(crate) fn at_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Stream(source) => Error::io(path, source),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segments_two_sentences() {
        assert_eq!(segment_sentences("A b. C d."), vec!["A b.", "C d."]);
        assert!(segment_sentences("").is_empty());
        assert!(segment_sentences("  \n ").is_empty());
    }

    #[test]
    fn abbreviation_does_not_split() {
        assert_eq!(
            segment_sentences("Dr. Smith left. He returned."),
            vec!["Dr. Smith left.", "He returned."]
        );
        assert_eq!(
            segment_sentences("J. R. R. Tolkien wrote it. It sold."),
            vec!["J. R. R. Tolkien wrote it.", "It sold."]
        );
    }

    #[test]
    fn lowercase_continuation_does_not_split() {
        assert_eq!(segment_sentences("It cost 3.5 dollars. ok then."), vec![
            "It cost 3.5 dollars. ok then."
        ]);
    }

    #[test]
    fn quotes_and_paragraphs() {
        assert_eq!(
            segment_sentences("He said \"stop!\" Then left.\n\nnew paragraph here"),
            vec!["He said \"stop!\"", "Then left.", "new paragraph here"]
        );
    }

    #[test]
    fn invalid_utf8_reports_offset() {
        let bytes = b"abc. De\xff fg";
        match segment_bytes(bytes) {
            Err(Error::InvalidUtf8 { offset }) => assert_eq!(offset, 7),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tokenize_removes_stopwords() {
        let tok = Tokenizer::new(StopWords::from_words(["the"]));
        assert_eq!(tok.words("the lion hunts the zebra"), vec!["lion", "hunts", "zebra"]);
        assert_eq!(tok.words("The lion"), vec!["lion"]);
    }

    #[test]
    fn tokenize_strips_punctuation() {
        let tok = Tokenizer::new(StopWords::empty());
        assert_eq!(tok.words("a, b; c"), vec!["a", "b", "c"]);
        assert_eq!(
            tok.words("(double-elimination) don't -x- end."),
            vec!["double-elimination", "don't", "x", "end"]
        );
        assert!(tok.words("... ,;").is_empty());
    }

    #[test]
    fn lowercase_flag() {
        let tok = Tokenizer::new(StopWords::empty()).lowercase(true);
        assert_eq!(tok.words("Paris Is"), vec!["paris", "is"]);
        let tok = Tokenizer::new(StopWords::empty());
        assert_eq!(tok.words("Paris Is"), vec!["Paris", "Is"]);
    }

    #[test]
    fn vocabulary_ranking_and_ties() {
        let v = build_vocabulary("a a b".split(' '), 1, &StopWords::empty());
        assert_eq!(v.words(), ["a"]);
        let v = build_vocabulary("b a b a".split(' '), 2, &StopWords::empty());
        assert_eq!(v.words(), ["a", "b"]);
        assert_eq!(v.id("b"), Some(1));
        let v = build_vocabulary("x the the the".split(' '), 5, &StopWords::from_words(["the"]));
        assert_eq!(v.words(), ["x"]);
    }

    #[test]
    fn encode_oov_modes() {
        let v = build_vocabulary("a b".split(' '), 2, &StopWords::empty());
        let tok = Tokenizer::new(StopWords::empty());
        assert_eq!(tok.encode("a zz b", &v).raw(), &[0, 1]);
        let tok = tok.oov(OovMode::Gap);
        let s = tok.encode("a zz b", &v);
        assert_eq!(s.len(), 3);
        assert_eq!(s.get(1), None);
        assert_eq!(s.get(2), Some(1));
    }

    #[test]
    fn vocab_tsv_round_trip_and_validation() {
        let v = build_vocabulary("a a a b b c".split(' '), 3, &StopWords::empty());
        let mut buf = Vec::new();
        v.write_tsv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "a\t3\nb\t2\nc\t1\n");
        assert_eq!(Vocabulary::read_tsv(&buf[..], "v").unwrap(), v);
        assert!(Vocabulary::read_tsv(&b"a\t1\nb\t2\n"[..], "v").is_err());
        assert!(Vocabulary::read_tsv(&b"a\t2\na\t1\n"[..], "v").is_err());
    }

    #[test]
    fn bundled_stopwords_load() {
        let s = StopWords::english();
        assert!(s.contains("the") && s.contains("The") && s.contains("don't"));
        assert!(!s.contains("lion"));
    }
}
