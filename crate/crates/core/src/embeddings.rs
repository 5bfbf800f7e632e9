//! Pretrained word vectors in word2vec text or binary format, restricted to
//! the vocabulary and indexed by word id.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::numfmt::format_sig;
use crate::WordId;

/// Dense `f32` vectors for the vocabulary words that have one.
///
/// Rows are ordered by word id. The store is immutable once built; readers
/// only ever get shared slices.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    data: Vec<f32>,
    row_of: Vec<Option<u32>>,
    word_of: Vec<WordId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingFormat {
    Text,
    Binary,
}

impl EmbeddingFormat {
    /// `.bin` files are binary, everything else text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => EmbeddingFormat::Binary,
            _ => EmbeddingFormat::Text,
        }
    }
}

impl EmbeddingStore {
    /// Builds a store from `(word id, vector)` rows. Later duplicates are
    /// ignored.
    pub fn from_rows<I>(dim: usize, vocab_len: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (WordId, Vec<f32>)>,
    {
        let mut rows: Vec<(WordId, Vec<f32>)> = rows.into_iter().collect();
        rows.sort_by_key(|(w, _)| *w);
        rows.dedup_by_key(|(w, _)| *w);
        let mut row_of = vec![None; vocab_len];
        let mut word_of = Vec::with_capacity(rows.len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (w, v) in rows {
            if v.len() != dim {
                return Err(Error::Dimension {
                    what: "embedding row",
                    expected: dim,
                    got: v.len(),
                });
            }
            if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("embedding of word {w} contains {bad}")));
            }
            if w as usize >= vocab_len {
                return Err(Error::Config(format!("word id {w} outside vocabulary")));
            }
            row_of[w as usize] = Some(word_of.len() as u32);
            word_of.push(w);
            data.extend_from_slice(&v);
        }
        Ok(EmbeddingStore {
            dim,
            data,
            row_of,
            word_of,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored vectors.
    pub fn len(&self) -> usize {
        self.word_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word_of.is_empty()
    }

    /// Fraction of vocabulary ids that have a vector.
    pub fn coverage(&self) -> f64 {
        if self.row_of.is_empty() {
            0.0
        } else {
            self.len() as f64 / self.row_of.len() as f64
        }
    }

    pub fn contains(&self, w: WordId) -> bool {
        self.row_of.get(w as usize).is_some_and(Option::is_some)
    }

    pub fn get(&self, w: WordId) -> Option<&[f32]> {
        let row = (*self.row_of.get(w as usize)?)? as usize;
        Some(&self.data[row * self.dim..(row + 1) * self.dim])
    }

    /// `get` widened to `f64`.
    pub fn get_f64(&self, w: WordId) -> Option<Vec<f64>> {
        self.get(w).map(|v| v.iter().map(|&x| x as f64).collect())
    }

    /// Word ids with vectors, ascending.
    pub fn words(&self) -> &[WordId] {
        &self.word_of
    }

    pub fn load(path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<Self> {
        let path = path.as_ref();
        let format = EmbeddingFormat::from_path(path);
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let name = path.display().to_string();
        let reader = BufReader::new(file);
        let store = match format {
            EmbeddingFormat::Text => Self::read_text(reader, vocab, &name),
            EmbeddingFormat::Binary => Self::read_binary(reader, vocab, &name),
        }
        .map_err(|e| crate::corpus::at_path(e, path))?;
        log::info!(
            "{name}: {} vectors of dim {}, vocabulary coverage {:.4}",
            store.len(),
            store.dim,
            store.coverage()
        );
        Ok(store)
    }

    /// Text format: optional `count dim` header, then `word v1 .. vd` lines.
    pub fn read_text<R: BufRead>(reader: R, vocab: &Vocabulary, name: &str) -> Result<Self> {
        let mut dim: Option<usize> = None;
        let mut rows = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = n + 1;
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let rest: Vec<&str> = fields.collect();
            if lineno == 1 && rest.len() == 1 {
                if let (Ok(_), Ok(d)) = (word.parse::<usize>(), rest[0].parse::<usize>()) {
                    dim = Some(d);
                    continue;
                }
            }
            match dim {
                Some(d) if d != rest.len() => {
                    return Err(Error::format(
                        name,
                        lineno,
                        format!("expected {d} components, found {}", rest.len()),
                    ))
                }
                None => dim = Some(rest.len()),
                _ => {}
            }
            let Some(id) = vocab.id(word) else { continue };
            let mut v = Vec::with_capacity(rest.len());
            for f in rest {
                let x: f32 = f
                    .parse()
                    .map_err(|_| Error::format(name, lineno, format!("bad number `{f}`")))?;
                if !x.is_finite() {
                    return Err(Error::format(name, lineno, "non-finite component"));
                }
                v.push(x);
            }
            rows.push((id, v));
        }
        Self::finish(dim.unwrap_or(0), vocab, rows)
    }

    /// Binary format: `count dim\n` header, then per record the word bytes,
    /// a space and `dim` little-endian `f32`s.
    pub fn read_binary<R: BufRead>(mut reader: R, vocab: &Vocabulary, name: &str) -> Result<Self> {
        let mut header = String::new();
        reader.read_line(&mut header)?;
        let mut parts = header.split_whitespace();
        let parse = |s: Option<&str>| s.and_then(|s| s.parse::<usize>().ok());
        let (Some(count), Some(dim)) = (parse(parts.next()), parse(parts.next())) else {
            return Err(Error::format(name, 1, "expected `count dim` header"));
        };
        let mut rows = Vec::new();
        let mut buf = vec![0u8; dim * 4];
        let mut word = Vec::new();
        for rec in 0..count {
            word.clear();
            loop {
                let mut b = [0u8];
                if reader.read(&mut b)? == 0 {
                    return Err(Error::format(name, rec + 2, "truncated record"));
                }
                match b[0] {
                    b' ' if !word.is_empty() => break,
                    b'\n' | b' ' if word.is_empty() => continue,
                    c => word.push(c),
                }
            }
            reader
                .read_exact(&mut buf)
                .map_err(|_| Error::format(name, rec + 2, "truncated vector"))?;
            let Ok(w) = std::str::from_utf8(&word) else {
                return Err(Error::format(name, rec + 2, "word is not valid UTF-8"));
            };
            let Some(id) = vocab.id(w) else { continue };
            let v: Vec<f32> = buf
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::format(name, rec + 2, "non-finite component"));
            }
            rows.push((id, v));
        }
        Self::finish(dim, vocab, rows)
    }

    fn finish(dim: usize, vocab: &Vocabulary, rows: Vec<(WordId, Vec<f32>)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::NoCoverage);
        }
        let mut seen = vec![false; vocab.len()];
        let mut unique = Vec::with_capacity(rows.len());
        for (id, v) in rows {
            if std::mem::replace(&mut seen[id as usize], true) {
                log::warn!("duplicate vector for `{}`; keeping the first", vocab.word(id));
                continue;
            }
            unique.push((id, v));
        }
        Self::from_rows(dim, vocab.len(), unique)
    }

    /// Text format with a header line and 9 significant digits, which
    /// reproduces every `f32` exactly.
    pub fn write_text<W: Write>(&self, vocab: &Vocabulary, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.len(), self.dim)?;
        for (row, &id) in self.word_of.iter().enumerate() {
            w.write_all(vocab.word(id).as_bytes())?;
            for &x in &self.data[row * self.dim..(row + 1) * self.dim] {
                write!(w, " {}", format_sig(x as f64, 9))?;
            }
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_binary<W: Write>(&self, vocab: &Vocabulary, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.len(), self.dim)?;
        for (row, &id) in self.word_of.iter().enumerate() {
            w.write_all(vocab.word(id).as_bytes())?;
            w.write_all(b" ")?;
            for &x in &self.data[row * self.dim..(row + 1) * self.dim] {
                w.write_all(&x.to_le_bytes())?;
            }
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, vocab: &Vocabulary, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let w = BufWriter::new(file);
        match EmbeddingFormat::from_path(path) {
            EmbeddingFormat::Text => self.write_text(vocab, w),
            EmbeddingFormat::Binary => self.write_binary(vocab, w),
        }
        .map_err(|e| crate::corpus::at_path(e, path))
    }
}
