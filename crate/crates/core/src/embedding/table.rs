use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::normalizer::{Fragment, TokenStream};

use super::vocab::{VocabEntry, Vocabulary};

/// Trained token vectors. Immutable once built: there are no mutating methods.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    vocab: Vocabulary,
    dim: usize,
    vectors: Vec<f64>,
}

impl EmbeddingTable {
    pub(crate) fn new(vocab: Vocabulary, dim: usize, vectors: Vec<f64>) -> Self {
        assert_eq!(vectors.len(), vocab.len() * dim);
        debug_assert!(vectors.iter().all(|x| x.is_finite()));
        Self {
            vocab,
            dim,
            vectors,
        }
    }

    /// A table with no tokens; every stream embeds to the degenerate zero vector.
    pub fn empty(dim: usize) -> Self {
        Self::new(Vocabulary::default(), dim, Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn vector(&self, id: u32) -> &[f64] {
        let i = id as usize * self.dim;
        &self.vectors[i..i + self.dim]
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vocab.id(token).map(|id| self.vector(id))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vocab.id(token).is_some()
    }

    /// Writes the word2vec text format: `V d`, then `token v1 .. vd` per line
    /// in token-id order. Floats use the shortest representation that parses
    /// back to the identical value.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.len(), self.dim)?;
        let mut line = String::new();
        for id in 0..self.len() as u32 {
            line.clear();
            line.push_str(self.vocab.token(id));
            for x in self.vector(id) {
                let _ = write!(line, " {x}");
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    /// Reads the word2vec text format. `file` names the source in errors.
    /// Frequencies are not part of the format; `frequencies` supplies them when
    /// known (otherwise they are recorded as zero).
    pub fn read_text<R: BufRead>(r: R, file: &str, frequencies: Option<&[u64]>) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::corrupt(file, "missing header line"))?
            .map_err(|e| Error::corrupt(file, e.to_string()))?;
        let mut parts = header.split(' ');
        let (v, d) = match (parts.next(), parts.next(), parts.next()) {
            (Some(v), Some(d), None) => (
                v.parse::<usize>()
                    .map_err(|_| Error::corrupt(file, "bad vocabulary size in header"))?,
                d.parse::<usize>()
                    .map_err(|_| Error::corrupt(file, "bad dimension in header"))?,
            ),
            _ => return Err(Error::corrupt(file, "header must be `V d`")),
        };
        if let Some(f) = frequencies {
            if f.len() != v {
                return Err(Error::corrupt(
                    file,
                    format!("{v} vectors but {} vocabulary entries", f.len()),
                ));
            }
        }
        let mut entries = Vec::with_capacity(v);
        let mut vectors = Vec::with_capacity(v * d);
        for i in 0..v {
            let line = lines
                .next()
                .ok_or_else(|| {
                    Error::corrupt(file, format!("truncated: expected {v} vectors, found {i}"))
                })?
                .map_err(|e| Error::corrupt(file, e.to_string()))?;
            let mut fields = line.split(' ');
            let token = fields
                .next()
                .filter(|t| !t.is_empty())
                .ok_or_else(|| Error::corrupt(file, format!("line {}: missing token", i + 2)))?;
            let before = vectors.len();
            for x in fields {
                let x: f64 = x.parse().map_err(|_| {
                    Error::corrupt(file, format!("line {}: bad float '{x}'", i + 2))
                })?;
                if !x.is_finite() {
                    return Err(Error::corrupt(
                        file,
                        format!("line {}: non-finite value", i + 2),
                    ));
                }
                vectors.push(x);
            }
            if vectors.len() - before != d {
                return Err(Error::corrupt(
                    file,
                    format!(
                        "line {}: expected {d} components, found {}",
                        i + 2,
                        vectors.len() - before
                    ),
                ));
            }
            entries.push(VocabEntry {
                token: token.to_string(),
                frequency: frequencies.map_or(0, |f| f[i]),
            });
        }
        if let Some(extra) = lines.next() {
            let extra = extra.map_err(|e| Error::corrupt(file, e.to_string()))?;
            if !extra.trim().is_empty() {
                return Err(Error::corrupt(file, "trailing data after last vector"));
            }
        }
        let vocab = Vocabulary::from_entries(entries, 1);
        if vocab.len() != v {
            return Err(Error::corrupt(file, "duplicate token"));
        }
        Ok(Self::new(vocab, d, vectors))
    }

    pub(crate) fn with_min_count(mut self, min_count: u64) -> Self {
        self.vocab = Vocabulary::from_entries(self.vocab.entries().to_vec(), min_count);
        self
    }
}

/// Composed vector of a token stream.
#[derive(Debug, Clone, PartialEq)]
pub struct FragmentEmbedding {
    pub vector: Vec<f64>,
    pub token_count: usize,
    pub oov_count: usize,
    pub is_degenerate: bool,
}

/// Sum of the vectors of all in-vocabulary tokens. Out-of-vocabulary tokens
/// are skipped and counted. The sum is accumulated per distinct token (in
/// token-id order, scaled by multiplicity), so any reordering of the stream
/// yields a bit-identical vector.
pub fn embed_stream(stream: &TokenStream, table: &EmbeddingTable) -> FragmentEmbedding {
    let mut ids: Vec<u32> = Vec::with_capacity(stream.len());
    let mut oov = 0;
    for t in stream.tokens() {
        match table.vocab().id(t) {
            Some(id) => ids.push(id),
            None => oov += 1,
        }
    }
    ids.sort_unstable();
    let mut vector = vec![0.0; table.dim()];
    let mut i = 0;
    while i < ids.len() {
        let id = ids[i];
        let mut j = i;
        while j < ids.len() && ids[j] == id {
            j += 1;
        }
        let count = (j - i) as f64;
        for (acc, x) in vector.iter_mut().zip(table.vector(id)) {
            *acc += count * x;
        }
        i = j;
    }
    FragmentEmbedding {
        vector,
        token_count: stream.len(),
        oov_count: oov,
        is_degenerate: ids.is_empty(),
    }
}

pub fn embed_fragment(fragment: &Fragment, table: &EmbeddingTable) -> FragmentEmbedding {
    embed_stream(&fragment.stream, table)
}
