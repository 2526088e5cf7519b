//! Pretrained word-vector tables in the whitespace-separated text format
//! (`word c1 c2 ... cD` per line) and concept vectors derived from them.

use std::collections::HashMap;
use std::io::BufRead;

use thiserror::Error;

use crate::corpus::{tokenize, Concept};

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("empty embedding table")]
    Empty,
    #[error("line {line}: expected {expected} components, found {found}")]
    DimensionMismatch { line: usize, expected: usize, found: usize },
    #[error("line {line}: component `{token}` is not a number")]
    NonNumeric { line: usize, token: String },
    #[error("line {line}: missing vector components")]
    NoComponents { line: usize },
    #[error("no embedding for concept `{0}`")]
    NoEmbedding(String),
    #[error("vectors have different dimensions ({0} vs {1})")]
    Dimension(usize, usize),
    #[error("cosine similarity undefined for a zero vector")]
    ZeroVector,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Word → dense vector, all of one dimension.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    vectors: HashMap<String, Vec<f64>>,
    duplicates: usize,
}

impl EmbeddingTable {
    /// Builds a table from in-memory vectors. Later duplicates win.
    pub fn from_vectors<I, S>(entries: I) -> Result<Self, EmbeddingError>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut table = EmbeddingTable::default();
        for (i, (word, v)) in entries.into_iter().enumerate() {
            table.insert(word.into(), v, i + 1)?;
        }
        if table.vectors.is_empty() {
            return Err(EmbeddingError::Empty);
        }
        Ok(table)
    }

    fn insert(&mut self, word: String, v: Vec<f64>, line: usize) -> Result<(), EmbeddingError> {
        if v.is_empty() {
            return Err(EmbeddingError::NoComponents { line });
        }
        if self.dimension == 0 {
            self.dimension = v.len();
        } else if v.len() != self.dimension {
            return Err(EmbeddingError::DimensionMismatch { line, expected: self.dimension, found: v.len() });
        }
        if self.vectors.insert(word, v).is_some() {
            self.duplicates += 1;
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// How many lines redefined an already-seen word.
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }
}

/// Loads a textual vector table. Blank lines are skipped.
pub fn load_embeddings<R: BufRead>(reader: R) -> Result<EmbeddingTable, EmbeddingError> {
    let mut table = EmbeddingTable::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let v = fields
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| EmbeddingError::NonNumeric { line: line_no, token: tok.to_string() })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        table.insert(word.to_string(), v, line_no)?;
    }
    if table.vectors.is_empty() {
        return Err(EmbeddingError::Empty);
    }
    if table.duplicates > 0 {
        log::warn!("{} duplicate words in embedding table; later entries kept", table.duplicates);
    }
    Ok(table)
}

/// Writes the table in the textual format, words in sorted order.
pub fn write_embeddings<W: std::io::Write>(mut w: W, table: &EmbeddingTable) -> std::io::Result<()> {
    let mut words: Vec<&String> = table.vectors.keys().collect();
    words.sort();
    for word in words {
        write!(w, "{word}")?;
        for x in &table.vectors[word] {
            write!(w, " {x}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// A concept's position in embedding space.
#[derive(Clone, Debug, PartialEq)]
pub struct ConceptVector {
    pub concept_id: String,
    pub vector: Vec<f64>,
    /// Title words found in the table; always at least 1.
    pub covered_words: usize,
}

/// Component-wise mean of the vectors of the title's words that are in the
/// table. Missing words are skipped.
pub fn concept_embedding(table: &EmbeddingTable, concept: &Concept) -> Result<ConceptVector, EmbeddingError> {
    let mut sum = vec![0.0; table.dimension()];
    let mut covered = 0usize;
    for word in tokenize(&concept.title) {
        if let Some(v) = table.get(&word) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            covered += 1;
        }
    }
    if covered == 0 {
        return Err(EmbeddingError::NoEmbedding(concept.id.clone()));
    }
    if covered > 1 {
        let n = covered as f64;
        sum.iter_mut().for_each(|s| *s /= n);
    }
    Ok(ConceptVector { concept_id: concept.id.clone(), vector: sum, covered_words: covered })
}

/// `dot(u, v) / (|u| |v|)`, clamped into `[-1, 1]`.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64, EmbeddingError> {
    if u.len() != v.len() {
        return Err(EmbeddingError::Dimension(u.len(), v.len()));
    }
    let (mut dot, mut uu, mut vv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == 0.0 || vv == 0.0 {
        return Err(EmbeddingError::ZeroVector);
    }
    Ok((dot / (uu.sqrt() * vv.sqrt())).clamp(-1.0, 1.0))
}
