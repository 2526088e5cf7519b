//! Radius-neighborhood estimator over concept embeddings.
//!
//! A query's neighbors are the labeled concepts whose cosine similarity to it
//! is at least the radius (inclusive). The unweighted score is the fraction of
//! controversial neighbors; the weighted score weights each neighbor by its
//! similarity. An empty neighborhood yields the fallback score.

use std::io::{BufRead, Write};

use thiserror::Error;

use crate::corpus::Concept;
use crate::embedding::{concept_embedding, cosine_similarity, ConceptVector, EmbeddingError, EmbeddingTable};
use crate::exec::{self, Mode};

pub const DEFAULT_RADIUS: f64 = 0.3;
pub const DEFAULT_FALLBACK: f64 = 0.5;

const MODEL_MAGIC: &str = "# controversy nn-model v1";

#[derive(Debug, Error)]
pub enum NnError {
    #[error("no training concept has an embedding ({skipped} skipped)")]
    NoEmbeddableConcepts { skipped: usize },
    #[error("radius {0} outside (-1, 1]")]
    Radius(f64),
    #[error("query has dimension {query}, model has dimension {model}")]
    DimensionMismatch { query: usize, model: usize },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("model file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct NnEntry {
    pub concept_id: String,
    pub label: bool,
    pub vector: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NnModel {
    dimension: usize,
    radius: f64,
    fallback: f64,
    entries: Vec<NnEntry>,
    skipped: Vec<String>,
}

/// Result of scoring one query.
#[derive(Clone, Debug, PartialEq)]
pub struct NnOutcome {
    pub score: f64,
    /// Neighbors inside the radius, self excluded.
    pub neighbors: usize,
    /// In-radius neighbors whose negative similarity was clamped to a zero
    /// weight. Only possible with a non-positive radius.
    pub clamped: usize,
    pub used_fallback: bool,
}

impl NnModel {
    /// Builds a model from labeled vectors. Zero vectors are skipped since
    /// their similarity is undefined.
    pub fn from_entries(entries: Vec<NnEntry>, radius: f64, fallback: f64) -> Result<Self, NnError> {
        if !(radius > -1.0 && radius <= 1.0) {
            return Err(NnError::Radius(radius));
        }
        let mut kept = Vec::with_capacity(entries.len());
        let mut skipped = Vec::new();
        let mut dimension = 0;
        for e in entries {
            if e.vector.iter().all(|x| *x == 0.0) {
                skipped.push(e.concept_id);
                continue;
            }
            if dimension == 0 {
                dimension = e.vector.len();
            } else if e.vector.len() != dimension {
                return Err(EmbeddingError::Dimension(dimension, e.vector.len()).into());
            }
            kept.push(e);
        }
        if kept.is_empty() {
            return Err(NnError::NoEmbeddableConcepts { skipped: skipped.len() });
        }
        Ok(NnModel { dimension, radius, fallback, entries: kept, skipped })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn fallback(&self) -> f64 {
        self.fallback
    }

    pub fn entries(&self) -> &[NnEntry] {
        &self.entries
    }

    /// Training concepts left out for lack of an embedding.
    pub fn skipped(&self) -> &[String] {
        &self.skipped
    }

    /// Copy with every label flipped.
    pub fn with_flipped_labels(&self) -> NnModel {
        let mut m = self.clone();
        m.entries.iter_mut().for_each(|e| e.label = !e.label);
        m
    }

    /// Copy without the entry for `concept_id`.
    pub fn without(&self, concept_id: &str) -> NnModel {
        let mut m = self.clone();
        m.entries.retain(|e| e.concept_id != concept_id);
        m
    }

    /// Scores `query`. An entry with the query's own id never votes.
    pub fn score(&self, query: &ConceptVector, weighted: bool) -> Result<NnOutcome, NnError> {
        if query.vector.len() != self.dimension {
            return Err(NnError::DimensionMismatch { query: query.vector.len(), model: self.dimension });
        }
        let (mut n, mut n_pos) = (0usize, 0usize);
        let (mut w_all, mut w_pos) = (0.0f64, 0.0f64);
        let mut clamped = 0usize;
        for e in &self.entries {
            if e.concept_id == query.concept_id {
                continue;
            }
            let sim = cosine_similarity(&query.vector, &e.vector)?;
            if sim < self.radius {
                continue;
            }
            n += 1;
            let w = if sim < 0.0 {
                clamped += 1;
                0.0
            } else {
                sim
            };
            w_all += w;
            if e.label {
                n_pos += 1;
                w_pos += w;
            }
        }
        let raw =
            if weighted { (w_all > 0.0).then(|| w_pos / w_all) } else { (n > 0).then(|| n_pos as f64 / n as f64) };
        Ok(NnOutcome { score: raw.unwrap_or(self.fallback), neighbors: n, clamped, used_fallback: raw.is_none() })
    }

    /// Scores many queries; output order follows input order.
    pub fn score_batch(
        &self,
        queries: &[ConceptVector],
        weighted: bool,
        mode: Mode,
    ) -> Vec<Result<NnOutcome, NnError>> {
        exec::map(mode, queries, |q| self.score(q, weighted))
    }

    /// Writes the model as a tab-separated flat file.
    pub fn write<W: Write>(&self, mut w: W, config: &serde_json::Value) -> std::io::Result<()> {
        writeln!(w, "{MODEL_MAGIC}")?;
        writeln!(w, "dimension\t{}", self.dimension)?;
        writeln!(w, "radius\t{}", self.radius)?;
        writeln!(w, "fallback\t{}", self.fallback)?;
        writeln!(w, "entries\t{}", self.entries.len())?;
        writeln!(w, "config\t{}", serde_json::to_string(config)?)?;
        for e in &self.entries {
            write!(w, "{}\t{}\t", e.concept_id, u8::from(e.label))?;
            for (i, x) in e.vector.iter().enumerate() {
                if i > 0 {
                    w.write_all(b" ")?;
                }
                write!(w, "{x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Reads a model written by [`NnModel::write`], returning it with its
    /// config echo.
    pub fn read<R: BufRead>(reader: R) -> Result<(NnModel, serde_json::Value), NnError> {
        let mut lines = reader.lines();
        let mut next = |line: usize| -> Result<String, NnError> {
            match lines.next() {
                Some(l) => Ok(l?),
                None => Err(NnError::Format { line, message: "unexpected end of file".into() }),
            }
        };
        let fmt_err = |line: usize, message: String| NnError::Format { line, message };
        if next(1)? != MODEL_MAGIC {
            return Err(fmt_err(1, format!("expected `{MODEL_MAGIC}`")));
        }
        let mut header = |line: usize, key: &str| -> Result<String, NnError> {
            let l = next(line)?;
            match l.split_once('\t') {
                Some((k, v)) if k == key => Ok(v.to_string()),
                _ => Err(fmt_err(line, format!("expected `{key}` header"))),
            }
        };
        let num = |line: usize, s: String| s.parse::<f64>().map_err(|e| fmt_err(line, e.to_string()));
        let dimension: usize =
            header(2, "dimension")?.parse().map_err(|e: std::num::ParseIntError| fmt_err(2, e.to_string()))?;
        let radius = num(3, header(3, "radius")?)?;
        let fallback = num(4, header(4, "fallback")?)?;
        let count: usize =
            header(5, "entries")?.parse().map_err(|e: std::num::ParseIntError| fmt_err(5, e.to_string()))?;
        let config: serde_json::Value =
            serde_json::from_str(&header(6, "config")?).map_err(|e| fmt_err(6, e.to_string()))?;

        let mut entries = Vec::with_capacity(count);
        for i in 0..count {
            let line_no = 7 + i;
            let l = next(line_no)?;
            let mut parts = l.splitn(3, '\t');
            let (Some(id), Some(label), Some(vec)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(fmt_err(line_no, "expected id, label and vector".into()));
            };
            let label = match label {
                "0" => false,
                "1" => true,
                other => return Err(fmt_err(line_no, format!("bad label `{other}`"))),
            };
            let vector = vec
                .split(' ')
                .map(|x| x.parse::<f64>().map_err(|e| fmt_err(line_no, e.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            if vector.len() != dimension {
                return Err(fmt_err(
                    line_no,
                    format!("vector has {} components, header says {dimension}", vector.len()),
                ));
            }
            entries.push(NnEntry { concept_id: id.to_string(), label, vector });
        }
        let model = NnModel::from_entries(entries, radius, fallback)?;
        Ok((model, config))
    }
}

/// Embeds every labeled training concept; concepts without an embedding are
/// recorded in [`NnModel::skipped`].
pub fn build_nn_model<'a, I>(train: I, table: &EmbeddingTable, radius: f64) -> Result<NnModel, NnError>
where
    I: IntoIterator<Item = (&'a Concept, bool)>,
{
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for (concept, label) in train {
        match concept_embedding(table, concept) {
            Ok(cv) => entries.push(NnEntry { concept_id: cv.concept_id, label, vector: cv.vector }),
            Err(EmbeddingError::NoEmbedding(id)) => skipped.push(id),
            Err(e) => return Err(e.into()),
        }
    }
    if entries.is_empty() {
        return Err(NnError::NoEmbeddableConcepts { skipped: skipped.len() });
    }
    let mut model = NnModel::from_entries(entries, radius, DEFAULT_FALLBACK)?;
    skipped.extend(std::mem::take(&mut model.skipped));
    skipped.sort();
    model.skipped = skipped;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn entry(id: &str, label: bool, v: &[f64]) -> NnEntry {
        NnEntry { concept_id: id.into(), label, vector: v.to_vec() }
    }

    fn query(v: &[f64]) -> ConceptVector {
        ConceptVector { concept_id: "q".into(), vector: v.to_vec(), covered_words: 1 }
    }

    #[test]
    fn build_examples() {
        let table = EmbeddingTable::from_vectors([("a", vec![1.0, 0.0]), ("b", vec![0.0, 1.0]), ("c", vec![1.0, 1.0])])
            .unwrap();
        let cs = [
            Concept::new("1", "a").with_label(true),
            Concept::new("2", "b").with_label(false),
            Concept::new("3", "c").with_label(true),
        ];
        let m = build_nn_model(cs.iter().map(|c| (c, c.label.unwrap())), &table, DEFAULT_RADIUS).unwrap();
        assert_eq!(m.entries().len(), 3);

        let cs2 = [
            Concept::new("1", "a").with_label(true),
            Concept::new("2", "zzz").with_label(false),
            Concept::new("3", "c").with_label(true),
        ];
        let m = build_nn_model(cs2.iter().map(|c| (c, c.label.unwrap())), &table, DEFAULT_RADIUS).unwrap();
        assert_eq!(m.entries().len(), 2);
        assert_eq!(m.skipped(), ["2".to_string()]);

        let none = [Concept::new("1", "x").with_label(true)];
        assert!(matches!(
            build_nn_model(none.iter().map(|c| (c, true)), &table, DEFAULT_RADIUS),
            Err(NnError::NoEmbeddableConcepts { skipped: 1 })
        ));
    }

    #[test]
    fn score_examples() {
        let all_pos = NnModel::from_entries(
            vec![entry("a", true, &[1.0, 0.1]), entry("b", true, &[1.0, 0.2])],
            DEFAULT_RADIUS,
            DEFAULT_FALLBACK,
        )
        .unwrap();
        assert_eq!(all_pos.score(&query(&[1.0, 0.0]), false).unwrap().score, 1.0);
        assert_eq!(all_pos.score(&query(&[1.0, 0.0]), true).unwrap().score, 1.0);

        // cos(q, a) = 0.9 and cos(q, b) = 0.3 exactly for unit vectors.
        let a = [0.9, (1.0f64 - 0.81).sqrt()];
        let b = [0.3, (1.0f64 - 0.09).sqrt()];
        let m =
            NnModel::from_entries(vec![entry("a", true, &a), entry("b", false, &b)], 0.29, DEFAULT_FALLBACK).unwrap();
        let q = query(&[1.0, 0.0]);
        assert_eq!(m.score(&q, false).unwrap().score, 0.5);
        assert!((m.score(&q, true).unwrap().score - 0.75).abs() < 1e-12);

        let out = all_pos.score(&query(&[-1.0, 0.0]), false).unwrap();
        assert_eq!(out.score, 0.5);
        assert!(out.used_fallback);
    }

    #[test]
    fn radius_is_inclusive() {
        let m = NnModel::from_entries(vec![entry("a", true, &[1.0, 0.0])], 1.0, DEFAULT_FALLBACK).unwrap();
        let out = m.score(&query(&[2.0, 0.0]), false).unwrap();
        assert_eq!(out.neighbors, 1);
        assert_eq!(out.score, 1.0);
    }

    #[test]
    fn dimension_mismatch_errors() {
        let m = NnModel::from_entries(vec![entry("a", true, &[1.0, 0.0])], 0.3, 0.5).unwrap();
        assert!(matches!(
            m.score(&query(&[1.0, 0.0, 0.0]), false),
            Err(NnError::DimensionMismatch { query: 3, model: 2 })
        ));
    }

    #[test]
    fn negative_radius_clamps_weights() {
        let m = NnModel::from_entries(vec![entry("a", true, &[1.0, 0.0]), entry("b", false, &[-1.0, 0.5])], -0.99, 0.5)
            .unwrap();
        let out = m.score(&query(&[1.0, 0.0]), true).unwrap();
        assert_eq!(out.clamped, 1);
        assert_eq!(out.neighbors, 2);
        assert_eq!(out.score, 1.0);
        assert_eq!(m.score(&query(&[1.0, 0.0]), false).unwrap().score, 0.5);
    }

    #[test]
    fn invalid_radius_rejected() {
        assert!(matches!(NnModel::from_entries(vec![entry("a", true, &[1.0])], -1.0, 0.5), Err(NnError::Radius(_))));
        assert!(matches!(NnModel::from_entries(vec![entry("a", true, &[1.0])], 1.5, 0.5), Err(NnError::Radius(_))));
    }

    #[test]
    fn model_file_roundtrip() {
        let m = NnModel::from_entries(
            vec![entry("a", true, &[0.1, -2.5e-7]), entry("b c", false, &[1.0 / 3.0, 7.0])],
            0.3,
            0.5,
        )
        .unwrap();
        let mut buf = Vec::new();
        m.write(&mut buf, &serde_json::json!({"weighted": true})).unwrap();
        let (back, cfg) = NnModel::read(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        assert_eq!(cfg["weighted"], true);
    }

    fn model_strategy() -> impl Strategy<Value = (NnModel, Vec<f64>)> {
        (1usize..6)
            .prop_flat_map(|d| {
                let v = prop::collection::vec(-1.0f64..1.0, d);
                (prop::collection::vec((any::<bool>(), v.clone()), 1..20), v, -0.5f64..0.9).prop_map(|(es, q, r)| {
                    let entries = es
                        .into_iter()
                        .enumerate()
                        .map(|(i, (l, mut v))| {
                            v[0] += 1e-3;
                            NnEntry { concept_id: format!("e{i}"), label: l, vector: v }
                        })
                        .collect();
                    (NnModel::from_entries(entries, r, 0.5).unwrap(), q)
                })
            })
            .prop_filter("nonzero query", |(_, q)| q.iter().any(|x| x.abs() > 1e-3))
    }

    proptest! {
        #[test]
        fn scores_in_unit_interval_and_flip_antisymmetric((m, q) in model_strategy()) {
            let q = query(&q);
            for weighted in [false, true] {
                let s = m.score(&q, weighted).unwrap().score;
                prop_assert!((0.0..=1.0).contains(&s));
            }
            let a = m.score(&q, false).unwrap();
            let b = m.with_flipped_labels().score(&q, false).unwrap();
            if a.neighbors > 0 {
                prop_assert!((a.score + b.score - 1.0).abs() <= 1e-12);
            }
        }

        #[test]
        fn self_exclusion_matches_removal((m, _q) in model_strategy(), pick in any::<prop::sample::Index>()) {
            let e = &m.entries()[pick.index(m.entries().len())];
            let q = ConceptVector { concept_id: e.concept_id.clone(), vector: e.vector.clone(), covered_words: 1 };
            let rest = m.entries().len() > 1;
            for weighted in [false, true] {
                let own = m.score(&q, weighted).unwrap();
                if rest {
                    let removed = m.without(&e.concept_id).score(&q, weighted).unwrap();
                    prop_assert_eq!(own, removed);
                } else {
                    prop_assert!(own.used_fallback);
                }
            }
        }
    }
}
