//! Estimate how controversial a concept is from the sentences that reference it.
//!
//! The pipeline runs in stages, each usable on its own:
//!
//! * [`corpus`] parses hyperlink-annotated sentences, masks the mention of each
//!   target concept and applies the token-length window.
//! * [`embedding`] loads textual word-vector tables and builds concept vectors.
//! * [`nn`] scores a concept from the labels of its neighbors within a cosine radius.
//! * [`nb`] trains a multinomial Naive Bayes model over masked contexts and
//!   averages per-sentence posteriors into a concept score.
//! * [`analysis`] ranks words by information gain over the class partition.
//! * [`evaluation`] implements k-fold, leave-one-category-out and graded protocols.
//! * [`synth`] generates seeded corpora with a planted signal for testing.
//!
//! Batch work (extraction, training, scoring, folds) runs on rayon when the
//! `parallel` feature is enabled and falls back to plain iterators otherwise.
//! See [`exec::Mode`].

pub mod analysis;
pub mod corpus;
pub mod embedding;
pub mod evaluation;
pub mod exec;
pub mod nb;
pub mod nn;
pub mod synth;

mod seed;

pub use corpus::{Concept, ConceptSet, MaskedContext, RawSentence, DEFAULT_MASK_TOKEN};
pub use embedding::{ConceptVector, EmbeddingTable};
pub use evaluation::{EvaluationReport, ExperimentConfig, Protocol};
pub use exec::Mode;
pub use nb::NbModel;
pub use nn::NnModel;
