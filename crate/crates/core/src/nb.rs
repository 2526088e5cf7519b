//! Multinomial Naive Bayes over masked contexts.
//!
//! Token likelihoods use add-alpha smoothing over the joint vocabulary:
//! `P(w | c) = (count_c(w) + alpha) / (total_c + alpha * |V|)`. A sentence is
//! scored by its posterior probability of the controversial class under a
//! fixed 0.5 prior, summing log-likelihoods per token occurrence. The mask
//! token and out-of-vocabulary tokens carry no evidence.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use serde::Serialize;
use thiserror::Error;

use crate::corpus::{ContextMap, MaskedContext};
use crate::exec::{self, Mode};

pub const DEFAULT_ALPHA: f64 = 1.0;
pub const PRIOR_POS: f64 = 0.5;

const MODEL_MAGIC: &str = "# controversy nb-model v1";

#[derive(Debug, Error)]
pub enum NbError {
    #[error("no training contexts for the {0} class")]
    EmptyClass(&'static str),
    #[error("smoothing alpha must be positive, got {0}")]
    Alpha(f64),
    #[error("concept `{0}` has contexts but no label")]
    Unlabeled(String),
    #[error("concept `{0}` has no contexts to score")]
    NoContexts(String),
    #[error("empty context list")]
    EmptyContexts,
    #[error("model file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TokenCounts {
    pub pos: u64,
    pub neg: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NbModel {
    counts: BTreeMap<String, TokenCounts>,
    total_pos: u64,
    total_neg: u64,
    alpha: f64,
    mask_token: String,
    /// Per-token `(ln P(w|pos), ln P(w|neg))`.
    log_lik: HashMap<String, (f64, f64)>,
}

impl NbModel {
    /// Builds a model from per-token counts; totals are derived.
    pub fn from_counts(counts: BTreeMap<String, TokenCounts>, alpha: f64, mask_token: &str) -> Result<Self, NbError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(NbError::Alpha(alpha));
        }
        let total_pos: u64 = counts.values().map(|c| c.pos).sum();
        let total_neg: u64 = counts.values().map(|c| c.neg).sum();
        let v = counts.len() as f64;
        let den_pos = (total_pos as f64 + alpha * v).ln();
        let den_neg = (total_neg as f64 + alpha * v).ln();
        let log_lik = counts
            .iter()
            .map(|(w, c)| (w.clone(), ((c.pos as f64 + alpha).ln() - den_pos, (c.neg as f64 + alpha).ln() - den_neg)))
            .collect();
        Ok(NbModel { counts, total_pos, total_neg, alpha, mask_token: mask_token.to_string(), log_lik })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn prior_pos(&self) -> f64 {
        PRIOR_POS
    }

    pub fn total_pos(&self) -> u64 {
        self.total_pos
    }

    pub fn total_neg(&self) -> u64 {
        self.total_neg
    }

    pub fn vocab_size(&self) -> usize {
        self.counts.len()
    }

    pub fn mask_token(&self) -> &str {
        &self.mask_token
    }

    pub fn counts(&self) -> &BTreeMap<String, TokenCounts> {
        &self.counts
    }

    pub fn count_pos(&self, token: &str) -> u64 {
        self.counts.get(token).map_or(0, |c| c.pos)
    }

    pub fn count_neg(&self, token: &str) -> u64 {
        self.counts.get(token).map_or(0, |c| c.neg)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.counts.contains_key(token)
    }

    /// The same model with the class roles exchanged.
    pub fn swapped(&self) -> NbModel {
        let counts = self.counts.iter().map(|(w, c)| (w.clone(), TokenCounts { pos: c.neg, neg: c.pos })).collect();
        NbModel::from_counts(counts, self.alpha, &self.mask_token).expect("alpha already validated")
    }

    /// Posterior probability that `tokens` come from the controversial class.
    pub fn score_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> f64 {
        let (mut lp, mut ln) = (PRIOR_POS.ln(), (1.0 - PRIOR_POS).ln());
        for t in tokens {
            let t = t.as_ref();
            if t == self.mask_token {
                continue;
            }
            if let Some(&(p, n)) = self.log_lik.get(t) {
                lp += p;
                ln += n;
            }
        }
        let m = lp.max(ln);
        let ep = (lp - m).exp();
        let en = (ln - m).exp();
        ep / (ep + en)
    }

    /// Writes the model as a tab-separated flat file, tokens in sorted order.
    pub fn write<W: Write>(&self, mut w: W, config: &serde_json::Value) -> std::io::Result<()> {
        writeln!(w, "{MODEL_MAGIC}")?;
        writeln!(w, "alpha\t{}", self.alpha)?;
        writeln!(w, "prior\t{}", PRIOR_POS)?;
        writeln!(w, "total_pos\t{}", self.total_pos)?;
        writeln!(w, "total_neg\t{}", self.total_neg)?;
        writeln!(w, "vocab\t{}", self.counts.len())?;
        writeln!(w, "mask\t{}", self.mask_token)?;
        writeln!(w, "config\t{}", serde_json::to_string(config)?)?;
        for (tok, c) in &self.counts {
            writeln!(w, "{tok}\t{}\t{}", c.pos, c.neg)?;
        }
        Ok(())
    }

    /// Reads a model written by [`NbModel::write`]; checks the header totals
    /// against the token records.
    pub fn read<R: BufRead>(reader: R) -> Result<(NbModel, serde_json::Value), NbError> {
        let err = |line: usize, message: String| NbError::Format { line, message };
        let mut lines = reader.lines();
        let mut line_no = 0usize;
        let mut next = || -> Result<(usize, String), NbError> {
            line_no += 1;
            match lines.next() {
                Some(l) => Ok((line_no, l?)),
                None => Err(NbError::Format { line: line_no, message: "unexpected end of file".into() }),
            }
        };
        let (_, magic) = next()?;
        if magic != MODEL_MAGIC {
            return Err(err(1, format!("expected `{MODEL_MAGIC}`")));
        }
        let mut header = |key: &str| -> Result<(usize, String), NbError> {
            let (n, l) = next()?;
            match l.split_once('\t') {
                Some((k, v)) if k == key => Ok((n, v.to_string())),
                _ => Err(err(n, format!("expected `{key}` header"))),
            }
        };
        fn parse<T: std::str::FromStr>(n: usize, v: &str) -> Result<T, NbError>
        where
            T::Err: std::fmt::Display,
        {
            v.parse().map_err(|e: T::Err| NbError::Format { line: n, message: e.to_string() })
        }
        let (n, v) = header("alpha")?;
        let alpha: f64 = parse(n, &v)?;
        let (n, v) = header("prior")?;
        let prior: f64 = parse(n, &v)?;
        if prior != PRIOR_POS {
            return Err(err(n, format!("prior must be {PRIOR_POS}, found {prior}")));
        }
        let (_, v) = header("total_pos")?;
        let total_pos: u64 = parse(4, &v)?;
        let (_, v) = header("total_neg")?;
        let total_neg: u64 = parse(5, &v)?;
        let (_, v) = header("vocab")?;
        let vocab: usize = parse(6, &v)?;
        let (_, mask) = header("mask")?;
        let (n, v) = header("config")?;
        let config: serde_json::Value = serde_json::from_str(&v).map_err(|e| err(n, e.to_string()))?;

        let mut counts = BTreeMap::new();
        for _ in 0..vocab {
            let (n, l) = next()?;
            let mut parts = l.split('\t');
            let (Some(tok), Some(p), Some(q), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
                return Err(err(n, "expected token, pos count, neg count".into()));
            };
            counts.insert(tok.to_string(), TokenCounts { pos: parse(n, p)?, neg: parse(n, q)? });
        }
        let model = NbModel::from_counts(counts, alpha, &mask)?;
        if model.total_pos != total_pos || model.total_neg != total_neg {
            return Err(err(
                4,
                format!(
                    "header totals {total_pos}/{total_neg} disagree with records {}/{}",
                    model.total_pos, model.total_neg
                ),
            ));
        }
        Ok((model, config))
    }
}

/// Accumulates per-class token counts over labeled contexts (mask excluded).
pub fn train_nb(examples: &[(&MaskedContext, bool)], alpha: f64, mask_token: &str) -> Result<NbModel, NbError> {
    train_nb_with(examples, alpha, mask_token, Mode::default())
}

pub fn train_nb_with(
    examples: &[(&MaskedContext, bool)],
    alpha: f64,
    mask_token: &str,
    mode: Mode,
) -> Result<NbModel, NbError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(NbError::Alpha(alpha));
    }
    if !examples.iter().any(|(_, l)| *l) {
        return Err(NbError::EmptyClass("positive"));
    }
    if !examples.iter().any(|(_, l)| !*l) {
        return Err(NbError::EmptyClass("negative"));
    }
    let counts = exec::fold_merge(
        mode,
        examples,
        BTreeMap::<String, TokenCounts>::new,
        |mut acc, (ctx, label)| {
            for t in &ctx.tokens {
                if t == mask_token {
                    continue;
                }
                let c = acc.entry(t.clone()).or_default();
                if *label {
                    c.pos += 1;
                } else {
                    c.neg += 1;
                }
            }
            acc
        },
        |a, b| if a.len() >= b.len() { merge_into(a, b) } else { merge_into(b, a) },
    );
    NbModel::from_counts(counts, alpha, mask_token)
}

fn merge_into(mut a: BTreeMap<String, TokenCounts>, b: BTreeMap<String, TokenCounts>) -> BTreeMap<String, TokenCounts> {
    for (w, c) in b {
        let e = a.entry(w).or_default();
        e.pos += c.pos;
        e.neg += c.neg;
    }
    a
}

/// Trains from a concept → contexts map and a label per concept. Every
/// concept with contexts must be labeled.
pub fn train_nb_from_map(
    contexts: &ContextMap,
    labels: &BTreeMap<String, bool>,
    alpha: f64,
    mask_token: &str,
) -> Result<NbModel, NbError> {
    let mut examples = Vec::new();
    for (id, ctxs) in contexts {
        if ctxs.is_empty() {
            continue;
        }
        let label = *labels.get(id).ok_or_else(|| NbError::Unlabeled(id.clone()))?;
        examples.extend(ctxs.iter().map(|c| (c, label)));
    }
    train_nb(&examples, alpha, mask_token)
}

/// Posterior of the controversial class for one context, in `(0, 1)`.
/// A context without scorable tokens gets exactly 0.5.
pub fn nb_sentence_score(model: &NbModel, context: &MaskedContext) -> f64 {
    model.score_tokens(&context.tokens)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConceptScore {
    pub concept_id: String,
    pub score: f64,
    pub n_sentences: usize,
    pub per_sentence: Option<Vec<(String, f64)>>,
}

/// Mean sentence score over the concept's contexts.
pub fn nb_concept_score(model: &NbModel, contexts: &[MaskedContext]) -> Result<ConceptScore, NbError> {
    let Some(first) = contexts.first() else {
        return Err(NbError::EmptyContexts);
    };
    let per: Vec<(String, f64)> =
        contexts.iter().map(|c| (c.source_ref.clone(), nb_sentence_score(model, c))).collect();
    let score = per.iter().map(|(_, s)| s).sum::<f64>() / per.len() as f64;
    Ok(ConceptScore { concept_id: first.concept_id.clone(), score, n_sentences: per.len(), per_sentence: Some(per) })
}

/// Scores every concept in the map. Concepts with no contexts come back as
/// [`NbError::NoContexts`].
pub fn score_concepts(
    model: &NbModel,
    contexts: &ContextMap,
    mode: Mode,
) -> Vec<(String, Result<ConceptScore, NbError>)> {
    let items: Vec<(&String, &Vec<MaskedContext>)> = contexts.iter().collect();
    exec::map(mode, &items, |(id, ctxs)| {
        let r = nb_concept_score(model, ctxs).map_err(|_| NbError::NoContexts((*id).clone()));
        ((*id).clone(), r)
    })
}
