//! Information-gain ranking of words against the controversial /
//! non-controversial sentence partition.
//!
//! The feature is the presence of a word in a sentence. For each word the gain
//! is `H(C) - H(C | present/absent)` in bits.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::corpus::MaskedContext;
use crate::exec::{self, Mode};

pub const DEFAULT_MIN_DF: usize = 5;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no sentences in the {0} class")]
    EmptyClass(&'static str),
    #[error("min_df must be at least 1")]
    MinDf,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WordGain {
    pub word: String,
    /// Bits, in `[0, 1]`.
    pub gain: f64,
    pub df_pos: usize,
    pub df_neg: usize,
}

/// Entropy in bits of a two-way split with counts `a` and `b`.
/// Symmetric in its arguments bit for bit.
pub(crate) fn entropy2(a: usize, b: usize) -> f64 {
    let n = (a + b) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let term = |k: usize| {
        if k == 0 {
            0.0
        } else {
            let p = k as f64 / n;
            -p * p.log2()
        }
    };
    term(a) + term(b)
}

/// Gain of a presence feature seen in `df_pos` of `n_pos` positive and
/// `df_neg` of `n_neg` negative sentences.
pub fn information_gain(df_pos: usize, df_neg: usize, n_pos: usize, n_neg: usize) -> f64 {
    let n = (n_pos + n_neg) as f64;
    let present = df_pos + df_neg;
    let absent = (n_pos - df_pos) + (n_neg - df_neg);
    let conditional = (present as f64 / n) * entropy2(df_pos, df_neg)
        + (absent as f64 / n) * entropy2(n_pos - df_pos, n_neg - df_neg);
    let gain = entropy2(n_pos, n_neg) - conditional;
    if gain < 0.0 {
        // Rounding only; the true value is nonnegative.
        debug_assert!(gain > -1e-12);
        0.0
    } else {
        gain
    }
}

type DocFreq = BTreeMap<String, (usize, usize)>;

/// Ranks words by information gain, descending; ties go to the larger total
/// document frequency, then lexicographic order. Only words present in at
/// least one positive sentence and in at least `min_df` sentences overall are
/// ranked. Tokens equal to `mask_token` are ignored.
pub fn information_gain_ranking(
    contexts: &[(&MaskedContext, bool)],
    min_df: usize,
    mask_token: &str,
) -> Result<Vec<WordGain>, AnalysisError> {
    information_gain_ranking_with(contexts, min_df, mask_token, Mode::default())
}

pub fn information_gain_ranking_with(
    contexts: &[(&MaskedContext, bool)],
    min_df: usize,
    mask_token: &str,
    mode: Mode,
) -> Result<Vec<WordGain>, AnalysisError> {
    if min_df == 0 {
        return Err(AnalysisError::MinDf);
    }
    let n_pos = contexts.iter().filter(|(_, l)| *l).count();
    let n_neg = contexts.len() - n_pos;
    if n_pos == 0 {
        return Err(AnalysisError::EmptyClass("positive"));
    }
    if n_neg == 0 {
        return Err(AnalysisError::EmptyClass("negative"));
    }

    let df = exec::fold_merge(
        mode,
        contexts,
        DocFreq::new,
        |mut acc, (ctx, label)| {
            let present: BTreeSet<&str> = ctx.tokens.iter().map(String::as_str).filter(|t| *t != mask_token).collect();
            for w in present {
                let e = acc.entry(w.to_string()).or_default();
                if *label {
                    e.0 += 1;
                } else {
                    e.1 += 1;
                }
            }
            acc
        },
        |mut a, b| {
            for (w, (p, q)) in b {
                let e = a.entry(w).or_default();
                e.0 += p;
                e.1 += q;
            }
            a
        },
    );

    let mut ranking: Vec<WordGain> = df
        .into_iter()
        .filter(|(_, (p, q))| *p >= 1 && p + q >= min_df)
        .map(|(word, (p, q))| WordGain { gain: information_gain(p, q, n_pos, n_neg), word, df_pos: p, df_neg: q })
        .collect();
    ranking.sort_by(|a, b| {
        b.gain
            .total_cmp(&a.gain)
            .then_with(|| (b.df_pos + b.df_neg).cmp(&(a.df_pos + a.df_neg)))
            .then_with(|| a.word.cmp(&b.word))
    });
    Ok(ranking)
}

/// Writes `word, gain, df_pos, df_neg` rows, tab-separated, after a header.
pub fn write_ranking<W: Write>(mut w: W, ranking: &[WordGain]) -> std::io::Result<()> {
    writeln!(w, "word\tgain\tdf_pos\tdf_neg")?;
    for g in ranking {
        writeln!(w, "{}\t{:.6}\t{}\t{}", g.word, g.gain, g.df_pos, g.df_neg)?;
    }
    Ok(())
}
