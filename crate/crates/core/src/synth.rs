//! Seeded synthetic corpora with a planted controversy signal.
//!
//! Sentences are drawn from a shared background vocabulary plus a small
//! "dispute" vocabulary whose rate differs between classes. Themed corpora add
//! per-category vocabularies to positives; graded corpora mix positive-style
//! and negative-style sentences in proportion to a true score.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{tokenize, Concept, ConceptSet, ContextMap, Mention, RawSentence};
use crate::embedding::EmbeddingTable;
use crate::seed;

pub const CATEGORIES: [&str; 5] = ["History", "Politics and economics", "Religion", "Science", "Sexuality"];

/// Vocabulary and sentence shape shared by all generators.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    pub dispute_words: usize,
    pub background_words: usize,
    pub min_words: usize,
    pub max_words: usize,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary { dispute_words: 15, background_words: 2000, min_words: 12, max_words: 30 }
    }
}

impl Vocabulary {
    pub fn dispute(&self, i: usize) -> String {
        format!("dsp{i:02}")
    }

    pub fn background(&self, i: usize) -> String {
        format!("bg{i:04}")
    }

    pub fn theme(&self, category: usize, i: usize) -> String {
        format!("th{category}w{i:02}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlantedConfig {
    pub n_pos: usize,
    pub n_neg: usize,
    pub contexts_per_concept: usize,
    pub pos_dispute_rate: f64,
    pub neg_dispute_rate: f64,
    pub vocab: Vocabulary,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            n_pos: 40,
            n_neg: 40,
            contexts_per_concept: 30,
            pos_dispute_rate: 0.20,
            neg_dispute_rate: 0.02,
            vocab: Vocabulary::default(),
            seed: 17,
        }
    }
}

/// A generated corpus and its concept list.
#[derive(Clone, Debug)]
pub struct Synthetic {
    pub concepts: ConceptSet,
    pub sentences: Vec<RawSentence>,
    /// True controversiality per concept (1/0 for binary corpora).
    pub truth: BTreeMap<String, f64>,
}

/// Mixture component for one word slot.
struct Source<'a> {
    rate: f64,
    words: &'a [String],
}

fn sentence(
    rng: &mut ChaCha8Rng,
    vocab: &Vocabulary,
    sources: &[Source<'_>],
    title: &str,
    concept_id: &str,
    source_ref: String,
) -> RawSentence {
    let n = rng.random_range(vocab.min_words..=vocab.max_words);
    let mut words: Vec<String> = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for s in sources {
                acc += s.rate;
                if u < acc && !s.words.is_empty() {
                    return s.words[rng.random_range(0..s.words.len())].clone();
                }
            }
            vocab.background(rng.random_range(0..vocab.background_words))
        })
        .collect();
    let at = rng.random_range(0..=words.len());
    words.insert(at, title.to_string());
    let start: usize = words[..at].iter().map(|w| w.chars().count() + 1).sum();
    let end = start + title.chars().count();
    let text = words.join(" ");
    RawSentence { text, mentions: vec![Mention { concept: concept_id.to_string(), start, end }], source_ref }
}

/// Shuffled numeric suffixes so ids carry no label information.
fn shuffled_ids(rng: &mut ChaCha8Rng, prefix: &str, n: usize) -> Vec<(String, String)> {
    let mut nums: Vec<usize> = (0..n).collect();
    nums.shuffle(rng);
    nums.into_iter().map(|i| (format!("{prefix}{i:03}"), format!("{prefix}topic{i:03}"))).collect()
}

/// Binary corpus: positives use dispute words at `pos_dispute_rate`,
/// negatives at `neg_dispute_rate`.
pub fn planted_corpus(cfg: &PlantedConfig) -> Synthetic {
    let mut rng = seed::rng(cfg.seed);
    let dispute: Vec<String> = (0..cfg.vocab.dispute_words).map(|i| cfg.vocab.dispute(i)).collect();
    let ids = shuffled_ids(&mut rng, "c", cfg.n_pos + cfg.n_neg);
    let mut concepts = Vec::new();
    let mut sentences = Vec::new();
    let mut truth = BTreeMap::new();
    for (i, (id, title)) in ids.into_iter().enumerate() {
        let label = i < cfg.n_pos;
        let rate = if label { cfg.pos_dispute_rate } else { cfg.neg_dispute_rate };
        for j in 0..cfg.contexts_per_concept {
            let src = [Source { rate, words: &dispute }];
            sentences.push(sentence(&mut rng, &cfg.vocab, &src, &title, &id, format!("planted:{id}:{j}")));
        }
        truth.insert(id.clone(), if label { 1.0 } else { 0.0 });
        concepts.push(Concept::new(id, title).with_label(label));
    }
    Synthetic { concepts: ConceptSet::from_concepts(concepts).expect("generated ids are unique"), sentences, truth }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThemedConfig {
    pub n_pos: usize,
    pub n_neg: usize,
    pub contexts_per_concept: usize,
    pub pos_dispute_rate: f64,
    pub neg_dispute_rate: f64,
    /// Rate of the concept's own category theme words in positive sentences.
    pub pos_theme_rate: f64,
    /// Rate of theme words (any category) in negative sentences.
    pub neg_theme_rate: f64,
    pub theme_words: usize,
    /// Probability that a positive carries a second category.
    pub second_category: f64,
    pub vocab: Vocabulary,
    pub seed: u64,
}

impl Default for ThemedConfig {
    fn default() -> Self {
        ThemedConfig {
            n_pos: 50,
            n_neg: 50,
            contexts_per_concept: 30,
            pos_dispute_rate: 0.06,
            neg_dispute_rate: 0.02,
            pos_theme_rate: 0.15,
            neg_theme_rate: 0.02,
            theme_words: 15,
            second_category: 0.2,
            vocab: Vocabulary::default(),
            seed: 23,
        }
    }
}

/// Positives are spread over [`CATEGORIES`] and talk about their category's
/// theme; negatives are uncategorized and mention themes only rarely.
pub fn themed_corpus(cfg: &ThemedConfig) -> Synthetic {
    let mut rng = seed::rng(cfg.seed);
    let v = &cfg.vocab;
    let dispute: Vec<String> = (0..v.dispute_words).map(|i| v.dispute(i)).collect();
    let themes: Vec<Vec<String>> =
        (0..CATEGORIES.len()).map(|c| (0..cfg.theme_words).map(|i| v.theme(c, i)).collect()).collect();
    let all_themes: Vec<String> = themes.iter().flatten().cloned().collect();
    let ids = shuffled_ids(&mut rng, "t", cfg.n_pos + cfg.n_neg);
    let mut concepts = Vec::new();
    let mut sentences = Vec::new();
    let mut truth = BTreeMap::new();
    for (i, (id, title)) in ids.into_iter().enumerate() {
        let label = i < cfg.n_pos;
        let mut cats: BTreeSet<usize> = BTreeSet::new();
        if label {
            cats.insert(i % CATEGORIES.len());
            if rng.random_bool(cfg.second_category) {
                cats.insert(rng.random_range(0..CATEGORIES.len()));
            }
        }
        let cat_list: Vec<usize> = cats.iter().copied().collect();
        for j in 0..cfg.contexts_per_concept {
            let src = if label {
                let c = cat_list[rng.random_range(0..cat_list.len())];
                [
                    Source { rate: cfg.pos_dispute_rate, words: &dispute },
                    Source { rate: cfg.pos_theme_rate, words: &themes[c] },
                ]
            } else {
                [
                    Source { rate: cfg.neg_dispute_rate, words: &dispute },
                    Source { rate: cfg.neg_theme_rate, words: &all_themes },
                ]
            };
            sentences.push(sentence(&mut rng, v, &src, &title, &id, format!("themed:{id}:{j}")));
        }
        truth.insert(id.clone(), if label { 1.0 } else { 0.0 });
        concepts
            .push(Concept::new(id, title).with_label(label).with_categories(cat_list.iter().map(|&c| CATEGORIES[c])));
    }
    Synthetic { concepts: ConceptSet::from_concepts(concepts).expect("generated ids are unique"), sentences, truth }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradedConfig {
    /// Concepts with true score exactly 0.
    pub n_zero: usize,
    /// Concepts with true scores evenly spread over (0, 1].
    pub n_spread: usize,
    pub contexts_per_concept: usize,
    pub pos_dispute_rate: f64,
    pub neg_dispute_rate: f64,
    pub vocab: Vocabulary,
    pub seed: u64,
}

impl Default for GradedConfig {
    fn default() -> Self {
        GradedConfig {
            n_zero: 40,
            n_spread: 60,
            contexts_per_concept: 40,
            pos_dispute_rate: 0.20,
            neg_dispute_rate: 0.02,
            vocab: Vocabulary::default(),
            seed: 29,
        }
    }
}

/// Concepts graded `round(10 * t)` whose sentences are positive-style with
/// exact proportion `round(t * contexts) / contexts`.
pub fn graded_corpus(cfg: &GradedConfig) -> Synthetic {
    let mut rng = seed::rng(cfg.seed);
    let dispute: Vec<String> = (0..cfg.vocab.dispute_words).map(|i| cfg.vocab.dispute(i)).collect();
    let n = cfg.n_zero + cfg.n_spread;
    let ids = shuffled_ids(&mut rng, "g", n);
    let mut concepts = Vec::new();
    let mut sentences = Vec::new();
    let mut truth = BTreeMap::new();
    for (i, (id, title)) in ids.into_iter().enumerate() {
        let t = if i < cfg.n_zero { 0.0 } else { (i - cfg.n_zero + 1) as f64 / cfg.n_spread as f64 };
        let n_pos_style = (t * cfg.contexts_per_concept as f64).round() as usize;
        for j in 0..cfg.contexts_per_concept {
            let rate = if j < n_pos_style { cfg.pos_dispute_rate } else { cfg.neg_dispute_rate };
            let src = [Source { rate, words: &dispute }];
            sentences.push(sentence(&mut rng, &cfg.vocab, &src, &title, &id, format!("graded:{id}:{j}")));
        }
        truth.insert(id.clone(), t);
        concepts.push(Concept::new(id, title).with_grade((10.0 * t).round() as u8));
    }
    Synthetic { concepts: ConceptSet::from_concepts(concepts).expect("generated ids are unique"), sentences, truth }
}

/// Embeds each concept as the count vector of the words in its contexts over
/// the joint context vocabulary, keyed by each of its title tokens.
pub fn bag_of_context_embeddings(concepts: &ConceptSet, contexts: &ContextMap, mask_token: &str) -> EmbeddingTable {
    let vocab: BTreeSet<&str> = contexts
        .values()
        .flatten()
        .flat_map(|c| c.tokens.iter().map(String::as_str))
        .filter(|t| *t != mask_token)
        .collect();
    let index: BTreeMap<&str, usize> = vocab.iter().enumerate().map(|(i, w)| (*w, i)).collect();
    let mut entries = Vec::new();
    for c in concepts.iter() {
        let mut v = vec![0.0; index.len().max(1)];
        for ctx in contexts.get(&c.id).into_iter().flatten() {
            for t in &ctx.tokens {
                if let Some(&i) = index.get(t.as_str()) {
                    v[i] += 1.0;
                }
            }
        }
        for word in tokenize(&c.title) {
            entries.push((word, v.clone()));
        }
    }
    EmbeddingTable::from_vectors(entries).expect("at least one concept")
}
