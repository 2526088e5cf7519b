//! Validation protocols.
//!
//! * k-fold by concept: positives and negatives are shuffled separately and
//!   dealt round-robin into `k` folds; a concept's sentences travel with it.
//! * Leave one category out: every concept carrying the held-out category is
//!   tested, never trained on; category-less negatives are sampled to balance
//!   both sides.
//! * Graded: a model trained on binary labels scores concepts with 0-10
//!   grades; reports Pearson correlation and thresholded accuracy.
//!
//! Scores inside a test set are turned into labels by a median split (higher
//! half controversial), so only the ordering of scores matters.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Concept, ConceptSet, ContextMap, MaskedContext, DEFAULT_MASK_TOKEN};
use crate::embedding::{concept_embedding, EmbeddingError, EmbeddingTable};
use crate::exec::{self, Mode};
use crate::nb::{self, NbError, NbModel};
use crate::nn::{self, NnError, NnModel};
use crate::seed;

pub const DEFAULT_K: usize = 10;
pub const DEFAULT_POSITIVE_THRESHOLD: u8 = 6;

const REPORT_SCHEMA: &str = "controversy-report";
const REPORT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("k must be at least 2, got {0}")]
    KTooSmall(usize),
    #[error("k = {k} exceeds the {class} class size {size}")]
    KTooLarge { k: usize, class: &'static str, size: usize },
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("split `{split}` has no {class} concepts in its {side} set")]
    EmptyClass { split: String, class: &'static str, side: &'static str },
    #[error("split `{0}` shares concepts between train and test")]
    Leakage(String),
    #[error("split `{0}` has no scorable test concepts")]
    NothingScored(String),
    #[error("prediction and gold label sets differ (e.g. `{0}`)")]
    KeyMismatch(String),
    #[error("need at least {need} values, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("zero variance; correlation undefined")]
    ZeroVariance,
    #[error("concept `{0}` has no grade")]
    Ungraded(String),
    #[error("requested {requested} grade-0 negatives but only {available} are available")]
    InsufficientNegatives { requested: usize, available: usize },
    #[error("no concept reaches the positive threshold {0}")]
    NoGradedPositives(u8),
    #[error("{0} estimator needs an embedding table")]
    MissingEmbeddings(&'static str),
    #[error("graded protocol needs a graded concept set")]
    MissingGraded,
    #[error(transparent)]
    Nb(#[from] NbError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

/// Concepts together with their extracted contexts.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub concepts: ConceptSet,
    pub contexts: ContextMap,
}

impl Dataset {
    pub fn new(concepts: ConceptSet, contexts: ContextMap) -> Self {
        Dataset { concepts, contexts }
    }

    pub fn contexts_of(&self, id: &str) -> &[MaskedContext] {
        self.contexts.get(id).map_or(&[], Vec::as_slice)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub assignments: BTreeMap<String, usize>,
}

/// Train/test concept ids for one fold or held-out category.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub name: String,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Deals shuffled positives, then shuffled negatives, round-robin into `k`
/// folds. Unlabeled concepts are not assigned.
pub fn make_kfold_plan(concepts: &ConceptSet, k: usize, seed: u64) -> Result<FoldPlan, EvalError> {
    if k < 2 {
        return Err(EvalError::KTooSmall(k));
    }
    let mut pos: Vec<&str> = concepts.labeled().filter(|(_, l)| *l).map(|(c, _)| c.id.as_str()).collect();
    let mut neg: Vec<&str> = concepts.labeled().filter(|(_, l)| !*l).map(|(c, _)| c.id.as_str()).collect();
    for (class, v) in [("positive", &pos), ("negative", &neg)] {
        if v.len() < k {
            return Err(EvalError::KTooLarge { k, class, size: v.len() });
        }
    }
    let mut rng = seed::rng(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let assignments =
        pos.iter().enumerate().chain(neg.iter().enumerate()).map(|(i, id)| (id.to_string(), i % k)).collect();
    Ok(FoldPlan { k, seed, assignments })
}

impl FoldPlan {
    pub fn splits(&self) -> Vec<Split> {
        (0..self.k)
            .map(|fold| {
                let (test, train): (Vec<_>, Vec<_>) = self.assignments.iter().partition(|(_, f)| **f == fold);
                Split {
                    name: format!("fold-{fold}"),
                    train: train.into_iter().map(|(id, _)| id.clone()).collect(),
                    test: test.into_iter().map(|(id, _)| id.clone()).collect(),
                }
            })
            .collect()
    }
}

/// Orders by score descending then id ascending; the first `ceil(n/2)` are
/// labeled controversial.
pub fn median_split_binarize(scores: &BTreeMap<String, f64>) -> BTreeMap<String, bool> {
    let mut order: Vec<(&String, f64)> = scores.iter().map(|(id, s)| (id, *s)).collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let top = order.len().div_ceil(2);
    order.into_iter().enumerate().map(|(rank, (id, _))| (id.clone(), rank < top)).collect()
}

pub fn accuracy(predicted: &BTreeMap<String, bool>, gold: &BTreeMap<String, bool>) -> Result<f64, EvalError> {
    if let Some(k) = predicted.keys().find(|k| !gold.contains_key(*k)) {
        return Err(EvalError::KeyMismatch(k.clone()));
    }
    if let Some(k) = gold.keys().find(|k| !predicted.contains_key(*k)) {
        return Err(EvalError::KeyMismatch(k.clone()));
    }
    if gold.is_empty() {
        return Err(EvalError::TooFew { need: 1, got: 0 });
    }
    let agree = predicted.iter().filter(|(k, v)| gold[*k] == **v).count();
    Ok(agree as f64 / gold.len() as f64)
}

/// Holds out every concept carrying `held_out`, multi-category ones included.
///
/// Categorized concepts without the category train. Category-less negatives
/// are shuffled and dealt first to the test side, then to the train side, so
/// each side gets as many negatives as positives where supply allows.
pub fn leave_one_category_out_split(concepts: &ConceptSet, held_out: &str, seed: u64) -> Result<Split, EvalError> {
    if !concepts.iter().any(|c| c.categories.contains(held_out)) {
        return Err(EvalError::UnknownCategory(held_out.to_string()));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut pool = Vec::new();
    for (c, label) in concepts.labeled() {
        if c.categories.contains(held_out) {
            test.push((c.id.as_str(), label));
        } else if !c.categories.is_empty() || label {
            train.push((c.id.as_str(), label));
        } else {
            pool.push(c.id.as_str());
        }
    }
    let deficit = |side: &[(&str, bool)]| {
        let p = side.iter().filter(|(_, l)| *l).count();
        p.saturating_sub(side.len() - p)
    };
    pool.shuffle(&mut seed::rng(seed));
    let mut pool = pool.into_iter();
    let need_test = deficit(&test);
    test.extend(pool.by_ref().take(need_test).map(|id| (id, false)));
    let need_train = deficit(&train);
    train.extend(pool.take(need_train).map(|id| (id, false)));

    let name = format!("held-out:{held_out}");
    for (side, ids) in [("train", &train), ("test", &test)] {
        for (class, want) in [("positive", true), ("negative", false)] {
            if !ids.iter().any(|(_, l)| *l == want) {
                return Err(EvalError::EmptyClass { split: name, class, side });
            }
        }
    }
    let ids = |v: Vec<(&str, bool)>| {
        let mut v: Vec<String> = v.into_iter().map(|(id, _)| id.to_string()).collect();
        v.sort();
        v
    };
    Ok(Split { name, train: ids(train), test: ids(test) })
}

/// Product-moment correlation, clamped into `[-1, 1]`.
pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(EvalError::TooFew { need: 2, got: x.len() });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradedOutcome {
    pub pearson: f64,
    pub accuracy: f64,
    pub n_correlated: usize,
    pub positives: Vec<String>,
    pub negatives: Vec<String>,
}

/// Correlates scores with grades over every scored concept, then measures
/// median-split accuracy on concepts graded `>= positive_threshold` plus a
/// seeded sample of grade-0 concepts. `negative_sample` defaults to the
/// number of positives.
pub fn graded_eval(
    scores: &BTreeMap<String, f64>,
    graded: &ConceptSet,
    positive_threshold: u8,
    negative_sample: Option<usize>,
    seed: u64,
) -> Result<GradedOutcome, EvalError> {
    let mut grades = Vec::with_capacity(scores.len());
    for id in scores.keys() {
        let g = graded.get(id).and_then(|c| c.grade).ok_or_else(|| EvalError::Ungraded(id.clone()))?;
        grades.push(g);
    }
    let xs: Vec<f64> = grades.iter().map(|&g| f64::from(g)).collect();
    let ys: Vec<f64> = scores.values().copied().collect();
    let pearson = pearson_correlation(&xs, &ys)?;

    let positives: Vec<String> =
        scores.keys().zip(&grades).filter(|(_, &g)| g >= positive_threshold).map(|(id, _)| id.clone()).collect();
    if positives.is_empty() {
        return Err(EvalError::NoGradedPositives(positive_threshold));
    }
    let zero: Vec<&String> = scores.keys().zip(&grades).filter(|(_, &g)| g == 0).map(|(id, _)| id).collect();
    let want = negative_sample.unwrap_or(positives.len());
    if want > zero.len() || want == 0 {
        return Err(EvalError::InsufficientNegatives { requested: want, available: zero.len() });
    }
    let mut picked = index::sample(&mut seed::rng(seed), zero.len(), want).into_vec();
    picked.sort_unstable();
    let negatives: Vec<String> = picked.into_iter().map(|i| zero[i].clone()).collect();

    let subset: BTreeMap<String, f64> = positives.iter().chain(&negatives).map(|id| (id.clone(), scores[id])).collect();
    let gold: BTreeMap<String, bool> =
        positives.iter().map(|id| (id.clone(), true)).chain(negatives.iter().map(|id| (id.clone(), false))).collect();
    let accuracy = accuracy(&median_split_binarize(&subset), &gold)?;
    Ok(GradedOutcome { pearson, accuracy, n_correlated: xs.len(), positives, negatives })
}

/// Why a concept could not be scored.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Unscorable {
    NoContexts,
    NoEmbedding,
}

impl fmt::Display for Unscorable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Unscorable::NoContexts => "no contexts",
            Unscorable::NoEmbedding => "no embedding",
        })
    }
}

/// Training material handed to an estimator.
pub struct TrainingSet<'a> {
    pub concepts: Vec<(&'a Concept, bool)>,
    /// Class-balanced sentence pool.
    pub contexts: Vec<(&'a MaskedContext, bool)>,
}

pub trait Scorer: Sync {
    fn score(&self, concept: &Concept, contexts: &[MaskedContext]) -> Result<f64, Unscorable>;
}

pub trait Estimator: Sync {
    fn name(&self) -> String;
    fn fit<'a>(&'a self, train: &TrainingSet<'a>) -> Result<Box<dyn Scorer + 'a>, EvalError>;
}

pub struct NbEstimator {
    pub alpha: f64,
    pub mask_token: String,
}

impl Scorer for NbModel {
    fn score(&self, _concept: &Concept, contexts: &[MaskedContext]) -> Result<f64, Unscorable> {
        nb::nb_concept_score(self, contexts).map(|s| s.score).map_err(|_| Unscorable::NoContexts)
    }
}

impl Estimator for NbEstimator {
    fn name(&self) -> String {
        "nb".into()
    }

    fn fit<'a>(&'a self, train: &TrainingSet<'a>) -> Result<Box<dyn Scorer + 'a>, EvalError> {
        Ok(Box::new(nb::train_nb(&train.contexts, self.alpha, &self.mask_token)?))
    }
}

pub struct NnEstimator<'t> {
    pub table: &'t EmbeddingTable,
    pub radius: f64,
    pub weighted: bool,
}

struct NnScorer<'t> {
    model: NnModel,
    table: &'t EmbeddingTable,
    weighted: bool,
}

impl Scorer for NnScorer<'_> {
    fn score(&self, concept: &Concept, _contexts: &[MaskedContext]) -> Result<f64, Unscorable> {
        let q = concept_embedding(self.table, concept).map_err(|_| Unscorable::NoEmbedding)?;
        self.model.score(&q, self.weighted).map(|o| o.score).map_err(|_| Unscorable::NoEmbedding)
    }
}

impl Estimator for NnEstimator<'_> {
    fn name(&self) -> String {
        if self.weighted { "nn-weighted" } else { "nn" }.into()
    }

    fn fit<'a>(&'a self, train: &TrainingSet<'a>) -> Result<Box<dyn Scorer + 'a>, EvalError> {
        let model = nn::build_nn_model(train.concepts.iter().copied(), self.table, self.radius)?;
        Ok(Box::new(NnScorer { model, table: self.table, weighted: self.weighted }))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Kfold,
    LeaveOneCategoryOut,
    Graded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Nb,
    Nn,
    NnWeighted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    pub estimator: EstimatorKind,
    pub alpha: f64,
    pub radius: f64,
    pub k: usize,
    pub seed: u64,
    /// Leave-one-category-out target; all categories when unset.
    pub held_out_category: Option<String>,
    pub positive_threshold: u8,
    pub negative_sample: Option<usize>,
    pub mask_token: String,
    /// Downsample the larger class's training sentences to the smaller's count.
    pub balance_sentences: bool,
    #[serde(skip)]
    pub mode: Mode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            protocol: Protocol::Kfold,
            estimator: EstimatorKind::Nb,
            alpha: nb::DEFAULT_ALPHA,
            radius: nn::DEFAULT_RADIUS,
            k: DEFAULT_K,
            seed: 0,
            held_out_category: None,
            positive_threshold: DEFAULT_POSITIVE_THRESHOLD,
            negative_sample: None,
            mask_token: DEFAULT_MASK_TOKEN.to_string(),
            balance_sentences: true,
            mode: Mode::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FoldResult {
    /// Fold index, held-out category, or `graded`.
    pub fold: String,
    pub accuracy: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub unscorable: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub schema: String,
    pub version: u32,
    pub protocol: Protocol,
    pub estimator: String,
    pub per_fold: Vec<FoldResult>,
    pub aggregate_accuracy: f64,
    pub pearson: Option<f64>,
    pub seed: u64,
    pub config_echo: serde_json::Value,
}

impl EvaluationReport {
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)
    }
}

pub struct ExperimentInputs<'a> {
    pub data: &'a Dataset,
    pub embeddings: Option<&'a EmbeddingTable>,
    /// Test concepts for the graded protocol.
    pub graded: Option<&'a Dataset>,
}

/// Builds the configured estimator and runs the configured protocol.
pub fn run_experiment(config: &ExperimentConfig, inputs: &ExperimentInputs<'_>) -> Result<EvaluationReport, EvalError> {
    match config.estimator {
        EstimatorKind::Nb => {
            let est = NbEstimator { alpha: config.alpha, mask_token: config.mask_token.clone() };
            run_experiment_with(config, inputs, &est)
        }
        EstimatorKind::Nn | EstimatorKind::NnWeighted => {
            let weighted = config.estimator == EstimatorKind::NnWeighted;
            let table =
                inputs.embeddings.ok_or(EvalError::MissingEmbeddings(if weighted { "nn-weighted" } else { "nn" }))?;
            let est = NnEstimator { table, radius: config.radius, weighted };
            run_experiment_with(config, inputs, &est)
        }
    }
}

/// Runs the configured protocol with a caller-supplied estimator.
pub fn run_experiment_with(
    config: &ExperimentConfig,
    inputs: &ExperimentInputs<'_>,
    estimator: &dyn Estimator,
) -> Result<EvaluationReport, EvalError> {
    let data = inputs.data;
    let (per_fold, pearson) = match config.protocol {
        Protocol::Kfold => {
            let plan = make_kfold_plan(&data.concepts, config.k, config.seed)?;
            let splits: Vec<(u64, Split)> = plan.splits().into_iter().enumerate().map(|(i, s)| (i as u64, s)).collect();
            (run_splits(config, data, estimator, &splits)?, None)
        }
        Protocol::LeaveOneCategoryOut => {
            let all: Vec<String> = data.concepts.categories().into_iter().collect();
            let chosen: Vec<&String> = match &config.held_out_category {
                Some(h) => vec![all.iter().find(|c| *c == h).ok_or_else(|| EvalError::UnknownCategory(h.clone()))?],
                None => all.iter().collect(),
            };
            let mut splits = Vec::new();
            for cat in chosen {
                let stream = all.iter().position(|c| c == cat).unwrap() as u64;
                let split = leave_one_category_out_split(&data.concepts, cat, seed::derive(config.seed, stream))?;
                splits.push((stream, split));
            }
            (run_splits(config, data, estimator, &splits)?, None)
        }
        Protocol::Graded => {
            let graded = inputs.graded.ok_or(EvalError::MissingGraded)?;
            let (fold, pearson) = run_graded(config, data, graded, estimator)?;
            (vec![fold], Some(pearson))
        }
    };
    let aggregate_accuracy = per_fold.iter().map(|f| f.accuracy).sum::<f64>() / per_fold.len() as f64;
    Ok(EvaluationReport {
        schema: REPORT_SCHEMA.into(),
        version: REPORT_VERSION,
        protocol: config.protocol,
        estimator: estimator.name(),
        per_fold,
        aggregate_accuracy,
        pearson,
        seed: config.seed,
        config_echo: serde_json::to_value(config).expect("config serializes"),
    })
}

fn run_splits(
    config: &ExperimentConfig,
    data: &Dataset,
    estimator: &dyn Estimator,
    splits: &[(u64, Split)],
) -> Result<Vec<FoldResult>, EvalError> {
    exec::map(config.mode, splits, |(stream, split)| {
        evaluate_split(config, data, estimator, split, seed::derive(config.seed, *stream))
    })
    .into_iter()
    .collect()
}

/// Labeled training concepts and their (optionally balanced) sentences.
pub fn training_set<'a>(data: &'a Dataset, train_ids: &[String], balance: bool, seed: u64) -> TrainingSet<'a> {
    let concepts: Vec<(&Concept, bool)> =
        train_ids.iter().filter_map(|id| data.concepts.get(id)).filter_map(|c| c.label.map(|l| (c, l))).collect();
    let mut pos: Vec<&MaskedContext> = Vec::new();
    let mut neg: Vec<&MaskedContext> = Vec::new();
    for (c, l) in &concepts {
        let bucket = if *l { &mut pos } else { &mut neg };
        bucket.extend(data.contexts_of(&c.id));
    }
    if balance && !pos.is_empty() && !neg.is_empty() && pos.len() != neg.len() {
        let target = pos.len().min(neg.len());
        let larger = if pos.len() > neg.len() { &mut pos } else { &mut neg };
        let mut keep = index::sample(&mut seed::rng(seed), larger.len(), target).into_vec();
        keep.sort_unstable();
        *larger = keep.into_iter().map(|i| larger[i]).collect();
    }
    let contexts = pos.into_iter().map(|c| (c, true)).chain(neg.into_iter().map(|c| (c, false))).collect();
    TrainingSet { concepts, contexts }
}

fn check_classes(split: &str, side: &'static str, labels: impl Iterator<Item = bool> + Clone) -> Result<(), EvalError> {
    for (class, want) in [("positive", true), ("negative", false)] {
        if !labels.clone().any(|l| l == want) {
            return Err(EvalError::EmptyClass { split: split.to_string(), class, side });
        }
    }
    Ok(())
}

fn score_concepts(
    scorer: &dyn Scorer,
    data: &Dataset,
    ids: &[String],
    mode: Mode,
) -> (BTreeMap<String, f64>, Vec<(String, String)>) {
    let results = exec::map(mode, ids, |id| {
        let concept = data.concepts.get(id).expect("split ids come from the concept set");
        (id.clone(), scorer.score(concept, data.contexts_of(id)))
    });
    let mut scored = BTreeMap::new();
    let mut unscorable = Vec::new();
    for (id, r) in results {
        match r {
            Ok(s) => {
                scored.insert(id, s);
            }
            Err(why) => unscorable.push((id, why.to_string())),
        }
    }
    (scored, unscorable)
}

fn evaluate_split(
    config: &ExperimentConfig,
    data: &Dataset,
    estimator: &dyn Estimator,
    split: &Split,
    fold_seed: u64,
) -> Result<FoldResult, EvalError> {
    let train_set: BTreeSet<&str> = split.train.iter().map(String::as_str).collect();
    if split.test.iter().any(|id| train_set.contains(id.as_str())) {
        return Err(EvalError::Leakage(split.name.clone()));
    }
    let label = |id: &String| data.concepts.get(id).and_then(|c| c.label);
    check_classes(&split.name, "train", split.train.iter().filter_map(label))?;
    check_classes(&split.name, "test", split.test.iter().filter_map(label))?;

    let train = training_set(data, &split.train, config.balance_sentences, fold_seed);
    debug_assert!(train.contexts.iter().all(|(c, _)| train_set.contains(c.concept_id.as_str())));
    let scorer = estimator.fit(&train)?;

    let test: Vec<String> = split.test.iter().filter(|id| label(id).is_some()).cloned().collect();
    let (scored, unscorable) = score_concepts(scorer.as_ref(), data, &test, config.mode);
    if scored.is_empty() {
        return Err(EvalError::NothingScored(split.name.clone()));
    }
    let gold: BTreeMap<String, bool> = scored.keys().map(|id| (id.clone(), label(id).unwrap())).collect();
    let accuracy = accuracy(&median_split_binarize(&scored), &gold)?;
    Ok(FoldResult { fold: split.name.clone(), accuracy, n_train: train.concepts.len(), n_test: test.len(), unscorable })
}

fn run_graded(
    config: &ExperimentConfig,
    data: &Dataset,
    graded: &Dataset,
    estimator: &dyn Estimator,
) -> Result<(FoldResult, f64), EvalError> {
    let train_ids: Vec<String> = data.concepts.labeled().map(|(c, _)| c.id.clone()).collect();
    check_classes("graded", "train", data.concepts.labeled().map(|(_, l)| l))?;
    if let Some(id) = graded.concepts.ids().find(|id| train_ids.binary_search_by(|t| t.as_str().cmp(id)).is_ok()) {
        log::warn!("graded concept `{id}` also appears in the training set");
    }
    let train = training_set(data, &train_ids, config.balance_sentences, seed::derive(config.seed, 0));
    let scorer = estimator.fit(&train)?;
    let test: Vec<String> = graded.concepts.iter().filter(|c| c.grade.is_some()).map(|c| c.id.clone()).collect();
    let (scored, unscorable) = score_concepts(scorer.as_ref(), graded, &test, config.mode);
    let outcome = graded_eval(
        &scored,
        &graded.concepts,
        config.positive_threshold,
        config.negative_sample,
        seed::derive(config.seed, 1),
    )?;
    Ok((
        FoldResult {
            fold: "graded".into(),
            accuracy: outcome.accuracy,
            n_train: train.concepts.len(),
            n_test: test.len(),
            unscorable,
        },
        outcome.pearson,
    ))
}
