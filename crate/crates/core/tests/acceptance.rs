//! Acceptance gate. Each criterion prints one PASS/FAIL line; the process
//! exits nonzero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use controversy::analysis::information_gain_ranking;
use controversy::corpus::{extract_contexts, ContextMap, ExtractOptions};
use controversy::embedding::ConceptVector;
use controversy::evaluation::{
    graded_eval, leave_one_category_out_split, make_kfold_plan, median_split_binarize, pearson_correlation,
    run_experiment, Dataset, EstimatorKind, ExperimentConfig, ExperimentInputs, Protocol,
};
use controversy::nb::{nb_concept_score, train_nb};
use controversy::nn::{NnEntry, NnModel};
use controversy::synth::{self, GradedConfig, PlantedConfig, ThemedConfig};
use controversy::{MaskedContext, DEFAULT_MASK_TOKEN};

type Check = Result<String, String>;
type Criterion = fn() -> Check;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit_s: u64) -> Result<(), String> {
    ensure(elapsed <= Duration::from_secs(limit_s), format!("took {:.2}s, limit {limit_s}s", elapsed.as_secs_f64()))
}

fn ctx(id: &str, tokens: Vec<String>) -> MaskedContext {
    MaskedContext { concept_id: id.into(), tokens, source_ref: "gen".into() }
}

fn random_tokens(rng: &mut ChaCha8Rng, vocab: usize, max_len: usize, mask_rate: f64) -> Vec<String> {
    let n = rng.random_range(1..=max_len);
    (0..n)
        .map(|_| {
            if rng.random_bool(mask_rate) {
                DEFAULT_MASK_TOKEN.to_string()
            } else {
                format!("w{}", rng.random_range(0..vocab))
            }
        })
        .collect()
}

// ---------------------------------------------------------------- oracles

/// Direct multinomial posterior: counts are recomputed from the raw examples
/// and the log odds are summed token by token.
fn nb_oracle(train: &[(&MaskedContext, bool)], alpha: f64, query: &[String]) -> f64 {
    let mut pos: BTreeMap<&str, f64> = BTreeMap::new();
    let mut neg: BTreeMap<&str, f64> = BTreeMap::new();
    let mut vocab = BTreeSet::new();
    for (c, l) in train {
        for t in c.tokens.iter().filter(|t| *t != DEFAULT_MASK_TOKEN) {
            vocab.insert(t.as_str());
            *if *l { pos.entry(t) } else { neg.entry(t) }.or_insert(0.0) += 1.0;
        }
    }
    let tp: f64 = pos.values().sum();
    let tn: f64 = neg.values().sum();
    let v = vocab.len() as f64;
    let mut log_odds = 0.0; // equal priors cancel
    for t in query {
        if !vocab.contains(t.as_str()) {
            continue;
        }
        let p = (pos.get(t.as_str()).copied().unwrap_or(0.0) + alpha) / (tp + alpha * v);
        let n = (neg.get(t.as_str()).copied().unwrap_or(0.0) + alpha) / (tn + alpha * v);
        log_odds += p.ln() - n.ln();
    }
    1.0 / (1.0 + (-log_odds).exp())
}

fn cosine(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    dot / (nu * nv)
}

fn nn_oracle(entries: &[NnEntry], query: &[f64], radius: f64, weighted: bool) -> f64 {
    let hits: Vec<(f64, bool)> =
        entries.iter().map(|e| (cosine(query, &e.vector), e.label)).filter(|(s, _)| *s >= radius).collect();
    if weighted {
        let total: f64 = hits.iter().map(|(s, _)| s.max(0.0)).sum();
        let pos: f64 = hits.iter().filter(|(_, l)| *l).map(|(s, _)| s.max(0.0)).sum();
        if total > 0.0 {
            pos / total
        } else {
            0.5
        }
    } else if hits.is_empty() {
        0.5
    } else {
        hits.iter().filter(|(_, l)| *l).count() as f64 / hits.len() as f64
    }
}

fn h(probs: &[f64]) -> f64 {
    probs.iter().filter(|p| **p > 0.0).map(|p| -p * p.log2()).sum()
}

fn ig_oracle(docs: &[(BTreeSet<String>, bool)], word: &str) -> f64 {
    let n = docs.len() as f64;
    let class_entropy = |subset: &[&(BTreeSet<String>, bool)]| {
        if subset.is_empty() {
            return 0.0;
        }
        let p = subset.iter().filter(|d| d.1).count() as f64 / subset.len() as f64;
        h(&[p, 1.0 - p])
    };
    let all: Vec<_> = docs.iter().collect();
    let (with, without): (Vec<_>, Vec<_>) = docs.iter().partition(|d| d.0.contains(word));
    class_entropy(&all)
        - with.len() as f64 / n * class_entropy(&with)
        - without.len() as f64 / n * class_entropy(&without)
}

// ---------------------------------------------------------------- criteria

fn nb_matches_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let vocab = rng.random_range(2..40);
        let alpha = rng.random_range(0.05..3.0);
        let n_pos = rng.random_range(1..15);
        let n_neg = rng.random_range(1..15);
        let train: Vec<(MaskedContext, bool)> =
            (0..n_pos + n_neg).map(|i| (ctx("t", random_tokens(&mut rng, vocab, 20, 0.05)), i < n_pos)).collect();
        let refs: Vec<(&MaskedContext, bool)> = train.iter().map(|(c, l)| (c, *l)).collect();
        let model = train_nb(&refs, alpha, DEFAULT_MASK_TOKEN).map_err(|e| e.to_string())?;
        // Queries draw from a wider vocabulary so some tokens are unseen.
        let queries: Vec<MaskedContext> =
            (0..rng.random_range(1..6)).map(|_| ctx("q", random_tokens(&mut rng, vocab + 10, 40, 0.1))).collect();
        let mut mean = 0.0;
        for q in &queries {
            let want = nb_oracle(&refs, alpha, &q.tokens);
            let got = model.score_tokens(&q.tokens);
            worst = worst.max((want - got).abs());
            ensure((want - got).abs() <= 1e-9, format!("sentence {:?}: {got} vs oracle {want}", q.tokens))?;
            let swapped = model.swapped().score_tokens(&q.tokens);
            ensure((got + swapped - 1.0).abs() <= 1e-9, "swapped model is not the complement")?;
            mean += want / queries.len() as f64;
        }
        let concept = nb_concept_score(&model, &queries).map_err(|e| e.to_string())?;
        ensure((concept.score - mean).abs() <= 1e-9, format!("concept score {} vs oracle {mean}", concept.score))?;
    }
    within(start.elapsed(), 5)?;
    Ok(format!("100 instances, max |diff| {worst:.2e}, {:.2}s", start.elapsed().as_secs_f64()))
}

fn nn_matches_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut fallbacks, mut worst) = (0usize, 0.0f64);
    for m in 0..100 {
        let dim = rng.random_range(1..=8);
        let n = rng.random_range(1..=50);
        let entries: Vec<NnEntry> = (0..n)
            .map(|i| NnEntry {
                concept_id: format!("e{i}"),
                label: rng.random_bool(0.5),
                vector: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            })
            .collect();
        // Every tenth model gets a radius near 1 so the fallback is exercised.
        let radius = if m % 10 == 0 { 0.999_999 } else { rng.random_range(-0.9..0.95) };
        let model = NnModel::from_entries(entries.clone(), radius, 0.5).map_err(|e| e.to_string())?;
        for _ in 0..5 {
            let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let query = ConceptVector { concept_id: "query".into(), vector: q.clone(), covered_words: 1 };
            for weighted in [false, true] {
                let got = model.score(&query, weighted).map_err(|e| e.to_string())?;
                let want = nn_oracle(&entries, &q, radius, weighted);
                worst = worst.max((got.score - want).abs());
                ensure(
                    (got.score - want).abs() <= 1e-12,
                    format!("model {m} weighted={weighted}: {} vs oracle {want}", got.score),
                )?;
                if got.used_fallback {
                    ensure(got.score == 0.5, "fallback score is not 0.5")?;
                    fallbacks += 1;
                }
            }
        }
    }
    ensure(fallbacks > 0, "fallback never exercised")?;
    within(start.elapsed(), 5)?;
    Ok(format!("100 models, {fallbacks} fallbacks, max |diff| {worst:.2e}, {:.2}s", start.elapsed().as_secs_f64()))
}

fn ig_matches_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut compared = 0usize;
    for corpus in 0..50 {
        let n = rng.random_range(2..12);
        let mut docs: Vec<(MaskedContext, bool)> =
            (0..n).map(|_| (ctx("c", random_tokens(&mut rng, 6, 6, 0.1)), rng.random_bool(0.5))).collect();
        docs[0].1 = true;
        docs[1].1 = false;
        let refs: Vec<(&MaskedContext, bool)> = docs.iter().map(|(c, l)| (c, *l)).collect();
        let flipped: Vec<(&MaskedContext, bool)> = docs.iter().map(|(c, l)| (c, !*l)).collect();
        let sets: Vec<(BTreeSet<String>, bool)> = docs
            .iter()
            .map(|(c, l)| (c.tokens.iter().filter(|t| *t != DEFAULT_MASK_TOKEN).cloned().collect(), *l))
            .collect();

        let ranking = information_gain_ranking(&refs, 1, DEFAULT_MASK_TOKEN).map_err(|e| e.to_string())?;
        let swapped = information_gain_ranking(&flipped, 1, DEFAULT_MASK_TOKEN).map_err(|e| e.to_string())?;
        for g in &ranking {
            let want = ig_oracle(&sets, &g.word);
            ensure(
                (g.gain - want).abs() <= 1e-9,
                format!("corpus {corpus} `{}`: {} vs oracle {want}", g.word, g.gain),
            )?;
            compared += 1;
        }
        let other: BTreeMap<&str, f64> = swapped.iter().map(|g| (g.word.as_str(), g.gain)).collect();
        for g in &ranking {
            if let Some(s) = other.get(g.word.as_str()) {
                ensure(*s == g.gain, format!("corpus {corpus} `{}`: class swap changed gain", g.word))?;
            }
        }
    }
    Ok(format!("50 corpora, {compared} gains compared"))
}

fn split_hygiene() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut plans = 0;
    let mut loco = 0;
    for p in 0..20 {
        let cfg = ThemedConfig {
            n_pos: rng.random_range(12..40),
            n_neg: rng.random_range(20..60),
            contexts_per_concept: 1,
            second_category: 0.4,
            seed: p,
            ..Default::default()
        };
        let s = synth::themed_corpus(&cfg);
        let k = rng.random_range(2..=10);
        let plan = make_kfold_plan(&s.concepts, k, rng.random()).map_err(|e| e.to_string())?;
        let labels = s.concepts.labels();
        let mut sizes = vec![(0usize, 0usize); k];
        for split in plan.splits() {
            let test: BTreeSet<&String> = split.test.iter().collect();
            ensure(split.train.iter().all(|id| !test.contains(id)), format!("plan {p}: train/test overlap"))?;
            ensure(split.train.len() + split.test.len() == labels.len(), format!("plan {p}: concepts lost"))?;
        }
        for (id, fold) in &plan.assignments {
            if labels[id] {
                sizes[*fold].0 += 1;
            } else {
                sizes[*fold].1 += 1;
            }
        }
        for class in [0, 1] {
            let v: Vec<usize> = sizes.iter().map(|s| if class == 0 { s.0 } else { s.1 }).collect();
            let spread = v.iter().max().unwrap() - v.iter().min().unwrap();
            ensure(spread <= 1, format!("plan {p}: class fold sizes {v:?}"))?;
        }
        plans += 1;

        for cat in s.concepts.categories() {
            let split = leave_one_category_out_split(&s.concepts, &cat, p).map_err(|e| e.to_string())?;
            let test: BTreeSet<&String> = split.test.iter().collect();
            ensure(split.train.iter().all(|id| !test.contains(id)), format!("{cat}: train/test overlap"))?;
            for c in s.concepts.iter().filter(|c| c.categories.contains(&cat)) {
                ensure(
                    !split.train.contains(&c.id),
                    format!("{cat}: held-out concept {} (categories {:?}) in training", c.id, c.categories),
                )?;
            }
            loco += 1;
        }
    }
    Ok(format!("{plans} k-fold plans, {loco} held-out categories"))
}

fn median_split_monotone() -> Check {
    let transforms: [fn(f64) -> f64; 10] = [
        |x| 3.0 * x - 7.0,
        |x| x * x * x,
        f64::exp,
        |x| (x + 0.5).ln(),
        |x| (5.0 * x).atan(),
        |x| 1.0 / (1.0 + (-4.0 * x).exp()),
        f64::sqrt,
        |x| x / (1.0 + x),
        |x| 1e6 * x,
        f64::tanh,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for m in 0..50 {
        let n: usize = rng.random_range(1..60);
        // Millesimal scores keep distinct inputs distinct after every transform.
        let scores: BTreeMap<String, f64> =
            (0..n).map(|i| (format!("c{i:02}"), f64::from(rng.random_range(0u32..1000)) / 1000.0)).collect();
        let base = median_split_binarize(&scores);
        ensure(base.values().filter(|b| **b).count() == n.div_ceil(2), format!("map {m}: wrong positive count"))?;
        for (t, f) in transforms.iter().enumerate() {
            let mapped: BTreeMap<String, f64> = scores.iter().map(|(k, v)| (k.clone(), f(*v))).collect();
            ensure(median_split_binarize(&mapped) == base, format!("map {m}: transform {t} changed the split"))?;
        }
    }
    Ok("50 maps x 10 transforms".into())
}

fn contexts_of(s: &synth::Synthetic) -> Result<ContextMap, String> {
    extract_contexts(&s.sentences, &s.concepts, &ExtractOptions::default()).map_err(|e| e.to_string())
}

fn planted_signal() -> Check {
    let start = Instant::now();
    let s = synth::planted_corpus(&PlantedConfig::default());
    let contexts = contexts_of(&s)?;
    let table = synth::bag_of_context_embeddings(&s.concepts, &contexts, DEFAULT_MASK_TOKEN);
    let data = Dataset::new(s.concepts.clone(), contexts);
    let inputs = ExperimentInputs { data: &data, embeddings: Some(&table), graded: None };
    let run = |estimator| {
        let cfg = ExperimentConfig { protocol: Protocol::Kfold, estimator, k: 10, seed: 0, ..Default::default() };
        run_experiment(&cfg, &inputs).map(|r| r.aggregate_accuracy).map_err(|e| e.to_string())
    };
    let nb = run(EstimatorKind::Nb)?;
    let nn = run(EstimatorKind::Nn)?;
    let nn_w = run(EstimatorKind::NnWeighted)?;
    let summary = format!(
        "NB {nb:.3} (>= 0.90), NN {nn:.3} (>= 0.75), weighted NN {nn_w:.3}, {:.2}s",
        start.elapsed().as_secs_f64()
    );
    ensure(nb >= 0.90, summary.clone())?;
    ensure(nn >= 0.75, summary.clone())?;
    within(start.elapsed(), 60)?;
    Ok(summary)
}

fn loco_degrades() -> Check {
    let s = synth::themed_corpus(&ThemedConfig::default());
    let data = Dataset::new(s.concepts.clone(), contexts_of(&s)?);
    let inputs = ExperimentInputs { data: &data, embeddings: None, graded: None };
    let run = |protocol| {
        let cfg = ExperimentConfig { protocol, k: 10, seed: 0, ..Default::default() };
        run_experiment(&cfg, &inputs).map(|r| r.aggregate_accuracy).map_err(|e| e.to_string())
    };
    let kfold = run(Protocol::Kfold)?;
    let loco = run(Protocol::LeaveOneCategoryOut)?;
    let summary = format!("k-fold {kfold:.3}, LOCO {loco:.3}");
    ensure(loco <= kfold + 0.02, summary.clone())?;
    Ok(summary)
}

fn graded_correlates() -> Check {
    let train = synth::planted_corpus(&PlantedConfig::default());
    let test = synth::graded_corpus(&GradedConfig::default());
    let train_data = Dataset::new(train.concepts.clone(), contexts_of(&train)?);
    let test_data = Dataset::new(test.concepts.clone(), contexts_of(&test)?);

    let cfg = ExperimentConfig { protocol: Protocol::Graded, positive_threshold: 6, seed: 0, ..Default::default() };
    let report =
        run_experiment(&cfg, &ExperimentInputs { data: &train_data, embeddings: None, graded: Some(&test_data) })
            .map_err(|e| e.to_string())?;
    let pearson = report.pearson.ok_or("report has no correlation")?;

    // Recompute from raw scores to check which concepts were called positive.
    let examples: Vec<(&MaskedContext, bool)> = train_data
        .concepts
        .labeled()
        .flat_map(|(c, l)| train_data.contexts_of(&c.id).iter().map(move |x| (x, l)))
        .collect();
    let model = train_nb(&examples, 1.0, DEFAULT_MASK_TOKEN).map_err(|e| e.to_string())?;
    let scores: BTreeMap<String, f64> = test_data
        .contexts
        .iter()
        .map(|(id, ctxs)| nb_concept_score(&model, ctxs).map(|s| (id.clone(), s.score)))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let outcome = graded_eval(&scores, &test.concepts, 6, None, 0).map_err(|e| e.to_string())?;
    let expected: Vec<String> = test.concepts.iter().filter(|c| c.grade.unwrap() >= 6).map(|c| c.id.clone()).collect();
    let binarized = median_split_binarize(
        &outcome.positives.iter().chain(&outcome.negatives).map(|id| (id.clone(), scores[id])).collect(),
    );
    let called: Vec<String> = binarized.iter().filter(|(_, b)| **b).map(|(id, _)| id.clone()).collect();
    let truth: Vec<f64> = scores.keys().map(|id| test.truth[id]).collect();
    let vs_truth =
        pearson_correlation(&truth, &scores.values().copied().collect::<Vec<_>>()).map_err(|e| e.to_string())?;

    let summary = format!(
        "Pearson {pearson:.3} (>= 0.95), vs true score {vs_truth:.3}, accuracy {:.3}, {} positives",
        report.aggregate_accuracy,
        expected.len()
    );
    ensure(pearson >= 0.95, summary.clone())?;
    ensure(outcome.positives == expected, "graded positives differ from grade >= 6")?;
    ensure(called == expected, format!("{summary}; median split called {} positive", called.len()))?;
    ensure(report.aggregate_accuracy == 1.0, summary.clone())?;
    Ok(summary)
}

fn main() {
    let criteria: [(&str, Criterion); 8] = [
        ("nb-oracle", nb_matches_oracle),
        ("nn-oracle", nn_matches_oracle),
        ("information-gain-oracle", ig_matches_oracle),
        ("split-hygiene", split_hygiene),
        ("median-split-monotone", median_split_monotone),
        ("planted-signal", planted_signal),
        ("loco-degradation", loco_degrades),
        ("graded-correlation", graded_correlates),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
