use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use controversy::corpus::{extract_contexts, ExtractOptions};
use controversy::embedding::concept_embedding;
use controversy::evaluation::{run_experiment, Dataset, ExperimentConfig, ExperimentInputs};
use controversy::nb::{score_concepts, train_nb_with};
use controversy::nn::build_nn_model;
use controversy::synth::{self, PlantedConfig};
use controversy::{Mode, DEFAULT_MASK_TOKEN};

const MODES: [(&str, Mode); 2] = [("sequential", Mode::Sequential), ("parallel", Mode::Parallel)];

fn corpus() -> synth::Synthetic {
    synth::planted_corpus(&PlantedConfig { n_pos: 200, n_neg: 200, contexts_per_concept: 40, ..Default::default() })
}

fn bench(c: &mut Criterion) {
    let s = corpus();
    let contexts = extract_contexts(&s.sentences, &s.concepts, &ExtractOptions::default()).unwrap();
    let labels = s.concepts.labels();
    let examples: Vec<_> = contexts.values().flatten().map(|ctx| (ctx, labels[&ctx.concept_id])).collect();
    let table = synth::bag_of_context_embeddings(&s.concepts, &contexts, DEFAULT_MASK_TOKEN);
    let nn = build_nn_model(s.concepts.labeled(), &table, 0.3).unwrap();
    let queries: Vec<_> = s.concepts.iter().map(|c| concept_embedding(&table, c).unwrap()).collect();
    let data = Dataset::new(s.concepts.clone(), contexts.clone());

    let mut g = c.benchmark_group("throughput");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_with_input(BenchmarkId::new("extract", name), &mode, |b, &mode| {
            let opts = ExtractOptions { mode, ..Default::default() };
            b.iter(|| extract_contexts(black_box(&s.sentences), &s.concepts, &opts).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("nb_train", name), &mode, |b, &mode| {
            b.iter(|| train_nb_with(black_box(&examples), 1.0, DEFAULT_MASK_TOKEN, mode).unwrap())
        });
        let model = train_nb_with(&examples, 1.0, DEFAULT_MASK_TOKEN, mode).unwrap();
        g.bench_with_input(BenchmarkId::new("nb_score", name), &mode, |b, &mode| {
            b.iter(|| score_concepts(&model, black_box(&contexts), mode))
        });
        g.bench_with_input(BenchmarkId::new("nn_score", name), &mode, |b, &mode| {
            b.iter(|| nn.score_batch(black_box(&queries), false, mode))
        });
        g.bench_with_input(BenchmarkId::new("kfold_nb", name), &mode, |b, &mode| {
            let cfg = ExperimentConfig { mode, ..Default::default() };
            let inputs = ExperimentInputs { data: &data, embeddings: None, graded: None };
            b.iter(|| run_experiment(&cfg, black_box(&inputs)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
