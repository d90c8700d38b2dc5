use std::path::PathBuf;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use augbench::classifier::{fit_mnb_with, predict_corpus, DEFAULT_ALPHA};
use augbench::corpus::{self, Corpus, Format, Label};
use augbench::generator::{fit_generator, generate_batch_with, spread, GenerationParams};
use augbench::promptaid::{analyze_class, count_ngrams_with, suggest_prompts, BandSpec};
use augbench::text::build_vocabulary;
use augbench::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn fixture() -> Corpus {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/pizza_reviews.csv");
    corpus::load_corpus(std::fs::File::open(path).unwrap(), Format::Csv).unwrap().corpus
}

fn ngrams(c: &mut Criterion) {
    let corpus = fixture();
    let mut group = c.benchmark_group("count_ngrams");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new(name, 3), &exec, |b, &exec| {
            b.iter(|| count_ngrams_with(&corpus, 3, exec).unwrap())
        });
    }
    group.finish();
}

fn generation(c: &mut Criterion) {
    let negative = fixture().with_label(Label::Negative);
    let model = fit_generator(&negative, 3).unwrap();
    let tables = analyze_class(&negative, &BandSpec::defaults(), Execution::Sequential).unwrap();
    let prompts = suggest_prompts(&tables, Label::Negative, 10, 1).unwrap();
    let counts = spread(500, prompts.len());
    let params = GenerationParams::with_target(70);
    let mut group = c.benchmark_group("generate_batch");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new(name, 500), &exec, |b, &exec| {
            b.iter(|| generate_batch_with(&model, &prompts, &counts, &params, 11, exec).unwrap())
        });
    }
    group.finish();
}

fn classifier(c: &mut Criterion) {
    let corpus = fixture();
    let vocab = build_vocabulary(&corpus).unwrap();
    let model = fit_mnb_with(&corpus, &vocab, DEFAULT_ALPHA, Execution::Sequential).unwrap();
    let mut group = c.benchmark_group("naive_bayes");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new("fit", name), &exec, |b, &exec| {
            b.iter(|| fit_mnb_with(&corpus, &vocab, DEFAULT_ALPHA, exec).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("predict", name), &exec, |b, &exec| {
            b.iter(|| predict_corpus(&model, &corpus, exec))
        });
    }
    group.finish();
}

criterion_group!(benches, ngrams, generation, classifier);
criterion_main!(benches);
