use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use reviewmine::aggregate::average_elements;
use reviewmine::analytics::pearson;
use reviewmine::predict::{train_gbt, TrainConfig};
use reviewmine::quantify::parse_llm_response;
use reviewmine::schema::{ReviewField, ReviewScores};

fn random_scores(rng: &mut ChaCha8Rng) -> ReviewScores {
    let values: Vec<i64> = ReviewField::all().map(|f| rng.random_range(f.range())).collect();
    ReviewScores::from_values(values.try_into().unwrap()).unwrap()
}

fn bench_pearson(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x: Vec<f64> = (0..10_000).map(|_| rng.random_range(0.0..5.0)).collect();
    let y: Vec<f64> = x.iter().map(|v| v + rng.random_range(-1.0..1.0)).collect();
    c.bench_function("pearson_10k", |b| b.iter(|| pearson(black_box(&x), black_box(&y))));
}

fn bench_parse(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let reply = format!("```json\n{}\n```", random_scores(&mut rng).to_json());
    assert!(parse_llm_response(&reply).is_ok());
    c.bench_function("parse_llm_response", |b| b.iter(|| parse_llm_response(black_box(&reply))));
}

fn bench_average(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let scores: Vec<ReviewScores> = (0..100).map(|_| random_scores(&mut rng)).collect();
    c.bench_function("average_elements_100", |b| b.iter(|| average_elements("g", black_box(&scores))));
}

fn bench_train(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x: Vec<Vec<f64>> = (0..300).map(|_| (0..40).map(|_| f64::from(rng.random_range(0..2u8))).collect()).collect();
    let y: Vec<f64> = x.iter().map(|r| 2.0 + r.iter().take(8).sum::<f64>() * 0.3).collect();
    let names: Vec<String> = (0..40).map(|i| format!("f{i}")).collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let cfg = TrainConfig::default();
    let mut group = c.benchmark_group("train_gbt");
    group.sample_size(10);
    group.bench_function("300x40_default", |b| b.iter(|| train_gbt(black_box(&x), &y, &names, &cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_pearson, bench_parse, bench_average, bench_train);
criterion_main!(benches);
