use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use mthd_bench::{char_checkpoint, SOURCES, TARGETS};
use mthd_core::adaptation::AdaptationConfig;
use mthd_core::decoding::{beam_search, prefix_constrained_search, BeamConfig, Feedback};
use mthd_core::numerics::{matmul, Tensor};
use mthd_core::task::TaskModel;

fn kernels(c: &mut Criterion) {
    let mut g = c.benchmark_group("matmul");
    for n in [32usize, 128] {
        let a = Tensor::new(vec![n, n], (0..n * n).map(|i| (i % 7) as f64 * 0.1).collect()).unwrap();
        let b = a.clone();
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| {
            bench.iter(|| matmul(black_box(&a), black_box(&b)).unwrap())
        });
    }
    g.finish();
}

fn training_step(c: &mut Criterion) {
    let ck = char_checkpoint(32, 64);
    let src = ck.src_vocab.tokenize(SOURCES[0]);
    let tgt = ck.tgt_vocab.tokenize(TARGETS[0]);
    c.bench_function("loss_and_gradients/32x64", |b| {
        b.iter(|| ck.model.loss_and_gradients(black_box(&src), black_box(&tgt)).unwrap())
    });
}

fn search(c: &mut Criterion) {
    let ck = char_checkpoint(32, 64);
    let src = ck.src_vocab.tokenize(SOURCES[1]);
    let mut g = c.benchmark_group("search");
    for width in [1usize, 6] {
        let cfg = BeamConfig {
            beam_width: width,
            ..BeamConfig::for_source(src.len())
        };
        g.bench_with_input(BenchmarkId::new("beam", width), &cfg, |b, cfg| {
            b.iter(|| beam_search(&ck.model, black_box(&src), cfg).unwrap())
        });
    }
    let cfg = BeamConfig::for_source(src.len());
    let feedback = Feedback::new("dijo el r");
    g.bench_function("prefix_constrained", |b| {
        b.iter(|| prefix_constrained_search(&ck.model, &ck.tgt_vocab, black_box(&src), &feedback, &cfg).unwrap())
    });
    g.finish();
}

fn adaptation(c: &mut Criterion) {
    let base = TaskModel::new(char_checkpoint(32, 64));
    let cfg = AdaptationConfig::default();
    c.bench_function("adapt/3_steps", |b| {
        b.iter_batched(
            || base.clone(),
            |mut m| m.learn(SOURCES[2], TARGETS[2], &cfg).unwrap(),
            criterion::BatchSize::LargeInput,
        )
    });
}

criterion_group!(benches, kernels, training_step, search, adaptation);
criterion_main!(benches);
