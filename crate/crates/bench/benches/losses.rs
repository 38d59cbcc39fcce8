use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hyperembed::losses::{baseline_softmax, c_triplet_center, scaled_cosine_softmax};
use hyperembed::normalization::{normalize_backward, normalize_forward};
use hyperembed::{NormalizationMode, Rng};

fn normalization(c: &mut Criterion) {
    let mut rng = Rng::new(0);
    let x = rng.normal_vec(512);
    let g = rng.normal_vec(512);
    c.bench_function("normalize_forward/512", |b| b.iter(|| normalize_forward(black_box(&x))));
    let fwd = normalize_forward(&x);
    c.bench_function("normalize_backward/512", |b| b.iter(|| normalize_backward(black_box(&fwd), black_box(&g))));
}

fn softmax_losses(c: &mut Criterion) {
    let mut group = c.benchmark_group("softmax");
    for classes in [10, 100, 1000] {
        let mut rng = Rng::new(1);
        let f = rng.normal_matrix(256, 128, 1.0);
        let w = rng.normal_matrix(128, classes, 1.0);
        let bias = vec![0.0; classes];
        let labels: Vec<usize> = (0..256).map(|_| rng.index(classes)).collect();
        group.bench_with_input(BenchmarkId::new("baseline", classes), &classes, |b, _| {
            b.iter(|| baseline_softmax(&f, &w, Some(&bias), &labels).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("scaled_cosine", classes), &classes, |b, _| {
            b.iter(|| scaled_cosine_softmax(&f, &w, 10.0, true, &labels, NormalizationMode::Both).unwrap())
        });
    }
    group.finish();
}

fn metric_losses(c: &mut Criterion) {
    let mut rng = Rng::new(2);
    let f = rng.normal_matrix(256, 128, 1.0);
    let w = rng.normal_matrix(128, 100, 1.0);
    let labels: Vec<usize> = (0..256).map(|_| rng.index(100)).collect();
    c.bench_function("c_triplet_center/256x100", |b| {
        b.iter(|| c_triplet_center(&f, &w, &labels, 0.8, NormalizationMode::Both).unwrap())
    });
}

criterion_group!(benches, normalization, softmax_losses, metric_losses);
criterion_main!(benches);
