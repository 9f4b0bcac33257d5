use ahgmm::{attack_inverse, filter_agb, filter_ahgmm, AdversaryModel};
use ahgmm::baselines::optimal_kernel;
use ahgmm_bench::fixture;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn filters(c: &mut Criterion) {
    let mut group = c.benchmark_group("filter");
    group.sample_size(10);
    for size in [48, 96] {
        let f = fixture(size);
        group.bench_with_input(BenchmarkId::new("agb", size), &f, |b, f| {
            b.iter(|| filter_agb(black_box(&f.image), &f.face, &f.density, &f.thr).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("ahgmm", size), &f, |b, f| {
            b.iter(|| filter_ahgmm(black_box(&f.image), &f.face, &f.density, &f.thr, &f.hopping).unwrap())
        });
    }
    group.finish();
}

fn attacks(c: &mut Criterion) {
    let mut group = c.benchmark_group("attack");
    group.sample_size(10);
    let f = fixture(64);
    let sigma_o = optimal_kernel(&f.density, &f.thr).unwrap();
    let protected = filter_ahgmm(&f.image, &f.face, &f.density, &f.thr, &f.hopping).unwrap().0;
    let optimal = AdversaryModel::optimal();
    let accurate = AdversaryModel::accurate(f.hopping.clone());
    group.bench_function("optimal_64", |b| {
        b.iter(|| attack_inverse(black_box(&protected), &f.face, &optimal, &sigma_o, 1e-4).unwrap())
    });
    group.bench_function("accurate_64", |b| {
        b.iter(|| attack_inverse(black_box(&protected), &f.face, &accurate, &sigma_o, 1e-4).unwrap())
    });
    group.finish();
}

criterion_group!(benches, filters, attacks);
criterion_main!(benches);
