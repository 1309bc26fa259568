use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use tailforge_bench::{burr_sample, csv_rows};
use tailforge_core::*;

fn estimators(c: &mut Criterion) {
    let s = burr_sample(2000);
    c.bench_function("hill k=500", |b| b.iter(|| hill(black_box(&s), 500).unwrap()));

    let mut g = c.benchmark_group("fit_at n=200 k=100");
    let small = burr_sample(200);
    for cfg in [
        MethodConfig::pareto_ml(),
        MethodConfig::gpd_ml(),
        MethodConfig::ep(-0.5),
        MethodConfig::ep_plus(-0.5),
        MethodConfig::ep_bar(false, 100, 50),
        MethodConfig::tp_bar(false, 0.9),
    ] {
        g.bench_function(cfg.method.name(), |b| b.iter(|| fit_at(black_box(&small), &cfg, 100).unwrap()));
    }
    g.finish();

    c.bench_function("gpd_ml path n=2000, 100 ranks", |b| {
        let ks = default_k_range(2000);
        b.iter(|| k_path(black_box(&s), &MethodConfig::gpd_ml(), &ks).unwrap())
    });
}

fn bernstein(c: &mut Criterion) {
    // Skewed input; uniform spacing would fit the identity, which has a
    // shortcut.
    let u: Vec<f64> = (1..=1000).map(|i| (i as f64 / 1001.0).powi(2)).collect();
    let g = fit_bernstein(&u, 100).unwrap();
    assert!(g.sup_distance_to_identity(100) > 0.01);
    c.bench_function("bernstein cdf+pdf m=100", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for &x in &u {
                acc += g.cdf(x) + g.pdf(x);
            }
            acc
        })
    });
}

fn ingest(c: &mut Criterion) {
    let bytes = csv_rows(1_000_000);
    let mut g = c.benchmark_group("ingest");
    g.sample_size(10);
    g.throughput(Throughput::Bytes(bytes.len() as u64));
    g.bench_function("csv 1e6 rows", |b| {
        b.iter_batched(|| IngestOptions::default(), |o| ingest_csv(black_box(&bytes), &o).unwrap(), BatchSize::SmallInput)
    });
    g.finish();
}

criterion_group!(benches, estimators, bernstein, ingest);
criterion_main!(benches);
