//! Parallel vs single-threaded throughput of the hot stages.
//!
//! `cargo bench` compares a one-thread rayon pool with the default pool;
//! `cargo bench --no-default-features` runs the sequential fallback.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mcstain::colorize::LinearBackend;
use mcstain::features::{extract_features, kmeans_fit, learning_subset, KMeansConfig};
use mcstain::phantom::{render_phantom, shape_coded_spec, PhantomSpec};
use mcstain::study::{channel_array, run_c_study, StudyConfig};

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let all = rayon::current_num_threads();
    let mut out = vec![("1".to_string(), rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap())];
    if all > 1 {
        out.push((all.to_string(), rayon::ThreadPoolBuilder::new().num_threads(all).build().unwrap()));
    }
    out
}

fn bench(c: &mut Criterion) {
    let spec = PhantomSpec { height: 192, width: 192, ..shape_coded_spec(1) };
    let p = render_phantom(&spec).unwrap();
    let cfg = StudyConfig::default();
    let subset = learning_subset(&p.cube, 0.2, 0).unwrap();
    let fs = kmeans_fit(&subset, 3, &KMeansConfig::default()).unwrap();
    let stack = channel_array(&p.cube, &fs, cfg.clip_fraction).unwrap();

    let mut g = c.benchmark_group("pipeline");
    g.sample_size(10);
    for (threads, pool) in pools() {
        g.bench_with_input(BenchmarkId::new("render_phantom", &threads), &pool, |b, pool| {
            b.iter(|| pool.install(|| render_phantom(&spec).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("kmeans_k3", &threads), &pool, |b, pool| {
            b.iter(|| pool.install(|| kmeans_fit(&subset, 3, &KMeansConfig::default()).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("extract_features", &threads), &pool, |b, pool| {
            b.iter(|| pool.install(|| extract_features(&p.cube, &fs).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("c_study_63", &threads), &pool, |b, pool| {
            b.iter(|| pool.install(|| run_c_study(&stack, &p.stain, &LinearBackend, &cfg).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
