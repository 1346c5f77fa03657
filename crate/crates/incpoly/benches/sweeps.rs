use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use incpoly::approx::{minimax_on_samples, FitOptions};
use incpoly::geometry::{make_compact, SetDescriptor};
use incpoly::par;
use incpoly::potential::{fekete_tuple, FeketeMode};
use incpoly::C64;
use std::hint::black_box;

fn fekete_sweep(c: &mut Criterion) {
    let k = make_compact(&SetDescriptor::circle(C64::new(0.0, 0.0), 1.0, 0.02)).unwrap();
    let mut group = c.benchmark_group("fekete_delta_sweep");
    group.sample_size(10);
    for top in [16usize, 32] {
        let run = |n: usize| fekete_tuple(&k, n + 4, FeketeMode::Greedy).unwrap().delta_n;
        group.bench_with_input(BenchmarkId::new("serial", top), &top, |b, &top| {
            b.iter(|| black_box(par::map_range_serial(top - 3, run)))
        });
        group.bench_with_input(BenchmarkId::new("rayon", top), &top, |b, &top| {
            b.iter(|| black_box(par::map_range(top - 3, run)))
        });
    }
    group.finish();
}

fn minimax_sweep(c: &mut Criterion) {
    let k = make_compact(&SetDescriptor::circle(C64::new(3.0, 0.0), 0.2, 0.01)).unwrap();
    let l = make_compact(&SetDescriptor::circle(C64::new(0.0, 0.0), 1.0, 0.05)).unwrap();
    let (ks, ls) = (k.all_samples(), l.all_samples());
    let kv = vec![C64::new(1.0, 0.0); ks.len()];
    let opts = FitOptions {
        skip_monomial: true,
        ..FitOptions::default()
    };
    let grid: Vec<usize> = (10..=60).step_by(10).collect();
    let run = |i: usize| minimax_on_samples(&ks, &kv, &ls, grid[i], 8.0, &opts).unwrap().err_k;
    let mut group = c.benchmark_group("minimax_decay_sweep");
    group.sample_size(10);
    group.bench_function("serial", |b| b.iter(|| black_box(par::map_range_serial(grid.len(), run))));
    group.bench_function("rayon", |b| b.iter(|| black_box(par::map_range(grid.len(), run))));
    group.finish();
}

criterion_group!(benches, fekete_sweep, minimax_sweep);
criterion_main!(benches);
