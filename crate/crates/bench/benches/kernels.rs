use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use sinai_core::infinite_valley::{LadderEstimate, TruncationPolicy};
use sinai_core::{
    find_valley, local_times, mu_n, potential, sample_environment, simulate, EnvironmentDistribution, HTransformSampler,
    Window,
};

fn dist() -> Arc<EnvironmentDistribution> {
    Arc::new(EnvironmentDistribution::two_point(0.3).unwrap())
}

fn environment(c: &mut Criterion) {
    let d = dist();
    let w = Window::new(-64, 100_000).unwrap();
    c.bench_function("sample_environment 1e5 sites", |b| {
        let mut seed = 0u64;
        b.iter(|| {
            seed += 1;
            sample_environment(&d, w, seed).unwrap()
        })
    });
    let env = sample_environment(&d, w, 1).unwrap();
    c.bench_function("potential 1e5 sites", |b| b.iter(|| potential(black_box(&env))));
}

fn walk(c: &mut Criterion) {
    let d = dist();
    let env = sample_environment(&d, Window::new(-1, 200_000).unwrap(), 3).unwrap();
    let mut g = c.benchmark_group("walk");
    g.sample_size(20);
    g.bench_function("simulate 1e5 steps", |b| b.iter(|| simulate(&env, 100_000, black_box(11)).unwrap()));
    let traj = simulate(&env, 100_000, 11).unwrap();
    g.bench_function("local_times 1e5 steps", |b| b.iter(|| local_times(black_box(&traj))));
    g.finish();
}

fn valley(c: &mut Criterion) {
    let d = dist();
    let env = sample_environment(&d, Window::new(0, 1 << 16).unwrap(), 5).unwrap();
    let pot = potential(&env);
    c.bench_function("find_valley n=1e6", |b| b.iter(|| find_valley(black_box(&pot), 1_000_000).unwrap()));
    let v = find_valley(&pot, 1_000_000).unwrap();
    c.bench_function("mu_n n=1e6", |b| b.iter(|| mu_n(black_box(&pot), &v).unwrap()));
}

fn infinite_valley(c: &mut Criterion) {
    let sampler = HTransformSampler::new(&dist(), &LadderEstimate::default()).unwrap();
    let policy = TruncationPolicy::default();
    // about 1 seed in 2e4 hits the window cap; those calls return an error
    c.bench_function("h-transform adaptive sample", |b| {
        b.iter_batched(next_seed, |s| sampler.sample_adaptive(s, &policy), BatchSize::SmallInput)
    });
}

fn next_seed() -> u64 {
    use std::sync::atomic::{AtomicU64, Ordering};
    static NEXT: AtomicU64 = AtomicU64::new(1);
    NEXT.fetch_add(1, Ordering::Relaxed)
}

criterion_group!(benches, environment, walk, valley, infinite_valley);
criterion_main!(benches);
