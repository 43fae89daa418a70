//! Per-node kernels on the rayon pool against a single thread. With
//! `--no-default-features` the same benches time the sequential build.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use u2flow::flow;
use u2flow::geometry;
use u2flow::par;
use u2flow::profile::Profile;
use u2flow::reference::{fik_shoot, FikSettings, TaubBolt};
use u2flow::spectral::{random_regular_tensor, SpectralGrid, SpectralOperator};

const NODES: [usize; 2] = [2000, 8000];

/// Runs `f` on a pool of `threads` threads (0: the global pool).
fn on_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        return pool.install(f);
    }
    let _ = threads;
    f()
}

fn modes() -> Vec<(&'static str, usize)> {
    if par::is_parallel() {
        vec![("sequential", 1), ("parallel", 0)]
    } else {
        vec![("sequential_build", 0)]
    }
}

fn bolt(n: usize) -> Profile {
    TaubBolt::new(1.0).unwrap().profile(n, 40.0).unwrap()
}

fn flow_kernels(c: &mut Criterion) {
    let mut g = c.benchmark_group("flow");
    for n in NODES {
        let p = bolt(n);
        let dt = flow::stable_dt(&p, 0.2);
        for (mode, threads) in modes() {
            g.bench_with_input(BenchmarkId::new(format!("rhs/{mode}"), n), &p, |b, p| {
                b.iter(|| on_threads(threads, || flow::rhs(p, 2).unwrap()))
            });
            g.bench_with_input(BenchmarkId::new(format!("advance/{mode}"), n), &p, |b, p| {
                b.iter(|| on_threads(threads, || flow::advance(p, dt, 2).unwrap()))
            });
            g.bench_with_input(BenchmarkId::new(format!("curvature/{mode}"), n), &p, |b, p| {
                b.iter(|| on_threads(threads, || geometry::curvature(p).unwrap()))
            });
        }
    }
    g.finish();
}

fn spectral_kernels(c: &mut Criterion) {
    let bg = fik_shoot(&FikSettings::default()).unwrap();
    let mut g = c.benchmark_group("spectral");
    g.sample_size(20);
    for cells in [1600, 6400] {
        let grid = SpectralGrid { cells, s_max: 16.0 };
        let op = SpectralOperator::new(&bg, grid).unwrap();
        let h = random_regular_tensor(op.nodes(), 3);
        for (mode, threads) in modes() {
            g.bench_with_input(BenchmarkId::new(format!("assemble/{mode}"), cells), &grid, |b, grid| {
                b.iter(|| on_threads(threads, || SpectralOperator::new(&bg, *grid).unwrap()))
            });
            g.bench_with_input(BenchmarkId::new(format!("apply/{mode}"), cells), &h, |b, h| {
                b.iter(|| on_threads(threads, || op.apply(h).unwrap()))
            });
        }
    }
    g.finish();
}

criterion_group!(benches, flow_kernels, spectral_kernels);
criterion_main!(benches);
