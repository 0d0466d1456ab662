//! Compares the data-parallel path scheduler against a single-worker pool on
//! the Monte Carlo workloads. Results are identical by construction (ordered
//! per-path streams); only throughput differs.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use ou_elliptic::convexity::{self, ProbeConfig};
use ou_elliptic::diffusion::{self, McConfig};
use ou_elliptic::harmonics::{BoundarySpec, BuiltinName};

fn mc(n_paths: usize) -> McConfig {
    McConfig {
        n_paths,
        dt: 1e-3,
        t_max: 1.0,
        seed: 42,
        worker_streams: 0,
    }
}

/// Runs `f` on a dedicated pool of the given width; with the `parallel`
/// feature off there is nothing to schedule, so `f` runs inline.
fn on_pool<T>(workers: usize, f: impl FnOnce() -> T + Send) -> T
where
    T: Send,
{
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("pool")
            .install(f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        f()
    }
}

fn worker_counts() -> Vec<usize> {
    #[cfg(feature = "parallel")]
    {
        let max = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
        if max > 1 {
            vec![1, max]
        } else {
            vec![1]
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        vec![1]
    }
}

fn bench_second_moment(c: &mut Criterion) {
    let mut group = c.benchmark_group("second_moment");
    group.sample_size(10);
    let x = [1.0, 0.0, 0.0];
    let cfg = mc(2_000);
    for workers in worker_counts() {
        group.bench_with_input(BenchmarkId::from_parameter(workers), &workers, |b, &w| {
            b.iter(|| on_pool(w, || diffusion::second_moment(3, &x, 1.0, &cfg).unwrap()));
        });
    }
    group.finish();
}

fn bench_exit_probability(c: &mut Criterion) {
    let mut group = c.benchmark_group("exit_probability");
    group.sample_size(10);
    let x = [1.0, 0.0, 0.0];
    let cfg = mc(2_000);
    for workers in worker_counts() {
        group.bench_with_input(BenchmarkId::from_parameter(workers), &workers, |b, &w| {
            b.iter(|| on_pool(w, || diffusion::exit_probability(3, &x, 0.5, 2.0, &cfg).unwrap()));
        });
    }
    group.finish();
}

fn bench_convexity_scan(c: &mut Criterion) {
    let mut group = c.benchmark_group("theorem2_harness");
    group.sample_size(10);
    let g = BoundarySpec::Builtin {
        d: 2,
        name: BuiltinName::Cos2Theta,
    };
    let probe = ProbeConfig {
        n_probes: 50,
        n_triples: 2_000,
        ..ProbeConfig::default()
    };
    for workers in worker_counts() {
        group.bench_with_input(BenchmarkId::from_parameter(workers), &workers, |b, &w| {
            b.iter(|| on_pool(w, || convexity::theorem2_harness(&g, 4, &probe).unwrap()));
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_second_moment,
    bench_exit_probability,
    bench_convexity_scan
);
criterion_main!(benches);
