//! Single-threaded against default-pool throughput of the hot paths.
//!
//! Build with `--no-default-features` to time the plain sequential code.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use opsample::channel::{apply_channel, zak_transform, DiscreteSpreadingFunction, IdentifierTrain};
use opsample::gabor::{build_gabor_matrix, generate_window, spark, SparkTarget, DEFAULT_RANK_TOL};
use opsample::reconstruct::recover_known;
use opsample::sparse::{recover_unknown_support, UnknownSupportOptions};
use opsample::support::{triangle_mosaic_support, CellSupport};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
fn pools() -> Vec<(&'static str, Option<rayon::ThreadPool>)> {
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("thread pool");
    vec![("1-thread", Some(one)), ("default", None)]
}

#[cfg(not(feature = "parallel"))]
fn pools() -> Vec<(&'static str, Option<()>)> {
    vec![("sequential", None)]
}

#[cfg(feature = "parallel")]
fn run<R: Send>(pool: &Option<rayon::ThreadPool>, f: impl FnOnce() -> R + Send) -> R {
    match pool {
        Some(p) => p.install(f),
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run<R>(_: &Option<()>, f: impl FnOnce() -> R) -> R {
    f()
}

fn bench_spark(c: &mut Criterion) {
    let w = generate_window(5, SparkTarget::Full, 1, 100).expect("window").window;
    let g = build_gabor_matrix(&w);
    let mut group = c.benchmark_group("spark_L5");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run(&pool, || spark(&g, DEFAULT_RANK_TOL).expect("spark")))
        });
    }
    group.finish();
}

fn bench_forward_and_recover(c: &mut Criterion) {
    let p = 32;
    let s = triangle_mosaic_support(1.0, p).expect("support");
    let w = generate_window(3, SparkTarget::Full, 2, 100).expect("window").window;
    let gm = build_gabor_matrix(&w);
    let train = IdentifierTrain::new(1.0, w);
    let eta = DiscreteSpreadingFunction::random(&s, &mut ChaCha8Rng::seed_from_u64(3));
    let hg = apply_channel(&eta, &train).expect("response");
    let z = zak_transform(&hg, 3.0).expect("zak");

    let mut group = c.benchmark_group("mosaic_P32");
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new("forward", name), |b| {
            b.iter(|| run(&pool, || zak_transform(&apply_channel(&eta, &train).expect("response"), 3.0)))
        });
        group.bench_function(BenchmarkId::new("recover", name), |b| {
            b.iter(|| run(&pool, || recover_known(&z, &gm, &s).expect("recovery")))
        });
    }
    group.finish();
}

fn bench_omp(c: &mut Criterion) {
    let (l, p) = (5, 8);
    let w = generate_window(l, SparkTarget::Full, 4, 100).expect("window").window;
    let gm = build_gabor_matrix(&w);
    let s = CellSupport::from_cells(1.0, l, p, &[(0, 3), (2, 1)]).expect("support");
    let eta = DiscreteSpreadingFunction::random(&s, &mut ChaCha8Rng::seed_from_u64(5));
    let hg = apply_channel(&eta, &IdentifierTrain::new(1.0, w)).expect("response");
    let z = zak_transform(&hg, 5.0).expect("zak");
    let opts = UnknownSupportOptions::new(2);
    let mut group = c.benchmark_group("omp_L5");
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run(&pool, || recover_unknown_support(&z, &gm, &opts).expect("recovery")))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_spark, bench_forward_and_recover, bench_omp);
criterion_main!(benches);
