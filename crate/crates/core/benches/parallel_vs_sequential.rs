use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use displab::mc;
use displab::norms::{rollnik_squared, RollnikMethod};
use displab::parallel::set_sequential;
use displab::potentials::SpatialPotential;
use displab::propagator::{Grid3, Spectral, WaveField};
use rand::Rng;
use std::hint::black_box;

fn modes() -> [(&'static str, bool); 2] {
    [("parallel", false), ("sequential", true)]
}

fn free_evolve(c: &mut Criterion) {
    let grid = Grid3::new(64, 20.0).unwrap();
    let spectral = Spectral::new(grid);
    let psi = WaveField::gaussian(grid, 1.0, [0.0; 3]);
    let mut g = c.benchmark_group("free_evolve_64");
    g.sample_size(20);
    for (name, seq) in modes() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            set_sequential(seq);
            let mut field = psi.clone();
            b.iter(|| spectral.free_evolve(black_box(&mut field), 0.1));
        });
    }
    set_sequential(false);
    g.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let v0 = SpatialPotential::gaussian(1.0, 1.0).unwrap();
    let mut g = c.benchmark_group("monte_carlo");
    g.sample_size(20);
    for (name, seq) in modes() {
        g.bench_function(BenchmarkId::new("rollnik_100k", name), |b| {
            set_sequential(seq);
            b.iter(|| rollnik_squared(&v0, RollnikMethod::MonteCarlo { samples: 100_000, seed: 1 }).unwrap());
        });
        g.bench_function(BenchmarkId::new("unit_ball_volume_1m", name), |b| {
            set_sequential(seq);
            b.iter(|| {
                mc::estimate(1_000_000, 2, |rng| {
                    let p: [f64; 3] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                    if mc::norm(p) <= 1.0 { 8.0 } else { 0.0 }
                })
            });
        });
    }
    set_sequential(false);
    g.finish();
}

criterion_group!(benches, free_evolve, monte_carlo);
criterion_main!(benches);
