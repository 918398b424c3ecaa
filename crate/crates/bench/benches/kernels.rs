use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use plate_bench::{bar, lame2, mixed_state, stretch_datum};
use plate_core::energy::{limit_energy, rescaled_energy};
use plate_core::geometry::CrackSurface;
use plate_core::kirchhoff_love::kl_lift;
use plate_core::lab::{jump_energy_average, recovery_sequence};
use plate_core::minimize::{elastic_solve, reduced_solve, CrackIndicator};
use plate_core::{BoxGrid, LayerQuadrature, SolverConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn energies(c: &mut Criterion) {
    let p = lame2();
    let mut group = c.benchmark_group("energies");
    for cells in [64usize, 256] {
        let s = mixed_state(cells);
        let plate = BoxGrid::plate(&[0.0], &[1.0], &[cells], 16).unwrap();
        let v = kl_lift(&s, &plate).unwrap();
        group.bench_with_input(BenchmarkId::new("rescaled", cells), &v, |b, v| b.iter(|| rescaled_energy(black_box(v), &p, 0.01).unwrap()));
        group.bench_with_input(BenchmarkId::new("limit", cells), &s, |b, s| {
            b.iter(|| limit_energy(black_box(s), &p, LayerQuadrature::Exact).unwrap())
        });
    }
    group.finish();
}

fn solves(c: &mut Criterion) {
    let p = lame2();
    let cfg = SolverConfig::default();
    let mut group = c.benchmark_group("solves");
    group.sample_size(10);
    for cells in [32usize, 128] {
        let g = stretch_datum(cells, 0.5);
        let breaks = CrackIndicator::new(bar(cells));
        let plate = BoxGrid::plate(&[0.0], &[1.0], &[cells], 8).unwrap();
        group.bench_function(BenchmarkId::new("plate", cells), |b| b.iter(|| elastic_solve(&plate, &breaks, &g, &p, 0.01, &cfg).unwrap()));
        group.bench_function(BenchmarkId::new("reduced", cells), |b| b.iter(|| reduced_solve(&breaks, &g, &p, &cfg).unwrap()));
    }
    group.finish();
}

fn recovery(c: &mut Criterion) {
    let s = mixed_state(256);
    c.bench_function("recovery_sequence/256x32", |b| b.iter(|| recovery_sequence(&s, &lame2(), 0.01, 0.1, 32).unwrap()));
}

fn jump_energy(c: &mut Criterion) {
    let crack = CrackSurface::segment([0.1, 0.8], [0.9, 0.2]).unwrap();
    let (lo, hi) = (vec![-0.25, -0.25], vec![1.25, 1.25]);
    c.bench_function("jump_energy/h=1/64,20 offsets", |b| {
        b.iter(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            jump_energy_average(&crack, 1.0 / 64.0, 20, &lo, &hi, &mut rng).unwrap()
        })
    });
}

criterion_group!(benches, energies, solves, recovery, jump_energy);
criterion_main!(benches);
