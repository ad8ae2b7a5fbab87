use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use num_complex::Complex64;

use qpi_bench::Fixture;
use qpi_core::retrieval::poisson_solve_dirichlet;
use qpi_core::spectral::Fft2;
use qpi_core::{tie_retrieve, KMode, RetrievalConfig, RngStream, TwinBeamSampler};

const SIDE: usize = 220;

fn fft(c: &mut Criterion) {
    let plan = Fft2::new(SIDE, SIDE);
    let data: Vec<Complex64> = (0..SIDE * SIDE)
        .map(|i| Complex64::new((i as f64).sin(), 0.0))
        .collect();
    c.bench_function("fft2_forward_220", |b| {
        b.iter_batched_ref(
            || data.clone(),
            |d| plan.forward(black_box(d)),
            BatchSize::SmallInput,
        )
    });
}

fn poisson(c: &mut Criterion) {
    let fx = Fixture::new(SIDE);
    let rhs = fx.stack(0.0125).i_plus;
    c.bench_function("poisson_dirichlet_220", |b| {
        b.iter(|| poisson_solve_dirichlet(black_box(&rhs)).unwrap())
    });
}

fn tie(c: &mut Criterion) {
    let fx = Fixture::new(SIDE);
    let s = fx.stack(0.0125);
    let rc = RetrievalConfig::new(&fx.cfg, 0.0125, KMode::Classical, 1).unwrap();
    c.bench_function("tie_retrieve_220", |b| {
        b.iter(|| tie_retrieve(&s.i_zero, &s.i_plus, &s.i_minus, black_box(&rc)).unwrap())
    });
}

fn sampling(c: &mut Criterion) {
    let fx = Fixture::new(SIDE);
    let sampler = TwinBeamSampler::new(Some(&fx.object), fx.grid, &fx.cfg, 0.0125).unwrap();
    let mut frame = 0u64;
    let mut g = c.benchmark_group("twin_frame");
    g.sample_size(10);
    g.bench_function("sample_220", |b| {
        b.iter(|| {
            frame += 1;
            sampler.sample(RngStream::lane(1, 0, frame))
        })
    });
    g.finish();
}

criterion_group!(benches, fft, poisson, tie, sampling);
criterion_main!(benches);
