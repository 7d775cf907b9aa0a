use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use sampler_bench::{bank_1d, bank_2d};
use sampler_core::designer::{exhaustive_design, solve_relaxed, solve_sdp, DesignProblem};
use sampler_core::estimation::{nls_estimate, simulate, EstimationGrid, GridAxis};
use sampler_core::fisher::{aggregate_fim, crlb_diag};
use sampler_core::models::{CandidateGrid, NoiseSpec, ParamVector, SignalModel};

fn bench_fim_bank(c: &mut Criterion) {
    let model = SignalModel::damped_2d(1).unwrap();
    let theta =
        ParamVector::new(model, vec![1.0, 0.2, 0.5, 1.0 / 20.0, 1.0 / 10.0, 0.5]).unwrap();
    let grid = CandidateGrid::uniform_2d(50, 50).unwrap();
    let noise = NoiseSpec::new(0.1).unwrap();
    c.bench_function("fim_bank_build_2500", |b| {
        b.iter(|| {
            sampler_core::fisher::FimBank::build(black_box(&theta), &grid, &noise).unwrap()
        })
    });
}

fn bench_crlb_eval(c: &mut Criterion) {
    let bank = bank_1d(50);
    let w = vec![0.5; 50];
    c.bench_function("aggregate_and_crlb_n50", |b| {
        b.iter(|| {
            let agg = aggregate_fim(black_box(&w), &bank).unwrap();
            crlb_diag(&agg, 0.0).unwrap()
        })
    });
}

fn bench_design_small(c: &mut Criterion) {
    let bank = bank_1d(50);
    let problem = DesignProblem::new(vec![bank], 13.0, vec![1.0; 4]).unwrap();
    let mut group = c.benchmark_group("design_n50");
    group.sample_size(10);
    group.bench_function("solve_sdp", |b| {
        b.iter_batched(
            || problem.clone(),
            |p| solve_sdp(black_box(&p)).unwrap(),
            BatchSize::SmallInput,
        )
    });
    group.bench_function("solve_relaxed", |b| {
        b.iter_batched(
            || problem.clone(),
            |p| solve_relaxed(black_box(&p)).unwrap(),
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

fn bench_design_medium(c: &mut Criterion) {
    let bank = bank_2d(20); // 400 candidates
    let problem = DesignProblem::new(vec![bank], 30.0, vec![1.0; 6]).unwrap();
    let mut group = c.benchmark_group("design_n400");
    group.sample_size(10);
    group.bench_function("solve_sdp", |b| {
        b.iter_batched(
            || problem.clone(),
            |p| solve_sdp(black_box(&p)).unwrap(),
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

fn bench_exhaustive(c: &mut Criterion) {
    let bank = bank_1d(12);
    c.bench_function("exhaustive_n12_m5", |b| {
        b.iter(|| exhaustive_design(black_box(&bank), 5, &[1.0; 4]).unwrap())
    });
}

fn bench_nls(c: &mut Criterion) {
    let model = SignalModel::damped_1d(1).unwrap();
    let theta = ParamVector::new(model, vec![1.0, 0.22, 0.08, 0.5]).unwrap();
    let grid = CandidateGrid::uniform_1d(50).unwrap();
    let noise = NoiseSpec::new(0.01).unwrap();
    let sel: Vec<usize> = (0..20).collect();
    let obs = simulate(&theta, &grid, &sel, &noise, 7, 0).unwrap();
    let axes = vec![
        GridAxis {
            param: 1,
            values: (0..15).map(|i| 0.2 + 0.002 * i as f64).collect(),
        },
        GridAxis {
            param: 2,
            values: (0..15).map(|i| 0.07 + 0.002 * i as f64).collect(),
        },
    ];
    let search = EstimationGrid::new(&model, axes).unwrap();
    c.bench_function("nls_grid_225", |b| {
        b.iter(|| nls_estimate(black_box(&obs), &model, &grid, &search).unwrap())
    });
}

criterion_group!(
    benches,
    bench_fim_bank,
    bench_crlb_eval,
    bench_design_small,
    bench_design_medium,
    bench_exhaustive,
    bench_nls
);
criterion_main!(benches);
