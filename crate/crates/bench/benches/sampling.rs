use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use fastflow::fields::{parse_field_id, sample_source};
use fastflow::solver::{fastflow_generate, fixed_skip_generate, full_trajectory, reuse_velocity_generate};
use fastflow::{BanditRegistry, FastFlowConfig, MlpField, TimeGrid, UcbAgent, VelocityField};

fn samplers<F: VelocityField>(c: &mut Criterion, name: &str, field: &F) {
    let grid = TimeGrid::uniform(50).unwrap();
    let x0 = sample_source(0, 1, field.dim()).remove(0);
    let config = FastFlowConfig::for_horizon(50, 1e-3);
    let mut group = c.benchmark_group(name);
    group.bench_function("full", |b| b.iter(|| full_trajectory(field, &grid, black_box(&x0)).unwrap()));
    group.bench_function("fixed_skip_2", |b| {
        b.iter(|| fixed_skip_generate(field, &grid, black_box(&x0), 2).unwrap())
    });
    group.bench_function("reuse_0.05", |b| {
        b.iter(|| reuse_velocity_generate(field, &grid, black_box(&x0), 0.05).unwrap())
    });
    group.bench_function("fastflow", |b| {
        let mut bandits = BanditRegistry::new();
        for _ in 0..50 {
            fastflow_generate(field, &grid, &x0, &config, &mut bandits).unwrap();
        }
        b.iter_batched(
            || bandits.clone(),
            |mut reg| fastflow_generate(field, &grid, black_box(&x0), &config, &mut reg).unwrap(),
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

fn analytic(c: &mut Criterion) {
    let (field, _) = parse_field_id("sinusoidal_time:A=1,omega=3.141592653589793", 2).unwrap();
    samplers(c, "sinusoidal_d2", &field);
}

fn mlp(c: &mut Criterion) {
    let field = MlpField::new(2, 64, 0).unwrap();
    samplers(c, "mlp_h64", &field);
}

fn ucb(c: &mut Criterion) {
    let arms = [0, 2, 4, 6];
    let agent = UcbAgent::with_stats(&arms, &[0.1, 0.3, 0.2, -0.1], &[40, 300, 90, 12], 2.0).unwrap();
    c.bench_function("ucb_choose", |b| b.iter(|| black_box(&agent).choose().unwrap()));
    c.bench_function("ucb_update", |b| {
        b.iter_batched(|| agent.clone(), |mut a| a.update(2, black_box(0.25)).unwrap(), BatchSize::SmallInput)
    });
}

criterion_group!(benches, analytic, mlp, ucb);
criterion_main!(benches);
