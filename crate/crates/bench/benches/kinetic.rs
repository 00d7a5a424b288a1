use criterion::{criterion_group, criterion_main, Criterion};
use kmfg_core::kinetic::{picard_solve, simulate_forward, Grid, KineticModel, PicardOptions, Variant};
use kmfg_core::ModelConfig;
use std::hint::black_box;

fn forward(c: &mut Criterion) {
    let cfg = ModelConfig::default().with_sigma(0.8);
    let model = KineticModel::new(&cfg, Grid::new(64, 48, 0.02, 1.0).unwrap(), Variant::Forward).unwrap();
    let rho0 = model.perturbed_equilibrium(1, 1e-3).unwrap();
    let mut g = c.benchmark_group("kinetic");
    g.sample_size(10);
    g.bench_function("forward_64x48_50_steps", |b| b.iter(|| simulate_forward(&model, black_box(&rho0), 50).unwrap()));

    // from the stationary pair one sweep already meets the tolerance
    let cfg = ModelConfig::default().with_r(1.4);
    let model = KineticModel::new(&cfg, Grid::new(64, 48, 0.05, 2.5).unwrap(), Variant::Mfg).unwrap();
    let rho0 = model.equilibrium();
    let opts = PicardOptions::default();
    g.bench_function("picard_sweep_64x48_50_steps", |b| {
        b.iter(|| picard_solve(&model, black_box(&rho0), &opts).unwrap())
    });
    g.finish();
}

criterion_group!(benches, forward);
criterion_main!(benches);
