use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use crooks_core::experiment::{monte_carlo_cell, ProtocolPair};
use crooks_core::pulse::{objective_and_gradient, ControlPulse, NoiseGrid, SixLevelModel};
use crooks_core::quantum::DEFAULT_SLICES;
use crooks_core::switching::SwitchingProtocol;
use crooks_core::tpm::MeasurementModel;

fn propagator(c: &mut Criterion) {
    let p = SwitchingProtocol::with_tau(300.0).unwrap();
    c.bench_function("propagator tau=300 4000 slices", |b| {
        b.iter(|| black_box(p.propagator(DEFAULT_SLICES).unwrap()))
    });
}

fn tpm(c: &mut Criterion) {
    let pair = ProtocolPair::new(SwitchingProtocol::with_tau(25.0).unwrap(), DEFAULT_SLICES).unwrap();
    let noisy = MeasurementModel::new(0.1, 0.2).unwrap();
    c.bench_function("monte carlo cell 16000 shots", |b| {
        b.iter(|| black_box(monte_carlo_cell(&pair, 0.22, 16_000, &noisy, 1).unwrap()))
    });
}

fn gradient(c: &mut Criterion) {
    let model = SixLevelModel::default();
    let pulse = ControlPulse::naive_square(&model, 10, model.default_amplitude_bound()).unwrap();
    let grid = NoiseGrid::default();
    c.bench_function("robust objective gradient 5x5 grid", |b| {
        b.iter(|| black_box(objective_and_gradient(&pulse, &model, &grid).unwrap()))
    });
}

criterion_group!(benches, propagator, tpm, gradient);
criterion_main!(benches);
