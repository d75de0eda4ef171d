use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hyperff::cascade::{friction_sweep, CascadeScenario};
use hyperff::certificate::saint_venant_certificate;
use hyperff::linear::{LinearPlant, TransferKind};
use hyperff::model::{GateBoundary, Grid, SaintVenant, Signal, GRAVITY};
use hyperff::solver::{RunConfig, SolverConfig};
use hyperff::steady::solve_steady_profile;
use hyperff::Exec;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn frequency_sweep(c: &mut Criterion) {
    let v: f64 = 0.4;
    let plant = LinearPlant::new(GRAVITY * 5.0 - v * v, 2.0 * v, 1.0, 5000.0, 5.0, 2.0).unwrap();
    let omegas: Vec<f64> = (0..100_000).map(|k| 1e-4 * (1.0 + k as f64)).collect();
    let mut group = c.benchmark_group("frequency_response_100k");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| plant.frequency_response(TransferKind::Pc, black_box(&omegas), exec).unwrap())
        });
    }
    group.finish();
}

fn certificate(c: &mut Criterion) {
    let model = SaintVenant::new(0.01, GRAVITY).unwrap();
    let gate = GateBoundary::new(2.0).unwrap();
    let grid = Grid::new(5000.0, 50_000).unwrap();
    let profile = solve_steady_profile(&model, &grid, 2.0, 5.0).unwrap();
    let mut group = c.benchmark_group("certificate_50k_cells");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| saint_venant_certificate(&model, &gate, black_box(&profile), GRAVITY, exec).unwrap())
        });
    }
    group.finish();
}

fn cascade_sweep(c: &mut Criterion) {
    let scenario = CascadeScenario {
        length: 5000.0,
        friction: 0.008,
        discharge: 2.0,
        gravity: GRAVITY,
        q_star: 2.0,
        set_points: vec![5.0, 4.9],
        controller_friction: None,
        inflow: Signal::Pulse {
            base: 2.0,
            peak: 2.5,
            settle: 2.2,
            start: 900.0,
            ramp: 300.0,
            hold: 300.0,
            fall: Some(600.0),
        },
        cells: 50,
        controller_cells: None,
        solver: SolverConfig::default(),
        run: RunConfig { duration: 7200.0, cadence: 60.0, snapshots: false },
    };
    let frictions = [0.008, 0.012, 0.016, 0.020, 0.024, 0.028, 0.032, 0.036];
    let mut group = c.benchmark_group("friction_sweep_8");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| friction_sweep(black_box(&scenario), &frictions, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, frequency_sweep, certificate, cascade_sweep);
criterion_main!(benches);
