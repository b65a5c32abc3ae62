use std::f64::consts::{FRAC_PI_2, TAU};
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use pfg_core::gradient::{ensemble_unitaries, EnsembleConfig, EvolveOptions, StrategyChoice};
use pfg_core::propagator::PropagationStrategy;
use pfg_core::sequence::{GradientShape, Rotation, SequenceElement, ShapeKind, Targets};
use pfg_core::spinsys::SpinSystem;
use pfg_core::Execution;

fn system() -> SpinSystem {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/systems/transcrotonic.spin");
    SpinSystem::from_config_file(path).unwrap()
}

/// A 90 degree pulse on all spins spread over a 100 us gradient.
fn pulse_with_gradient(sys: &SpinSystem) -> Vec<SequenceElement> {
    let tau = 100e-6;
    let amp = GradientShape::amp_for_kappa(sys, &ShapeKind::Const, tau, TAU);
    let shape = GradientShape::with_guard(ShapeKind::Const, amp, tau, 0.0).unwrap();
    let rotation = Rotation { duration: tau, ..Rotation::ideal(FRAC_PI_2, 0.0, Targets::All) };
    vec![SequenceElement::PulseWithGradient { rotation, shape }]
}

fn strategies(c: &mut Criterion) {
    let sys = system();
    let els = pulse_with_gradient(&sys);
    let cfg = EnsembleConfig::for_system(&sys, 8).unwrap();
    let mut group = c.benchmark_group("propagator");
    for s in [PropagationStrategy::Exact, PropagationStrategy::BholeJones] {
        let opts = EvolveOptions { strategy: StrategyChoice::Force(s), execution: Execution::Sequential, ..EvolveOptions::default() };
        group.bench_function(s.name(), |b| b.iter(|| ensemble_unitaries(&sys, black_box(&els), &cfg, &opts).unwrap()));
    }
    group.finish();
}

fn execution(c: &mut Criterion) {
    let sys = system();
    let els = pulse_with_gradient(&sys);
    let mut group = c.benchmark_group("ensemble");
    group.sample_size(20);
    for n in [16usize, 64] {
        let cfg = EnsembleConfig::for_system(&sys, n).unwrap();
        for (label, execution) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            let opts = EvolveOptions { strategy: StrategyChoice::PreferBholeJones, execution, ..EvolveOptions::default() };
            group.bench_with_input(BenchmarkId::new(label, n), &cfg, |b, cfg| b.iter(|| ensemble_unitaries(&sys, black_box(&els), cfg, &opts).unwrap()));
        }
    }
    group.finish();
}

criterion_group!(benches, strategies, execution);
criterion_main!(benches);
