use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use expbench_bench::{cases, scaled_jacobian};
use expbench_core::{expm, phi_bundle, ConfiguredScheme, Scheme, SingleStep};

fn matrix_functions(c: &mut Criterion) {
    let mut group = c.benchmark_group("matfun");
    for case in cases() {
        let z = scaled_jacobian(&case);
        let name = case.problem.name().to_string();
        group.bench_with_input(BenchmarkId::new("expm", &name), &z, |b, z| b.iter(|| expm(black_box(z)).unwrap()));
        group.bench_with_input(BenchmarkId::new("phi_bundle", &name), &z, |b, z| {
            b.iter(|| phi_bundle(black_box(z)).unwrap())
        });
    }
    group.finish();
}

fn single_steps(c: &mut Criterion) {
    let mut group = c.benchmark_group("step");
    for case in cases() {
        for scheme in [Scheme::BackwardEuler, Scheme::Radau5, Scheme::Rk4, Scheme::Etd2Rk, Scheme::EtdRdp, Scheme::Etd4Rk] {
            let stepper = ConfiguredScheme::from(scheme);
            let id = BenchmarkId::new(scheme.name(), case.problem.name());
            group.bench_function(id, |b| b.iter(|| stepper.step(&case.problem, 0.0, black_box(&case.y), case.h)));
        }
    }
    group.finish();
}

criterion_group!(benches, matrix_functions, single_steps);
criterion_main!(benches);
