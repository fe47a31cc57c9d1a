use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spatial_iv::dr_effects::{BenchmarkMethod, MethodSuite, SuiteConfig};
use spatial_iv::gpsim::{run_replications_with, Schedule, SimScenario, Simulator};

fn replications(c: &mut Criterion) {
    let sim = Simulator::new(SimScenario {
        n: 200,
        ..SimScenario::default()
    })
    .unwrap();
    let suite = MethodSuite::new(
        &sim.layout().coords,
        SuiteConfig {
            methods: vec![BenchmarkMethod::Baseline, BenchmarkMethod::IvTps, BenchmarkMethod::IvGraphLaplacian],
            ..SuiteConfig::default()
        },
    )
    .unwrap();

    let mut group = c.benchmark_group("replications");
    group.sample_size(10);
    for m in [4usize, 16] {
        for (name, schedule) in [("parallel", Schedule::Parallel), ("sequential", Schedule::Sequential)] {
            group.bench_with_input(BenchmarkId::new(name, m), &m, |b, &m| {
                b.iter(|| run_replications_with(&sim, m, &suite, schedule))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, replications);
criterion_main!(benches);
