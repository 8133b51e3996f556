use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fldp::data::{generate_zipf, ZipfSpec, DEFAULT_ZIPF_EXPONENT};
use fldp::simulation::{self, Replicate};
use fldp::{aggregator, Execution, Mechanism, PrivacyParams};

const MODES: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

fn simulate(c: &mut Criterion) {
    let stream = generate_zipf(&ZipfSpec {
        n: 100_000,
        domain_size: 1023,
        exponent: DEFAULT_ZIPF_EXPONENT,
        seed: 1,
    })
    .unwrap();
    let rep = Replicate { seed: 1, trial: 0 };
    let d = stream.domain_size();

    let mut group = c.benchmark_group("estimate_all");
    group.sample_size(10);
    for mechanism in [Mechanism::Fhr, Mechanism::Oue] {
        for exec in MODES {
            group.bench_with_input(BenchmarkId::new(mechanism.name(), format!("{exec:?}")), &exec, |b, &exec| {
                b.iter(|| simulation::estimate_all(mechanism, stream.items(), d, 1.0, rep, exec).unwrap())
            });
        }
    }
    group.finish();

    let params = PrivacyParams::olh(1.0).unwrap();
    let reports = simulation::olh_reports(stream.items(), d, &params, rep, Execution::default()).unwrap();
    let mut group = c.benchmark_group("olh_estimate_all");
    group.sample_size(10);
    for exec in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| aggregator::olh_estimate_all(&reports, d, &params, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, simulate);
criterion_main!(benches);
