use criterion::{criterion_group, criterion_main, Criterion};
use owp_core::generate::gen_zipf;
use owp_core::instance::WeightDistribution;
use owp_core::opt::{belady, exact_opt, exact_opt_cost};

fn bench_oracle(c: &mut Criterion) {
    let weighted = gen_zipf(
        10,
        4,
        500,
        0.8,
        WeightDistribution::Deterministic { value: 0.5 },
        13,
    );
    c.bench_function("exact_opt_n10_t500", |b| b.iter(|| exact_opt(&weighted).unwrap().cost));
    c.bench_function("exact_opt_cost_n10_t500", |b| {
        b.iter(|| exact_opt_cost(&weighted).unwrap())
    });

    let unit = gen_zipf(
        10,
        4,
        500,
        0.8,
        WeightDistribution::Deterministic { value: 1.0 },
        13,
    );
    c.bench_function("belady_n10_t500", |b| b.iter(|| belady(&unit).unwrap()));
}

criterion_group!(benches, bench_oracle);
criterion_main!(benches);
