use criterion::{criterion_group, criterion_main, Criterion};
use stackdx::forest::{fit_forest, ForestParams};
use stackdx::gbdt::{fit_boosted, GbdtParams};
use stackdx::mlp::{fit_mlp, MlpParams};
use stackdx::RngPlan;
use stackdx_bench::sparse_dataset;

// Roughly the size of one cross-validation fold.
fn fold_sized() -> stackdx::LabeledDataset {
    sparse_dataset(60, 1000, 0.004, 7)
}

fn bench_forest(c: &mut Criterion) {
    let data = fold_sized();
    let params = ForestParams::default();
    c.bench_function("forest_fit_100_trees", |b| {
        b.iter(|| fit_forest(&data, &params, &RngPlan::new(1)).unwrap())
    });
}

fn bench_gbdt(c: &mut Criterion) {
    let data = fold_sized();
    let params = GbdtParams::default();
    c.bench_function("gbdt_fit_100_rounds", |b| {
        b.iter(|| fit_boosted(&data, &params, &RngPlan::new(1)).unwrap())
    });
}

fn bench_mlp(c: &mut Criterion) {
    let data = fold_sized();
    let params = MlpParams { epochs: 5, ..MlpParams::default() };
    let mut group = c.benchmark_group("mlp");
    group.sample_size(10);
    group.bench_function("fit_5_epochs", |b| {
        b.iter(|| fit_mlp(&data, &params, &RngPlan::new(1)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_forest, bench_gbdt, bench_mlp);
criterion_main!(benches);
