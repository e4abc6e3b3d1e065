use cri_core::linop::{interleave, DenseReal, LinearOp};
use cri_core::operators::forward::mrop_operator;
use cri_core::operators::Backend;
use cri_core::solver::solve_bpdn;
use cri_core::SolverConfig;
use criterion::{criterion_group, criterion_main, Criterion};

fn solver(c: &mut Criterion) {
    let plan = cri_bench::vla_plan(3, 20, 32);
    let s = cri_bench::sketches(&plan, 16, 4);
    let op = mrop_operator(&plan, s, Backend::Nufft).unwrap();
    let x = cri_bench::sky(&plan, 6);
    let z = interleave(&op.apply_real(x.values()).unwrap());
    let dense = DenseReal::from_complex_op(&op);
    let cfg = SolverConfig::default();
    let mut group = c.benchmark_group("solver");
    group.sample_size(10);
    group.bench_function("bpdn_n1_32_k6_pm64", |b| {
        b.iter(|| solve_bpdn(&dense, &z, &cfg).unwrap())
    });
    group.bench_function("materialize_dense", |b| {
        b.iter(|| DenseReal::from_complex_op(&op))
    });
    group.finish();
}

criterion_group!(benches, solver);
criterion_main!(benches);
