use cri_core::linop::LinearOp;
use cri_core::operators::forward::mrop_operator;
use cri_core::operators::Backend;
use cri_core::C64;
use criterion::{criterion_group, criterion_main, Criterion};

fn forward_mrop(c: &mut Criterion) {
    let plan = cri_bench::vla_plan(9, 100, 100);
    let s = cri_bench::sketches(&plan, 25, 12);
    let op = mrop_operator(&plan, s, Backend::Nufft).unwrap();
    let x = cri_bench::sky(&plan, 25);
    let z = op.apply_real(x.values()).unwrap();
    let mut group = c.benchmark_group("mrop_full_scale");
    group.sample_size(10);
    group.bench_function("forward", |b| b.iter(|| op.apply_real(x.values()).unwrap()));
    group.bench_function("adjoint", |b| {
        let mut out = vec![C64::default(); op.cols()];
        b.iter(|| op.adjoint(&z, &mut out))
    });
    group.finish();
}

criterion_group!(benches, forward_mrop);
criterion_main!(benches);
