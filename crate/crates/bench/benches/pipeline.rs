//! Per-stage timings on Example 1 (circle interface, beta = (1, 10)).

use std::hint::black_box;
use std::sync::Arc;

use biharm_core::dg::default_quad_order;
use biharm_core::problems;
use biharm_core::{assemble, solve_spd, Classification, Mesh, PenaltyConfig, ReconstructionSpace};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn stages(c: &mut Criterion) {
    let problem = problems::example1();
    let mut group = c.benchmark_group("example1");
    group.sample_size(10);
    for (m, n) in [(2, 20), (2, 40), (3, 20)] {
        let label = format!("m{m}_n{n}");
        let defaults = problem.defaults(m);
        let penalty = PenaltyConfig::new(defaults.eta).unwrap();
        let mesh = Arc::new(Mesh::structured(problem.domain, n).unwrap());

        group.bench_function(BenchmarkId::new("classify", &label), |b| {
            b.iter(|| Classification::new(mesh.clone(), problem.level_set.clone()).unwrap())
        });
        let cls = Classification::new(mesh.clone(), problem.level_set.clone()).unwrap();

        group.bench_function(BenchmarkId::new("reconstruct", &label), |b| {
            b.iter(|| ReconstructionSpace::build(black_box(&cls), m, defaults.patch_size).unwrap())
        });
        let space = ReconstructionSpace::build(&cls, m, defaults.patch_size).unwrap();

        group.bench_function(BenchmarkId::new("assemble", &label), |b| {
            b.iter(|| assemble(&space, &cls, &problem.spec, &penalty, default_quad_order(m)).unwrap())
        });
        let system = assemble(&space, &cls, &problem.spec, &penalty, default_quad_order(m)).unwrap();

        group.bench_function(BenchmarkId::new("solve", &label), |b| {
            b.iter(|| solve_spd(black_box(&system.matrix), &system.rhs).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, stages);
criterion_main!(benches);
