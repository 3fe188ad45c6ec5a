use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use tvflow::convexdom::{inner_domain, ConvexBody};
use tvflow::diagnostics::karcher_mean;
use tvflow::flow::{stable_dt, FlowState, RhsForm, Stepper};
use tvflow::{Boundary, GridDomain, ManifoldPoint};
use tvflow_bench::{noisy_field, TARGETS};

const N: usize = 128;

fn rhs(c: &mut Criterion) {
    let mut g = c.benchmark_group("rhs");
    g.throughput(Throughput::Elements((N * N) as u64));
    for t in TARGETS {
        let u = noisy_field(t, N);
        for form in [RhsForm::Project, RhsForm::SecondFundamental] {
            let mut st = Stepper::new(u.domain().clone(), u.manifold().clone(), form);
            g.bench_with_input(BenchmarkId::new(format!("{form:?}"), t), &u, |b, u| {
                b.iter(|| black_box(st.rhs(u, 0.05)))
            });
        }
    }
    g.finish();
}

fn step(c: &mut Criterion) {
    let mut g = c.benchmark_group("step");
    g.throughput(Throughput::Elements((N * N) as u64));
    for t in TARGETS {
        let u = noisy_field(t, N);
        let dt = stable_dt(u.domain(), 0.05, 0.45);
        let mut st = Stepper::new(u.domain().clone(), u.manifold().clone(), RhsForm::Project);
        let mut state = FlowState::new(u);
        g.bench_function(*t, |b| b.iter(|| st.step(&mut state, 0.05, dt).unwrap()));
    }
    g.finish();
}

fn karcher(c: &mut Criterion) {
    let u = noisy_field("sphere:3:1", 64);
    let p = ManifoldPoint(u.manifold().base_point());
    c.bench_function("karcher_mean sphere 64x64", |b| b.iter(|| karcher_mean(&u, &p).unwrap()));
}

fn mask(c: &mut Criterion) {
    let body = ConvexBody::regular_polygon(64, [0.5, 0.5], 0.45).unwrap();
    let grid = GridDomain::unit(&[128, 128], Boundary::NeumannReflect).unwrap();
    c.bench_function("inner_domain 64-gon 128x128", |b| b.iter(|| inner_domain(&body, 0.02, &grid).unwrap()));
}

criterion_group!(benches, rhs, step, karcher, mask);
criterion_main!(benches);
