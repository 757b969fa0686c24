//! Sequential against data-parallel runs of the FD solver and the moving-plane
//! sweep. "sequential" pins rayon to one thread; with the `parallel` feature
//! off both variants run the plain-iterator fallback.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use masym::expr::parse_plain;
use masym::fd::{solve_scalar_fd, solve_system_fd, ExprField, FdParams};
use masym::geometry::{critical_planes, Domain};
use masym::moving_plane::{lambda_sweep, SolutionView, SweepOptions};
use masym::rhs::RhsSystem;

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    vec![
        ("sequential", rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
        ("parallel", rayon::ThreadPoolBuilder::new().build().unwrap()),
    ]
}

fn fd_scalar(c: &mut Criterion) {
    let d = Domain::unit_disk();
    let g = ExprField(parse_plain("1 + x1^2 + x2^2").unwrap());
    let params = FdParams::with_h(1.0 / 32.0);
    let mut group = c.benchmark_group("fd_scalar_h32");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| solve_scalar_fd(&d, &g, 0.0, &params).unwrap()))
        });
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let d = Domain::unit_disk();
    let sys = RhsSystem::power_coupled(1.0, 2.0, 2).unwrap();
    let sol = solve_system_fd(&d, &sys, &[0.0, 0.0], &FdParams::with_h(1.0 / 32.0)).unwrap().solution;
    let view = SolutionView::new(&sol, &d).unwrap();
    let nu = [1.0, 0.0];
    let planes = critical_planes(&d, &nu, 1.0 / 128.0).unwrap();
    let opts = SweepOptions { n_lambdas: 8, ..Default::default() };
    let mut group = c.benchmark_group("lambda_sweep_h32");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| lambda_sweep(&view, &nu, &planes, Some(&sys), &opts).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, fd_scalar, sweep);
criterion_main!(benches);
