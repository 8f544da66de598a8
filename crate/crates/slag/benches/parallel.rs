use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use slag::explicit::ModelParams;
use slag::freeboundary;
use slag::linalg::V3;
use slag::symtensor::{self, SymMat3};
use slag::par::Exec;
use slag::solver::{self, Grid, Operator, Problem, Region, SolveOptions};
use std::hint::black_box;
use std::time::Duration;

const MODES: [(&str, Exec); 2] = [("parallel", Exec::Parallel), ("sequential", Exec::Sequential)];

fn extract(c: &mut Criterion) {
    let p = ModelParams::default();
    let mut g = c.benchmark_group("extract_k");
    g.sample_size(10).warm_up_time(Duration::from_millis(200)).measurement_time(Duration::from_secs(2));
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new(name, 2), &exec, |b, &e| {
            b.iter(|| freeboundary::extract_k_with(black_box(&p), 2, e).unwrap())
        });
    }
    g.finish();
}

fn dirichlet(c: &mut Criterion) {
    let grid = Grid::cube(1.0, 0.125).unwrap();
    let a = SymMat3::diag(0.7, 1.3, -0.2);
    let theta = symtensor::slag_angle(&a);
    let bdata = move |x: &V3| 0.5 * a.bilin(x, x);
    let rhs = move |_: &V3| theta;
    let pb = Problem {
        grid,
        region: Region::Box,
        op: Operator::Angle,
        rhs: &rhs,
        bdata: &bdata,
    };
    let mut g = c.benchmark_group("dirichlet_17");
    g.sample_size(10).warm_up_time(Duration::from_millis(200)).measurement_time(Duration::from_secs(2));
    for (name, exec) in MODES {
        let opts = SolveOptions {
            tol: 1e-10,
            exec,
            ..Default::default()
        };
        g.bench_function(name, |b| b.iter(|| solver::solve(black_box(&pb), &opts)));
    }
    g.finish();
}

fn model(c: &mut Criterion) {
    let mut g = c.benchmark_group("model_r3_h3_16");
    g.sample_size(10).warm_up_time(Duration::from_millis(200)).measurement_time(Duration::from_secs(2));
    for (name, exec) in MODES {
        let opts = SolveOptions {
            tol: 1e-10,
            exec,
            ..Default::default()
        };
        g.bench_function(name, |b| {
            b.iter(|| solver::solve_model_with(3.0, 0.1875, &solver::model_forcing, &opts).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, extract, dirichlet, model);
criterion_main!(benches);
