use proptest::prelude::*;
use slag::linalg::V3;
use slag::solver::{self, Grid, Operator, Problem, Region, ScalarField3, SolveOptions, StencilSet};
use slag::symtensor::{self, SymMat3};
use slag::verify;

fn opts() -> SolveOptions {
    SolveOptions { tol: 1e-10, ..Default::default() }
}

#[test]
fn half_square_norm_operators() {
    let g = Grid::cube(1.0, 0.25).unwrap();
    let f = ScalarField3::from_fn(&g, |x| 0.5 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]));
    let o = solver::discrete_ops(&StencilSet::standard(), &f, g.index(4, 4, 4));
    assert!((o.lambda_min - 1.0).abs() < 1e-12);
    assert!((o.laplacian - 3.0).abs() < 1e-12);
    assert!((o.f - 3.0 * 1f64.atan()).abs() < 1e-12);
}

#[test]
fn dirichlet_reproduces_diagonal_quadratic() {
    let a = SymMat3::diag(0.7, 1.3, -0.2);
    let q = move |x: &V3| 0.5 * a.bilin(x, x);
    let g = Grid::cube(1.0, 0.125).unwrap();
    let (u, rep) = solver::solve_dirichlet(symtensor::slag_angle(&a), &q, &g, 1e-11).unwrap();
    assert!(rep.converged);
    assert!(u.max_abs_diff(&ScalarField3::from_fn(&g, q)) < 1e-9);
    assert!(solver::residual(&u, &Problem {
        grid: g,
        region: Region::Box,
        op: Operator::Angle,
        rhs: &move |_: &V3| symtensor::slag_angle(&a),
        bdata: &q,
    }) <= 1e-10);
}

#[test]
fn comparison_with_lifted_data() {
    let g = Grid::cube(1.0, 0.125).unwrap();
    let b = |x: &V3| 0.3 * x[0] * x[0] + 0.2 * (x[1] + x[2]).sin();
    let d = 0.05;
    let lifted = move |x: &V3| b(x) + d;
    let (u, _) = solver::solve_dirichlet(1.0, &b, &g, 1e-9).unwrap();
    let (v, _) = solver::solve_dirichlet(1.0, &lifted, &g, 1e-9).unwrap();
    for (a, c) in u.values.iter().zip(&v.values) {
        assert!(*a <= c + 1e-9 && c - a <= d + 1e-9);
    }
}

#[test]
fn singular_quadratic_solves_bellman() {
    let a = 0.8;
    let q = move |x: &V3| 0.5 * a * (x[0] * x[0] + x[1] * x[1]);
    let g = Grid::cube(1.0, 0.125).unwrap();
    let (u, _) = solver::solve_bellman(2.0 * a.atan(), &q, &g, 1e-10).unwrap();
    assert!(u.max_abs_diff(&ScalarField3::from_fn(&g, q)) < 1e-9);
}

#[test]
fn model_solution_is_nonnegative_and_symmetric() {
    let (v, rep) = solver::solve_model_with(3.0, 0.1875, &solver::model_forcing, &opts()).unwrap();
    assert!(rep.converged);
    assert!(v.values.iter().all(|&x| x >= -1e-9));
    let n = v.dims[0];
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                assert!((v.get(i, j, k) - v.get(n - 1 - j, i, k)).abs() < 1e-8);
                assert!((v.get(i, j, k) - v.get(i, j, n - 1 - k)).abs() < 1e-8);
            }
        }
    }
    assert!(!rep.mask_points(&v.grid()).is_empty());
}

#[test]
fn model_rejects_coarse_grids() {
    assert!(solver::solve_model(4.0, 0.5, 1e-8).is_err());
    assert!(solver::solve_model(2.0, 0.1, 1e-8).is_err());
}

#[test]
fn hausdorff_of_shifted_masks() {
    let g = Grid::cube(1.0, 0.25).unwrap();
    let a: Vec<bool> = (0..g.len()).map(|i| g.point(i)[0] <= 0.0).collect();
    let b: Vec<bool> = (0..g.len()).map(|i| g.point(i)[0] <= 0.5).collect();
    assert!((solver::grid_hausdorff(&g, &a, &b) - 0.5).abs() < 1e-12);
}

#[test]
fn sequential_and_parallel_agree() {
    use slag::par::Exec;
    let b = |x: &V3| x[0] * x[1] + 0.5 * x[2] * x[2];
    let g = Grid::cube(1.0, 0.125).unwrap();
    let rhs = |_: &V3| 0.9;
    let pb = Problem { grid: g, region: Region::Box, op: Operator::Angle, rhs: &rhs, bdata: &b };
    let (u, _) = solver::solve(&pb, &SolveOptions { exec: Exec::Sequential, ..opts() });
    let (v, _) = solver::solve(&pb, &SolveOptions { exec: Exec::Parallel, ..opts() });
    assert!(u.max_abs_diff(&v) < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn operators_are_monotone(seed in 0.0f64..1.0) {
        prop_assert!(verify::monotonicity_violation(seed) <= 0.0);
    }
}

#[test]
fn sor_converges_on_mixed_quadratic_data() {
    let g = Grid::cube(1.0, 0.125).unwrap();
    let b = |x: &V3| 0.4 * x[0] * x[0] + 0.3 * x[1] * x[1] + 0.2 * x[2] * x[2] + 0.1 * x[0] * x[1];
    let pb = Problem {
        grid: g,
        region: Region::Box,
        op: Operator::Angle,
        rhs: &|_: &V3| 0.9,
        bdata: &b,
    };
    let (_, rep) = solver::solve(&pb, &SolveOptions { tol: 1e-8, max_iter: 2000, ..Default::default() });
    assert!(rep.converged, "residual {}", rep.residual);
}
