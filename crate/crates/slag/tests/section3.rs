use slag::linalg;
use slag::section3::{self, Rotation};
use slag::solver::SolveOptions;
use slag::Error;

#[test]
fn origin_values_at_several_angles() {
    for eps in [0.05, 0.02, 0.002] {
        let o = section3::origin_check(&Rotation::new(eps).unwrap()).unwrap();
        assert!(o.lambda3_err < 1e-12 && o.angle_err < 1e-12);
        assert!(o.hess_rel_err < 1e-4);
    }
}

#[test]
fn rotation_parameter_is_bounded() {
    assert!(Rotation::new(-0.1).is_err());
    assert!(Rotation::new(0.5).is_err());
}

#[test]
fn quartic_residuals_are_cubic() {
    let (r, l) = section3::wy2_slopes(&linalg::logspace(1e-3, 1e-1, 9));
    assert!(r >= 2.7 && l >= 2.7);
}

#[test]
fn newton_inversion_returns_source() {
    let rot = Rotation::new(0.01).unwrap();
    for u in linalg::r3_sequence(8, 0.5) {
        let x = [0.1 * (u[0] - 0.5), 0.1 * (u[1] - 0.5), 0.1 * (u[2] - 0.5)];
        let xt = rot.at(&x).unwrap().xt;
        assert!(linalg::dist(&rot.source(&xt).unwrap(), &x) < 1e-12);
    }
}

#[test]
fn z_is_convex_along_the_sequence() {
    for eps in [0.002, 0.001, 0.0005] {
        let rot = Rotation::new(eps).unwrap();
        let z = section3::extract_z(&rot, 2, Default::default()).unwrap();
        let r = z.enclosing_radius() / eps.sqrt();
        assert!(r > 1.0 && r < 1.5, "{r}");
        let (cz, cpsi) = section3::z_convexity(&rot, &z, Default::default()).unwrap();
        assert!(cz > 0.0 && cpsi > 0.0);
    }
}

#[test]
fn z_is_unbounded_at_larger_angles() {
    let rot = Rotation::new(0.0125).unwrap();
    let e = section3::extract_z(&rot, 2, Default::default()).unwrap_err();
    assert!(matches!(e, Error::KExtraction(_)));
}

#[test]
fn branch_counts_are_one_or_three() {
    let rot = Rotation::new(0.002).unwrap();
    let z = section3::extract_z(&rot, 2, Default::default()).unwrap();
    let c = section3::branch_census(&rot, &z, 16, Default::default());
    assert!(c.only_one_or_three() && c.three_seen(), "{:?}", c.histogram);
}

#[test]
fn dirichlet_solution_lies_below_the_transform() {
    let opts = SolveOptions { tol: 1e-10, ..Default::default() };
    let g = section3::gap_scaling(&[0.002], 0.008, 8, &opts).unwrap();
    assert!(g.runs[0].converged);
    assert!(g.runs[0].ordering <= 1e-8);
    assert!(g.corrected[0] > 0.0);
}
