use proptest::prelude::*;
use slag::explicit::{self, ModelParams};
use slag::linalg;
use slag::symtensor::{self, SymMat3};

fn point() -> impl Strategy<Value = [f64; 3]> {
    (-0.5f64..0.5, -0.5f64..0.5, -0.8f64..0.8).prop_map(|(a, b, c)| [a, b, c])
}

proptest! {
    #[test]
    fn hessian_is_singular(x in point()) {
        let p = ModelParams::default();
        let h = explicit::phi_hess(&p, &x);
        prop_assert!(h.det().abs() <= 1e-12 * h.max_abs().powi(3).max(1e-300));
        prop_assert!(h.apply(&explicit::phi_kernel(&x)).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn gradient_lies_on_sigma(x in point()) {
        let p = ModelParams::default();
        prop_assert!(explicit::sigma_residual(&p, &explicit::phi_grad(&p, &x)).abs() <= 1e-12);
    }

    #[test]
    fn angle_is_even_in_each_horizontal_coordinate(x in point()) {
        let p = ModelParams::default();
        let t = explicit::theta_value(&p, &x);
        prop_assert!((t - explicit::theta_value(&p, &[-x[0], x[1], x[2]])).abs() < 1e-13);
        prop_assert!((t - explicit::theta_value(&p, &[x[0], -x[1], x[2]])).abs() < 1e-13);
        prop_assert!((t - explicit::theta_value(&p, &[x[1], x[0], -x[2]])).abs() < 1e-13);
    }

    #[test]
    fn theta_gradient_matches_difference(x in point()) {
        let p = ModelParams::default();
        let t = explicit::theta_eval(&p, &x).unwrap();
        let h = 1e-6;
        for i in 0..3 {
            let mut a = x;
            let mut b = x;
            a[i] += h;
            b[i] -= h;
            let fd = (explicit::theta_value(&p, &a) - explicit::theta_value(&p, &b)) / (2.0 * h);
            prop_assert!((fd - t.grad[i]).abs() < 1e-7);
        }
    }
}

#[test]
fn lambda_pm_are_the_nonzero_eigenvalues() {
    let p = ModelParams::default();
    let x = [0.1, -0.2, 0.3];
    let (lp, lm) = explicit::lambda_pm(&p, &x).unwrap();
    let v = symtensor::eig3(&explicit::phi_hess(&p, &x)).values;
    let mut nz: Vec<f64> = v.iter().copied().filter(|e| e.abs() > 1e-12).collect();
    nz.sort_by(f64::total_cmp);
    assert!((nz[0] - lm.min(lp)).abs() < 1e-12 && (nz[1] - lm.max(lp)).abs() < 1e-12);
}

#[test]
fn origin_is_a_critical_point_of_the_angle() {
    let p = ModelParams::default();
    let t = explicit::theta_eval(&p, &[0.0; 3]).unwrap();
    assert!(linalg::norm(&t.grad) < 1e-12);
    assert!((t.theta - p.theta0()).abs() < 1e-14);
    let d = t.hess.sub(&SymMat3::diag(4.0, 4.0, 8.0).scale(p.lambda)).max_abs();
    assert!(d < 0.2 * 8.0 * p.lambda);
    assert!(symtensor::eig3(&t.hess).values[0] > 0.0);
}

#[test]
fn hessian_agrees_with_finite_differences() {
    let p = ModelParams::default();
    let x = [0.05, 0.02, -0.1];
    let t = explicit::theta_eval(&p, &x).unwrap();
    let fd = explicit::theta_hess_fd(&p, &x, 1e-4);
    assert!(t.hess.sub(&fd).max_abs() < 1e-6);
}

#[test]
fn out_of_domain_is_an_error() {
    let p = ModelParams::default();
    assert!(explicit::theta_eval(&p, &[0.0, 0.0, 1.0]).is_err());
}

#[test]
fn invalid_parameters_are_rejected() {
    assert!(ModelParams::new(-1.0, 0.05).is_err());
    assert!(ModelParams::new(0.05, 0.0).is_err());
}
