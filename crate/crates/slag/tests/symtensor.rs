use proptest::prelude::*;
use slag::linalg;
use slag::symtensor::{self, SymMat3};

fn sym() -> impl Strategy<Value = SymMat3> {
    prop::array::uniform6(-3.0f64..3.0).prop_map(|c| SymMat3::from_comps(&c))
}

fn conj(q: &[[f64; 3]; 3], m: &SymMat3) -> SymMat3 {
    let a = m.to_full();
    SymMat3::from_fn(|i, j| {
        let mut s = 0.0;
        for k in 0..3 {
            for l in 0..3 {
                s += q[i][k] * a[k][l] * q[j][l];
            }
        }
        s
    })
}

proptest! {
    #[test]
    fn eig3_reconstructs(m in sym()) {
        let s = symtensor::eig3(&m);
        prop_assert!(s.values[0] <= s.values[1] && s.values[1] <= s.values[2]);
        prop_assert!(s.reconstruct().sub(&m).max_abs() <= 1e-12 * m.max_abs().max(1.0));
    }

    #[test]
    fn angle_is_orthogonally_invariant(m in sym(), u in prop::array::uniform3(0.0f64..1.0)) {
        let q = linalg::rotation_from_unit(&u);
        let a = symtensor::slag_angle(&m);
        prop_assert!((a - symtensor::slag_angle(&conj(&q, &m))).abs() <= 1e-12);
    }

    #[test]
    fn angle_first_derivative_matches_difference(m in sym(), e in sym()) {
        let h = 1e-6;
        let fd = (symtensor::slag_angle(&m.add(&e.scale(h))) - symtensor::slag_angle(&m.sub(&e.scale(h)))) / (2.0 * h);
        let d = symtensor::slag_deriv(&m);
        prop_assert!((fd - d.first_apply(&e)).abs() <= 1e-6 * e.max_abs().max(1.0));
    }

    #[test]
    fn second_derivative_is_symmetric(m in sym(), e in sym(), f in sym()) {
        let d = symtensor::slag_deriv(&m);
        prop_assert!((d.bilinear(&e, &f) - d.bilinear(&f, &e)).abs() <= 1e-10);
    }

    #[test]
    fn cofactor_inverts(m in sym()) {
        let (det, cof, _) = symtensor::det_calculus(&m);
        let p = m.matmul(&cof);
        for i in 0..3 {
            for j in 0..3 {
                let id = if i == j { det } else { 0.0 };
                prop_assert!((p[i][j] - id).abs() <= 1e-10 * m.max_abs().powi(3).max(1.0));
            }
        }
    }

    #[test]
    fn det_is_jacobi_derivative(m in sym(), e in sym()) {
        let h = 1e-6;
        let fd = ((m.add(&e.scale(h))).det() - (m.sub(&e.scale(h))).det()) / (2.0 * h);
        let (_, cof, _) = symtensor::det_calculus(&m);
        prop_assert!((fd - cof.dot(&e)).abs() <= 1e-6 * m.max_abs().max(1.0).powi(2) * e.max_abs().max(1.0));
    }
}

#[test]
fn coalescent_pair_has_finite_derivative() {
    let m = SymMat3::diag(1.0, 1.0 + 1e-9, -2.0);
    let d = symtensor::slag_deriv(&m);
    assert!(d.first.is_finite());
    let e = SymMat3::new(0.0, 1.0, 0.0, 0.0, 0.0, 0.0);
    let v = d.bilinear(&e, &e);
    assert!(v.is_finite());
    // off-diagonal coupling between equal eigenvalues is -2λ/(1+λ²)²
    assert!((v + 2.0 * 2.0 * 1.0 / 4.0).abs() < 1e-6, "{v}");
}

#[test]
fn zero_matrix_derivative_is_identity() {
    let d = symtensor::slag_deriv(&SymMat3::zero());
    assert!(d.first.sub(&SymMat3::identity()).max_abs() < 1e-15);
}
