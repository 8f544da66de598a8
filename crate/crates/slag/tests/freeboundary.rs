use slag::band::Glued;
use slag::explicit::{self, ModelParams};
use slag::freeboundary::{self, TangencyCase};
use slag::geometry;
use slag::linalg;

fn mesh(level: usize) -> (ModelParams, freeboundary::BoundaryMesh) {
    let p = ModelParams::default();
    let m = freeboundary::extract_k(&p, level).unwrap();
    (p, m)
}

#[test]
fn samples_lie_on_the_level_set() {
    let (p, m) = mesh(3);
    assert_eq!(m.samples.len(), freeboundary::icosphere(3).vertices.len());
    for s in &m.samples {
        assert!((explicit::theta_value(&p, &s.x0) - p.c_star()).abs() < 1e-10);
        assert!((linalg::norm(&s.nu) - 1.0).abs() < 1e-12);
        assert!(linalg::dot(&s.nu, &s.tau1).abs() < 1e-12);
        assert!(linalg::dot(&s.tau1, &s.tau2).abs() < 1e-12);
        assert!(s.theta_nu > 0.0);
    }
}

#[test]
fn boundary_is_strictly_convex() {
    let (_, m) = mesh(3);
    for s in &m.samples {
        let (k1, _) = s.principal_curvatures();
        assert!(k1 > 0.0);
    }
}

#[test]
fn radius_respects_symmetries() {
    let p = ModelParams::default();
    for u in linalg::r3_sequence(20, 0.3) {
        let w = linalg::normalize(&[2.0 * u[0] - 1.0, 2.0 * u[1] - 1.0, 2.0 * u[2] - 1.0]);
        let r = freeboundary::boundary_radius(&p, &w).unwrap();
        for v in [[-w[0], w[1], w[2]], [w[0], -w[1], w[2]], [w[1], w[0], -w[2]]] {
            assert!((freeboundary::boundary_radius(&p, &v).unwrap() - r).abs() < 1e-9);
        }
    }
}

#[test]
fn oversized_eps_fails_to_extract() {
    let p = ModelParams { eps: 0.9, ..ModelParams::default() };
    assert!(freeboundary::extract_k(&p, 1).is_err());
}

#[test]
fn third_derivative_jump_matches_oracle() {
    let (p, m) = mesh(2);
    let w = Glued::new(p, m);
    for s in &w.mesh.samples {
        let (nnn, off) = geometry::third_jump(&w, s).unwrap();
        let oracle = geometry::third_jump_oracle(&w, s);
        assert!(oracle > 0.0);
        assert!(((nnn - oracle) / oracle).abs() < 1e-8);
        assert!(off / oracle < 1e-8);
    }
}

#[test]
fn cauchy_jet_residual_decays_with_order() {
    let (p, m) = mesh(2);
    let s = &m.samples[5];
    let ts = linalg::logspace(2e-3, 2e-2, 6);
    for order in [3u8, 4] {
        let j = freeboundary::cauchy_jet(&p, s, order).unwrap();
        let r: Vec<f64> = ts
            .iter()
            .map(|&t| freeboundary::taylor_residual(&p, &j, &s.nu, t).abs())
            .collect();
        assert!(linalg::loglog_slope(&ts, &r) >= order as f64 - 1.3);
    }
}

#[test]
fn determinant_decreases_outward_at_generic_points() {
    let (p, m) = mesh(2);
    let mut generic = 0;
    for s in &m.samples {
        if freeboundary::classify(s.score()) == TangencyCase::Generic {
            generic += 1;
            assert!(freeboundary::detsign_report(&p, s).unwrap().d_nu_g < 0.0);
        }
    }
    assert!(generic > 0);
}

#[test]
fn tangential_points_satisfy_the_identity() {
    let (p, m) = mesh(3);
    let t = freeboundary::tangential_points(&p, &m);
    assert!(!t.is_empty());
    for s in t.iter().step_by(10) {
        let d = freeboundary::detsign_report(&p, s).unwrap();
        assert!(d.d_nu_g.abs() <= 1e-8 * d.scale);
        assert!(d.d_nunu_g < 0.0);
        assert!(d.identity_rel.unwrap() < 1e-5);
    }
}
