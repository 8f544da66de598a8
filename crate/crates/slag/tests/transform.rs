use slag::band::Glued;
use slag::explicit::ModelParams;
use slag::freeboundary;
use slag::linalg;
use slag::transform::{self, GluedMap, GradientMap, LineScan, Quadratic, Side};
use slag::verify;
use std::sync::OnceLock;

fn glued() -> &'static Glued {
    static W: OnceLock<Glued> = OnceLock::new();
    W.get_or_init(|| {
        let p = ModelParams::default();
        Glued::new(p, freeboundary::extract_k(&p, 3).unwrap())
    })
}

#[test]
fn quadratic_potential_is_self_dual() {
    let q = Quadratic { half_width: 1.0 };
    for y in linalg::r3_sequence(10, 0.2) {
        let y = [y[0] - 0.5, y[1] - 0.5, y[2] - 0.5];
        let b = transform::invert_gradient(&q, &y).unwrap();
        assert_eq!(b.len(), 1);
        assert!(linalg::dist(&b[0].x, &y) < 1e-10);
        assert!((b[0].legendre - 0.5 * linalg::dot(&y, &y)).abs() < 1e-12);
    }
}

#[test]
fn gradient_inverse_round_trip() {
    let w = glued();
    let map = GluedMap::new(w);
    for s in w.mesh.samples.iter().step_by(40) {
        let x = linalg::axpy(&s.x0, 0.4 * w.mu, &s.nu);
        let y = map.eval(&x).unwrap().y;
        let b = transform::invert_gradient(&map, &y).unwrap();
        let best = b.iter().map(|g| linalg::dist(&g.x, &x)).fold(f64::INFINITY, f64::min);
        assert!(best < 1e-9, "{best}");
    }
}

#[test]
fn chord_is_largest_at_the_centre() {
    let p = ModelParams::default();
    let l0 = transform::chord_length(&p, 0.0, 0.0);
    assert!(l0 > 0.0);
    for (y1, y2) in verify::interior_points(&p, glued().mesh.max_radius(), 10, 0.3) {
        assert!(transform::chord_length(&p, y1, y2) <= l0 + 1e-12);
    }
}

#[test]
fn jump_equals_minus_chord() {
    let w = glued();
    let map = GluedMap::new(w);
    let pts = verify::interior_points(&w.p, w.mesh.max_radius(), 4, 0.3);
    for j in transform::jump_profile(&map, &pts, 1e-7, Default::default()) {
        assert!(j.rel_err().unwrap() < 0.03, "{j:?}");
    }
}

#[test]
fn u_is_concave_along_vertical_lines() {
    let w = glued();
    let map = GluedMap::new(w);
    let (y1, y2) = verify::interior_points(&w.p, w.mesh.max_radius(), 2, 0.3)[1];
    let scan = LineScan::new(&map, y1, y2);
    let (lo, hi) = scan.range().unwrap();
    let us: Vec<f64> = (0..=30)
        .map(|i| {
            let y3 = lo + (hi - lo) * (0.1 + 0.8 * i as f64 / 30.0);
            transform::min_branch(&scan.invert(y3)).unwrap().legendre
        })
        .collect();
    for t in us.windows(3) {
        assert!(t[0] - 2.0 * t[1] + t[2] <= 1e-6);
    }
}

#[test]
fn interior_holder_exponent_is_one_half() {
    let w = glued();
    let map = GluedMap::new(w);
    let f = transform::holder_interior(&map, 0.0, 0.0, Side::Above).unwrap();
    assert!(f.reliable && (f.alpha - 0.5).abs() < 0.1, "{f:?}");
}

#[test]
fn wk_identity_holds() {
    let w = glued();
    let s = &w.mesh.samples[17];
    let x = linalg::axpy(&s.x0, 0.3 * w.mu, &s.nu);
    for k in [10.0, 100.0] {
        assert!(transform::wk_check(w, k, &x).unwrap().identity_residual < 1e-10);
    }
}

#[test]
fn sqrt_extrapolation_recovers_limit() {
    let ts = [1.0, 0.5, 0.25, 0.125];
    let vals: Vec<f64> = ts.iter().map(|t: &f64| 2.0 + 3.0 * t.sqrt() - t).collect();
    assert!((transform::extrapolate_sqrt(&ts, &vals) - 2.0).abs() < 1e-10);
}
