use slag::band::Glued;
use slag::explicit::ModelParams;
use slag::freeboundary;
use slag::geometry;
use slag::symtensor::SymMat3;

#[test]
fn metric_of_round_quadratic() {
    let g = geometry::graph_metric(&SymMat3::identity());
    assert!(g.sub(&SymMat3::identity().scale(2.0)).max_abs() < 1e-15);
    assert!((geometry::metric_norm(&g, &[1.0, 0.0, 0.0]) - 0.5f64.sqrt()).abs() < 1e-15);
}

#[test]
fn metric_dominates_identity() {
    let h = SymMat3::new(0.3, -1.0, 0.2, 2.0, 0.0, -0.7);
    let g = geometry::graph_metric(&h);
    for v in [[1.0, 0.0, 0.0], [0.3, -0.4, 0.5], [0.0, 0.0, 2.0]] {
        assert!(geometry::metric_norm(&g, &v) <= slag::linalg::norm(&v) + 1e-15);
    }
}

#[test]
fn interior_piece_is_not_minimal() {
    let p = ModelParams::default();
    let w = Glued::new(p, freeboundary::extract_k(&p, 3).unwrap());
    let r = geometry::minimality_report(&w, 1e-3, Default::default()).unwrap();
    assert!(r.origin_norm < 1e-12);
    assert!(r.delta0 > 0.0 && !r.interior_minimal);
    assert!(r.boundary_bound_ratio >= 1.0 - 1e-9);
    assert!(r.jump_slot_rel < 1e-8 && r.jump_off_rel < 1e-8);
    // at small distance the exterior piece is minimal to the tolerance
    assert!(r.exterior_minimal, "{}", r.exterior_sup);
}

#[test]
fn exterior_defect_grows_quadratically() {
    let p = ModelParams::default();
    let w = Glued::new(p, freeboundary::extract_k(&p, 2).unwrap());
    let a = geometry::minimality_report(&w, 1e-3, Default::default()).unwrap().exterior_sup;
    let b = geometry::minimality_report(&w, 1e-2, Default::default()).unwrap().exterior_sup;
    let slope = (b / a).log10();
    assert!((slope - 2.0).abs() < 0.3, "{slope}");
}
