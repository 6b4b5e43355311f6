use super::*;
use crate::operator::{EllipticityBounds, SymMatrix};

fn grid(n: usize) -> Arc<HalfDiskGrid> {
    HalfDiskGrid::with_cells(n).unwrap()
}

fn b12() -> EllipticityBounds {
    EllipticityBounds::new(1.0, 2.0).unwrap()
}

fn flat_is_zero(u: &ScalarField) -> bool {
    let g = u.grid();
    g.nodes_of(NodeKind::Flat).all(|k| u.at(k) == 0.0)
}

#[test]
fn dirichlet_trace_quadratic() {
    let g = grid(32);
    let f = ScalarField::from_fn(g.clone(), |_| 1.0);
    let exact = |p: Point| (p[0] * p[0] + p[1] * p[1]) / 4.0;
    let (u, rep) = solve_dirichlet(&EllipticOperator::linear_trace(2), &f, &exact, &SolverConfig::default()).unwrap();
    assert!(rep.converged, "{rep:?}");
    assert!(u.max_error(exact) < 1e-10);
}

#[test]
fn dirichlet_pucci_minus_quadratic() {
    let g = grid(32);
    let f = ScalarField::from_fn(g.clone(), |_| 1.0);
    let exact = |p: Point| p[1] * p[1] / 2.0;
    let op = EllipticOperator::pucci_minus(b12(), 2);
    let (u, rep) = solve_dirichlet(&op, &f, &exact, &SolverConfig::default()).unwrap();
    assert!(rep.converged, "{rep:?}");
    assert!(u.max_error(exact) < 1e-10);
    assert!(flat_is_zero(&u));
}

#[test]
fn dirichlet_bellman_quadratic() {
    let g = grid(32);
    let f = ScalarField::from_fn(g.clone(), |_| 2.0);
    let exact = |p: Point| (p[0] * p[0] + p[1] * p[1]) / 2.0;
    let op = EllipticOperator::bellman_min(b12(), vec![SymMatrix::identity(2), SymMatrix::identity(2).scale(2.0)]).unwrap();
    let (u, rep) = solve_dirichlet(&op, &f, &exact, &SolverConfig::default()).unwrap();
    assert!(rep.converged, "{rep:?}");
    assert!(u.max_error(exact) < 1e-10);
}

#[test]
fn dirichlet_rejects_non_elliptic() {
    let g = grid(8);
    let f = ScalarField::from_fn(g.clone(), |_| 1.0);
    let op = EllipticOperator::custom_table(b12(), SymMatrix::diag(&[1.0, -1.0]));
    let err = solve_dirichlet(&op, &f, &|_: Point| 0.0, &SolverConfig::default()).unwrap_err();
    assert!(matches!(err, Error::OperatorRejected(_)));
}

#[test]
fn obstacle_full_contact_free() {
    let g = grid(32);
    let exact = |p: Point| p[1] * p[1] / 2.0;
    let s = solve_obstacle(&EllipticOperator::linear_trace(2), &exact, &g, &SolverConfig::default()).unwrap();
    assert!(s.report.converged, "{:?}", s.report);
    assert!(s.u.max_error(exact) < 1e-10);
    assert_eq!(s.active_set.len(), g.interior_nodes().count());
    assert!(flat_is_zero(&s.u));
}

#[test]
fn obstacle_detached_free_boundary() {
    let g = grid(32);
    let exact = |p: Point| (p[1] - 0.25).max(0.0).powi(2) / 2.0;
    let s = solve_obstacle(&EllipticOperator::linear_trace(2), &exact, &g, &SolverConfig::default()).unwrap();
    assert!(s.report.converged, "{:?}", s.report);
    assert!(s.u.max_error(exact) < 1e-10, "{}", s.u.max_error(exact));
    for k in g.interior_nodes() {
        assert_eq!(s.active_set.contains(k), g.point(k)[1] > 0.25 + 1e-12);
    }
}

#[test]
fn obstacle_zero_datum() {
    let g = grid(16);
    let s = solve_obstacle(&EllipticOperator::linear_trace(2), &|_: Point| 0.0, &g, &SolverConfig::default()).unwrap();
    assert!(s.report.converged);
    assert_eq!(s.u.max_abs(), 0.0);
    assert!(s.active_set.is_empty());
}

#[test]
fn obstacle_rejects_negative_datum() {
    let g = grid(16);
    let err = solve_obstacle(&EllipticOperator::linear_trace(2), &|p: Point| -p[1], &g, &SolverConfig::default());
    assert!(matches!(err, Err(Error::InconsistentDatum(_))));
}

#[test]
fn nosign_matches_obstacle_on_positive_data() {
    let g = grid(32);
    let datum = |p: Point| p[1] * p[1] / 2.0;
    let op = EllipticOperator::linear_trace(2);
    let a = solve_obstacle(&op, &datum, &g, &SolverConfig::default()).unwrap();
    let b = solve_nosign(&op, &datum, &g, &SolverConfig::default()).unwrap();
    assert!(b.report.converged, "{:?}", b.report);
    assert!(a.u.max_abs_diff(&b.u) < 1e-10);
    assert_eq!(a.active_set, b.active_set);
}

#[test]
fn nosign_sign_changing_exact() {
    let g = grid(32);
    let exact = |p: Point| p[0] * p[1] + p[1] * p[1] / 2.0;
    let s = solve_nosign(&EllipticOperator::linear_trace(2), &exact, &g, &SolverConfig::default()).unwrap();
    assert!(s.report.converged, "{:?}", s.report);
    assert!(s.u.max_error(exact) < 1e-10);
    assert_eq!(s.active_set.len(), g.interior_nodes().count());
}

#[test]
fn nosign_zero_datum() {
    let g = grid(16);
    let s = solve_nosign(&EllipticOperator::linear_trace(2), &|_: Point| 0.0, &g, &SolverConfig::default()).unwrap();
    assert!(s.report.converged);
    assert_eq!(s.u.max_abs(), 0.0);
}

#[test]
fn nosign_detached_is_flat_off_omega() {
    let g = grid(32);
    let exact = |p: Point| (p[1] - 0.25).max(0.0).powi(2) / 2.0;
    let cfg = SolverConfig::default();
    let s = solve_nosign(&EllipticOperator::linear_trace(2), &exact, &g, &cfg).unwrap();
    assert!(s.report.converged, "{:?}", s.report);
    let off = s.report.off_omega_hessian_max.unwrap();
    assert!(off <= 10.0 * cfg.residual_tol, "{off}");
}

#[test]
fn config_validation_names_field() {
    let cfg = SolverConfig {
        newton_damping: 0.0,
        ..SolverConfig::default()
    };
    match cfg.validate() {
        Err(Error::Validation { field, .. }) => assert_eq!(field, "solver.newton_damping"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn nondegeneracy_examples() {
    let g = grid(32);
    let radii = [0.1, 0.25, 0.5, 1.5];
    let u = ScalarField::from_fn(g.clone(), |p| p[1] * p[1] / 2.0);
    let prof = nondegeneracy_profile(&u, 0.0, &radii);
    assert_eq!(prof.len(), 3);
    for (_, v) in &prof {
        assert!((v - 0.5).abs() < 1e-12);
    }
    let z = ScalarField::zeros(g.clone());
    assert!(nondegeneracy_profile(&z, 0.0, &radii).iter().all(|(_, v)| *v == 0.0));
    let w = ScalarField::from_fn(g.clone(), |p| p[0] * p[1]);
    for (_, v) in nondegeneracy_profile(&w, 0.0, &radii) {
        assert!((v - 0.5).abs() < 1e-12);
    }
}
