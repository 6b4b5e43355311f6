use std::sync::Arc;

use freebound::blowup::{analyze_blowup, fit_halfplane_quadratic_masked, rescale, Alternative, BlowupThresholds, RescaleSchedule};
use freebound::geometry::{
    complement_measure, extract_gamma, extract_gamma_refined, hausdorff, modulus_table, BoundaryCurve, CurveLabel,
};
use freebound::grid::{HalfDiskGrid, Point, ScalarField};
use freebound::operator::{EllipticOperator, EllipticityBounds, SymMatrix};
use freebound::regularity::{bmo_from_dyadic, dyadic_profile, RegularityOptions};
use freebound::solver::{solve_obstacle, ActiveSet, SolverConfig};
use freebound::Error;
use proptest::prelude::*;

fn grid(n: usize) -> Arc<HalfDiskGrid> {
    HalfDiskGrid::with_cells(n).unwrap()
}

fn set_from(g: &Arc<HalfDiskGrid>, f: impl Fn(Point) -> bool) -> ActiveSet {
    let u = ScalarField::from_fn(g.clone(), |p| if f(p) { 1.0 } else { 0.0 });
    ActiveSet::positive(&u, 0.5)
}

fn operator(which: u8) -> EllipticOperator {
    let b = EllipticityBounds::new(1.0, 2.0).unwrap();
    match which % 3 {
        0 => EllipticOperator::linear_trace(2),
        1 => EllipticOperator::pucci_minus(b, 2),
        _ => EllipticOperator::bellman_min(b, vec![SymMatrix::identity(2), SymMatrix::diag(&[2.0, 1.0])]).unwrap(),
    }
}

fn circle(c: Point, rho: f64) -> Vec<Point> {
    (0..2000)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / 2000.0;
            [c[0] + rho * t.cos(), c[1] + rho * t.sin()]
        })
        .collect()
}

#[test]
fn detached_bmo_levels_stay_comparable() {
    let g = grid(64);
    let op = EllipticOperator::linear_trace(2);
    let datum = |p: Point| (p[1] - 0.25).max(0.0).powi(2) / 2.0;
    let s = solve_obstacle(&op, &datum, &g, &SolverConfig::default()).unwrap();
    let dy = dyadic_profile(&s.u, [0.0, 0.0], &op, 1.0, &RegularityOptions::default()).unwrap();
    let bmo = bmo_from_dyadic(&s.u, &dy);
    assert!(bmo.levels.len() >= 3);
    for w in bmo.levels.windows(2) {
        assert!(w[0].value.is_finite() && w[1].value.is_finite());
        let (lo, hi) = (w[0].value.min(w[1].value), w[0].value.max(w[1].value));
        assert!(hi <= 10.0 * lo || hi < 1e-12, "{:?}", bmo.levels);
    }
}

#[test]
fn cubic_bmo_is_nonincreasing() {
    let g = grid(128);
    let u = ScalarField::from_fn(g, |p| 0.5 * p[1] * p[1] + 0.1 * p[1].powi(3));
    let op = EllipticOperator::linear_trace(2);
    let dy = dyadic_profile(&u, [0.0, 0.0], &op, 1.0, &RegularityOptions::default()).unwrap();
    let bmo = bmo_from_dyadic(&u, &dy);
    assert!(bmo.levels.len() >= 4);
    for w in bmo.levels.windows(2) {
        assert!(w[1].value <= w[0].value, "{:?}", bmo.levels);
    }
}

#[test]
fn blowup_refuses_non_vanishing_gradient() {
    let g = grid(32);
    let u = ScalarField::from_fn(g.clone(), |p| 0.3 * p[1] + 0.5 * p[1] * p[1]);
    let err = analyze_blowup(
        &u,
        &EllipticOperator::linear_trace(2),
        0.0,
        &RescaleSchedule::dyadic(g.h()),
        &BlowupThresholds::default(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::GradientNotVanishing { .. }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn modulus_is_monotone_and_bounded(
        pts in prop::collection::vec((-1.0f64..1.0, 0.0f64..1.0), 1..60),
        mut radii in prop::collection::vec(0.01f64..1.0, 1..8),
    ) {
        let curve = BoundaryCurve {
            label: CurveLabel::Gamma,
            polylines: vec![pts.iter().map(|&(x, y)| [x, y]).collect()],
        };
        radii.sort_by(f64::total_cmp);
        let table = modulus_table(&curve, &radii);
        for e in &table.entries {
            prop_assert!((0.0..=1.0).contains(&e.omega));
        }
        for w in table.entries.windows(2) {
            prop_assert!(w[0].omega <= w[1].omega);
            prop_assert!(!w[1].empty || w[0].empty);
        }
    }

    #[test]
    fn circular_hole_is_localized(
        cx in -0.4f64..0.4,
        cy in 0.35f64..0.5,
        rho in 0.1f64..0.3,
    ) {
        let g = grid(64);
        let h = g.h();
        let active = set_from(&g, |p| (p[0] - cx).hypot(p[1] - cy) > rho);
        let gamma = extract_gamma(&active);
        let vertices: Vec<Point> = gamma.vertices().collect();
        prop_assert!(!vertices.is_empty());
        for p in &vertices {
            prop_assert!(p[1] > 0.0 && p[0].hypot(p[1]) <= 1.0);
        }
        prop_assert!(hausdorff(&vertices, &circle([cx, cy], rho)) <= 2.0 * h);

        // refined extraction on the squared distance field
        let u = ScalarField::from_fn(g.clone(), |p| ((p[0] - cx).hypot(p[1] - cy) - rho).max(0.0).powi(2) / 2.0);
        let refined = extract_gamma_refined(&u, &active);
        let vertices: Vec<Point> = refined.vertices().collect();
        prop_assert!(hausdorff(&vertices, &circle([cx, cy], rho)) <= 2.0 * h);
    }

    #[test]
    fn thin_complement_has_vanishing_measure(t in 0.05f64..0.4, n in prop::sample::select(vec![32usize, 64, 128])) {
        let g = grid(n);
        let h = g.h();
        // one removed row of nodes
        let active = set_from(&g, |p| (p[1] - t).abs() >= h / 2.0);
        let c = complement_measure(&active, 0.5);
        prop_assert!(c.empty_interior);
        prop_assert!(c.measure <= c.nodes as f64 * h * h + 1e-15);
        prop_assert!(c.measure <= 1.2 * h);
    }

    #[test]
    fn rescaled_quadratics_are_fixed_points(a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let g = grid(32);
        let u = ScalarField::from_fn(g.clone(), |p| a * p[0] * p[1] + b * p[1] * p[1]);
        for r in [0.5, 0.25, 0.125] {
            let v = rescale(&u, r, &g, None).unwrap();
            let fit = fit_halfplane_quadratic_masked(&v.field, &v.valid, 1.0).unwrap();
            prop_assert!((fit.a - a).abs() <= 1e-8 && (fit.b - b).abs() <= 1e-8);
        }
    }

    #[test]
    fn case_ii_slope_matches_m(a in prop_oneof![-1.5f64..-0.2, 0.2f64..1.5], b in 0.5f64..1.5) {
        let g = grid(64);
        let u = ScalarField::from_fn(g.clone(), |p| a * p[0] * p[1] + b * p[1] * p[1]);
        let report = analyze_blowup(
            &u,
            &EllipticOperator::linear_trace(2),
            0.0,
            &RescaleSchedule::dyadic(g.h()),
            &BlowupThresholds::default(),
        )
        .unwrap();
        let c = &report.classification;
        prop_assert_eq!(c.alternative, Alternative::CaseII);
        let fitted = c.representative.unwrap().a;
        prop_assert!((c.m_estimate - fitted.abs()).abs() <= 0.05);
    }

    #[test]
    fn constrained_fits_satisfy_the_equation(
        h11 in -1.0f64..1.0, h12 in -1.0f64..1.0, h22 in -1.0f64..1.0,
        cubic in -0.5f64..0.5,
        target in 0.5f64..2.0,
        which in 0u8..3,
    ) {
        let op = operator(which);
        let g = grid(64);
        let u = ScalarField::from_fn(g, |p| {
            0.5 * h11 * p[0] * p[0] + h12 * p[0] * p[1] + 0.5 * h22 * p[1] * p[1] + cubic * p[0] * p[0] * p[1]
        });
        let dy = dyadic_profile(&u, [0.0, 0.0], &op, target, &RegularityOptions::default()).unwrap();
        for level in &dy.levels {
            let f = op.evaluate(&level.polynomial.hessian, &[0.0, 0.0]).unwrap();
            prop_assert!((f - target).abs() <= 1e-8, "level {} gives {}", level.k, f);
            if let Some(inc) = level.increment {
                prop_assert!(inc.is_finite());
            }
        }
    }

    #[test]
    fn exact_quadratics_have_null_diagnostics(
        c0 in -1.0f64..1.0, c1 in -1.0f64..1.0, c2 in -1.0f64..1.0,
        h11 in -1.0f64..1.0, h12 in -1.0f64..1.0, h22 in -1.0f64..1.0,
        which in 0u8..3,
    ) {
        let op = operator(which);
        let m = SymMatrix::from_2x2(h11, h12, h22);
        let target = op.evaluate(&m, &[0.0, 0.0]).unwrap();
        let g = grid(64);
        let u = ScalarField::from_fn(g, |p| {
            c0 + c1 * p[0] + c2 * p[1] + 0.5 * h11 * p[0] * p[0] + h12 * p[0] * p[1] + 0.5 * h22 * p[1] * p[1]
        });
        let dy = dyadic_profile(&u, [0.0, 0.0], &op, target, &RegularityOptions::default()).unwrap();
        let bmo = bmo_from_dyadic(&u, &dy);
        prop_assert!(dy.max_scaled_misfit <= 1e-10, "{}", dy.max_scaled_misfit);
        prop_assert!(dy.max_increment <= 1e-10, "{}", dy.max_increment);
        prop_assert!(bmo.max <= 1e-10, "{}", bmo.max);
    }
}
