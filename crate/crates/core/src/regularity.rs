//! Dyadic quadratic approximation at flat boundary points, mean oscillation
//! of the Hessian, and the `C^{1,1}` sup bound.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::hessian;
use crate::grid::{Point, ScalarField};
use crate::operator::{EllipticOperator, SymMatrix};

pub const MIN_FIT_NODES: usize = 15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticPolynomial {
    pub center: Point,
    pub value: f64,
    pub gradient: [f64; 2],
    pub hessian: SymMatrix,
}

impl QuadraticPolynomial {
    pub fn evaluate(&self, p: Point) -> f64 {
        let d = [p[0] - self.center[0], p[1] - self.center[1]];
        let m = &self.hessian;
        self.value
            + self.gradient[0] * d[0]
            + self.gradient[1] * d[1]
            + 0.5 * (m.get(0, 0) * d[0] * d[0] + 2.0 * m.get(0, 1) * d[0] * d[1] + m.get(1, 1) * d[1] * d[1])
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixNorm {
    #[default]
    Spectral,
    Frobenius,
}

impl MatrixNorm {
    pub fn apply(self, m: &SymMatrix) -> f64 {
        match self {
            MatrixNorm::Spectral => m.spectral_norm(),
            MatrixNorm::Frobenius => m.frobenius_norm(),
        }
    }
}

/// `F(D^2 P, x0) = target` imposed on a fit.
#[derive(Clone, Copy, Debug)]
pub struct Constraint<'a> {
    pub op: &'a EllipticOperator,
    pub target: f64,
}

fn least_squares(rows: &[Vec<f64>], rhs: &[f64]) -> Result<Vec<f64>> {
    let m = DMatrix::from_fn(rows.len(), rows[0].len(), |r, c| rows[r][c]);
    let b = DVector::from_column_slice(rhs);
    let x = m
        .svd(true, true)
        .solve(&b, 1e-13)
        .map_err(|e| Error::Numerical(format!("least squares failed: {e}")))?;
    Ok(x.iter().copied().collect())
}

/// Moves `m` along `D = F_ij(m, x0)` until `F(m + tD, x0) = target`.
/// `t -> F(m + tD)` is increasing with slope `<D, F_ij> >= lambda0 tr D`, and
/// convex or concave for every built-in kind, so Newton does not overshoot.
pub fn project_hessian(op: &EllipticOperator, m: &SymMatrix, x0: Point, target: f64) -> Result<SymMatrix> {
    let d = op.linearize_at(m, &x0)?;
    let tol = 1e-12 * (1.0 + target.abs());
    let mut t = 0.0;
    for _ in 0..100 {
        let cur = m + &(&d * t);
        let (f, a) = op.evaluate_linearized(&cur, &x0)?;
        let r = f - target;
        if r.abs() <= tol {
            return Ok(cur);
        }
        let slope = a.dot(&d);
        if slope <= 0.0 || !slope.is_finite() {
            return Err(Error::Numerical(format!("constraint direction is degenerate (slope {slope})")));
        }
        t -= r / slope;
    }
    Err(Error::Numerical("constraint projection did not converge".into()))
}

/// Least-squares quadratic over the nodes of `B+_r(x0)`, in coordinates
/// scaled by `r`. A constraint replaces the Hessian by its projection and the
/// value and gradient are refitted against it.
pub fn fit_local_quadratic(u: &ScalarField, x0: Point, r: f64, constraint: Option<Constraint>) -> Result<QuadraticPolynomial> {
    let g = u.grid();
    let nodes = g.nodes_in_ball(x0, r);
    if nodes.len() < MIN_FIT_NODES {
        return Err(Error::TooFewNodes {
            needed: MIN_FIT_NODES,
            found: nodes.len(),
        });
    }
    let scaled = |k: usize| {
        let p = g.point(k);
        [(p[0] - x0[0]) / r, (p[1] - x0[1]) / r]
    };
    let rows: Vec<Vec<f64>> = nodes
        .iter()
        .map(|&k| {
            let s = scaled(k);
            vec![1.0, s[0], s[1], 0.5 * s[0] * s[0], s[0] * s[1], 0.5 * s[1] * s[1]]
        })
        .collect();
    let rhs: Vec<f64> = nodes.iter().map(|&k| u.at(k)).collect();
    let c = least_squares(&rows, &rhs)?;
    let r2 = r * r;
    let mut poly = QuadraticPolynomial {
        center: x0,
        value: c[0],
        gradient: [c[1] / r, c[2] / r],
        hessian: SymMatrix::from_2x2(c[3] / r2, c[4] / r2, c[5] / r2),
    };
    if let Some(Constraint { op, target }) = constraint {
        let m = project_hessian(op, &poly.hessian, x0, target)?;
        poly.hessian = m;
        poly.value = 0.0;
        poly.gradient = [0.0, 0.0];
        let rows: Vec<Vec<f64>> = rows.iter().map(|row| row[..3].to_vec()).collect();
        let rhs: Vec<f64> = nodes
            .iter()
            .zip(&rhs)
            .map(|(&k, &v)| v - poly.evaluate(g.point(k)))
            .collect();
        let c = least_squares(&rows, &rhs)?;
        poly.value = c[0];
        poly.gradient = [c[1] / r, c[2] / r];
    }
    Ok(poly)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegularityOptions {
    /// Dyadic ratio.
    pub rho: f64,
    pub norm: MatrixNorm,
    /// `C` in `sup |u - P_k| <= C rho^{2k}`.
    pub bound_constant: f64,
}

impl Default for RegularityOptions {
    fn default() -> Self {
        RegularityOptions {
            rho: 0.5,
            norm: MatrixNorm::Spectral,
            bound_constant: 1.0,
        }
    }
}

impl RegularityOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::validation("analyses.regularity.rho", "must lie in (0, 1)"));
        }
        if !(self.bound_constant > 0.0 && self.bound_constant.is_finite()) {
            return Err(Error::validation("analyses.regularity.bound_constant", "must be positive"));
        }
        Ok(())
    }

    /// Levels `k >= 1` with `rho^k >= 8h`.
    pub fn levels(&self, h: f64) -> Vec<(usize, f64)> {
        (1..)
            .map(|k| (k, self.rho.powi(k as i32)))
            .take_while(|&(_, r)| r >= 8.0 * h)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicLevel {
    pub k: usize,
    pub radius: f64,
    pub polynomial: QuadraticPolynomial,
    /// `sup |u - P_k|` over the ball.
    pub misfit: f64,
    /// `misfit / rho^{2k}`.
    pub scaled_misfit: f64,
    /// `|D^2 P_k - D^2 P_{k-1}|`, absent on the first level.
    pub increment: Option<f64>,
    pub nodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicProfile {
    pub rho: f64,
    pub center: Point,
    pub levels: Vec<DyadicLevel>,
    pub max_scaled_misfit: f64,
    pub max_increment: f64,
    pub bound_constant: f64,
    /// Whether `sup |u - P_k| <= C rho^{2k}` at every level.
    pub bounded: bool,
}

fn check_flat(x0: Point) -> Result<()> {
    if x0[1] != 0.0 || x0[0].abs() >= 1.0 {
        return Err(Error::validation("analyses.regularity.center", "must be a flat boundary point"));
    }
    Ok(())
}

/// Constrained fits on `B+_{rho^k}(x0)` for every admissible level.
pub fn dyadic_profile(
    u: &ScalarField,
    x0: Point,
    op: &EllipticOperator,
    target: f64,
    opts: &RegularityOptions,
) -> Result<DyadicProfile> {
    check_flat(x0)?;
    opts.validate()?;
    let g = u.grid();
    let mut levels: Vec<DyadicLevel> = Vec::new();
    for (k, radius) in opts.levels(g.h()) {
        let radius = radius.min(1.0);
        let polynomial = fit_local_quadratic(u, x0, radius, Some(Constraint { op, target }))?;
        let nodes = g.nodes_in_ball(x0, radius);
        let misfit = nodes
            .iter()
            .map(|&n| (u.at(n) - polynomial.evaluate(g.point(n))).abs())
            .fold(0.0, f64::max);
        let increment = levels
            .last()
            .map(|prev| opts.norm.apply(&(&polynomial.hessian - &prev.polynomial.hessian)));
        levels.push(DyadicLevel {
            k,
            radius,
            scaled_misfit: misfit / (radius * radius),
            misfit,
            increment,
            nodes: nodes.len(),
            polynomial,
        });
    }
    let max_scaled_misfit = levels.iter().map(|l| l.scaled_misfit).fold(0.0, f64::max);
    let max_increment = levels.iter().filter_map(|l| l.increment).fold(0.0, f64::max);
    Ok(DyadicProfile {
        rho: opts.rho,
        center: x0,
        bounded: max_scaled_misfit <= opts.bound_constant,
        bound_constant: opts.bound_constant,
        max_scaled_misfit,
        max_increment,
        levels,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BmoLevel {
    pub k: usize,
    /// `rho^k / 2`.
    pub radius: f64,
    pub value: f64,
    pub nodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BmoProfile {
    pub rho: f64,
    pub center: Point,
    pub levels: Vec<BmoLevel>,
    pub max: f64,
}

/// Mean over interior nodes of `B+_{rho^k/2}(x0)` of `|D^2 u - D^2 P_k|_F^2`.
pub fn bmo_profile(
    u: &ScalarField,
    x0: Point,
    op: &EllipticOperator,
    target: f64,
    opts: &RegularityOptions,
) -> Result<BmoProfile> {
    let dy = dyadic_profile(u, x0, op, target, opts)?;
    Ok(bmo_from_dyadic(u, &dy))
}

/// BMO levels reusing the polynomials of an existing dyadic profile.
pub fn bmo_from_dyadic(u: &ScalarField, dy: &DyadicProfile) -> BmoProfile {
    let g = u.grid();
    let d2u = hessian(u);
    let levels: Vec<BmoLevel> = dy
        .levels
        .iter()
        .map(|l| {
            let radius = l.radius / 2.0;
            let nodes = g.interior_in_ball(dy.center, radius);
            let sum: f64 = nodes
                .iter()
                .filter_map(|&k| d2u.at(k))
                .map(|m| (&m - &l.polynomial.hessian).frobenius_norm().powi(2))
                .sum();
            BmoLevel {
                k: l.k,
                radius,
                value: if nodes.is_empty() { 0.0 } else { sum / nodes.len() as f64 },
                nodes: nodes.len(),
            }
        })
        .collect();
    BmoProfile {
        rho: dy.rho,
        center: dy.center,
        max: levels.iter().map(|l| l.value).fold(0.0, f64::max),
        levels,
    }
}

/// Largest spectral norm of the discrete Hessian over interior nodes of
/// `B+_radius(0)`.
pub fn c11_sup(u: &ScalarField, radius: f64) -> Result<f64> {
    let g = u.grid();
    if !(radius > 0.0 && radius <= 1.0 - 2.0 * g.h()) {
        return Err(Error::validation("analyses.c11.radius", "must lie in (0, 1 - 2h]"));
    }
    Ok(hessian(u).max_spectral_norm(g.interior_in_ball([0.0, 0.0], radius)))
}

/// CSV with columns `k,rho_k,misfit,increment,bmo`.
pub fn write_profiles_csv(path: &Path, dy: &DyadicProfile, bmo: &BmoProfile) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["k", "rho_k", "misfit", "increment", "bmo"])?;
    for (l, b) in dy.levels.iter().zip(&bmo.levels) {
        w.write_record(&[
            l.k.to_string(),
            l.radius.to_string(),
            l.scaled_misfit.to_string(),
            l.increment.map(|v| v.to_string()).unwrap_or_default(),
            b.value.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::grid::HalfDiskGrid;
    use crate::operator::EllipticityBounds;

    fn grid(n: usize) -> Arc<HalfDiskGrid> {
        HalfDiskGrid::with_cells(n).unwrap()
    }

    #[test]
    fn exact_quadratic_fit() {
        let g = grid(32);
        let u = ScalarField::from_fn(g.clone(), |p| p[0] * p[1]);
        for (x0, r) in [([0.0, 0.0], 0.5), ([0.2, 0.3], 0.2)] {
            let p = fit_local_quadratic(&u, x0, r, None).unwrap();
            for k in g.nodes_in_ball(x0, r) {
                assert!((p.evaluate(g.point(k)) - u.at(k)).abs() < 1e-12);
            }
            assert!((p.hessian.get(0, 1) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn cubic_hessian_at_center() {
        let g = grid(64);
        let u = ScalarField::from_fn(g, |p| p[1].powi(3));
        let p = fit_local_quadratic(&u, [0.0, 0.5], 0.1, None).unwrap();
        assert!(p.hessian.get(0, 0).abs() < 1e-9);
        assert!(p.hessian.get(0, 1).abs() < 1e-9);
        assert!((p.hessian.get(1, 1) - 3.0).abs() < 1e-9, "{:?}", p.hessian);
    }

    #[test]
    fn trace_constraint_projection() {
        let g = grid(32);
        let u = ScalarField::from_fn(g, |p| p[1] * p[1]);
        let op = EllipticOperator::linear_trace(2);
        let p = fit_local_quadratic(&u, [0.0, 0.0], 0.5, Some(Constraint { op: &op, target: 1.0 })).unwrap();
        assert!((p.hessian.get(0, 0) + 0.5).abs() < 1e-10);
        assert!((p.hessian.get(1, 1) - 1.5).abs() < 1e-10);
        assert!((op.evaluate(&p.hessian, &[0.0, 0.0]).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn pucci_constraint_hits_target() {
        let g = grid(32);
        let u = ScalarField::from_fn(g, |p| p[0] * p[1] + 2.0 * p[1] * p[1]);
        let op = EllipticOperator::pucci_minus(EllipticityBounds::new(1.0, 2.0).unwrap(), 2);
        let p = fit_local_quadratic(&u, [0.1, 0.0], 0.4, Some(Constraint { op: &op, target: 1.0 })).unwrap();
        assert!((op.evaluate(&p.hessian, &[0.1, 0.0]).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn too_few_nodes() {
        let g = grid(8);
        let u = ScalarField::zeros(g);
        assert!(matches!(
            fit_local_quadratic(&u, [0.0, 0.0], 0.2, None),
            Err(Error::TooFewNodes { needed: 15, .. })
        ));
    }

    #[test]
    fn dyadic_on_exact_solution() {
        let g = grid(64);
        let u = ScalarField::from_fn(g, |p| 0.5 * p[1] * p[1]);
        let op = EllipticOperator::linear_trace(2);
        let opts = RegularityOptions::default();
        let dy = dyadic_profile(&u, [0.0, 0.0], &op, 1.0, &opts).unwrap();
        assert_eq!(dy.levels.len(), 3);
        assert!(dy.max_scaled_misfit <= 1e-10);
        assert!(dy.max_increment <= 1e-10);
        assert!(dy.bounded);
        let bmo = bmo_profile(&u, [0.0, 0.0], &op, 1.0, &opts).unwrap();
        assert!(bmo.max <= 1e-10);
    }

    #[test]
    fn dyadic_on_cubic_perturbation() {
        let g = grid(128);
        let u = ScalarField::from_fn(g, |p| 0.5 * p[1] * p[1] + 0.1 * p[1].powi(3));
        let op = EllipticOperator::linear_trace(2);
        let opts = RegularityOptions::default();
        let dy = dyadic_profile(&u, [0.0, 0.0], &op, 1.0, &opts).unwrap();
        assert_eq!(dy.levels.len(), 4);
        for w in dy.levels.windows(2) {
            let ratio = w[1].scaled_misfit / w[0].scaled_misfit;
            assert!(ratio > 0.35 && ratio < 0.65, "{ratio}");
        }
        assert!(dy.max_increment < 0.1);
        let bmo = bmo_from_dyadic(&u, &dy);
        for w in bmo.levels.windows(2) {
            assert!(w[1].value <= w[0].value + 1e-12);
        }
        assert!(bmo.max.is_finite());
    }

    #[test]
    fn c11_examples() {
        let g = grid(32);
        let u = ScalarField::from_fn(g.clone(), |p| p[0] * p[1] + p[1] * p[1]);
        assert!((c11_sup(&u, 0.5).unwrap() - (1.0 + 2f64.sqrt())).abs() < 1e-9);
        let v = ScalarField::from_fn(g.clone(), |p| 0.5 * p[1] * p[1]);
        assert!((c11_sup(&v, 0.5).unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(c11_sup(&ScalarField::zeros(g.clone()), 0.5).unwrap(), 0.0);
        assert!(c11_sup(&v, 1.0).is_err());
    }

    #[test]
    fn csv_export() {
        let g = grid(32);
        let u = ScalarField::from_fn(g, |p| 0.5 * p[1] * p[1]);
        let op = EllipticOperator::linear_trace(2);
        let dy = dyadic_profile(&u, [0.0, 0.0], &op, 1.0, &RegularityOptions::default()).unwrap();
        let bmo = bmo_from_dyadic(&u, &dy);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("profile.csv");
        write_profiles_csv(&path, &dy, &bmo).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.starts_with("k,rho_k,misfit,increment,bmo\n1,0.5,"));
        assert_eq!(text.lines().count(), dy.levels.len() + 1);
    }
}
