use std::sync::Arc;

use super::{HalfDiskGrid, NodeKind, ScalarField};
use crate::operator::SymMatrix;

/// Gradient samples; exterior entries are NaN.
#[derive(Clone, Debug)]
pub struct VectorField {
    grid: Arc<HalfDiskGrid>,
    values: Vec<[f64; 2]>,
}

impl VectorField {
    pub fn grid(&self) -> &Arc<HalfDiskGrid> {
        &self.grid
    }

    pub fn at(&self, idx: usize) -> [f64; 2] {
        self.values[idx]
    }

    pub fn norm_at(&self, idx: usize) -> f64 {
        let g = self.values[idx];
        g[0].hypot(g[1])
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }
}

/// Second-difference Hessians, stored as `(u11, u12, u22)`; defined on
/// interior nodes only, NaN elsewhere.
#[derive(Clone, Debug)]
pub struct HessianField {
    grid: Arc<HalfDiskGrid>,
    values: Vec<[f64; 3]>,
}

impl HessianField {
    pub fn grid(&self) -> &Arc<HalfDiskGrid> {
        &self.grid
    }

    pub fn raw(&self, idx: usize) -> [f64; 3] {
        self.values[idx]
    }

    pub fn at(&self, idx: usize) -> Option<SymMatrix> {
        let [a, b, c] = self.values[idx];
        if a.is_nan() {
            None
        } else {
            Some(SymMatrix::from_2x2(a, b, c))
        }
    }

    /// Spectral norm at `idx`, NaN off the interior.
    pub fn spectral_norm_at(&self, idx: usize) -> f64 {
        let [a, b, c] = self.values[idx];
        if a.is_nan() {
            return f64::NAN;
        }
        let mean = 0.5 * (a + c);
        let rad = (0.5 * (a - c)).hypot(b);
        mean.abs() + rad
    }

    /// Max spectral norm over the given nodes, skipping those without a
    /// Hessian.
    pub fn max_spectral_norm(&self, nodes: impl IntoIterator<Item = usize>) -> f64 {
        nodes
            .into_iter()
            .map(|k| self.spectral_norm_at(k))
            .filter(|v| !v.is_nan())
            .fold(0.0, f64::max)
    }
}

/// One directional derivative at node `k` along `(di, dj)`.
fn directional(u: &ScalarField, k: usize, di: isize, dj: isize) -> f64 {
    let g = u.grid();
    let h = g.h();
    let val = |s: isize| -> Option<f64> {
        g.offset(k, s * di, s * dj)
            .filter(|&m| g.kind(m) != NodeKind::Exterior)
            .map(|m| u.at(m))
    };
    let u0 = u.at(k);
    match (val(-2), val(-1), val(1), val(2)) {
        (_, Some(a), Some(b), _) => (b - a) / (2.0 * h),
        (_, None, Some(b), Some(c)) => (-3.0 * u0 + 4.0 * b - c) / (2.0 * h),
        (Some(c), Some(a), None, _) => (3.0 * u0 - 4.0 * a + c) / (2.0 * h),
        (_, None, Some(b), None) => (b - u0) / h,
        (None, Some(a), None, _) => (u0 - a) / h,
        _ => 0.0,
    }
}

/// Central differences where both neighbors carry values, second-order
/// one-sided differences otherwise.
pub fn gradient(u: &ScalarField) -> VectorField {
    let g = u.grid();
    let values = (0..g.len())
        .map(|k| {
            if g.has_value(k) {
                [directional(u, k, 1, 0), directional(u, k, 0, 1)]
            } else {
                [f64::NAN; 2]
            }
        })
        .collect();
    VectorField {
        grid: g.clone(),
        values,
    }
}

/// 9-point Hessian at interior nodes.
pub fn hessian(u: &ScalarField) -> HessianField {
    let g = u.grid();
    let h2 = g.h() * g.h();
    let nx = g.nx();
    let v = u.values();
    let values = (0..g.len())
        .map(|k| {
            if g.kind(k) != NodeKind::Interior {
                return [f64::NAN; 3];
            }
            let c = v[k];
            let u11 = (v[k + 1] - 2.0 * c + v[k - 1]) / h2;
            let u22 = (v[k + nx] - 2.0 * c + v[k - nx]) / h2;
            let u12 = (v[k + nx + 1] - v[k - nx + 1] - v[k + nx - 1] + v[k - nx - 1]) / (4.0 * h2);
            [u11, u12, u22]
        })
        .collect();
    HessianField {
        grid: g.clone(),
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Point;

    #[test]
    fn gradient_of_affine_is_exact() {
        let g = HalfDiskGrid::new(1.0 / 16.0).unwrap();
        let u = ScalarField::from_fn(g.clone(), |p| 2.0 * p[0] - 0.5 * p[1] + 1.0);
        let du = gradient(&u);
        for k in (0..g.len()).filter(|&k| g.has_value(k)) {
            let d = du.at(k);
            assert!((d[0] - 2.0).abs() < 1e-12 && (d[1] + 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_of_quadratic_is_exact_everywhere() {
        // central and one-sided 3-point formulas are exact on quadratics
        let g = HalfDiskGrid::new(1.0 / 16.0).unwrap();
        let f = |p: Point| p[0] * p[0] + p[0] * p[1] - p[1] * p[1];
        let u = ScalarField::from_fn(g.clone(), f);
        let du = gradient(&u);
        let mut worst: f64 = 0.0;
        for k in (0..g.len()).filter(|&k| g.has_value(k)) {
            let p = g.point(k);
            let d = du.at(k);
            worst = worst.max((d[0] - (2.0 * p[0] + p[1])).abs());
            worst = worst.max((d[1] - (p[0] - 2.0 * p[1])).abs());
        }
        // a few arc nodes only have a single neighbor in one direction
        assert!(worst < 0.2, "{worst}");
        let interior_worst = g
            .interior_nodes()
            .map(|k| {
                let p = g.point(k);
                (du.at(k)[0] - (2.0 * p[0] + p[1])).abs()
            })
            .fold(0.0, f64::max);
        assert!(interior_worst < 1e-12);
    }

    #[test]
    fn hessian_of_quadratic_is_exact() {
        let g = HalfDiskGrid::new(1.0 / 16.0).unwrap();
        let u = ScalarField::from_fn(g.clone(), |p| 0.5 * p[0] * p[0] + 3.0 * p[0] * p[1] - p[1] * p[1]);
        let d2 = hessian(&u);
        for k in g.interior_nodes() {
            let [a, b, c] = d2.raw(k);
            assert!((a - 1.0).abs() < 1e-9 && (b - 3.0).abs() < 1e-9 && (c + 2.0).abs() < 1e-9);
        }
        let flat = g.nodes_of(NodeKind::Flat).next().unwrap();
        assert!(d2.at(flat).is_none());
    }

    #[test]
    fn hessian_second_order_convergence() {
        let f = |p: Point| (p[0] + 2.0 * p[1]).sin();
        let err = |n: usize| {
            let g = HalfDiskGrid::with_cells(n).unwrap();
            let d2 = hessian(&ScalarField::from_fn(g.clone(), f));
            g.interior_nodes()
                .filter(|&k| crate::grid::norm(g.point(k)) < 0.8)
                .map(|k| {
                    let p = g.point(k);
                    let s = -(p[0] + 2.0 * p[1]).sin();
                    let [a, b, c] = d2.raw(k);
                    (a - s).abs().max((b - 2.0 * s).abs()).max((c - 4.0 * s).abs())
                })
                .fold(0.0, f64::max)
        };
        let ratio = err(16) / err(32);
        assert!(ratio > 3.5 && ratio < 4.5, "{ratio}");
    }
}
