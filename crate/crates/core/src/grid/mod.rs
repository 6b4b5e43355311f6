//! Cartesian grids masked to the half disk `B1+ = {|x| < 1, x2 > 0}` and the
//! scalar fields that live on them.
//!
//! Nodes sit at `(i h - 1, j h)` for `i in 0..=2n`, `j in 0..=n`, `h = 1/n`.
//! Each node is classified as
//!
//! * **flat**: on `x2 = 0` inside the unit disk (Dirichlet datum 0),
//! * **interior**: inside the disk with its whole 3x3 neighborhood inside or
//!   flat, so the 9-point stencils apply,
//! * **arc**: inside the disk but adjacent to an outside node; these form the
//!   first ring where the outer datum is imposed by direct evaluation,
//! * **exterior**: everything else; carries no value (stored as NaN).

mod diff;
mod io;

pub use diff::{gradient, hessian, HessianField, VectorField};
pub use io::{read_field_dump, write_field_csv, write_field_dump, DumpHeader};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Interior,
    Flat,
    Arc,
    Exterior,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HalfDiskGrid {
    n: usize,
    nx: usize,
    ny: usize,
    kinds: Vec<NodeKind>,
}

/// Offsets of the 8 neighbors of a node.
pub const NEIGHBORS: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

impl HalfDiskGrid {
    /// Grid with spacing `h`, which must be `1/n` for an integer `n >= 2`.
    pub fn new(h: f64) -> Result<Arc<Self>> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::validation("grid.h", "must be positive"));
        }
        let n = (1.0 / h).round();
        if (n * h - 1.0).abs() > 1e-9 {
            return Err(Error::validation(
                "grid.h",
                format!("must be the reciprocal of an integer, got {h}"),
            ));
        }
        HalfDiskGrid::with_cells(n as usize)
    }

    /// Grid with `n` cells per unit length.
    pub fn with_cells(n: usize) -> Result<Arc<Self>> {
        if n < 2 {
            return Err(Error::GridTooCoarse(format!(
                "need at least 3 nodes in each direction, got {} rows",
                n + 1
            )));
        }
        let nx = 2 * n + 1;
        let ny = n + 1;
        let nf = n as f64;
        let inside = |i: isize, j: isize| -> bool {
            if i < 0 || j < 0 || i >= nx as isize || j >= ny as isize {
                return false;
            }
            let x1 = (i as f64 - nf) / nf;
            let x2 = j as f64 / nf;
            x1 * x1 + x2 * x2 < 1.0
        };
        let mut kinds = vec![NodeKind::Exterior; nx * ny];
        for j in 0..ny as isize {
            for i in 0..nx as isize {
                let kind = if !inside(i, j) {
                    NodeKind::Exterior
                } else if j == 0 {
                    NodeKind::Flat
                } else if NEIGHBORS.iter().all(|(di, dj)| inside(i + di, j + dj)) {
                    NodeKind::Interior
                } else {
                    NodeKind::Arc
                };
                kinds[j as usize * nx + i as usize] = kind;
            }
        }
        Ok(Arc::new(HalfDiskGrid { n, nx, ny, kinds }))
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Cells per unit length.
    pub fn cells(&self) -> usize {
        self.n
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    #[inline]
    pub fn kind(&self, idx: usize) -> NodeKind {
        self.kinds[idx]
    }

    pub fn kind_at(&self, i: isize, j: isize) -> NodeKind {
        if i < 0 || j < 0 || i >= self.nx as isize || j >= self.ny as isize {
            NodeKind::Exterior
        } else {
            self.kinds[self.index(i as usize, j as usize)]
        }
    }

    /// Index of `(i + di, j + dj)` if it lies on the grid.
    #[inline]
    pub fn offset(&self, idx: usize, di: isize, dj: isize) -> Option<usize> {
        let (i, j) = self.ij(idx);
        let (a, b) = (i as isize + di, j as isize + dj);
        if a < 0 || b < 0 || a >= self.nx as isize || b >= self.ny as isize {
            None
        } else {
            Some(self.index(a as usize, b as usize))
        }
    }

    pub fn point_ij(&self, i: usize, j: usize) -> Point {
        let nf = self.n as f64;
        [(i as f64 - nf) / nf, j as f64 / nf]
    }

    pub fn point(&self, idx: usize) -> Point {
        let (i, j) = self.ij(idx);
        self.point_ij(i, j)
    }

    pub fn has_value(&self, idx: usize) -> bool {
        self.kinds[idx] != NodeKind::Exterior
    }

    pub fn nodes_of(&self, kind: NodeKind) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&k| self.kinds[k] == kind)
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes_of(NodeKind::Interior)
    }

    /// Non-exterior nodes with `|x - center| < radius` (flat nodes included).
    pub fn nodes_in_ball(&self, center: Point, radius: f64) -> Vec<usize> {
        (0..self.len())
            .filter(|&k| self.has_value(k) && dist(self.point(k), center) < radius)
            .collect()
    }

    /// Interior nodes with `|x - center| < radius`.
    pub fn interior_in_ball(&self, center: Point, radius: f64) -> Vec<usize> {
        (0..self.len())
            .filter(|&k| self.kinds[k] == NodeKind::Interior && dist(self.point(k), center) < radius)
            .collect()
    }

    /// Node nearest to `p` (not necessarily carrying a value).
    pub fn nearest(&self, p: Point) -> usize {
        let nf = self.n as f64;
        let i = ((p[0] + 1.0) * nf).round().clamp(0.0, (self.nx - 1) as f64) as usize;
        let j = (p[1] * nf).round().clamp(0.0, (self.ny - 1) as f64) as usize;
        self.index(i, j)
    }
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[inline]
pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

/// Values on the non-exterior nodes of a [`HalfDiskGrid`]; exterior entries
/// are NaN.
#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Arc<HalfDiskGrid>,
    values: Vec<f64>,
}

impl PartialEq for ScalarField {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl ScalarField {
    pub fn new(grid: Arc<HalfDiskGrid>, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::validation(
                "field",
                format!("expected {} values, got {}", grid.len(), values.len()),
            ));
        }
        for (k, v) in values.iter_mut().enumerate() {
            if grid.has_value(k) {
                if !v.is_finite() {
                    let p = grid.point(k);
                    return Err(Error::validation(
                        "field",
                        format!("non-finite value at ({}, {})", p[0], p[1]),
                    ));
                }
            } else {
                *v = f64::NAN;
            }
        }
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: Arc<HalfDiskGrid>) -> Self {
        ScalarField::from_fn(grid, |_| 0.0)
    }

    /// Samples `f` at every non-exterior node.
    pub fn from_fn(grid: Arc<HalfDiskGrid>, f: impl Fn(Point) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|k| if grid.has_value(k) { f(grid.point(k)) } else { f64::NAN })
            .collect();
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &Arc<HalfDiskGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    /// Max over non-exterior nodes of `|self - other|`.
    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .enumerate()
            .filter(|(k, _)| self.grid.has_value(*k))
            .fold(0.0, |m, (_, (a, b))| m.max((a - b).abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .filter(|v| !v.is_nan())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Max `|self - f|` over non-exterior nodes.
    pub fn max_error(&self, f: impl Fn(Point) -> f64) -> f64 {
        (0..self.grid.len())
            .filter(|&k| self.grid.has_value(k))
            .fold(0.0, |m, k| m.max((self.values[k] - f(self.grid.point(k))).abs()))
    }

    /// Bilinear interpolation on the cell containing `p`.
    pub fn interpolate(&self, p: Point) -> Result<f64> {
        interpolate(self, p)
    }
}

fn outside(p: Point) -> Error {
    Error::OutsideDomain { x1: p[0], x2: p[1] }
}

/// Bilinear interpolation on the cell containing `p`. All four cell corners
/// must carry values.
pub fn interpolate(u: &ScalarField, p: Point) -> Result<f64> {
    let g = &u.grid;
    if !(p[1] >= 0.0 && norm(p) <= 1.0) {
        return Err(outside(p));
    }
    let nf = g.n as f64;
    let s = (p[0] + 1.0) * nf;
    let t = p[1] * nf;
    let i0 = (s.floor() as usize).min(g.nx - 2);
    let j0 = (t.floor() as usize).min(g.ny - 2);
    let (fs, ft) = (s - i0 as f64, t - j0 as f64);
    let corners = [
        g.index(i0, j0),
        g.index(i0 + 1, j0),
        g.index(i0, j0 + 1),
        g.index(i0 + 1, j0 + 1),
    ];
    if corners.iter().any(|&c| !g.has_value(c)) {
        return Err(outside(p));
    }
    let v = |c: usize| u.values[corners[c]];
    Ok((1.0 - fs) * (1.0 - ft) * v(0) + fs * (1.0 - ft) * v(1) + (1.0 - fs) * ft * v(2) + fs * ft * v(3))
}

/// Tensor-product quadratic Lagrange interpolation on the 3x3 node block
/// around `p`; exact on every polynomial of degree <= 2 in each variable.
pub fn interpolate_quadratic(u: &ScalarField, p: Point) -> Result<f64> {
    let g = &u.grid;
    if !(p[1] >= 0.0 && norm(p) <= 1.0) {
        return Err(outside(p));
    }
    let nf = g.n as f64;
    let s = (p[0] + 1.0) * nf;
    let t = p[1] * nf;
    let mut ic = (s.round() as isize).clamp(1, g.nx as isize - 2);
    let mut jc = (t.round() as isize).clamp(1, g.ny as isize - 2);
    let block_ok = |ic: isize, jc: isize| {
        (-1..=1).all(|di| (-1..=1).all(|dj| g.kind_at(ic + di, jc + dj) != NodeKind::Exterior))
    };
    let mut tries = 0;
    while !block_ok(ic, jc) {
        // step the block toward the domain center
        if tries == 3 {
            return Err(outside(p));
        }
        ic += (g.n as isize - ic).signum();
        if jc > 1 {
            jc -= 1;
        }
        tries += 1;
    }
    let weights = |x: f64| [0.5 * x * (x - 1.0), (1.0 - x) * (1.0 + x), 0.5 * x * (x + 1.0)];
    let wx = weights(s - ic as f64);
    let wy = weights(t - jc as f64);
    let mut acc = 0.0;
    for (b, wyb) in wy.iter().enumerate() {
        for (a, wxa) in wx.iter().enumerate() {
            let idx = g.index((ic + a as isize - 1) as usize, (jc + b as isize - 1) as usize);
            acc += wxa * wyb * u.values[idx];
        }
    }
    Ok(acc)
}

/// Non-exterior nodes of `u`'s grid inside the ball `B_radius(center)`.
pub fn restrict(u: &ScalarField, radius: f64, center: Point) -> Vec<usize> {
    u.grid.nodes_in_ball(center, radius)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_invariants() {
        let g = HalfDiskGrid::new(1.0 / 16.0).unwrap();
        for k in 0..g.len() {
            let p = g.point(k);
            match g.kind(k) {
                NodeKind::Flat => assert_eq!(p[1], 0.0),
                NodeKind::Interior => {
                    assert!(norm(p) < 1.0 && p[1] > 0.0);
                    for (di, dj) in NEIGHBORS {
                        let nb = g.offset(k, di, dj).unwrap();
                        assert!(matches!(g.kind(nb), NodeKind::Interior | NodeKind::Flat | NodeKind::Arc));
                    }
                }
                NodeKind::Arc => assert!(norm(p) < 1.0 && p[1] > 0.0),
                NodeKind::Exterior => assert!(norm(p) >= 1.0),
            }
        }
        assert!(g.nodes_of(NodeKind::Arc).count() > 0);
    }

    #[test]
    fn rejects_bad_spacing() {
        assert!(HalfDiskGrid::new(0.3).is_err());
        assert!(matches!(HalfDiskGrid::new(1.0), Err(Error::GridTooCoarse(_))));
        assert_eq!(HalfDiskGrid::new(0.25).unwrap().nx(), 9);
    }

    #[test]
    fn exterior_values_are_nan() {
        let g = HalfDiskGrid::new(0.125).unwrap();
        let u = ScalarField::from_fn(g.clone(), |p| p[0]);
        let corner = g.index(0, g.ny() - 1);
        assert!(u.at(corner).is_nan());
        assert!(ScalarField::new(g.clone(), vec![f64::NAN; g.len()]).is_err());
    }

    #[test]
    fn bilinear_examples() {
        let g = HalfDiskGrid::new(1.0 / 32.0).unwrap();
        let u = ScalarField::from_fn(g.clone(), |p| p[0]);
        assert!((interpolate(&u, [0.3, 0.2]).unwrap() - 0.3).abs() < 1e-14);
        let one = ScalarField::from_fn(g.clone(), |_| 1.0);
        assert!((interpolate(&one, [-0.41, 0.77]).unwrap() - 1.0).abs() < 1e-14);
        assert!(interpolate(&one, [0.9, 0.9]).is_err());
        assert!(interpolate(&one, [0.1, -0.1]).is_err());
    }

    #[test]
    fn bilinear_error_at_cell_center() {
        // bilinear interpolation of x1^2 at a cell center overshoots by h^2/4
        let g = HalfDiskGrid::new(0.125).unwrap();
        let h = g.h();
        let u = ScalarField::from_fn(g.clone(), |p| p[0] * p[0]);
        let p = [0.25 + h / 2.0, 0.25 + h / 2.0];
        let v = interpolate(&u, p).unwrap();
        assert!((v - (p[0] * p[0] + h * h / 4.0)).abs() < 1e-14);
    }

    #[test]
    fn quadratic_interpolation_exact_on_quadratics() {
        let g = HalfDiskGrid::new(1.0 / 16.0).unwrap();
        let f = |p: Point| 0.3 + p[0] - 2.0 * p[1] + p[0] * p[1] + 0.5 * p[1] * p[1] - p[0] * p[0];
        let u = ScalarField::from_fn(g.clone(), f);
        for p in [[0.013, 0.021], [-0.5, 0.4], [0.61, 0.7], [0.0, 0.0], [0.95, 0.01]] {
            assert!((interpolate_quadratic(&u, p).unwrap() - f(p)).abs() < 1e-13, "{p:?}");
        }
    }

    #[test]
    fn restrict_examples() {
        let g = HalfDiskGrid::new(0.25).unwrap();
        let u = ScalarField::zeros(g.clone());
        let all = (0..g.len()).filter(|&k| g.has_value(k)).count();
        assert_eq!(restrict(&u, 2.0, [0.0, 0.0]).len(), all);
        assert!(restrict(&u, 0.0, [0.0, 0.0]).is_empty());
        // brute force enumeration of lattice points (a/4, b/4), b >= 0, |.| < 0.5
        let mut count = 0;
        for a in -8i32..=8 {
            for b in 0i32..=4 {
                let (x, y) = (a as f64 / 4.0, b as f64 / 4.0);
                if x * x + y * y < 0.25 {
                    count += 1;
                }
            }
        }
        assert_eq!(restrict(&u, 0.5, [0.0, 0.0]).len(), count);
    }
}
