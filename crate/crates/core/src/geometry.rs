//! Free boundary curves extracted from discrete solutions, and the
//! geometric diagnostics evaluated on them.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dist, HalfDiskGrid, NodeKind, Point, ScalarField, NEIGHBORS};
use crate::solver::ActiveSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveLabel {
    /// `dOmega` inside the open upper half plane.
    Gamma,
    /// Boundary of the interior of the zero set.
    GammaI,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurve {
    pub label: CurveLabel,
    pub polylines: Vec<Vec<Point>>,
}

impl BoundaryCurve {
    pub fn empty(label: CurveLabel) -> Self {
        BoundaryCurve {
            label,
            polylines: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.polylines.iter().all(|p| p.is_empty())
    }

    pub fn vertices(&self) -> impl Iterator<Item = Point> + '_ {
        self.polylines.iter().flatten().copied()
    }

    pub fn vertex_count(&self) -> usize {
        self.polylines.iter().map(Vec::len).sum()
    }

    /// CSV with columns `polyline,x1,x2`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["polyline", "x1", "x2"])?;
        for (i, line) in self.polylines.iter().enumerate() {
            for p in line {
                w.write_record(&[i.to_string(), p[0].to_string(), p[1].to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

// corner order: bottom-left, bottom-right, top-right, top-left
const CORNERS: [(usize, usize); 4] = [(0, 0), (1, 0), (1, 1), (0, 1)];
// edge e joins corners EDGES[e]
const EDGES: [(usize, usize); 4] = [(0, 1), (1, 2), (3, 2), (0, 3)];
// the two edges adjacent to each corner
const CORNER_EDGES: [(usize, usize); 4] = [(0, 3), (0, 1), (1, 2), (2, 3)];

/// Marching squares on a 0/1 node indicator. Cells are visited when every
/// corner passes `cell_ok`; saddle cells take the average-corner value (0.5,
/// counted as inside) for their center. `place(inner, outer)` gives the
/// crossing position as a fraction of the edge measured from the inside node.
fn contour(
    grid: &HalfDiskGrid,
    inside: &[bool],
    cell_ok: impl Fn(usize) -> bool,
    place: impl Fn(usize, usize) -> f64,
    label: CurveLabel,
) -> BoundaryCurve {
    let h = grid.h();
    let (nx, ny) = (grid.nx(), grid.ny());
    // edge key: 2 * node for the edge to the right, 2 * node + 1 upward
    let edge_key = |i: usize, j: usize, e: usize| -> usize {
        match e {
            0 => 2 * grid.index(i, j),
            1 => 2 * grid.index(i + 1, j) + 1,
            2 => 2 * grid.index(i, j + 1),
            _ => 2 * grid.index(i, j) + 1,
        }
    };
    let mut points: HashMap<usize, Point> = HashMap::new();
    let mut segments: Vec<(usize, usize)> = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let nodes: Vec<usize> = CORNERS.iter().map(|&(a, b)| grid.index(i + a, j + b)).collect();
            if !nodes.iter().all(|&k| cell_ok(k)) {
                continue;
            }
            let bits: Vec<bool> = nodes.iter().map(|&k| inside[k]).collect();
            let crossing: Vec<usize> = (0..4).filter(|&e| bits[EDGES[e].0] != bits[EDGES[e].1]).collect();
            let mut cell_segments = Vec::new();
            match crossing.len() {
                2 => cell_segments.push((crossing[0], crossing[1])),
                4 => {
                    for c in 0..4 {
                        if !bits[c] {
                            cell_segments.push(CORNER_EDGES[c]);
                        }
                    }
                }
                _ => {}
            }
            for (ea, eb) in cell_segments {
                let mut keys = [0usize; 2];
                for (slot, e) in [ea, eb].into_iter().enumerate() {
                    let (ca, cb) = EDGES[e];
                    let (a, b) = if bits[ca] { (nodes[ca], nodes[cb]) } else { (nodes[cb], nodes[ca]) };
                    let t = place(a, b);
                    let pa = grid.point(a);
                    let pb = grid.point(b);
                    let key = edge_key(i, j, e);
                    points.insert(key, [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]);
                    keys[slot] = key;
                }
                if points[&keys[0]][1] > 0.5 * h + 1e-12 && points[&keys[1]][1] > 0.5 * h + 1e-12 {
                    segments.push((keys[0], keys[1]));
                }
            }
        }
    }
    BoundaryCurve {
        label,
        polylines: chain(&segments, &points),
    }
}

/// Joins segments sharing endpoints into polylines, open chains first.
fn chain(segments: &[(usize, usize)], points: &HashMap<usize, Point>) -> Vec<Vec<Point>> {
    let mut adjacency: HashMap<usize, Vec<usize>> = HashMap::new();
    for (s, &(a, b)) in segments.iter().enumerate() {
        adjacency.entry(a).or_default().push(s);
        adjacency.entry(b).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let mut out = Vec::new();
    let mut starts: Vec<usize> = adjacency
        .iter()
        .filter(|(_, v)| v.len() == 1)
        .map(|(&k, _)| k)
        .collect();
    starts.sort_unstable();
    let mut all: Vec<usize> = segments.iter().map(|s| s.0).collect();
    all.sort_unstable();
    for start in starts.into_iter().chain(all) {
        let mut key = start;
        let mut line = vec![points[&key]];
        while let Some(&s) = adjacency[&key].iter().find(|&&s| !used[s]) {
            used[s] = true;
            let (a, b) = segments[s];
            key = if a == key { b } else { a };
            line.push(points[&key]);
        }
        if line.len() > 1 {
            out.push(line);
        }
    }
    out
}

/// `Gamma`: contour of the active-set indicator away from the outer arc.
/// Flat nodes count as outside `Omega`; vertices with `x2 <= h/2` are dropped.
pub fn extract_gamma(active: &ActiveSet) -> BoundaryCurve {
    let g = active.grid();
    if active.is_empty() {
        return BoundaryCurve::empty(CurveLabel::Gamma);
    }
    contour(g, active.mask(), |k| gamma_cell_node(g, k), |_, _| 0.5, CurveLabel::Gamma)
}

fn gamma_cell_node(g: &HalfDiskGrid, k: usize) -> bool {
    matches!(g.kind(k), NodeKind::Interior | NodeKind::Flat)
}

/// `Gamma` with sub-cell vertices. Near the free boundary `u` behaves like
/// half the squared distance, so `w = sqrt(2|u|)` is close to linear across
/// it. Each crossing extrapolates `w` from the inside node and the next node
/// along the same line to its zero; without a usable slope the midpoint is
/// kept. Outside nodes may still carry `0 < u < tol_u`, and where `w` grows
/// slowly along the edge that tail spans several cells, so the zero may land
/// up to four cells from the inside node. Same topology and `x2 <= h/2` filter as
/// [`extract_gamma`].
pub fn extract_gamma_refined(u: &ScalarField, active: &ActiveSet) -> BoundaryCurve {
    let g = active.grid();
    if active.is_empty() {
        return BoundaryCurve::empty(CurveLabel::Gamma);
    }
    let h = g.h();
    let w = |k: usize| (2.0 * u.at(k).abs()).sqrt();
    let place = |a: usize, b: usize| -> f64 {
        let (ia, ja) = g.ij(a);
        let (ib, jb) = g.ij(b);
        let (di, dj) = (ia as isize - ib as isize, ja as isize - jb as isize);
        let Some(next) = g.offset(a, di, dj) else { return 0.5 };
        if !active.contains(next) || !g.has_value(next) {
            return 0.5;
        }
        let slope = (w(next) - w(a)) / h;
        if slope > 0.0 {
            (w(a) / slope / h).min(4.0)
        } else {
            0.5
        }
    };
    contour(g, active.mask(), |k| gamma_cell_node(g, k), place, CurveLabel::Gamma)
}

/// Nodes in the interior of `{|u| <= tol}`: zero nodes whose 8 neighbors all
/// exist and are zero.
pub fn zero_set_interior(u: &ScalarField, tol: f64) -> Vec<bool> {
    let g = u.grid();
    let zero = |k: usize| g.has_value(k) && u.at(k).abs() <= tol;
    (0..g.len())
        .map(|k| {
            zero(k)
                && NEIGHBORS
                    .iter()
                    .all(|&(di, dj)| g.offset(k, di, dj).is_some_and(zero))
        })
        .collect()
}

/// `Gamma_i`: contour of the zero-set interior in `{x2 > h/2}`.
pub fn extract_gamma_i(u: &ScalarField, tol: f64) -> BoundaryCurve {
    let g = u.grid();
    let interior = zero_set_interior(u, tol);
    if !interior.iter().any(|&b| b) {
        return BoundaryCurve::empty(CurveLabel::GammaI);
    }
    contour(g, &interior, |k| g.has_value(k), |_, _| 0.5, CurveLabel::GammaI)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusEntry {
    pub r: f64,
    pub omega: f64,
    /// No vertex within distance `r`; `omega` is 0 by convention.
    pub empty: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusTable {
    pub center: Point,
    pub entries: Vec<ModulusEntry>,
    /// Largest radius with data.
    pub r0: Option<f64>,
}

impl ModulusTable {
    pub fn omega(&self, r: f64) -> Option<f64> {
        self.entries.iter().find(|e| e.r == r).map(|e| e.omega)
    }

    /// CSV with columns `r,omega,empty`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for e in &self.entries {
            w.serialize(e)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `omega(r) = sup x2 / |x|` over vertices with `|x| <= r`.
pub fn modulus_table(curve: &BoundaryCurve, radii: &[f64]) -> ModulusTable {
    modulus_table_at(curve, radii, 0.0)
}

/// As [`modulus_table`] with distances measured from `(center, 0)`.
pub fn modulus_table_at(curve: &BoundaryCurve, radii: &[f64], center: f64) -> ModulusTable {
    let c = [center, 0.0];
    let entries: Vec<ModulusEntry> = radii
        .iter()
        .map(|&r| {
            let mut omega: f64 = 0.0;
            let mut empty = true;
            for p in curve.vertices() {
                let d = dist(p, c);
                if d <= r && d > 0.0 {
                    empty = false;
                    omega = omega.max(p[1] / d);
                }
            }
            ModulusEntry { r, omega, empty }
        })
        .collect();
    let r0 = entries.iter().filter(|e| !e.empty).map(|e| e.r).fold(None, |m: Option<f64>, r| {
        Some(m.map_or(r, |m| m.max(r)))
    });
    ModulusTable {
        center: c,
        entries,
        r0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeClearance {
    pub epsilon: f64,
    pub rho: f64,
    pub clear: bool,
    pub witnesses: Vec<Point>,
}

/// Whether no vertex lies in `B_rho+ cap {x2 > eps |x1|}`.
pub fn cone_clearance(curve: &BoundaryCurve, epsilon: f64, rho: f64) -> Result<ConeClearance> {
    cone_clearance_at(curve, epsilon, rho, 0.0)
}

/// As [`cone_clearance`] for the cone with apex `(center, 0)`.
pub fn cone_clearance_at(curve: &BoundaryCurve, epsilon: f64, rho: f64, center: f64) -> Result<ConeClearance> {
    if !(epsilon > 0.0) {
        return Err(Error::validation("epsilon", "must be positive"));
    }
    let c = [center, 0.0];
    let witnesses: Vec<Point> = curve
        .vertices()
        .filter(|&p| dist(p, c) < rho && p[1] > epsilon * (p[0] - center).abs())
        .collect();
    Ok(ConeClearance {
        epsilon,
        rho,
        clear: witnesses.is_empty(),
        witnesses,
    })
}

/// Min `|x|` over the vertices of `Gamma_i`; infinite for an empty curve.
pub fn gamma_i_clearance(curve: &BoundaryCurve) -> f64 {
    curve
        .vertices()
        .map(|p| p[0].hypot(p[1]))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplementMeasure {
    pub s: f64,
    /// `h^2` times the number of interior nodes in `B_s+` outside `Omega`.
    pub measure: f64,
    pub nodes: usize,
    /// No complement node in `B_s+` has its whole neighborhood outside `Omega`.
    pub empty_interior: bool,
}

pub fn complement_measure(active: &ActiveSet, s: f64) -> ComplementMeasure {
    let g = active.grid();
    let h = g.h();
    let outside: Vec<usize> = g
        .interior_nodes()
        .filter(|&k| !active.contains(k) && g.point(k)[0].hypot(g.point(k)[1]) < s)
        .collect();
    let empty_interior = !outside.iter().any(|&k| {
        NEIGHBORS
            .iter()
            .all(|&(di, dj)| g.offset(k, di, dj).is_some_and(|m| !active.contains(m)))
    });
    ComplementMeasure {
        s,
        measure: h * h * outside.len() as f64,
        nodes: outside.len(),
        empty_interior,
    }
}

/// Symmetric Hausdorff distance between two finite point sets.
pub fn hausdorff(a: &[Point], b: &[Point]) -> f64 {
    let directed = |x: &[Point], y: &[Point]| {
        x.iter()
            .map(|&p| y.iter().map(|&q| dist(p, q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    directed(a, b).max(directed(b, a))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;

    fn grid(n: usize) -> Arc<HalfDiskGrid> {
        HalfDiskGrid::with_cells(n).unwrap()
    }

    fn set_from(g: &Arc<HalfDiskGrid>, f: impl Fn(Point) -> bool) -> ActiveSet {
        let u = ScalarField::from_fn(g.clone(), |p| if f(p) { 1.0 } else { 0.0 });
        ActiveSet::positive(&u, 0.5)
    }

    fn curve_of(points: impl Fn(f64) -> Point, ts: impl Iterator<Item = f64>) -> BoundaryCurve {
        BoundaryCurve {
            label: CurveLabel::Gamma,
            polylines: vec![ts.map(points).collect()],
        }
    }

    #[test]
    fn gamma_of_halfplane_set() {
        let g = grid(64);
        let h = g.h();
        let curve = extract_gamma(&set_from(&g, |p| p[1] > 0.25));
        assert!(!curve.is_empty());
        for p in curve.vertices() {
            assert!((p[1] - 0.25).abs() <= h, "{p:?}");
        }
        assert_eq!(curve.polylines.len(), 1);
    }

    #[test]
    fn refined_gamma_lands_on_tilted_line() {
        let g = grid(64);
        let h = g.h();
        let s = 1.0f64 + 0.2 * 0.2;
        let d = |p: Point| (p[1] - 0.3 - 0.2 * p[0]) / s.sqrt();
        let u = ScalarField::from_fn(g.clone(), |p| d(p).max(0.0).powi(2) / 2.0);
        let active = ActiveSet::positive(&u, h * h / 8.0);
        let curve = extract_gamma_refined(&u, &active);
        let mid = extract_gamma(&active);
        assert_eq!(curve.vertex_count(), mid.vertex_count());
        let mut worst_mid: f64 = 0.0;
        for p in mid.vertices() {
            worst_mid = worst_mid.max(d(p).abs());
        }
        let near_arc = |p: Point| p[0].hypot(p[1]) > 0.8;
        for p in curve.vertices().filter(|&p| !near_arc(p)) {
            assert!(d(p).abs() < 1e-12, "{p:?}");
        }
        assert!(worst_mid > 0.1 * h);
    }

    #[test]
    fn gamma_of_full_and_empty_sets() {
        let g = grid(32);
        assert!(extract_gamma(&ActiveSet::all_interior(g.clone())).is_empty());
        assert!(extract_gamma(&ActiveSet::empty(g.clone())).is_empty());
    }

    #[test]
    fn gamma_of_annulus_is_near_circle() {
        let g = grid(64);
        let h = g.h();
        let curve = extract_gamma(&set_from(&g, |p| p[0].hypot(p[1]) > 0.5));
        let verts: Vec<Point> = curve.vertices().collect();
        assert!(!verts.is_empty());
        for p in &verts {
            assert!((p[0].hypot(p[1]) - 0.5).abs() <= h);
        }
        let circle: Vec<Point> = (0..=400)
            .map(|s| {
                let t = std::f64::consts::PI * s as f64 / 400.0;
                [0.5 * t.cos(), 0.5 * t.sin()]
            })
            .filter(|p| p[1] > 2.0 * h)
            .collect();
        assert!(hausdorff(&verts, &circle) <= 2.0 * h);
    }

    #[test]
    fn gamma_i_examples() {
        let g = grid(64);
        let h = g.h();
        let tol = h * h / 8.0;
        let u = ScalarField::from_fn(g.clone(), |p| (p[1] - 0.25).max(0.0).powi(2) / 2.0);
        let c = extract_gamma_i(&u, tol);
        let near: Vec<Point> = c.vertices().filter(|p| p[0].hypot(p[1]) < 1.0 - 4.0 * h).collect();
        assert!(!near.is_empty());
        assert!(near.iter().all(|p| (p[1] - 0.25).abs() <= 2.0 * h));
        let delta = gamma_i_clearance(&c);
        assert!((delta - 0.25).abs() <= 2.0 * h, "{delta}");

        let q = ScalarField::from_fn(g.clone(), |p| p[1] * p[1] / 2.0);
        assert!(extract_gamma_i(&q, tol).is_empty());

        let zero = ScalarField::zeros(g.clone());
        let arc = extract_gamma_i(&zero, tol);
        assert!(!arc.is_empty());
        for p in arc.vertices() {
            assert!(p[0].hypot(p[1]) > 1.0 - 3.0 * h, "{p:?}");
        }
    }

    #[test]
    fn modulus_examples() {
        let radii = [0.4, 0.2, 0.1];
        let diag = curve_of(|t| [t, t.abs()], (-50..=50).filter(|&i| i != 0).map(|i| i as f64 / 100.0));
        let m = modulus_table(&diag, &radii);
        for e in &m.entries {
            assert!((e.omega - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        }
        let parab = curve_of(|t| [t, t * t], (-100..=100).filter(|&i| i != 0).map(|i| i as f64 / 200.0));
        let m = modulus_table(&parab, &[0.1, 0.05]);
        for e in &m.entries {
            assert!(e.omega <= e.r * 1.0001 && e.omega > 0.8 * e.r, "{e:?}");
        }
        let line = curve_of(|t| [t, 0.25], (-20..=20).map(|i| i as f64 / 40.0));
        let m = modulus_table(&line, &[0.2, 0.1]);
        assert!(m.entries.iter().all(|e| e.empty && e.omega == 0.0));
        assert_eq!(m.r0, None);
    }

    #[test]
    fn cone_examples() {
        let parab = curve_of(|t| [t, t * t], (-100..=100).filter(|&i| i != 0).map(|i| i as f64 / 200.0));
        assert!(cone_clearance(&parab, 0.5, 0.2).unwrap().clear);
        let diag = curve_of(|t| [t, t.abs()], (-50..=50).filter(|&i| i != 0).map(|i| i as f64 / 100.0));
        let c = cone_clearance(&diag, 0.5, 0.3).unwrap();
        assert!(!c.clear && !c.witnesses.is_empty());
        assert!(cone_clearance(&BoundaryCurve::empty(CurveLabel::Gamma), 0.5, 0.3).unwrap().clear);
    }

    #[test]
    fn clearance_examples() {
        assert_eq!(gamma_i_clearance(&BoundaryCurve::empty(CurveLabel::GammaI)), f64::INFINITY);
        let h = 1.0 / 64.0;
        let c = curve_of(|t| [t, h], [h].into_iter());
        assert!((gamma_i_clearance(&c) - h * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn complement_measure_examples() {
        let g = grid(128);
        let h = g.h();
        let all = complement_measure(&ActiveSet::all_interior(g.clone()), 0.5);
        assert_eq!(all.measure, 0.0);
        assert!(all.empty_interior);

        let band = complement_measure(&set_from(&g, |p| p[1] > 0.25), 0.5);
        // area of {0 < x2 <= 0.25} inside the disk of radius 0.5: integral
        // of 2 sqrt(r^2 - y^2) over 0 < y < t
        let (r, t): (f64, f64) = (0.5, 0.25);
        let exact = r * r * (t / r).asin() + t * (r * r - t * t).sqrt();
        assert!((band.measure - exact).abs() < 4.0 * h * r, "{} vs {exact}", band.measure);
        assert!(!band.empty_interior);

        let none = complement_measure(&ActiveSet::empty(g.clone()), 0.5);
        assert!((none.measure - std::f64::consts::PI / 8.0).abs() < 4.0 * h * 0.5);
    }
}
