//! Damped semismooth Newton on per-node equations.
//!
//! Every grid node carries one row: a pinned value, the equation
//! `F(D^2 u, x) = f`, or the complementarity condition `min(f - F, c u) = 0`.
//! Pinned nodes are eliminated; the remaining unknowns form a sparse system
//! assembled from `F_ij` and solved by BiCGSTAB.

use crate::error::Result;
use crate::grid::{HalfDiskGrid, NodeKind, ScalarField};
use crate::operator::{EllipticOperator, SymMatrix};
use crate::sparse::{bicgstab, CsrBuilder};

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Row {
    Fixed(f64),
    Pde(f64),
    Obstacle(f64),
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct NewtonParams {
    pub tol: f64,
    pub max_iters: usize,
    pub damping: f64,
    pub max_krylov_iters: usize,
}

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct NewtonOutcome {
    pub converged: bool,
    pub residual: f64,
    pub iterations: usize,
    pub picard_steps: usize,
    pub krylov_iterations: usize,
}

/// Hessian `(u11, u12, u22)` at an interior node.
#[inline]
pub(crate) fn node_hessian(v: &[f64], k: usize, nx: usize, h2: f64) -> [f64; 3] {
    let c = v[k];
    [
        (v[k + 1] - 2.0 * c + v[k - 1]) / h2,
        (v[k + nx + 1] - v[k - nx + 1] - v[k + nx - 1] + v[k - nx - 1]) / (4.0 * h2),
        (v[k + nx] - 2.0 * c + v[k - nx]) / h2,
    ]
}

pub(crate) struct Engine<'a> {
    op: &'a EllipticOperator,
    grid: &'a HalfDiskGrid,
    rows: Vec<Row>,
    /// Scale of `u` in the complementarity row.
    c: f64,
}

struct Linearization {
    value: Vec<f64>,
    coef: Vec<[f64; 3]>,
}

impl<'a> Engine<'a> {
    pub fn new(op: &'a EllipticOperator, grid: &'a HalfDiskGrid, rows: Vec<Row>) -> Self {
        debug_assert_eq!(rows.len(), grid.len());
        debug_assert!(rows
            .iter()
            .enumerate()
            .all(|(k, r)| matches!(r, Row::Fixed(_)) || grid.kind(k) == NodeKind::Interior));
        let h = grid.h();
        Engine {
            op,
            grid,
            rows,
            c: 1.0 / (h * h),
        }
    }

    fn linearize(&self, u: &[f64]) -> Result<Linearization> {
        let g = self.grid;
        let h = g.h();
        let (nx, h2) = (g.nx(), h * h);
        let mut value = vec![0.0; g.len()];
        let mut coef = vec![[0.0; 3]; g.len()];
        for (k, row) in self.rows.iter().enumerate() {
            if matches!(row, Row::Fixed(_)) {
                continue;
            }
            let [a, b, c] = node_hessian(u, k, nx, h2);
            let (f, lin) = self
                .op
                .evaluate_linearized(&SymMatrix::from_2x2(a, b, c), &g.point(k))?;
            value[k] = f;
            coef[k] = [lin.get(0, 0), lin.get(0, 1), lin.get(1, 1)];
        }
        Ok(Linearization { value, coef })
    }

    /// Whether an obstacle row currently follows its PDE branch.
    #[inline]
    fn pde_branch(&self, f: f64, value: f64, u: f64) -> bool {
        f - value <= self.c * u
    }

    /// Max-norm residual; obstacle rows report the unscaled `min(f - F, u)`.
    fn residual(&self, u: &[f64], value: &[f64]) -> f64 {
        self.rows
            .iter()
            .enumerate()
            .map(|(k, row)| match *row {
                Row::Fixed(v) => (u[k] - v).abs(),
                Row::Pde(f) => (value[k] - f).abs(),
                Row::Obstacle(f) => (f - value[k]).min(u[k]).abs(),
            })
            .fold(0.0, f64::max)
    }

    fn residual_of(&self, u: &[f64]) -> Result<f64> {
        let lin = self.linearize(u)?;
        Ok(self.residual(u, &lin.value))
    }

    /// Solves the frozen-coefficient system at `u`; pinned and contact rows
    /// are eliminated.
    fn frozen_step(&self, u: &[f64], lin: &Linearization, max_krylov: usize, tol: f64) -> (Vec<f64>, usize) {
        let g = self.grid;
        let h = g.h();
        let (nx, h2) = (g.nx() as isize, h * h);
        let mut next: Vec<f64> = u.to_vec();
        let mut unknown = vec![usize::MAX; g.len()];
        let mut order = Vec::new();
        for (k, row) in self.rows.iter().enumerate() {
            match *row {
                Row::Fixed(v) => next[k] = v,
                Row::Pde(_) => {
                    unknown[k] = order.len();
                    order.push(k);
                }
                Row::Obstacle(f) => {
                    if self.pde_branch(f, lin.value[k], u[k]) {
                        unknown[k] = order.len();
                        order.push(k);
                    } else {
                        next[k] = 0.0;
                    }
                }
            }
        }
        if order.is_empty() {
            return (next, 0);
        }
        let mut builder = CsrBuilder::new(order.len(), 9 * order.len());
        let mut rhs = Vec::with_capacity(order.len());
        let mut x0 = Vec::with_capacity(order.len());
        for &k in &order {
            let f = match self.rows[k] {
                Row::Pde(f) | Row::Obstacle(f) => f,
                Row::Fixed(_) => unreachable!(),
            };
            let [a11, a12, a22] = lin.coef[k];
            let stencil = [
                (0, -2.0 * (a11 + a22) / h2),
                (1, a11 / h2),
                (-1, a11 / h2),
                (nx, a22 / h2),
                (-nx, a22 / h2),
                (nx + 1, 0.5 * a12 / h2),
                (-nx - 1, 0.5 * a12 / h2),
                (nx - 1, -0.5 * a12 / h2),
                (-nx + 1, -0.5 * a12 / h2),
            ];
            // J u_new = J u - (F(u) - f); for the piecewise-linear kinds
            // J u = F(u), so the right side is just f.
            let mut ju = 0.0;
            let mut b = f - lin.value[k];
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(9);
            for (off, w) in stencil {
                let m = (k as isize + off) as usize;
                ju += w * u[m];
                if unknown[m] == usize::MAX {
                    b -= w * next[m];
                } else {
                    row.push((unknown[m], w));
                }
            }
            b += ju;
            row.sort_by_key(|e| e.0);
            for (c, w) in row {
                builder.push(c, w);
            }
            builder.end_row();
            rhs.push(b);
            x0.push(u[k]);
        }
        let a = builder.build();
        let bnorm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let rel = 1e-10f64.min(0.01 * tol / bnorm);
        let stats = bicgstab(&a, &rhs, &mut x0, rel, max_krylov);
        for (i, &k) in order.iter().enumerate() {
            next[k] = x0[i];
        }
        (next, stats.iterations)
    }

    pub fn solve(&self, u: &mut ScalarField, p: NewtonParams) -> Result<NewtonOutcome> {
        let g = self.grid;
        let mut cur: Vec<f64> = (0..g.len())
            .map(|k| match self.rows[k] {
                Row::Fixed(v) => v,
                _ => u.at(k),
            })
            .collect();
        let mut out = NewtonOutcome::default();
        let mut lin = self.linearize(&cur)?;
        let mut res = self.residual(&cur, &lin.value);
        while res > p.tol && out.iterations < p.max_iters {
            out.iterations += 1;
            let (cand, kry) = self.frozen_step(&cur, &lin, p.max_krylov_iters, p.tol);
            out.krylov_iterations += kry;
            // damped step with backtracking; a full frozen-coefficient step
            // is taken when none reduces the residual by 1%
            let mut accepted = None;
            let mut theta = p.damping;
            for _ in 0..4 {
                let trial: Vec<f64> = cur.iter().zip(&cand).map(|(a, b)| a + theta * (b - a)).collect();
                let r = self.residual_of(&trial)?;
                if r <= 0.99 * res {
                    accepted = Some(trial);
                    break;
                }
                theta *= 0.5;
            }
            cur = match accepted {
                Some(t) => t,
                None => {
                    out.picard_steps += 1;
                    cand
                }
            };
            lin = self.linearize(&cur)?;
            let new_res = self.residual(&cur, &lin.value);
            let stalled = (new_res - res).abs() <= 1e-15 * res.max(1.0) && out.picard_steps > 0;
            res = new_res;
            if stalled {
                break;
            }
        }
        out.residual = res;
        out.converged = res <= p.tol;
        let vals = u.values_mut();
        for k in 0..g.len() {
            if g.has_value(k) {
                vals[k] = cur[k];
            }
        }
        Ok(out)
    }
}

/// `F(D^2 u, x)` at every interior node (NaN elsewhere).
pub(crate) fn operator_values(op: &EllipticOperator, u: &ScalarField) -> Result<Vec<f64>> {
    let g = u.grid();
    let h = g.h();
    let mut out = vec![f64::NAN; g.len()];
    for k in g.interior_nodes() {
        let [a, b, c] = node_hessian(u.values(), k, g.nx(), h * h);
        out[k] = op.evaluate(&SymMatrix::from_2x2(a, b, c), &g.point(k))?;
    }
    Ok(out)
}
