//! Solvers for `F(D^2 u) = f` with Dirichlet data, the obstacle
//! complementarity problem and the no-sign active-set problem.

mod engine;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{gradient, hessian, interpolate_quadratic, HalfDiskGrid, NodeKind, Point, ScalarField, NEIGHBORS};
use crate::operator::{check_structure, EllipticOperator};

use engine::{operator_values, Engine, NewtonParams, Row};

/// Boundary datum `g(x)`.
pub trait Datum {
    fn value(&self, p: Point) -> f64;
}

impl<F: Fn(Point) -> f64> Datum for F {
    fn value(&self, p: Point) -> f64 {
        self(p)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMode {
    #[default]
    Obstacle,
    Nosign,
    Dirichlet,
}

/// Starting iterate in the interior.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialGuess {
    /// Discrete harmonic extension of the boundary values.
    #[default]
    Harmonic,
    /// The datum expression evaluated at interior nodes.
    Datum,
    Zero,
}

/// First active set of the no-sign iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialActiveSet {
    /// Thresholds applied to the datum evaluated at interior nodes.
    #[default]
    Datum,
    /// Every interior node.
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Taken from the scenario's top-level `mode`, not from this block.
    #[serde(skip)]
    pub mode: SolveMode,
    /// Bound on `|D^2 u|` off `Omega`; diagnostic only.
    #[serde(rename = "K", alias = "k_bound")]
    pub k_bound: f64,
    pub max_outer_iters: usize,
    pub max_newton_iters: usize,
    pub newton_damping: f64,
    pub residual_tol: f64,
    /// Defaults to `h^2 / 8`.
    pub active_set_tol_u: Option<f64>,
    /// Defaults to `h / 2`.
    pub active_set_tol_grad: Option<f64>,
    pub initial_guess: InitialGuess,
    pub initial_active_set: InitialActiveSet,
    pub structure_samples: usize,
    pub max_krylov_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mode: SolveMode::Obstacle,
            k_bound: 10.0,
            max_outer_iters: 60,
            max_newton_iters: 80,
            newton_damping: 1.0,
            residual_tol: 1e-8,
            active_set_tol_u: None,
            active_set_tol_grad: None,
            initial_guess: InitialGuess::Harmonic,
            initial_active_set: InitialActiveSet::Datum,
            structure_samples: 256,
            max_krylov_iters: 20_000,
        }
    }
}

impl SolverConfig {
    pub fn with_mode(mode: SolveMode) -> Self {
        SolverConfig {
            mode,
            ..SolverConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::validation(format!("solver.{name}"), format!("must be positive, got {v}")))
            }
        };
        positive("K", self.k_bound)?;
        positive("residual_tol", self.residual_tol)?;
        if let Some(t) = self.active_set_tol_u {
            positive("active_set_tol_u", t)?;
        }
        if let Some(t) = self.active_set_tol_grad {
            positive("active_set_tol_grad", t)?;
        }
        if !(self.newton_damping > 0.0 && self.newton_damping <= 1.0) {
            return Err(Error::validation("solver.newton_damping", "must lie in (0, 1]"));
        }
        for (name, v) in [
            ("max_outer_iters", self.max_outer_iters),
            ("max_newton_iters", self.max_newton_iters),
            ("max_krylov_iters", self.max_krylov_iters),
        ] {
            if v == 0 {
                return Err(Error::validation(format!("solver.{name}"), "must be at least 1"));
            }
        }
        Ok(())
    }

    pub fn tol_u(&self, h: f64) -> f64 {
        self.active_set_tol_u.unwrap_or(h * h / 8.0)
    }

    pub fn tol_grad(&self, h: f64) -> f64 {
        self.active_set_tol_grad.unwrap_or(h / 2.0)
    }

    fn newton(&self) -> NewtonParams {
        NewtonParams {
            tol: self.residual_tol,
            max_iters: self.max_newton_iters,
            damping: self.newton_damping,
            max_krylov_iters: self.max_krylov_iters,
        }
    }
}

/// Discrete `Omega`: a subset of the interior nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct ActiveSet {
    grid: Arc<HalfDiskGrid>,
    mask: Vec<bool>,
}

impl ActiveSet {
    pub fn empty(grid: Arc<HalfDiskGrid>) -> Self {
        let n = grid.len();
        ActiveSet {
            grid,
            mask: vec![false; n],
        }
    }

    pub fn all_interior(grid: Arc<HalfDiskGrid>) -> Self {
        let mask = (0..grid.len()).map(|k| grid.kind(k) == NodeKind::Interior).collect();
        ActiveSet { grid, mask }
    }

    /// `{u > tol_u}` on the interior.
    pub fn positive(u: &ScalarField, tol_u: f64) -> Self {
        let g = u.grid().clone();
        let mask = (0..g.len())
            .map(|k| g.kind(k) == NodeKind::Interior && u.at(k) > tol_u)
            .collect();
        ActiveSet { grid: g, mask }
    }

    /// `{|u| > tol_u} union {|grad u| > tol_grad}` on the interior.
    pub fn from_thresholds(u: &ScalarField, tol_u: f64, tol_grad: f64) -> Self {
        let g = u.grid().clone();
        let du = gradient(u);
        let mask = (0..g.len())
            .map(|k| g.kind(k) == NodeKind::Interior && (u.at(k).abs() > tol_u || du.norm_at(k) > tol_grad))
            .collect();
        ActiveSet { grid: g, mask }
    }

    pub fn grid(&self) -> &Arc<HalfDiskGrid> {
        &self.grid
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.mask[idx]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    pub fn nodes(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&k| self.mask[k]).collect()
    }

    /// Indicator of `Omega` as a field (1 inside, 0 elsewhere).
    pub fn indicator(&self) -> ScalarField {
        let g = self.grid.clone();
        let mask = &self.mask;
        let values = (0..g.len()).map(|k| if mask[k] { 1.0 } else { 0.0 }).collect();
        ScalarField::new(g, values).expect("finite indicator")
    }
}

/// Two active sets the no-sign iteration alternated between.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Oscillation {
    pub iteration: usize,
    pub set_a: Vec<usize>,
    pub set_b: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub mode: SolveMode,
    pub converged: bool,
    /// Max `|F(D^2 u) - f|` over the nodes where the equation is imposed.
    pub pde_residual: f64,
    /// Max `|min(1 - F(D^2 u), u)|` over the interior (obstacle mode).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub complementarity_residual: Option<f64>,
    pub min_value: f64,
    /// Max spectral norm of `D^2 u` at nodes whose stencil avoids `Omega`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub off_omega_hessian_max: Option<f64>,
    pub k_bound: f64,
    pub k_exceeded: bool,
    pub newton_iterations: usize,
    pub picard_steps: usize,
    pub outer_iterations: usize,
    pub krylov_iterations: usize,
    pub active_set_size: usize,
    pub tol_u: f64,
    pub tol_grad: f64,
    pub residual_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oscillation: Option<Oscillation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Result of a free boundary solve.
#[derive(Clone, Debug)]
pub struct Solution {
    pub u: ScalarField,
    pub active_set: ActiveSet,
    pub report: SolveReport,
}

fn require_structure(op: &EllipticOperator, cfg: &SolverConfig) -> Result<()> {
    if op.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: op.dim(),
        });
    }
    let report = check_structure(op, cfg.structure_samples, 0)?;
    if !report.solver_ready() {
        return Err(Error::OperatorRejected(format!(
            "{} fails {}",
            op.kind().name(),
            report.failed_hypotheses().join(", ")
        )));
    }
    Ok(())
}

/// Boundary rows: flat nodes get `flat(x)`, arc nodes the datum, exterior 0.
fn boundary_rows(grid: &HalfDiskGrid, g: &dyn Datum, flat_from_datum: bool) -> Vec<Row> {
    (0..grid.len())
        .map(|k| match grid.kind(k) {
            NodeKind::Exterior => Row::Fixed(0.0),
            NodeKind::Flat if flat_from_datum => Row::Fixed(g.value(grid.point(k))),
            NodeKind::Flat => Row::Fixed(0.0),
            NodeKind::Arc => Row::Fixed(g.value(grid.point(k))),
            NodeKind::Interior => Row::Pde(0.0),
        })
        .collect()
}

fn initial_field(
    grid: &Arc<HalfDiskGrid>,
    rows: &[Row],
    g: &dyn Datum,
    guess: InitialGuess,
    cfg: &SolverConfig,
) -> Result<ScalarField> {
    let mut u = ScalarField::from_fn(grid.clone(), |p| match guess {
        InitialGuess::Datum => g.value(p),
        _ => 0.0,
    });
    for (k, row) in rows.iter().enumerate() {
        if let (Row::Fixed(v), true) = (row, grid.has_value(k)) {
            u.values_mut()[k] = *v;
        }
    }
    if guess == InitialGuess::Harmonic {
        let laplace = EllipticOperator::linear_trace(2);
        let harmonic_rows: Vec<Row> = rows
            .iter()
            .map(|r| match r {
                Row::Fixed(v) => Row::Fixed(*v),
                _ => Row::Pde(0.0),
            })
            .collect();
        let engine = Engine::new(&laplace, grid, harmonic_rows);
        let mut params = cfg.newton();
        params.max_iters = params.max_iters.max(2);
        engine.solve(&mut u, params)?;
    }
    Ok(u)
}

fn off_omega_hessian(u: &ScalarField, omega: &ActiveSet) -> Option<f64> {
    let g = u.grid();
    let d2 = hessian(u);
    let nodes: Vec<usize> = g
        .interior_nodes()
        .filter(|&k| {
            !omega.contains(k)
                && NEIGHBORS
                    .iter()
                    .all(|&(di, dj)| g.offset(k, di, dj).is_some_and(|m| !omega.contains(m)))
        })
        .collect();
    if nodes.is_empty() {
        None
    } else {
        Some(d2.max_spectral_norm(nodes))
    }
}

fn min_value(u: &ScalarField) -> f64 {
    u.values().iter().filter(|v| !v.is_nan()).fold(f64::INFINITY, |m, &v| m.min(v))
}

fn empty_report(mode: SolveMode, cfg: &SolverConfig, h: f64) -> SolveReport {
    SolveReport {
        mode,
        converged: false,
        pde_residual: 0.0,
        complementarity_residual: None,
        min_value: 0.0,
        off_omega_hessian_max: None,
        k_bound: cfg.k_bound,
        k_exceeded: false,
        newton_iterations: 0,
        picard_steps: 0,
        outer_iterations: 0,
        krylov_iterations: 0,
        active_set_size: 0,
        tol_u: cfg.tol_u(h),
        tol_grad: cfg.tol_grad(h),
        residual_tol: cfg.residual_tol,
        oscillation: None,
        note: None,
    }
}

/// `F(D^2 u) = f` at interior nodes, `u = g` on the flat and arc nodes.
pub fn solve_dirichlet(
    op: &EllipticOperator,
    f: &ScalarField,
    g: &dyn Datum,
    cfg: &SolverConfig,
) -> Result<(ScalarField, SolveReport)> {
    cfg.validate()?;
    require_structure(op, cfg)?;
    let grid = f.grid().clone();
    let mut rows = boundary_rows(&grid, g, true);
    for (k, row) in rows.iter_mut().enumerate() {
        if let Row::Pde(_) = row {
            *row = Row::Pde(f.at(k));
        }
    }
    let mut u = initial_field(&grid, &rows, g, cfg.initial_guess, cfg)?;
    let outcome = Engine::new(op, &grid, rows).solve(&mut u, cfg.newton())?;
    let values = operator_values(op, &u)?;
    let pde_residual = grid
        .interior_nodes()
        .map(|k| (values[k] - f.at(k)).abs())
        .fold(0.0, f64::max);
    let mut report = empty_report(SolveMode::Dirichlet, cfg, grid.h());
    report.converged = outcome.converged && pde_residual <= cfg.residual_tol;
    report.pde_residual = pde_residual;
    report.min_value = min_value(&u);
    report.newton_iterations = outcome.iterations;
    report.picard_steps = outcome.picard_steps;
    report.krylov_iterations = outcome.krylov_iterations;
    report.outer_iterations = 1;
    report.active_set_size = grid.interior_nodes().count();
    Ok((u, report))
}

/// Obstacle problem `min(1 - F(D^2 u), u) = 0` with `u = g >= 0` on the arc
/// and `u = 0` on the flat boundary.
pub fn solve_obstacle(
    op: &EllipticOperator,
    g: &dyn Datum,
    grid: &Arc<HalfDiskGrid>,
    cfg: &SolverConfig,
) -> Result<Solution> {
    cfg.validate()?;
    require_structure(op, cfg)?;
    let h = grid.h();
    if let Some(k) = grid
        .nodes_of(NodeKind::Arc)
        .find(|&k| g.value(grid.point(k)) < -cfg.residual_tol)
    {
        let p = grid.point(k);
        return Err(Error::InconsistentDatum(format!(
            "obstacle mode needs g >= 0 on the arc, g({:.4}, {:.4}) = {:.3e}",
            p[0],
            p[1],
            g.value(p)
        )));
    }
    let mut rows = boundary_rows(grid, g, false);
    let mut u = initial_field(grid, &rows, g, cfg.initial_guess, cfg)?;
    for row in rows.iter_mut() {
        if let Row::Pde(_) = row {
            *row = Row::Obstacle(1.0);
        }
    }
    let outcome = Engine::new(op, grid, rows).solve(&mut u, cfg.newton())?;
    let values = operator_values(op, &u)?;
    let tol_u = cfg.tol_u(h);
    let omega = ActiveSet::positive(&u, tol_u);
    let mut report = empty_report(SolveMode::Obstacle, cfg, h);
    let comp = grid
        .interior_nodes()
        .map(|k| (1.0 - values[k]).min(u.at(k)).abs())
        .fold(0.0, f64::max);
    report.complementarity_residual = Some(comp);
    report.pde_residual = omega
        .nodes()
        .into_iter()
        .map(|k| (values[k] - 1.0).abs())
        .fold(0.0, f64::max);
    report.min_value = min_value(&u);
    report.converged = outcome.converged && comp <= cfg.residual_tol && report.min_value >= -cfg.residual_tol;
    report.newton_iterations = outcome.iterations;
    report.picard_steps = outcome.picard_steps;
    report.krylov_iterations = outcome.krylov_iterations;
    report.outer_iterations = 1;
    report.active_set_size = omega.len();
    report.off_omega_hessian_max = off_omega_hessian(&u, &omega);
    report.k_exceeded = report.off_omega_hessian_max.is_some_and(|m| m > cfg.k_bound);
    Ok(Solution {
        u,
        active_set: omega,
        report,
    })
}

/// No-sign problem: iterate `Omega_{k+1} = {|u_k| > tol_u} union
/// {|grad u_k| > tol_grad}`, solving `F(D^2 u) = 1` on `Omega_k` with `u`
/// pinned to 0 on the rest of the interior.
pub fn solve_nosign(
    op: &EllipticOperator,
    g: &dyn Datum,
    grid: &Arc<HalfDiskGrid>,
    cfg: &SolverConfig,
) -> Result<Solution> {
    cfg.validate()?;
    require_structure(op, cfg)?;
    let h = grid.h();
    let (tol_u, tol_grad) = (cfg.tol_u(h), cfg.tol_grad(h));
    let base = boundary_rows(grid, g, false);
    let datum_max = grid
        .nodes_of(NodeKind::Arc)
        .map(|k| g.value(grid.point(k)).abs())
        .fold(0.0, f64::max);

    let mut u = initial_field(grid, &base, g, cfg.initial_guess, cfg)?;
    let mut omega = match cfg.initial_active_set {
        InitialActiveSet::All => ActiveSet::all_interior(grid.clone()),
        InitialActiveSet::Datum => {
            let extension = ScalarField::from_fn(grid.clone(), |p| g.value(p));
            ActiveSet::from_thresholds(&extension, tol_u, tol_grad)
        }
    };
    let mut previous: Option<ActiveSet> = None;
    let mut report = empty_report(SolveMode::Nosign, cfg, h);
    let mut inner_ok = false;
    let mut stable = false;

    for outer in 1..=cfg.max_outer_iters {
        report.outer_iterations = outer;
        let rows: Vec<Row> = base
            .iter()
            .enumerate()
            .map(|(k, r)| match r {
                Row::Pde(_) if omega.contains(k) => Row::Pde(1.0),
                Row::Pde(_) => Row::Fixed(0.0),
                other => *other,
            })
            .collect();
        let outcome = Engine::new(op, grid, rows).solve(&mut u, cfg.newton())?;
        report.newton_iterations += outcome.iterations;
        report.picard_steps += outcome.picard_steps;
        report.krylov_iterations += outcome.krylov_iterations;
        inner_ok = outcome.converged;

        let next = ActiveSet::from_thresholds(&u, tol_u, tol_grad);
        if outer == 1 && next.is_empty() && datum_max > 0.0 {
            return Err(Error::InconsistentDatum(format!(
                "active set is empty after the first iteration although max |g| = {datum_max:.3e}"
            )));
        }
        if next == omega {
            stable = true;
            break;
        }
        if previous.as_ref() == Some(&next) {
            report.oscillation = Some(Oscillation {
                iteration: outer,
                set_a: omega.nodes(),
                set_b: next.nodes(),
            });
            report.note = Some("active set alternates between two states".into());
            break;
        }
        previous = Some(std::mem::replace(&mut omega, next));
    }

    let values = operator_values(op, &u)?;
    report.pde_residual = omega
        .nodes()
        .into_iter()
        .map(|k| (values[k] - 1.0).abs())
        .fold(0.0, f64::max);
    report.min_value = min_value(&u);
    report.active_set_size = omega.len();
    report.converged = stable && inner_ok && report.pde_residual <= cfg.residual_tol;
    if !stable && report.oscillation.is_none() {
        report.note = Some("active set did not stabilize within max_outer_iters".into());
    }
    report.off_omega_hessian_max = off_omega_hessian(&u, &omega);
    report.k_exceeded = report.off_omega_hessian_max.is_some_and(|m| m > cfg.k_bound);
    Ok(Solution {
        u,
        active_set: omega,
        report,
    })
}

/// Dispatches on `cfg.mode`; dirichlet mode uses `f = 1`.
pub fn solve(op: &EllipticOperator, g: &dyn Datum, grid: &Arc<HalfDiskGrid>, cfg: &SolverConfig) -> Result<Solution> {
    match cfg.mode {
        SolveMode::Obstacle => solve_obstacle(op, g, grid, cfg),
        SolveMode::Nosign => solve_nosign(op, g, grid, cfg),
        SolveMode::Dirichlet => {
            let f = ScalarField::from_fn(grid.clone(), |_| 1.0);
            let (u, report) = solve_dirichlet(op, &f, g, cfg)?;
            let active_set = ActiveSet::all_interior(grid.clone());
            Ok(Solution { u, active_set, report })
        }
    }
}

/// Number of sample points on each half circle.
const HALF_CIRCLE_SAMPLES: usize = 720;

/// `(r, sup_{dB_r(center) cap {x2 >= 0}} u / r^2)` for each radius whose half
/// circle stays inside the domain; other radii are omitted.
pub fn nondegeneracy_profile(u: &ScalarField, center: f64, radii: &[f64]) -> Vec<(f64, f64)> {
    radii
        .iter()
        .filter(|&&r| r > 0.0 && center.abs() + r < 1.0)
        .filter_map(|&r| {
            let mut best = f64::NEG_INFINITY;
            for s in 0..=HALF_CIRCLE_SAMPLES {
                let theta = std::f64::consts::PI * s as f64 / HALF_CIRCLE_SAMPLES as f64;
                let p = [center + r * theta.cos(), (r * theta.sin()).max(0.0)];
                best = best.max(interpolate_quadratic(u, p).ok()?);
            }
            Some((r, best / (r * r)))
        })
        .collect()
}

#[cfg(test)]
mod tests;
