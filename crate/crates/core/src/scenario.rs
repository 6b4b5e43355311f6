//! Scenario files, runs and reports.
//!
//! A scenario names an operator, a grid, a solve mode, the arc datum and the
//! analyses to run. [`run`] solves it, runs the analyses, writes the artifacts
//! and returns a [`RunReport`], which is also written as `report.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::blowup::{analyze_blowup, Alternative, BlowupReport, BlowupThresholds, RescaleSchedule};
use crate::datum::Expression;
use crate::error::{Error, Result};
use crate::geometry::{
    complement_measure, cone_clearance_at, extract_gamma, extract_gamma_i, extract_gamma_refined,
    gamma_i_clearance, modulus_table_at, ComplementMeasure, ConeClearance, ModulusTable,
};
use crate::grid::{read_field_dump, write_field_dump, DumpHeader, HalfDiskGrid, ScalarField};
use crate::operator::{check_structure, OperatorSpec, StructureReport};
use crate::regularity::{bmo_from_dyadic, c11_sup, dyadic_profile, write_profiles_csv, BmoProfile, DyadicProfile, RegularityOptions};
use crate::solver::{solve, SolveMode, SolveReport, SolverConfig};

pub const TOOL_NAME: &str = "freebound";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

fn default_box() -> String {
    "half-disk".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Spacing; must be `1/n` with `n >= 2`.
    pub h: f64,
    #[serde(rename = "box", default = "default_box")]
    pub domain: String,
}

fn zero() -> f64 {
    0.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlowupAnalysis {
    /// `x1` of the flat-boundary center.
    #[serde(default = "zero")]
    pub center: f64,
    /// Rescaling radii; dyadic down to `8h` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(default)]
    pub thresholds: BlowupThresholds,
}

fn default_modulus_radii() -> Vec<f64> {
    vec![0.4, 0.2, 0.1]
}

fn half() -> f64 {
    0.5
}

fn tenth() -> f64 {
    0.1
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryAnalysis {
    #[serde(default = "zero")]
    pub center: f64,
    #[serde(default = "default_modulus_radii")]
    pub radii: Vec<f64>,
    #[serde(default = "half")]
    pub cone_epsilon: f64,
    #[serde(default = "tenth")]
    pub cone_rho: f64,
    /// Sub-cell vertices from the solution values; midpoints otherwise.
    #[serde(default = "yes")]
    pub refined: bool,
    /// Radius `s` for the measure of `B+_s \ Omega`.
    #[serde(default = "half")]
    pub complement_radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BmoAnalysis {
    #[serde(default = "zero")]
    pub center: f64,
    /// Right-hand side imposed on the fitted Hessians; the solve's `f = 1`
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    #[serde(default)]
    pub options: RegularityOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct C11Analysis {
    #[serde(default = "half")]
    pub radius: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Analyses {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blowup: Option<BlowupAnalysis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryAnalysis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bmo: Option<BmoAnalysis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c11: Option<C11Analysis>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub operator: OperatorSpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub mode: SolveMode,
    /// Boundary values on the arc, and the initial data for the solvers.
    pub datum: Expression,
    /// Closed-form reference solution; its max-norm error is reported.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<Expression>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub analyses: Analyses,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

fn json_error(context: &str, e: serde_json::Error) -> Error {
    Error::Parse {
        context: context.into(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| json_error("scenario", e))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Scenario::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn grid(&self) -> Result<Arc<HalfDiskGrid>> {
        if self.grid.domain != "half-disk" {
            return Err(Error::validation("grid.box", "only `half-disk` is supported"));
        }
        HalfDiskGrid::new(self.grid.h).map_err(|e| match e {
            Error::Validation { message, .. } => Error::validation("grid.h", message),
            other => other,
        })
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            mode: self.mode,
            ..self.solver.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::validation("name", "must not be empty"));
        }
        self.operator.build("operator")?;
        let g = self.grid()?;
        self.solver_config().validate()?;
        let h = g.h();
        let flat = |field: &str, c: f64| {
            if c.abs() < 1.0 - 8.0 * h {
                Ok(())
            } else {
                Err(Error::validation(field, "must be a flat-boundary point at least 8h from the arc"))
            }
        };
        let a = &self.analyses;
        if let Some(b) = &a.blowup {
            flat("analyses.blowup.center", b.center)?;
            if let Some(r) = &b.radii {
                RescaleSchedule::new(r.clone(), h)?;
            }
            b.thresholds.validate()?;
        }
        if let Some(b) = &a.boundary {
            flat("analyses.boundary.center", b.center)?;
            if b.radii.is_empty() || b.radii.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
                return Err(Error::validation("analyses.boundary.radii", "need at least one radius in (0, 1]"));
            }
            if !(b.cone_epsilon > 0.0) {
                return Err(Error::validation("analyses.boundary.cone_epsilon", "must be positive"));
            }
            if !(b.cone_rho > 0.0) {
                return Err(Error::validation("analyses.boundary.cone_rho", "must be positive"));
            }
            if !(b.complement_radius > 0.0 && b.complement_radius <= 1.0) {
                return Err(Error::validation("analyses.boundary.complement_radius", "must lie in (0, 1]"));
            }
        }
        if let Some(b) = &a.bmo {
            flat("analyses.bmo.center", b.center)?;
            b.options.validate()?;
            if b.target.is_some_and(|t| !t.is_finite()) {
                return Err(Error::validation("analyses.bmo.target", "must be finite"));
            }
        }
        if let Some(c) = &a.c11 {
            if !(c.radius > 0.0 && c.radius <= 1.0 - 2.0 * h) {
                return Err(Error::validation("analyses.c11.radius", "must lie in (0, 1 - 2h]"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Flagged,
    Failed,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::Flagged => 2,
            RunStatus::Failed => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupOutcome {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<BlowupReport>,
    /// Why the analysis could not run at the requested center.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryReport {
    pub refined: bool,
    pub gamma_vertices: usize,
    pub gamma_i_vertices: usize,
    pub modulus: ModulusTable,
    pub cone: ConeClearance,
    /// `None` when `Gamma_i` is empty.
    pub gamma_i_clearance: Option<f64>,
    pub complement: ComplementMeasure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub target: f64,
    pub dyadic: DyadicProfile,
    pub bmo: BmoProfile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct C11Report {
    pub radius: f64,
    pub value: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReports {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blowup: Option<BlowupOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bmo: Option<RegularityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c11: Option<C11Report>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub kind: String,
    /// Relative to the output directory.
    pub path: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub solve_ms: f64,
    pub analyses_ms: f64,
    pub total_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub scenario: Scenario,
    pub seed: u64,
    pub status: RunStatus,
    pub flags: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub structure: Option<StructureReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_error: Option<f64>,
    pub analyses: AnalysisReports,
    /// Flat numeric summary used by [`compare`].
    pub metrics: BTreeMap<String, f64>,
    pub artifacts: Vec<Artifact>,
    /// Absent in normalized reports.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Overrides the scenario's `output_dir`.
    pub out: Option<PathBuf>,
    /// Overrides the scenario's `seed`.
    pub seed: Option<u64>,
    /// Drop wall-clock timings so reports are byte-comparable.
    pub normalize: bool,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Output directory: `--out`, then the scenario's `output_dir`, then
/// `out/<name>`; relative paths resolve against the working directory.
pub fn output_dir(s: &Scenario, opts: &RunOptions) -> PathBuf {
    opts.out
        .clone()
        .or_else(|| s.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(&s.name))
}

struct Writer {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
}

impl Writer {
    fn file(&mut self, kind: &str, name: &str) -> PathBuf {
        self.artifacts.push(Artifact {
            kind: kind.into(),
            path: name.into(),
        });
        self.dir.join(name)
    }
}

/// Loads, solves and analyzes a scenario file. Parse and validation errors
/// are returned as `Err`; everything after that lands in the report.
pub fn run(path: &Path, opts: &RunOptions) -> Result<RunReport> {
    let scenario = Scenario::load(path)?;
    run_scenario(&scenario, opts)
}

pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<RunReport> {
    scenario.validate()?;
    let start = Instant::now();
    let seed = opts.seed.unwrap_or(scenario.seed);
    let op = scenario.operator.build("operator")?;
    let grid = scenario.grid()?;
    let cfg = scenario.solver_config();
    let dir = output_dir(scenario, opts);
    std::fs::create_dir_all(&dir)?;
    let mut w = Writer {
        dir: dir.clone(),
        artifacts: Vec::new(),
    };
    let mut report = RunReport {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        scenario: scenario.clone(),
        seed,
        status: RunStatus::Ok,
        flags: Vec::new(),
        error: None,
        structure: None,
        solve: None,
        exact_error: None,
        analyses: AnalysisReports::default(),
        metrics: BTreeMap::new(),
        artifacts: Vec::new(),
        timings: None,
    };
    let mut solve_ms = 0.0;
    let mut analyses_ms = 0.0;
    match execute(scenario, &op, &grid, &cfg, seed, &mut w, &mut report, &mut solve_ms, &mut analyses_ms) {
        Ok(()) => {
            if report.status != RunStatus::Failed && !report.flags.is_empty() {
                report.status = RunStatus::Flagged;
            }
        }
        Err(e) => {
            report.status = RunStatus::Failed;
            report.error = Some(e.to_string());
        }
    }
    if !opts.normalize {
        report.timings = Some(Timings {
            solve_ms,
            analyses_ms,
            total_ms: ms(start),
        });
    }
    let report_path = w.file("report", "report.json");
    report.artifacts = w.artifacts;
    std::fs::write(report_path, report.to_json()?)?;
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn execute(
    s: &Scenario,
    op: &crate::operator::EllipticOperator,
    grid: &Arc<HalfDiskGrid>,
    cfg: &SolverConfig,
    seed: u64,
    w: &mut Writer,
    report: &mut RunReport,
    solve_ms: &mut f64,
    analyses_ms: &mut f64,
) -> Result<()> {
    let structure = check_structure(op, cfg.structure_samples, seed)?;
    let ready = structure.solver_ready();
    let failed = structure.failed_hypotheses();
    report.structure = Some(structure);
    if !ready {
        return Err(Error::OperatorRejected(format!("failed {}", failed.join(", "))));
    }
    let m = &mut report.metrics;
    let t = Instant::now();
    let datum = s.datum.as_fn();
    let sol = solve(op, &datum, grid, cfg)?;
    *solve_ms = ms(t);
    let h = grid.h();
    let rep = &sol.report;
    m.insert("grid.h".into(), h);
    m.insert("solve.pde_residual".into(), rep.pde_residual);
    if let Some(c) = rep.complementarity_residual {
        m.insert("solve.complementarity_residual".into(), c);
    }
    m.insert("solve.active_set_size".into(), rep.active_set_size as f64);
    m.insert("solve.newton_iterations".into(), rep.newton_iterations as f64);
    m.insert("solve.min_value".into(), rep.min_value);
    if let Some(e) = &s.exact {
        let err = sol.u.max_error(e.as_fn());
        report.exact_error = Some(err);
        m.insert("exact.max_error".into(), err);
    }
    if !rep.converged {
        report.flags.push("solver did not converge".into());
        report.status = RunStatus::Failed;
    }
    if rep.k_exceeded {
        report.flags.push(format!("|D^2 u| off Omega exceeds K = {}", rep.k_bound));
    }
    if let Some(o) = &rep.oscillation {
        report.flags.push(format!(
            "active set oscillates between sizes {} and {} from iteration {}",
            o.set_a.len(),
            o.set_b.len(),
            o.iteration
        ));
    }
    report.solve = Some(sol.report.clone());
    write_field_dump(&sol.u, &w.file("field", "solution.fbd"))?;
    write_field_dump(&sol.active_set.indicator(), &w.file("field", "active_set.fbd"))?;

    let t = Instant::now();
    let a = &s.analyses;
    if let Some(b) = &a.blowup {
        let schedule = match &b.radii {
            Some(r) => RescaleSchedule::new(r.clone(), h)?,
            None => RescaleSchedule::dyadic(h),
        };
        let outcome = match analyze_blowup(&sol.u, op, b.center, &schedule, &b.thresholds) {
            Ok(r) => {
                let c = &r.classification;
                m.insert("blowup.m_estimate".into(), c.m_estimate);
                if let Some(f) = &c.representative {
                    m.insert("blowup.a".into(), f.a);
                    m.insert("blowup.b".into(), f.b);
                    m.insert("blowup.fit_residual".into(), f.residual);
                }
                m.insert("blowup.spread".into(), r.uniqueness.spread);
                if c.alternative == Alternative::Indeterminate {
                    report.flags.push(format!("blow-up indeterminate: {}", c.reasons.join("; ")));
                }
                if !r.uniqueness.consistent {
                    report.flags.push("blow-up fits disagree across radii".into());
                }
                BlowupOutcome {
                    report: Some(r),
                    skipped: None,
                }
            }
            Err(e @ (Error::GradientNotVanishing { .. } | Error::OutsideDomain { .. })) => {
                report.flags.push(format!("blow-up skipped: {e}"));
                BlowupOutcome {
                    report: None,
                    skipped: Some(e.to_string()),
                }
            }
            Err(e) => return Err(e),
        };
        report.analyses.blowup = Some(outcome);
    }
    if let Some(b) = &a.boundary {
        let gamma = if b.refined {
            extract_gamma_refined(&sol.u, &sol.active_set)
        } else {
            extract_gamma(&sol.active_set)
        };
        let gamma_i = extract_gamma_i(&sol.u, cfg.tol_u(h));
        let modulus = modulus_table_at(&gamma, &b.radii, b.center);
        let cone = cone_clearance_at(&gamma, b.cone_epsilon, b.cone_rho, b.center)?;
        let clearance = gamma_i_clearance(&gamma_i);
        let complement = complement_measure(&sol.active_set, b.complement_radius);
        for e in &modulus.entries {
            m.insert(format!("boundary.omega[{}]", e.r), e.omega);
        }
        if clearance.is_finite() {
            m.insert("boundary.gamma_i_clearance".into(), clearance);
        }
        m.insert("boundary.complement_measure".into(), complement.measure);
        if !cone.clear {
            report
                .flags
                .push(format!("{} Gamma vertices inside the cone x2 > {}|x1|", cone.witnesses.len(), b.cone_epsilon));
        }
        gamma.write_csv(&w.file("csv", "gamma.csv"))?;
        gamma_i.write_csv(&w.file("csv", "gamma_i.csv"))?;
        modulus.write_csv(&w.file("csv", "modulus.csv"))?;
        report.analyses.boundary = Some(BoundaryReport {
            refined: b.refined,
            gamma_vertices: gamma.vertex_count(),
            gamma_i_vertices: gamma_i.vertex_count(),
            modulus,
            cone,
            gamma_i_clearance: clearance.is_finite().then_some(clearance),
            complement,
        });
    }
    if let Some(b) = &a.bmo {
        let target = b.target.unwrap_or(1.0);
        let dyadic = dyadic_profile(&sol.u, [b.center, 0.0], op, target, &b.options)?;
        let bmo = bmo_from_dyadic(&sol.u, &dyadic);
        m.insert("bmo.max".into(), bmo.max);
        m.insert("dyadic.max_scaled_misfit".into(), dyadic.max_scaled_misfit);
        m.insert("dyadic.max_increment".into(), dyadic.max_increment);
        if !dyadic.bounded {
            report.flags.push(format!(
                "dyadic misfit exceeds C rho^(2k) with C = {}",
                dyadic.bound_constant
            ));
        }
        write_profiles_csv(&w.file("csv", "regularity.csv"), &dyadic, &bmo)?;
        report.analyses.bmo = Some(RegularityReport { target, dyadic, bmo });
    }
    if let Some(c) = &a.c11 {
        let value = c11_sup(&sol.u, c.radius)?;
        m.insert("c11.sup".into(), value);
        report.analyses.c11 = Some(C11Report { radius: c.radius, value });
    }
    *analyses_ms = ms(t);
    Ok(())
}

/// Runs the structure checks on an operator file.
pub fn validate_operator(path: &Path, samples: usize, seed: u64) -> Result<StructureReport> {
    let text = std::fs::read_to_string(path)?;
    if text.trim().is_empty() {
        return Err(Error::Parse {
            context: "operator".into(),
            line: 1,
            column: 1,
            message: "empty file".into(),
        });
    }
    let op = crate::operator::operator_from_json(&text)?;
    check_structure(&op, samples, seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub metric: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// `|delta| <= tolerance`, when a tolerance was given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub within_tolerance: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub scenario: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Metrics that differ; empty for identical reports.
    pub rows: Vec<MetricDelta>,
}

fn metrics_of(v: &Value) -> BTreeMap<String, f64> {
    v.get("metrics")
        .and_then(Value::as_object)
        .map(|m| m.iter().filter_map(|(k, x)| x.as_f64().map(|x| (k.clone(), x))).collect())
        .unwrap_or_default()
}

fn scenario_name(v: &Value, which: &str) -> Result<String> {
    v.pointer("/scenario/name")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| Error::validation(format!("{which}.scenario.name"), "missing"))
}

/// Per-metric differences `b - a` between two report JSON texts.
pub fn compare_json(a: &str, b: &str, tolerance: Option<f64>) -> Result<CompareReport> {
    let va: Value = serde_json::from_str(a).map_err(|e| json_error("report A", e))?;
    let vb: Value = serde_json::from_str(b).map_err(|e| json_error("report B", e))?;
    let (na, nb) = (scenario_name(&va, "A")?, scenario_name(&vb, "B")?);
    if na != nb {
        return Err(Error::Mismatch(format!("scenario `{na}` vs `{nb}`")));
    }
    let (ma, mb) = (metrics_of(&va), metrics_of(&vb));
    let mut keys: Vec<&String> = ma.keys().chain(mb.keys()).collect();
    keys.sort();
    keys.dedup();
    let rows = keys
        .into_iter()
        .filter_map(|k| {
            let (x, y) = (ma.get(k).copied(), mb.get(k).copied());
            if x == y {
                return None;
            }
            let delta = x.zip(y).map(|(x, y)| y - x);
            Some(MetricDelta {
                metric: k.clone(),
                a: x,
                b: y,
                delta,
                within_tolerance: tolerance.map(|t| delta.is_some_and(|d| d.abs() <= t)),
            })
        })
        .collect();
    Ok(CompareReport {
        scenario: na,
        tolerance,
        rows,
    })
}

pub fn compare(a: &Path, b: &Path, tolerance: Option<f64>) -> Result<CompareReport> {
    compare_json(&std::fs::read_to_string(a)?, &std::fs::read_to_string(b)?, tolerance)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldInfo {
    pub header: DumpHeader,
    pub cells: usize,
    pub finite_values: usize,
    pub min: f64,
    pub max: f64,
    pub max_abs: f64,
}

/// Header and value statistics of a field dump.
pub fn dump_info(path: &Path) -> Result<FieldInfo> {
    let mut text = String::new();
    {
        use std::io::BufRead;
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        r.read_line(&mut text)?;
    }
    let header: DumpHeader = serde_json::from_str(text.trim_end()).map_err(|e| json_error("dump header", e))?;
    let u: ScalarField = read_field_dump(path)?;
    let finite: Vec<f64> = u.values().iter().copied().filter(|v| v.is_finite()).collect();
    Ok(FieldInfo {
        cells: u.grid().cells(),
        finite_values: finite.len(),
        min: finite.iter().copied().fold(f64::INFINITY, f64::min),
        max: finite.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        max_abs: u.max_abs(),
        header,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const HALFSPACE: &str = r#"{
        "name": "halfspace",
        "operator": { "kind": "linear-trace" },
        "grid": { "h": 0.015625 },
        "mode": "obstacle",
        "datum": "0.5 * x2^2",
        "exact": "0.5 * x2^2",
        "analyses": { "blowup": {}, "boundary": {}, "bmo": {}, "c11": {} }
    }"#;

    #[test]
    fn parses_and_echoes() {
        let s = Scenario::from_json(HALFSPACE).unwrap();
        assert_eq!(s.mode, SolveMode::Obstacle);
        assert_eq!(s.analyses.boundary.as_ref().unwrap().radii, vec![0.4, 0.2, 0.1]);
        let back = Scenario::from_json(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn validation_names_fields() {
        let cases = [
            (HALFSPACE.replace("0.015625", "0.3"), "grid.h"),
            (HALFSPACE.replace("\"blowup\": {}", "\"blowup\": { \"center\": 0.99 }"), "analyses.blowup.center"),
            (HALFSPACE.replace("\"c11\": {}", "\"c11\": { \"radius\": 1.0 }"), "analyses.c11.radius"),
            (HALFSPACE.replace("\"linear-trace\"", "\"pucci-minus\""), "operator.lambda0"),
        ];
        for (text, field) in cases {
            match Scenario::from_json(&text) {
                Err(Error::Validation { field: f, .. }) => assert_eq!(f, field),
                other => panic!("{field}: {other:?}"),
            }
        }
    }

    #[test]
    fn parse_errors_locate_the_problem() {
        match Scenario::from_json("{\n  \"name\": \"x\",\n  oops\n}") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let bad = HALFSPACE.replace("0.5 * x2^2\",\n        \"exact", "0.5 * x3\",\n        \"exact");
        match Scenario::from_json(&bad) {
            Err(Error::Parse { message, .. }) => assert!(message.contains("x3"), "{message}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn halfspace_run_and_compare() {
        let dir = tempfile::tempdir().unwrap();
        let s = Scenario::from_json(HALFSPACE).unwrap();
        let opts = RunOptions {
            out: Some(dir.path().join("a")),
            seed: Some(3),
            normalize: true,
        };
        let r = run_scenario(&s, &opts).unwrap();
        assert_eq!(r.status, RunStatus::Ok, "{:?}", r.flags);
        assert!(r.exact_error.unwrap() < 1e-10);
        let blow = r.analyses.blowup.as_ref().unwrap().report.as_ref().unwrap();
        assert_eq!(blow.classification.alternative, Alternative::CaseI);
        for a in &r.artifacts {
            assert!(dir.path().join("a").join(&a.path).exists(), "{}", a.path);
        }
        let text_a = std::fs::read_to_string(dir.path().join("a/report.json")).unwrap();
        assert!(!text_a.contains("timings"));
        let r2 = run_scenario(&s, &RunOptions { out: Some(dir.path().join("b")), ..opts.clone() }).unwrap();
        let text_b = std::fs::read_to_string(dir.path().join("b/report.json")).unwrap();
        assert_eq!(text_a, text_b);
        assert_eq!(r2.metrics, r.metrics);
        assert!(compare_json(&text_a, &text_b, None).unwrap().rows.is_empty());

        let other = text_b.replace("\"name\": \"halfspace\"", "\"name\": \"other\"");
        assert!(matches!(compare_json(&text_a, &other, None), Err(Error::Mismatch(_))));

        let info = dump_info(&dir.path().join("a/solution.fbd")).unwrap();
        assert_eq!(info.cells, 64);
        assert!(info.max > 0.45 && info.max <= 0.5);
    }
}
