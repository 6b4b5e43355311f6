//! Parabolic rescalings `u(r x) / r^2` at a flat-boundary point and the
//! diagnostics built on them: half-plane quadratic fits `a x1 x2 + b x2^2`,
//! the profile of `|d1 u| / x2` on shrinking shells, and the two-case
//! classification of blow-up limits.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{gradient, interpolate_quadratic, HalfDiskGrid, NodeKind, Point, ScalarField};
use crate::operator::{EllipticOperator, SymMatrix};

/// Decreasing radii in `(0, 1)` bounded below by `8 h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescaleSchedule {
    radii: Vec<f64>,
}

impl RescaleSchedule {
    /// `r_k = 2^-k`, `k >= 1`, while `r_k >= 8 h`.
    pub fn dyadic(h: f64) -> Self {
        let radii = (1..)
            .map(|k| 0.5f64.powi(k))
            .take_while(|&r| r >= 8.0 * h)
            .collect();
        RescaleSchedule { radii }
    }

    pub fn new(radii: Vec<f64>, h: f64) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::validation("analyses.blowup.radii", "must not be empty"));
        }
        for w in radii.windows(2) {
            if w[1] >= w[0] {
                return Err(Error::validation("analyses.blowup.radii", "must be strictly decreasing"));
            }
        }
        if radii[0] >= 1.0 || radii[radii.len() - 1] < 8.0 * h * (1.0 - 1e-12) {
            return Err(Error::validation(
                "analyses.blowup.radii",
                format!("must lie in [8h, 1) = [{}, 1)", 8.0 * h),
            ));
        }
        Ok(RescaleSchedule { radii })
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }
}

/// A rescaled field; nodes whose preimage left the source domain are invalid
/// and hold 0.
#[derive(Clone, Debug)]
pub struct Rescaled {
    pub field: ScalarField,
    pub valid: Vec<bool>,
}

/// `v(x) = u(center + r x) / r^2` on the reference grid, by tensor quadratic
/// interpolation (exact for quadratic `u`).
pub fn rescale(u: &ScalarField, r: f64, reference: &Arc<HalfDiskGrid>, center: Option<Point>) -> Result<Rescaled> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::validation("r", format!("must lie in (0, 1), got {r}")));
    }
    let c = center.unwrap_or([0.0, 0.0]);
    let n = reference.len();
    let mut values = vec![0.0; n];
    let mut valid = vec![false; n];
    for k in 0..n {
        if !reference.has_value(k) {
            continue;
        }
        let x = reference.point(k);
        let p = [c[0] + r * x[0], c[1] + r * x[1]];
        if let Ok(v) = interpolate_quadratic(u, p) {
            values[k] = v / (r * r);
            valid[k] = true;
        }
    }
    Ok(Rescaled {
        field: ScalarField::new(reference.clone(), values)?,
        valid,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticBlowup {
    pub a: f64,
    pub b: f64,
    /// Max-norm misfit relative to `max(1, max |v|)`.
    pub residual: f64,
    pub radius: f64,
}

impl QuadraticBlowup {
    pub fn value(&self, p: Point) -> f64 {
        self.a * p[0] * p[1] + self.b * p[1] * p[1]
    }

    /// `D^2 (a x1 x2 + b x2^2)`.
    pub fn hessian(&self) -> SymMatrix {
        SymMatrix::from_2x2(0.0, self.a, 2.0 * self.b)
    }
}

pub const MIN_FIT_NODES: usize = 10;

/// Least-squares `(a, b)` over the interior nodes of `v`.
pub fn fit_halfplane_quadratic(v: &ScalarField) -> Result<QuadraticBlowup> {
    let all = vec![true; v.grid().len()];
    fit_halfplane_quadratic_masked(v, &all, 1.0)
}

/// As [`fit_halfplane_quadratic`], restricted to nodes with `mask` set;
/// `radius` is recorded in the result.
pub fn fit_halfplane_quadratic_masked(v: &ScalarField, mask: &[bool], radius: f64) -> Result<QuadraticBlowup> {
    let g = v.grid();
    let nodes: Vec<usize> = g.interior_nodes().filter(|&k| mask[k]).collect();
    if nodes.len() < MIN_FIT_NODES {
        return Err(Error::TooFewNodes {
            needed: MIN_FIT_NODES,
            found: nodes.len(),
        });
    }
    let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &k in &nodes {
        let p = g.point(k);
        let (p1, p2) = (p[0] * p[1], p[1] * p[1]);
        let val = v.at(k);
        s11 += p1 * p1;
        s12 += p1 * p2;
        s22 += p2 * p2;
        r1 += p1 * val;
        r2 += p2 * val;
    }
    let det = s11 * s22 - s12 * s12;
    if det.abs() <= 1e-14 * s11 * s22 {
        return Err(Error::TooFewNodes {
            needed: MIN_FIT_NODES,
            found: nodes.len(),
        });
    }
    let a = (r1 * s22 - r2 * s12) / det;
    let b = (s11 * r2 - s12 * r1) / det;
    let mut misfit: f64 = 0.0;
    let mut vmax: f64 = 0.0;
    for &k in &nodes {
        let p = g.point(k);
        misfit = misfit.max((v.at(k) - a * p[0] * p[1] - b * p[1] * p[1]).abs());
        vmax = vmax.max(v.at(k).abs());
    }
    Ok(QuadraticBlowup {
        a,
        b,
        residual: misfit / vmax.max(1.0),
        radius,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellValue {
    pub radius: f64,
    pub value: f64,
    pub nodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MProfile {
    pub shells: Vec<ShellValue>,
    /// Value on the smallest nonempty shell.
    pub smallest_shell: f64,
    /// Intercept of `value = M + c r` over the last three shells, clamped at 0.
    pub extrapolated: f64,
    pub model: String,
}

pub const EXTRAPOLATION_MODEL: &str = "value = M + c*r, least squares over the three smallest shells";

/// Max of `|d1 u| / x2` over nodes with `r/2 <= |x - center| <= r` and
/// `x2 >= h`, for each shell radius.
pub fn m_profile(u: &ScalarField, shells: &[f64], center: f64) -> MProfile {
    let g = u.grid();
    let h = g.h();
    let du = gradient(u);
    let c = [center, 0.0];
    let mut out = Vec::new();
    for &r in shells {
        let mut best: f64 = 0.0;
        let mut count = 0;
        for k in 0..g.len() {
            if !g.has_value(k) {
                continue;
            }
            let p = g.point(k);
            let d = (p[0] - c[0]).hypot(p[1]);
            if p[1] < h - 1e-12 || d < 0.5 * r - 1e-12 || d > r + 1e-12 {
                continue;
            }
            count += 1;
            best = best.max(du.at(k)[0].abs() / p[1]);
        }
        if count > 0 {
            out.push(ShellValue {
                radius: r,
                value: best,
                nodes: count,
            });
        }
    }
    let mut by_radius = out.clone();
    by_radius.sort_by(|a, b| a.radius.total_cmp(&b.radius));
    let smallest_shell = by_radius.first().map_or(0.0, |s| s.value);
    let tail: Vec<&ShellValue> = by_radius.iter().take(3).collect();
    let extrapolated = if tail.len() >= 2 {
        let n = tail.len() as f64;
        let mr = tail.iter().map(|s| s.radius).sum::<f64>() / n;
        let mv = tail.iter().map(|s| s.value).sum::<f64>() / n;
        let sxy: f64 = tail.iter().map(|s| (s.radius - mr) * (s.value - mv)).sum();
        let sxx: f64 = tail.iter().map(|s| (s.radius - mr).powi(2)).sum();
        (mv - sxy / sxx * mr).max(0.0)
    } else {
        smallest_shell
    };
    MProfile {
        shells: out,
        smallest_shell,
        extrapolated,
        model: EXTRAPOLATION_MODEL.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlowupThresholds {
    pub fit_accept: f64,
    pub m_zero_tol: f64,
    pub a_zero_tol: f64,
    pub uniq_tol: f64,
    /// Allowed `|F(D^2 u0) - 1|` for the fitted limit.
    pub limit_equation_tol: f64,
}

impl Default for BlowupThresholds {
    fn default() -> Self {
        BlowupThresholds {
            fit_accept: 0.05,
            m_zero_tol: 0.05,
            a_zero_tol: 0.05,
            uniq_tol: 0.05,
            limit_equation_tol: 0.05,
        }
    }
}

impl BlowupThresholds {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("fit_accept", self.fit_accept),
            ("m_zero_tol", self.m_zero_tol),
            ("a_zero_tol", self.a_zero_tol),
            ("uniq_tol", self.uniq_tol),
            ("limit_equation_tol", self.limit_equation_tol),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("analyses.blowup.thresholds.{name}"), "must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Alternative {
    /// Every blow-up is `b x2^2` with `b > 0`.
    #[serde(rename = "case_i")]
    CaseI,
    /// A blow-up `a x1 x2 + b x2^2` with `a != 0` exists.
    #[serde(rename = "case_ii")]
    CaseII,
    #[serde(rename = "indeterminate")]
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub alternative: Alternative,
    pub m_estimate: f64,
    /// Fit at the smallest accepted radius.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub representative: Option<QuadraticBlowup>,
    pub accepted_fits: usize,
    pub reasons: Vec<String>,
}

fn accepted<'a>(fits: &'a [QuadraticBlowup], t: &BlowupThresholds) -> Vec<&'a QuadraticBlowup> {
    let mut out: Vec<&QuadraticBlowup> = fits.iter().filter(|f| f.residual <= t.fit_accept).collect();
    out.sort_by(|a, b| b.radius.total_cmp(&a.radius));
    out
}

pub fn classify_blowup(profile: &MProfile, fits: &[QuadraticBlowup], t: &BlowupThresholds) -> Classification {
    let acc = accepted(fits, t);
    let m = profile.extrapolated;
    let mut reasons = Vec::new();
    let mut result = Classification {
        alternative: Alternative::Indeterminate,
        m_estimate: m,
        representative: acc.last().map(|f| **f),
        accepted_fits: acc.len(),
        reasons: Vec::new(),
    };
    if acc.len() < 3 {
        reasons.push(format!(
            "only {} of {} fits have residual <= {}",
            acc.len(),
            fits.len(),
            t.fit_accept
        ));
        result.reasons = reasons;
        return result;
    }
    let last3 = &acc[acc.len() - 3..];
    let a_max = acc.iter().map(|f| f.a.abs()).fold(0.0, f64::max);
    let b_min = acc.iter().map(|f| f.b).fold(f64::INFINITY, f64::min);
    let a_spread = last3.iter().map(|f| f.a).fold(f64::NEG_INFINITY, f64::max)
        - last3.iter().map(|f| f.a).fold(f64::INFINITY, f64::min);
    let a_last = last3[2].a;
    if m <= t.m_zero_tol {
        if a_max <= t.a_zero_tol && b_min > 0.0 {
            result.alternative = Alternative::CaseI;
        } else {
            if a_max > t.a_zero_tol {
                reasons.push(format!("M estimate {m:.4} is small but max |a| = {a_max:.4} > {}", t.a_zero_tol));
            }
            if b_min <= 0.0 {
                reasons.push(format!("fitted b = {b_min:.4} is not positive"));
            }
        }
    } else if a_spread <= t.uniq_tol && a_last.abs() > t.a_zero_tol {
        result.alternative = Alternative::CaseII;
    } else {
        if a_spread > t.uniq_tol {
            reasons.push(format!("a does not stabilize: spread {a_spread:.4} > {}", t.uniq_tol));
        }
        if a_last.abs() <= t.a_zero_tol {
            reasons.push(format!("M estimate {m:.4} is positive but |a| = {:.4} is small", a_last.abs()));
        }
    }
    result.reasons = reasons;
    result
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub accepted_fits: usize,
    /// Max pairwise distance between accepted `(a, b)`.
    pub spread: f64,
    pub consistent: bool,
    /// `F(D^2 u0)` for the fit at the smallest radius.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit_equation_value: Option<f64>,
    pub limit_equation_ok: bool,
}

pub fn uniqueness_diagnostic(
    fits: &[QuadraticBlowup],
    op: &EllipticOperator,
    t: &BlowupThresholds,
) -> Result<UniquenessReport> {
    let acc = accepted(fits, t);
    let mut spread: f64 = 0.0;
    for (i, p) in acc.iter().enumerate() {
        for q in &acc[i + 1..] {
            spread = spread.max((p.a - q.a).hypot(p.b - q.b));
        }
    }
    let limit = match acc.last() {
        Some(f) => Some(op.evaluate(&f.hessian(), &[0.0, 0.0])?),
        None => None,
    };
    Ok(UniquenessReport {
        accepted_fits: acc.len(),
        spread,
        consistent: acc.len() >= 3 && spread <= t.uniq_tol,
        limit_equation_value: limit,
        limit_equation_ok: limit.is_some_and(|v| (v - 1.0).abs() <= t.limit_equation_tol),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub center: Point,
    pub gradient_norm: f64,
    pub fits: Vec<QuadraticBlowup>,
    pub m_profile: MProfile,
    pub classification: Classification,
    pub uniqueness: UniquenessReport,
    pub thresholds: BlowupThresholds,
}

/// Full blow-up analysis at the flat-boundary point `(center, 0)`. Refuses
/// centers where `|grad u| > h`.
pub fn analyze_blowup(
    u: &ScalarField,
    op: &EllipticOperator,
    center: f64,
    schedule: &RescaleSchedule,
    t: &BlowupThresholds,
) -> Result<BlowupReport> {
    let g = u.grid();
    let h = g.h();
    let node = g.nearest([center, 0.0]);
    if g.kind(node) != NodeKind::Flat {
        return Err(Error::OutsideDomain { x1: center, x2: 0.0 });
    }
    let norm = gradient(u).norm_at(node);
    if norm > h {
        return Err(Error::GradientNotVanishing { norm, limit: h });
    }
    let c = [center, 0.0];
    let mut fits = Vec::new();
    for &r in schedule.radii() {
        let v = rescale(u, r, g, Some(c))?;
        match fit_halfplane_quadratic_masked(&v.field, &v.valid, r) {
            Ok(f) => fits.push(f),
            Err(Error::TooFewNodes { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    let profile = m_profile(u, schedule.radii(), center);
    let classification = classify_blowup(&profile, &fits, t);
    let uniqueness = uniqueness_diagnostic(&fits, op, t)?;
    Ok(BlowupReport {
        center: c,
        gradient_norm: norm,
        fits,
        m_profile: profile,
        classification,
        uniqueness,
        thresholds: *t,
    })
}
