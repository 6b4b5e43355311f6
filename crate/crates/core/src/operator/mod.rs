//! Fully nonlinear uniformly elliptic operators `F(M, x)` acting on symmetric
//! matrices: evaluation, linearization, the Pucci extremal operators, and a
//! JSON description format.
//!
//! Every operator is of the form
//!
//! ```text
//! F(M, x) = (1 + cbar * |x|^alphabar) * F_kind(M)
//! ```
//!
//! where the modulation factor is present only when the operator carries an
//! [`XDependence`] descriptor. `F_kind` is one of the built-in kinds below.

mod matrix;
mod structure;

pub use matrix::{eigen, Eigen, SymMatrix};
pub use structure::{
    check_structure, x_modulus_beta, Concavity, HypothesisCheck, StructureReport, Witness,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used to detect eigenvalue signs and active-policy ties.
const TIE_TOL: f64 = 1e-12;

/// Ellipticity constants `0 < lambda0 <= lambda1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipticityBounds {
    lambda0: f64,
    lambda1: f64,
}

impl EllipticityBounds {
    pub fn new(lambda0: f64, lambda1: f64) -> Result<Self> {
        if !(lambda0.is_finite() && lambda1.is_finite()) || lambda0 <= 0.0 {
            return Err(Error::validation("lambda0", "must be a positive finite number"));
        }
        if lambda1 < lambda0 {
            return Err(Error::validation(
                "lambda1",
                format!("must be >= lambda0 ({lambda0}), got {lambda1}"),
            ));
        }
        Ok(EllipticityBounds { lambda0, lambda1 })
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    /// `lambda0 * I <= a <= lambda1 * I` up to a relative rounding slack.
    pub fn admits(&self, a: &SymMatrix) -> bool {
        let (lo, hi) = a.eigen_range();
        let slack = 1e-12 * self.lambda1.max(1.0);
        lo >= self.lambda0 - slack && hi <= self.lambda1 + slack
    }
}

/// `sup { tr(N M) : lambda0 I <= N <= lambda1 I }`.
pub fn pucci_plus(m: &SymMatrix, bounds: EllipticityBounds) -> f64 {
    m.eigenvalues()
        .iter()
        .map(|&mu| if mu > 0.0 { bounds.lambda1 * mu } else { bounds.lambda0 * mu })
        .sum()
}

/// `inf { tr(N M) : lambda0 I <= N <= lambda1 I }`.
pub fn pucci_minus(m: &SymMatrix, bounds: EllipticityBounds) -> f64 {
    m.eigenvalues()
        .iter()
        .map(|&mu| if mu > 0.0 { bounds.lambda0 * mu } else { bounds.lambda1 * mu })
        .sum()
}

/// Hölder modulation of an operator in the space variable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XDependence {
    pub cbar: f64,
    pub alphabar: f64,
}

impl XDependence {
    pub fn new(cbar: f64, alphabar: f64) -> Result<Self> {
        if !(cbar.is_finite() && cbar >= 0.0) {
            return Err(Error::validation("x_dependence.cbar", "must be finite and >= 0"));
        }
        if !(alphabar > 0.0 && alphabar <= 1.0) {
            return Err(Error::validation("x_dependence.alphabar", "must lie in (0, 1]"));
        }
        Ok(XDependence { cbar, alphabar })
    }

    /// `1 + cbar |x|^alphabar`
    pub fn factor(&self, x: &[f64]) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        1.0 + self.cbar * r.powf(self.alphabar)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum OperatorKind {
    /// `tr M`
    LinearTrace,
    PucciPlus,
    PucciMinus,
    /// `min_i tr(A_i M)` over a finite family of admissible coefficient matrices.
    BellmanMin(Vec<SymMatrix>),
    /// `tr(T M)` for an arbitrary symmetric coefficient table `T`; not
    /// necessarily elliptic, used to probe the structure checks.
    CustomTable(SymMatrix),
}

impl OperatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            OperatorKind::LinearTrace => "linear-trace",
            OperatorKind::PucciPlus => "pucci-plus",
            OperatorKind::PucciMinus => "pucci-minus",
            OperatorKind::BellmanMin(_) => "bellman-min",
            OperatorKind::CustomTable(_) => "custom-table",
        }
    }
}

/// A fully nonlinear operator together with its declared ellipticity bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct EllipticOperator {
    kind: OperatorKind,
    bounds: EllipticityBounds,
    dim: usize,
    x_dependence: Option<XDependence>,
}

impl EllipticOperator {
    pub fn linear_trace(dim: usize) -> Self {
        EllipticOperator {
            kind: OperatorKind::LinearTrace,
            bounds: EllipticityBounds {
                lambda0: 1.0,
                lambda1: 1.0,
            },
            dim,
            x_dependence: None,
        }
    }

    pub fn pucci_plus(bounds: EllipticityBounds, dim: usize) -> Self {
        EllipticOperator {
            kind: OperatorKind::PucciPlus,
            bounds,
            dim,
            x_dependence: None,
        }
    }

    pub fn pucci_minus(bounds: EllipticityBounds, dim: usize) -> Self {
        EllipticOperator {
            kind: OperatorKind::PucciMinus,
            bounds,
            dim,
            x_dependence: None,
        }
    }

    /// Every family member must satisfy `lambda0 I <= A <= lambda1 I`.
    pub fn bellman_min(bounds: EllipticityBounds, family: Vec<SymMatrix>) -> Result<Self> {
        let dim = family
            .first()
            .ok_or_else(|| Error::validation("family", "must not be empty"))?
            .dim();
        for (i, a) in family.iter().enumerate() {
            if a.dim() != dim {
                return Err(Error::validation(
                    format!("family[{i}]"),
                    format!("dimension {} differs from {dim}", a.dim()),
                ));
            }
            if !bounds.admits(a) {
                let (lo, hi) = a.eigen_range();
                return Err(Error::validation(
                    format!("family[{i}]"),
                    format!(
                        "eigenvalues [{lo}, {hi}] outside [{}, {}]",
                        bounds.lambda0, bounds.lambda1
                    ),
                ));
            }
        }
        Ok(EllipticOperator {
            kind: OperatorKind::BellmanMin(family),
            bounds,
            dim,
            x_dependence: None,
        })
    }

    pub fn custom_table(bounds: EllipticityBounds, table: SymMatrix) -> Self {
        EllipticOperator {
            dim: table.dim(),
            kind: OperatorKind::CustomTable(table),
            bounds,
            x_dependence: None,
        }
    }

    /// Linear trace with explicitly declared bounds (which should contain 1).
    pub fn with_bounds(mut self, bounds: EllipticityBounds) -> Self {
        self.bounds = bounds;
        self
    }

    pub fn with_x_dependence(mut self, dep: XDependence) -> Self {
        self.x_dependence = Some(dep);
        self
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn bounds(&self) -> EllipticityBounds {
        self.bounds
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x_dependence(&self) -> Option<XDependence> {
        self.x_dependence
    }

    /// Constant `C` in `|F(M,x) - F(M,y)| <= C (|M| + 1) |x - y|^alphabar`
    /// with `|M|` the nuclear norm, or `None` for x-independent operators.
    pub fn holder_constant(&self) -> Option<f64> {
        let dep = self.x_dependence?;
        let lipschitz = match &self.kind {
            OperatorKind::LinearTrace => 1.0,
            OperatorKind::PucciPlus | OperatorKind::PucciMinus => self.bounds.lambda1,
            OperatorKind::BellmanMin(family) => family
                .iter()
                .map(SymMatrix::spectral_norm)
                .fold(0.0, f64::max),
            OperatorKind::CustomTable(t) => t.spectral_norm(),
        };
        Some(dep.cbar * lipschitz)
    }

    fn check_dim(&self, m: &SymMatrix) -> Result<()> {
        if m.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: m.dim(),
            });
        }
        Ok(())
    }

    fn factor(&self, x: &[f64]) -> f64 {
        self.x_dependence.map_or(1.0, |d| d.factor(x))
    }

    /// `F_kind(M)` without the space modulation.
    fn evaluate_kind(&self, m: &SymMatrix) -> f64 {
        match &self.kind {
            OperatorKind::LinearTrace => m.trace(),
            OperatorKind::PucciPlus => pucci_plus(m, self.bounds),
            OperatorKind::PucciMinus => pucci_minus(m, self.bounds),
            OperatorKind::BellmanMin(family) => family
                .iter()
                .map(|a| a.dot(m))
                .fold(f64::INFINITY, f64::min),
            OperatorKind::CustomTable(t) => t.dot(m),
        }
    }

    /// `F(M, x)`.
    pub fn evaluate(&self, m: &SymMatrix, x: &[f64]) -> Result<f64> {
        self.check_dim(m)?;
        Ok(self.factor(x) * self.evaluate_kind(m))
    }

    /// Coefficients `F_ij(M)` at `x = 0`.
    pub fn linearize(&self, m: &SymMatrix) -> Result<SymMatrix> {
        self.check_dim(m)?;
        Ok(self.linearize_kind(m))
    }

    /// Coefficients `F_ij(M, x)`.
    pub fn linearize_at(&self, m: &SymMatrix, x: &[f64]) -> Result<SymMatrix> {
        self.check_dim(m)?;
        Ok(self.linearize_kind(m).scale(self.factor(x)))
    }

    /// `F(M, x)` and `F_ij(M, x)` sharing one eigendecomposition.
    pub fn evaluate_linearized(&self, m: &SymMatrix, x: &[f64]) -> Result<(f64, SymMatrix)> {
        self.check_dim(m)?;
        let s = self.factor(x);
        let a = self.linearize_kind(m);
        // Every built-in kind is positively 1-homogeneous and piecewise linear,
        // so F(M) = tr(F_ij(M) M) exactly on each piece.
        let value = match &self.kind {
            OperatorKind::PucciPlus | OperatorKind::PucciMinus | OperatorKind::BellmanMin(_) => {
                a.dot(m)
            }
            _ => self.evaluate_kind(m),
        };
        Ok((s * value, a.scale(s)))
    }

    /// Element of the (super/sub)differential. At ties, the tied eigenspace
    /// (or tied policy) gets the `lambda1` weight.
    fn linearize_kind(&self, m: &SymMatrix) -> SymMatrix {
        let b = self.bounds;
        let tie = TIE_TOL * m.max_abs().max(1.0);
        match &self.kind {
            OperatorKind::LinearTrace => SymMatrix::identity(self.dim),
            OperatorKind::PucciPlus | OperatorKind::PucciMinus => {
                let e = m.eigen();
                let plus = matches!(self.kind, OperatorKind::PucciPlus);
                let weights: Vec<f64> = e
                    .values
                    .iter()
                    .map(|&mu| {
                        if mu.abs() <= tie || (mu > 0.0) == plus {
                            b.lambda1
                        } else {
                            b.lambda0
                        }
                    })
                    .collect();
                SymMatrix::from_spectral(&weights, &e.vectors)
            }
            OperatorKind::BellmanMin(family) => {
                let values: Vec<f64> = family.iter().map(|a| a.dot(m)).collect();
                let min = values.iter().copied().fold(f64::INFINITY, f64::min);
                let mut best: Option<usize> = None;
                for (i, v) in values.iter().enumerate() {
                    if *v - min <= tie {
                        best = match best {
                            Some(j) if family[j].trace() >= family[i].trace() => Some(j),
                            _ => Some(i),
                        };
                    }
                }
                family[best.expect("non-empty family")].clone()
            }
            OperatorKind::CustomTable(t) => t.clone(),
        }
    }

    pub fn to_spec(&self) -> OperatorSpec {
        let (family, table) = match &self.kind {
            OperatorKind::BellmanMin(f) => (Some(f.clone()), None),
            OperatorKind::CustomTable(t) => (None, Some(t.rows())),
            _ => (None, None),
        };
        OperatorSpec {
            kind: self.kind.name().to_string(),
            dim: self.dim,
            lambda0: Some(self.bounds.lambda0),
            lambda1: Some(self.bounds.lambda1),
            family,
            table,
            x_dependence: self.x_dependence,
        }
    }
}

fn default_dim() -> usize {
    2
}

/// JSON description of an operator.
///
/// ```json
/// { "kind": "bellman-min", "lambda0": 1.0, "lambda1": 2.0,
///   "family": [[[1, 0], [0, 1]], [[2, 0], [0, 1]]],
///   "x_dependence": { "cbar": 1.0, "alphabar": 0.5 } }
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub kind: String,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Vec<SymMatrix>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_dependence: Option<XDependence>,
}

impl OperatorSpec {
    /// Validates the description; `prefix` is prepended to field names in errors.
    pub fn build(&self, prefix: &str) -> Result<EllipticOperator> {
        let field = |name: &str| {
            if prefix.is_empty() {
                name.to_string()
            } else {
                format!("{prefix}.{name}")
            }
        };
        let relabel = |e: Error, fallback: &str| match e {
            Error::Validation { field: f, message } => {
                let name = if f == "matrix" { fallback.to_string() } else { f };
                Error::Validation {
                    field: field(&name),
                    message,
                }
            }
            other => other,
        };
        if self.dim == 0 || self.dim > 3 {
            return Err(Error::validation(field("dim"), "must be 1, 2 or 3"));
        }
        let bounds = || -> Result<EllipticityBounds> {
            let l0 = self
                .lambda0
                .ok_or_else(|| Error::validation(field("lambda0"), "required for this kind"))?;
            let l1 = self
                .lambda1
                .ok_or_else(|| Error::validation(field("lambda1"), "required for this kind"))?;
            EllipticityBounds::new(l0, l1).map_err(|e| relabel(e, "lambda0"))
        };
        let mut op = match self.kind.as_str() {
            "linear-trace" => {
                let op = EllipticOperator::linear_trace(self.dim);
                if self.lambda0.is_some() || self.lambda1.is_some() {
                    op.with_bounds(bounds()?)
                } else {
                    op
                }
            }
            "pucci-plus" => EllipticOperator::pucci_plus(bounds()?, self.dim),
            "pucci-minus" => EllipticOperator::pucci_minus(bounds()?, self.dim),
            "bellman-min" => {
                let family = self
                    .family
                    .clone()
                    .ok_or_else(|| Error::validation(field("family"), "required for bellman-min"))?;
                EllipticOperator::bellman_min(bounds()?, family).map_err(|e| relabel(e, "family"))?
            }
            "custom-table" => {
                let rows = self
                    .table
                    .as_ref()
                    .ok_or_else(|| Error::validation(field("table"), "required for custom-table"))?;
                let table = SymMatrix::from_rows(rows).map_err(|e| relabel(e, "table"))?;
                let b = if self.lambda0.is_some() || self.lambda1.is_some() {
                    bounds()?
                } else {
                    EllipticityBounds::new(1.0, 1.0)?
                };
                EllipticOperator::custom_table(b, table)
            }
            other => {
                return Err(Error::validation(
                    field("kind"),
                    format!(
                        "unknown kind `{other}` (expected linear-trace, pucci-plus, \
                         pucci-minus, bellman-min or custom-table)"
                    ),
                ))
            }
        };
        if op.dim != self.dim {
            return Err(Error::validation(
                field("dim"),
                format!("declared {} but coefficients have dimension {}", self.dim, op.dim),
            ));
        }
        if let Some(d) = self.x_dependence {
            let d = XDependence::new(d.cbar, d.alphabar).map_err(|e| relabel(e, "x_dependence"))?;
            op = op.with_x_dependence(d);
        }
        Ok(op)
    }
}

/// Parses and validates an operator description.
pub fn operator_from_json(text: &str) -> Result<EllipticOperator> {
    let spec: OperatorSpec = serde_json::from_str(text).map_err(|e| Error::Parse {
        context: "operator".into(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    spec.build("")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b12() -> EllipticityBounds {
        EllipticityBounds::new(1.0, 2.0).unwrap()
    }

    const ORIGIN: [f64; 2] = [0.0, 0.0];

    #[test]
    fn bounds_validation() {
        assert!(EllipticityBounds::new(0.0, 1.0).is_err());
        assert!(EllipticityBounds::new(2.0, 1.0).is_err());
        assert!(EllipticityBounds::new(1.0, 1.0).is_ok());
    }

    #[test]
    fn pucci_examples() {
        let b = b12();
        let zero = SymMatrix::zeros(2);
        let id = SymMatrix::identity(2);
        let saddle = SymMatrix::diag(&[1.0, -1.0]);
        assert_eq!(pucci_plus(&zero, b), 0.0);
        assert_eq!(pucci_plus(&id, b), 4.0);
        assert_eq!(pucci_plus(&saddle, b), 1.0);
        assert_eq!(pucci_minus(&zero, b), 0.0);
        assert_eq!(pucci_minus(&id, b), 2.0);
        assert_eq!(pucci_minus(&saddle, b), -1.0);
    }

    #[test]
    fn degenerate_ellipticity_is_scaled_trace() {
        let b = EllipticityBounds::new(1.5, 1.5).unwrap();
        let m = SymMatrix::from_2x2(0.3, -0.7, -1.1);
        assert_eq!(pucci_plus(&m, b), 1.5 * m.trace());
        assert_eq!(pucci_minus(&m, b), 1.5 * m.trace());
    }

    #[test]
    fn evaluate_examples() {
        let lt = EllipticOperator::linear_trace(2);
        assert_eq!(lt.evaluate(&SymMatrix::diag(&[1.0, -1.0]), &ORIGIN).unwrap(), 0.0);

        let bm = EllipticOperator::bellman_min(
            b12(),
            vec![SymMatrix::identity(2), SymMatrix::diag(&[2.0, 1.0])],
        )
        .unwrap();
        assert_eq!(bm.evaluate(&SymMatrix::identity(2), &ORIGIN).unwrap(), 2.0);

        let pm = EllipticOperator::pucci_minus(b12(), 2);
        assert_eq!(pm.evaluate(&SymMatrix::diag(&[1.0, -1.0]), &ORIGIN).unwrap(), -1.0);
    }

    #[test]
    fn evaluate_dimension_mismatch() {
        let lt = EllipticOperator::linear_trace(2);
        assert!(matches!(
            lt.evaluate(&SymMatrix::identity(3), &ORIGIN),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn bellman_family_must_be_admissible() {
        let err = EllipticOperator::bellman_min(b12(), vec![SymMatrix::diag(&[3.0, 1.0])]);
        assert!(err.is_err());
    }

    #[test]
    fn linearize_examples() {
        let m = SymMatrix::from_2x2(0.4, -2.0, 1.0);
        assert_eq!(
            EllipticOperator::linear_trace(2).linearize(&m).unwrap(),
            SymMatrix::identity(2)
        );

        let a2 = SymMatrix::diag(&[2.0, 1.0]);
        let bm = EllipticOperator::bellman_min(b12(), vec![SymMatrix::identity(2), a2.clone()])
            .unwrap();
        // tr(A2 M) = 2*(-1) + 1 = -1 < tr(M) = 0: A2 uniquely active
        assert_eq!(bm.linearize(&SymMatrix::diag(&[-1.0, 1.0])).unwrap(), a2);

        let pp = EllipticOperator::pucci_plus(b12(), 2);
        let a = pp.linearize(&SymMatrix::diag(&[1.0, -1.0])).unwrap();
        assert!((&a - &SymMatrix::diag(&[2.0, 1.0])).max_abs() < 1e-15);
    }

    #[test]
    fn linearize_tie_uses_lambda1() {
        // zero eigenvalue along e1
        let pm = EllipticOperator::pucci_minus(b12(), 2);
        let a = pm.linearize(&SymMatrix::diag(&[0.0, 1.0])).unwrap();
        assert!((&a - &SymMatrix::diag(&[2.0, 1.0])).max_abs() < 1e-15);
        // tied policies: the larger-trace one wins
        let bm = EllipticOperator::bellman_min(
            b12(),
            vec![SymMatrix::identity(2), SymMatrix::diag(&[2.0, 1.0])],
        )
        .unwrap();
        let a = bm.linearize(&SymMatrix::diag(&[0.0, 1.0])).unwrap();
        assert_eq!(a, SymMatrix::diag(&[2.0, 1.0]));
        assert!(b12().admits(&a));
    }

    #[test]
    fn x_dependent_evaluation() {
        let op = EllipticOperator::linear_trace(2)
            .with_bounds(b12())
            .with_x_dependence(XDependence::new(1.0, 0.5).unwrap());
        let m = SymMatrix::identity(2);
        let v = op.evaluate(&m, &[0.0, 0.25]).unwrap();
        assert!((v - 2.0 * 1.5).abs() < 1e-15);
        assert_eq!(op.evaluate(&SymMatrix::zeros(2), &[0.3, 0.4]).unwrap(), 0.0);
        assert_eq!(op.holder_constant(), Some(1.0));
    }

    #[test]
    fn evaluate_linearized_matches_parts() {
        let op = EllipticOperator::pucci_minus(b12(), 2);
        let m = SymMatrix::from_2x2(0.3, 0.9, -0.2);
        let (v, a) = op.evaluate_linearized(&m, &ORIGIN).unwrap();
        assert!((v - op.evaluate(&m, &ORIGIN).unwrap()).abs() < 1e-14);
        assert_eq!(a, op.linearize(&m).unwrap());
    }

    #[test]
    fn json_specs() {
        let op = operator_from_json(r#"{"kind":"pucci-minus","lambda0":1,"lambda1":2}"#).unwrap();
        assert_eq!(op, EllipticOperator::pucci_minus(b12(), 2));

        let op = operator_from_json(
            r#"{"kind":"bellman-min","lambda0":1,"lambda1":2,
                "family":[[[1,0],[0,1]],[[2,0],[0,1]]]}"#,
        )
        .unwrap();
        let again = operator_from_json(&serde_json::to_string(&op.to_spec()).unwrap()).unwrap();
        assert_eq!(op, again);

        let op = operator_from_json(r#"{"kind":"custom-table","table":[[1,0],[0,-1]]}"#).unwrap();
        assert_eq!(op.evaluate(&SymMatrix::diag(&[0.0, 1.0]), &ORIGIN).unwrap(), -1.0);

        match operator_from_json(r#"{"kind":"pucci-minus","lambda0":3,"lambda1":2}"#) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "lambda1"),
            other => panic!("unexpected {other:?}"),
        }
        match operator_from_json("{\"kind\": \"pucci-minus\",\n \"lambda0\": }") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(operator_from_json(r#"{"kind":"hjb"}"#).is_err());
    }
}
