//! Sampled verification of the structural hypotheses on an operator:
//!
//! * H1: `F(0, x) = 0`
//! * H2: `P-(M - N) <= F(M, x) - F(N, x) <= P+(M - N)`
//! * H3: `F(., x)` concave or convex
//! * H4: `|F(M, x) - F(M, y)| <= C (|M| + 1) |x - y|^alphabar`
//!
//! Violations are reported, never raised.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{pucci_minus, pucci_plus, EllipticOperator, SymMatrix};
use crate::error::{Error, Result};

/// Violations up to this size are rounding.
pub const STRUCTURE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub m: SymMatrix,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<SymMatrix>,
    pub x: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    pub detail: String,
}

/// Outcome of one hypothesis. `worst_margin` is the largest violation seen
/// (negative when every sample held with room to spare).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub passed: bool,
    pub worst_margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Concavity {
    Affine,
    Concave,
    Convex,
    Neither,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub operator: String,
    pub seed: u64,
    pub samples: usize,
    pub tolerance: f64,
    pub h1: HypothesisCheck,
    pub h2: HypothesisCheck,
    pub h3: HypothesisCheck,
    pub concavity: Concavity,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h4: Option<HypothesisCheck>,
}

impl StructureReport {
    /// H1-H3 hold (the solvers require these).
    pub fn solver_ready(&self) -> bool {
        self.h1.passed && self.h2.passed && self.h3.passed
    }

    /// All applicable hypotheses hold.
    pub fn passed(&self) -> bool {
        self.solver_ready() && self.h4.as_ref().is_none_or(|h| h.passed)
    }

    pub fn failed_hypotheses(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        for (name, h) in [("H1", &self.h1), ("H2", &self.h2), ("H3", &self.h3)] {
            if !h.passed {
                out.push(name);
            }
        }
        if self.h4.as_ref().is_some_and(|h| !h.passed) {
            out.push("H4");
        }
        out
    }
}

struct Tracker {
    worst: f64,
    witness: Option<Witness>,
}

impl Tracker {
    fn new() -> Self {
        Tracker {
            worst: f64::NEG_INFINITY,
            witness: None,
        }
    }

    fn record(&mut self, margin: f64, witness: impl FnOnce() -> Witness) {
        if margin > self.worst {
            self.worst = margin;
            self.witness = Some(witness());
        }
    }

    fn finish(self) -> HypothesisCheck {
        let passed = self.worst <= STRUCTURE_TOL;
        HypothesisCheck {
            passed,
            worst_margin: self.worst,
            witness: if passed { None } else { self.witness },
        }
    }
}

fn random_sym(rng: &mut ChaCha8Rng, dim: usize) -> SymMatrix {
    let scale = 10f64.powf(rng.gen_range(-1.0..1.0));
    let mut entries = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in i..dim {
            let v = scale * rng.gen_range(-1.0..1.0);
            entries[i * dim + j] = v;
            entries[j * dim + i] = v;
        }
    }
    SymMatrix::new(dim, entries).expect("symmetric by construction")
}

/// Uniform point in the unit half ball `{|x| < 1, x_n > 0}`.
fn random_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let mut x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        x[dim - 1] = x[dim - 1].abs();
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 < 1.0 && x[dim - 1] > 0.0 {
            return x;
        }
    }
}

/// Coordinate directions `±E_ii`, `±(E_ij + E_ji)/2`, `±I`.
fn probe_directions(dim: usize) -> Vec<SymMatrix> {
    let mut out = Vec::new();
    for i in 0..dim {
        for j in i..dim {
            let mut e = vec![0.0; dim * dim];
            if i == j {
                e[i * dim + i] = 1.0;
            } else {
                e[i * dim + j] = 0.5;
                e[j * dim + i] = 0.5;
            }
            let m = SymMatrix::new(dim, e).expect("symmetric");
            out.push(-&m);
            out.push(m);
        }
    }
    out.push(SymMatrix::identity(dim));
    out.push(-&SymMatrix::identity(dim));
    out
}

/// Checks H1-H4 on `samples` seeded random draws (plus fixed coordinate probes).
pub fn check_structure(op: &EllipticOperator, samples: usize, seed: u64) -> Result<StructureReport> {
    if samples == 0 {
        return Err(Error::validation("samples", "must be >= 1"));
    }
    let dim = op.dim();
    let bounds = op.bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = |m: &SymMatrix, x: &[f64]| op.evaluate(m, x).expect("dimension checked");
    let origin = {
        let mut o = vec![0.0; dim];
        o[dim - 1] = 0.5;
        o
    };

    let mut h1 = Tracker::new();
    let mut h2 = Tracker::new();
    let mut concave = Tracker::new();
    let mut convex = Tracker::new();
    let mut h4 = op.x_dependence().map(|_| Tracker::new());
    let zero = SymMatrix::zeros(dim);

    let check_pair = |m: &SymMatrix, n: &SymMatrix, x: &[f64], h2: &mut Tracker| {
        let d = f(m, x) - f(n, x);
        let diff = m - n;
        let lo = pucci_minus(&diff, bounds);
        let hi = pucci_plus(&diff, bounds);
        let margin = (lo - d).max(d - hi);
        h2.record(margin, || Witness {
            m: m.clone(),
            n: Some(n.clone()),
            x: x.to_vec(),
            y: None,
            detail: format!("F(M)-F(N) = {d}, Pucci bounds [{lo}, {hi}]"),
        });
    };

    for dir in probe_directions(dim) {
        check_pair(&dir, &zero, &origin, &mut h2);
    }

    for _ in 0..samples {
        let m = random_sym(&mut rng, dim);
        let n = random_sym(&mut rng, dim);
        let x = random_point(&mut rng, dim);

        let f0 = f(&zero, &x);
        h1.record(f0.abs(), || Witness {
            m: zero.clone(),
            n: None,
            x: x.clone(),
            y: None,
            detail: format!("F(0, x) = {f0}"),
        });

        check_pair(&m, &n, &x, &mut h2);

        let mid = (&m + &n).scale(0.5);
        let gap = f(&mid, &x) - 0.5 * (f(&m, &x) + f(&n, &x));
        concave.record(-gap, || Witness {
            m: m.clone(),
            n: Some(n.clone()),
            x: x.clone(),
            y: None,
            detail: format!("F(mid) - avg = {gap} (concavity needs >= 0)"),
        });
        convex.record(gap, || Witness {
            m: m.clone(),
            n: Some(n.clone()),
            x: x.clone(),
            y: None,
            detail: format!("F(mid) - avg = {gap} (convexity needs <= 0)"),
        });

        if let (Some(t), Some(dep), Some(c)) = (h4.as_mut(), op.x_dependence(), op.holder_constant())
        {
            let y = random_point(&mut rng, dim);
            let lhs = (f(&m, &x) - f(&m, &y)).abs();
            let dist = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let rhs = c * (m.nuclear_norm() + 1.0) * dist.powf(dep.alphabar);
            t.record(lhs - rhs, || Witness {
                m: m.clone(),
                n: None,
                x: x.clone(),
                y: Some(y.clone()),
                detail: format!("|F(M,x)-F(M,y)| = {lhs} > {rhs}"),
            });
        }
    }

    let concave = concave.finish();
    let convex = convex.finish();
    let concavity = match (concave.passed, convex.passed) {
        (true, true) => Concavity::Affine,
        (true, false) => Concavity::Concave,
        (false, true) => Concavity::Convex,
        (false, false) => Concavity::Neither,
    };
    let h3 = if concave.passed {
        concave
    } else if convex.passed {
        convex
    } else if concave.worst_margin <= convex.worst_margin {
        concave
    } else {
        convex
    };

    Ok(StructureReport {
        operator: op.kind().name().to_string(),
        seed,
        samples,
        tolerance: STRUCTURE_TOL,
        h1: h1.finish(),
        h2: h2.finish(),
        h3,
        concavity,
        h4: h4.map(Tracker::finish),
    })
}

/// Seed of the random directions used by [`x_modulus_beta`].
const BETA_SEED: u64 = 0x5eed;

/// Sampled approximation of
/// `beta(x, x0) = sup_M |F(M, x) - F(M, x0)| / (|M| + 1)` with `|M|` the
/// nuclear norm.
///
/// Sample `k` uses magnitude `2^k` along a fixed direction sequence (coordinate
/// probes first, then seeded random directions), so the estimate is a running
/// supremum and nondecreasing in `samples`.
pub fn x_modulus_beta(op: &EllipticOperator, x: &[f64], x0: &[f64], samples: usize) -> Result<f64> {
    let dim = op.dim();
    for p in [x, x0] {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
    }
    if samples == 0 {
        return Err(Error::validation("samples", "must be >= 1"));
    }
    if op.x_dependence().is_none() {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(BETA_SEED);
    let mut probes = probe_directions(dim).into_iter();
    let mut sup = 0.0f64;
    for k in 0..samples {
        let dir = probes.next().unwrap_or_else(|| random_sym(&mut rng, dim));
        let unit = dir.scale(1.0 / dir.nuclear_norm());
        let m = unit.scale(2f64.powi(k.min(40) as i32));
        let num = (op.evaluate(&m, x)? - op.evaluate(&m, x0)?).abs();
        sup = sup.max(num / (m.nuclear_norm() + 1.0));
    }
    Ok(sup)
}
