//! Real symmetric matrices of small dimension.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative asymmetry tolerated when constructing from raw entries.
const SYMMETRY_TOL: f64 = 1e-12;

/// A dense real symmetric `dim x dim` matrix stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMatrix {
    dim: usize,
    entries: Vec<f64>,
}

/// Eigendecomposition of a [`SymMatrix`]: ascending eigenvalues and the
/// matching orthonormal eigenvectors (`vectors[k]` belongs to `values[k]`).
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

impl SymMatrix {
    /// Builds a matrix from row-major entries. The input must be symmetric up
    /// to rounding; the stored matrix is exactly symmetrized.
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::validation("matrix", "dimension must be positive"));
        }
        if entries.len() != dim * dim {
            return Err(Error::validation(
                "matrix",
                format!("expected {} entries, got {}", dim * dim, entries.len()),
            ));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("matrix", "entries must be finite"));
        }
        let scale = entries.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let mut m = SymMatrix { dim, entries };
        for i in 0..dim {
            for j in (i + 1)..dim {
                let (a, b) = (m.get(i, j), m.get(j, i));
                if (a - b).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::validation(
                        "matrix",
                        format!("not symmetric: entry ({i},{j}) = {a} but ({j},{i}) = {b}"),
                    ));
                }
                let avg = 0.5 * (a + b);
                m.set_sym(i, j, avg);
            }
        }
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::validation("matrix", "rows must form a square array"));
        }
        SymMatrix::new(dim, rows.iter().flatten().copied().collect())
    }

    pub fn zeros(dim: usize) -> Self {
        SymMatrix {
            dim,
            entries: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = SymMatrix::zeros(dim);
        for i in 0..dim {
            m.entries[i * dim + i] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = SymMatrix::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            m.entries[i * values.len() + i] = *v;
        }
        m
    }

    /// The 2x2 matrix `[[a11, a12], [a12, a22]]`.
    pub fn from_2x2(a11: f64, a12: f64, a22: f64) -> Self {
        SymMatrix {
            dim: 2,
            entries: vec![a11, a12, a12, a22],
        }
    }

    /// `sum_k values[k] v_k v_k^T` for an orthonormal family `vectors`.
    pub fn from_spectral(values: &[f64], vectors: &[Vec<f64>]) -> Self {
        let dim = values.len();
        let mut m = SymMatrix::zeros(dim);
        for (lam, v) in values.iter().zip(vectors) {
            for i in 0..dim {
                for j in 0..dim {
                    m.entries[i * dim + j] += lam * v[i] * v[j];
                }
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.dim + j] = v;
        self.entries[j * self.dim + i] = v;
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Frobenius inner product `tr(self * other)`.
    pub fn dot(&self, other: &SymMatrix) -> f64 {
        self.entries.iter().zip(&other.entries).map(|(a, b)| a * b).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_norm(&self) -> f64 {
        self.eigenvalues().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sum of absolute eigenvalues (trace norm), the dual of the spectral norm.
    pub fn nuclear_norm(&self) -> f64 {
        self.eigenvalues().iter().map(|v| v.abs()).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.dim == 2 {
            let (lo, hi) = eigenvalues_2x2(self.get(0, 0), self.get(0, 1), self.get(1, 1));
            return vec![lo, hi];
        }
        self.eigen().values
    }

    /// Eigendecomposition with ascending eigenvalues.
    pub fn eigen(&self) -> Eigen {
        if self.dim == 2 {
            return eigen_2x2(self.get(0, 0), self.get(0, 1), self.get(1, 1));
        }
        let m = DMatrix::from_row_slice(self.dim, self.dim, &self.entries);
        let se = m.symmetric_eigen();
        let mut order: Vec<usize> = (0..self.dim).collect();
        order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
        let values = order.iter().map(|&k| se.eigenvalues[k]).collect();
        let vectors = order
            .iter()
            .map(|&k| se.eigenvectors.column(k).iter().copied().collect())
            .collect();
        Eigen { values, vectors }
    }

    /// Smallest and largest eigenvalue.
    pub fn eigen_range(&self) -> (f64, f64) {
        let ev = self.eigenvalues();
        (ev[0], ev[ev.len() - 1])
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix {
            dim: self.dim,
            entries: self.entries.iter().map(|v| v * s).collect(),
        }
    }

    fn zip_with(&self, other: &SymMatrix, f: impl Fn(f64, f64) -> f64) -> SymMatrix {
        assert_eq!(self.dim, other.dim, "matrix dimension mismatch");
        SymMatrix {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }
}

impl Eigen {
    pub fn reconstruct(&self) -> SymMatrix {
        SymMatrix::from_spectral(&self.values, &self.vectors)
    }
}

/// Closed-form eigenvalues of `[[a, b], [b, c]]`, ascending.
fn eigenvalues_2x2(a: f64, b: f64, c: f64) -> (f64, f64) {
    let mean = 0.5 * (a + c);
    let radius = (0.5 * (a - c)).hypot(b);
    (mean - radius, mean + radius)
}

fn eigen_2x2(a: f64, b: f64, c: f64) -> Eigen {
    let (lo, hi) = eigenvalues_2x2(a, b, c);
    // Two candidate (unnormalized) eigenvectors for `hi`; keep the larger.
    let p = [b, hi - a];
    let q = [hi - c, b];
    let (np, nq) = (p[0].hypot(p[1]), q[0].hypot(q[1]));
    let top = if np.max(nq) <= f64::EPSILON * (a.abs() + b.abs() + c.abs()).max(f64::MIN_POSITIVE) {
        // multiple eigenvalue: any orthonormal basis works
        [0.0, 1.0]
    } else if np >= nq {
        [p[0] / np, p[1] / np]
    } else {
        [q[0] / nq, q[1] / nq]
    };
    Eigen {
        values: vec![lo, hi],
        vectors: vec![vec![-top[1], top[0]], vec![top[0], top[1]]],
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, rhs: f64) -> SymMatrix {
        self.scale(rhs)
    }
}

impl Neg for &SymMatrix {
    type Output = SymMatrix;
    fn neg(self) -> SymMatrix {
        self.scale(-1.0)
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        SymMatrix::from_rows(&rows)
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        m.rows()
    }
}

/// Eigendecomposition, validating symmetry of raw row-major input first.
pub fn eigen(dim: usize, entries: &[f64]) -> Result<Eigen> {
    Ok(SymMatrix::new(dim, entries.to_vec())?.eigen())
}
