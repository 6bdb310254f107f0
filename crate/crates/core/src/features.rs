//! Linear feature maps `Q(s, a) ≈ φ(s, a)ᵀθ`.
//!
//! The canonical (tabular) map is kept implicit so that large discretised
//! state spaces never materialise a `|X| × |X|` identity. Dense maps keep
//! both the full matrix and a sparse column view used by the learning rules.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Identity,
    Dense {
        /// Row-major `d × |X|`.
        matrix: Vec<f64>,
        /// Non-zero entries of each column.
        columns: Vec<Vec<(usize, f64)>>,
    },
}

/// Feature matrix `Φ ∈ R^{d × |X|}`; column `x` is `φ(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FeatureDocument", into = "FeatureDocument")]
pub struct FeatureMap {
    dim: usize,
    num_pairs: usize,
    repr: Repr,
    column_norms: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureDocument {
    dim: usize,
    num_pairs: usize,
    /// Row-major `dim × num_pairs`.
    matrix: Vec<f64>,
}

impl TryFrom<FeatureDocument> for FeatureMap {
    type Error = Error;

    fn try_from(doc: FeatureDocument) -> Result<Self> {
        FeatureMap::from_row_major(doc.dim, doc.num_pairs, doc.matrix)
    }
}

impl From<FeatureMap> for FeatureDocument {
    fn from(f: FeatureMap) -> Self {
        FeatureDocument {
            dim: f.dim,
            num_pairs: f.num_pairs,
            matrix: f.to_row_major(),
        }
    }
}

impl FeatureMap {
    /// Canonical basis: `d = |X|`, `φ(x) = e_x`.
    pub fn canonical(num_states: usize, num_actions: usize) -> Self {
        let n = num_states * num_actions;
        FeatureMap {
            dim: n,
            num_pairs: n,
            repr: Repr::Identity,
            column_norms: vec![1.0; n],
        }
    }

    /// Dense map from a row-major `dim × num_pairs` matrix. An identity
    /// matrix is recognised and stored as the canonical map.
    pub fn from_row_major(dim: usize, num_pairs: usize, matrix: Vec<f64>) -> Result<Self> {
        if dim == 0 || num_pairs == 0 || matrix.len() != dim * num_pairs {
            return Err(Error::ShapeMismatch(format!(
                "feature matrix has {} entries, expected {dim} x {num_pairs}",
                matrix.len()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("feature matrix".into()));
        }
        let is_identity = dim == num_pairs
            && matrix
                .iter()
                .enumerate()
                .all(|(k, &v)| v == if k / dim == k % dim { 1.0 } else { 0.0 });
        if is_identity {
            return Ok(FeatureMap::canonical(num_pairs, 1));
        }
        let columns: Vec<Vec<(usize, f64)>> = (0..num_pairs)
            .map(|x| {
                (0..dim)
                    .filter_map(|i| {
                        let v = matrix[i * num_pairs + x];
                        (v != 0.0).then_some((i, v))
                    })
                    .collect()
            })
            .collect();
        let column_norms = columns
            .iter()
            .map(|c| c.iter().map(|(_, v)| v * v).sum::<f64>().sqrt())
            .collect();
        Ok(FeatureMap {
            dim,
            num_pairs,
            repr: Repr::Dense { matrix, columns },
            column_norms,
        })
    }

    pub fn from_matrix(matrix: &DMatrix<f64>) -> Result<Self> {
        let row_major: Vec<f64> = matrix.transpose().iter().copied().collect();
        FeatureMap::from_row_major(matrix.nrows(), matrix.ncols(), row_major)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_pairs(&self) -> usize {
        self.num_pairs
    }

    pub fn is_canonical(&self) -> bool {
        matches!(self.repr, Repr::Identity)
    }

    /// Cached `‖φ(x)‖₂`.
    #[inline]
    pub fn norm(&self, x: usize) -> f64 {
        self.column_norms[x]
    }

    pub fn column_norms(&self) -> &[f64] {
        &self.column_norms
    }

    /// `φ(x)ᵀθ`.
    #[inline]
    pub fn dot(&self, x: usize, theta: &[f64]) -> f64 {
        match &self.repr {
            Repr::Identity => theta[x],
            Repr::Dense { columns, .. } => columns[x].iter().map(|&(i, v)| v * theta[i]).sum(),
        }
    }

    /// Visit the non-zero entries `(i, φ_i(x))` of column `x`.
    #[inline]
    pub fn for_each_entry(&self, x: usize, mut f: impl FnMut(usize, f64)) {
        match &self.repr {
            Repr::Identity => f(x, 1.0),
            Repr::Dense { columns, .. } => {
                for &(i, v) in &columns[x] {
                    f(i, v);
                }
            }
        }
    }

    /// `φ_i(x)`.
    #[inline]
    pub fn entry(&self, i: usize, x: usize) -> f64 {
        match &self.repr {
            Repr::Identity => {
                if i == x {
                    1.0
                } else {
                    0.0
                }
            }
            Repr::Dense { matrix, .. } => matrix[i * self.num_pairs + x],
        }
    }

    /// Column `x` as a dense vector.
    pub fn column(&self, x: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.for_each_entry(x, |i, v| out[i] = v);
        out
    }

    /// `Φᵀθ`, the action values of every pair.
    pub fn values(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.num_pairs).map(|x| self.dot(x, theta)).collect()
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        match &self.repr {
            Repr::Identity => {
                let n = self.num_pairs;
                (0..n * n)
                    .map(|k| if k / n == k % n { 1.0 } else { 0.0 })
                    .collect()
            }
            Repr::Dense { matrix, .. } => matrix.clone(),
        }
    }

    /// Dense `d × |X|` matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.num_pairs, &self.to_row_major())
    }

    pub fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: theta.len(),
            });
        }
        Ok(())
    }
}
