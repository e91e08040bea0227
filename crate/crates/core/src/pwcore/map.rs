use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{PwError, Result};

/// `φ(t) = A t + b` with `A` an `n × m` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    matrix: DMatrix<f64>,
    offset: DVector<f64>,
}

impl AffineMap {
    pub fn new(matrix: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(PwError::Precondition(
                "affine map needs at least one row and column".into(),
            ));
        }
        if offset.len() != matrix.nrows() {
            return Err(PwError::DimensionMismatch {
                expected: matrix.nrows(),
                got: offset.len(),
            });
        }
        if matrix.iter().chain(offset.iter()).any(|x| !x.is_finite()) {
            return Err(PwError::Domain("affine map entries must be finite".into()));
        }
        Ok(AffineMap { matrix, offset })
    }

    pub fn linear(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        Self::new(matrix, DVector::zeros(n))
    }

    /// Builds the map from matrix rows.
    pub fn from_rows(rows: &[Vec<f64>], offset: &[f64]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(PwError::Precondition("matrix rows have unequal lengths".into()));
        }
        let matrix = DMatrix::from_fn(n, m, |i, k| rows[i][k]);
        Self::new(matrix, DVector::from_column_slice(offset))
    }

    pub fn identity(n: usize) -> Self {
        AffineMap {
            matrix: DMatrix::identity(n, n),
            offset: DVector::zeros(n),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    /// `m`, the dimension of the domain.
    pub fn input_dim(&self) -> usize {
        self.matrix.ncols()
    }

    /// `n`, the dimension of the target.
    pub fn output_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, t: &[f64]) -> Vec<f64> {
        (0..self.output_dim())
            .map(|i| self.offset[i] + t.iter().enumerate().map(|(k, x)| self.matrix[(i, k)] * x).sum::<f64>())
            .collect()
    }

    /// `self ∘ inner`.
    pub fn after(&self, inner: &AffineMap) -> Result<AffineMap> {
        if self.input_dim() != inner.output_dim() {
            return Err(PwError::DimensionMismatch {
                expected: self.input_dim(),
                got: inner.output_dim(),
            });
        }
        Ok(AffineMap {
            matrix: &self.matrix * &inner.matrix,
            offset: &self.matrix * &inner.offset + &self.offset,
        })
    }

    /// Largest singular value of `A`.
    pub fn operator_norm(&self) -> f64 {
        operator_norm(&self.matrix)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.output_dim())
            .map(|i| self.matrix.row(i).iter().copied().collect())
            .collect()
    }
}

pub fn operator_norm(a: &DMatrix<f64>) -> f64 {
    a.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

#[derive(Serialize, Deserialize)]
struct AffineMapRepr {
    matrix: Vec<Vec<f64>>,
    offset: Vec<f64>,
}

impl Serialize for AffineMap {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        AffineMapRepr {
            matrix: self.rows(),
            offset: self.offset.iter().copied().collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for AffineMap {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = AffineMapRepr::deserialize(deserializer)?;
        AffineMap::from_rows(&repr.matrix, &repr.offset).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apply_and_compose() {
        let a = AffineMap::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0], vec![3.0, -1.0]], &[1.0, 0.0, -1.0]).unwrap();
        assert_eq!(a.apply(&[1.0, 1.0]), vec![4.0, 1.0, 1.0]);
        let b = AffineMap::from_rows(&[vec![2.0]], &[0.5]).unwrap();
        assert!(a.after(&b).is_err());
        let c = AffineMap::from_rows(&[vec![1.0], vec![-1.0]], &[0.0, 2.0]).unwrap();
        let ac = a.after(&c).unwrap();
        assert_eq!(ac.apply(&[3.0]), a.apply(&c.apply(&[3.0])));
    }

    #[test]
    fn json_is_row_major() {
        let a = AffineMap::from_rows(&[vec![1.0, 2.0, 3.0]], &[0.25]).unwrap();
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, r#"{"matrix":[[1.0,2.0,3.0]],"offset":[0.25]}"#);
        let back: AffineMap = serde_json::from_str(&s).unwrap();
        assert_eq!(back, a);
        assert!(serde_json::from_str::<AffineMap>(r#"{"matrix":[[1.0],[2.0,3.0]],"offset":[0,0]}"#).is_err());
    }

    #[test]
    fn operator_norm_of_diagonal() {
        let a = AffineMap::linear(DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, -3.0]))).unwrap();
        assert!((a.operator_norm() - 3.0).abs() < 1e-14);
    }
}
