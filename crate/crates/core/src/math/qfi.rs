use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-9;

/// Quantum Fisher information matrix: real, symmetric, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct QfiMatrix {
    m: DMatrix<f64>,
}

impl QfiMatrix {
    /// Validates symmetry (1e-12 relative) and PSD (eigenvalues ≥ −1e-9·‖F‖).
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite QFI entry".into()));
        }
        let scale = m.amax();
        let asym = (&m - m.transpose()).amax();
        if asym > SYMMETRY_TOL * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::NotSymmetric(asym));
        }
        let sym = (&m + m.transpose()) * 0.5;
        if scale > 0.0 {
            let min_eig = SymmetricEigen::new(sym.clone()).eigenvalues.min();
            let norm = sym.norm();
            if min_eig < -PSD_TOL * norm {
                return Err(Error::NotPsd(min_eig));
            }
        }
        Ok(QfiMatrix { m: sym })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: bad.len() });
        }
        Self::new(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }

    pub fn zeros(d: usize) -> Self {
        QfiMatrix { m: DMatrix::zeros(d, d) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim()).map(|i| (0..self.dim()).map(|j| self.m[(i, j)]).collect()).collect()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.m.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.m.amax()
    }
}

/// `max|a−b| / max(max|a|, max|b|)`; zero when both are zero.
pub fn max_rel_diff(a: &QfiMatrix, b: &QfiMatrix) -> f64 {
    if a.dim() != b.dim() {
        return f64::INFINITY;
    }
    let diff = (&a.m - &b.m).amax();
    let scale = a.max_abs().max(b.max_abs());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

impl Serialize for QfiMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for QfiMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        QfiMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_rank_one() {
        let f = QfiMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let ev = f.eigenvalues();
        assert!((ev[0] - 2.0).abs() < 1e-12);
        assert!(ev[1].abs() < 1e-12);
    }

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        assert!(matches!(QfiMatrix::from_rows(&[vec![1.0, 0.5], vec![0.4, 1.0]]), Err(Error::NotSymmetric(_))));
        assert!(matches!(QfiMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]), Err(Error::NotPsd(_))));
        assert!(QfiMatrix::from_rows(&[vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn rel_diff() {
        let a = QfiMatrix::from_rows(&[vec![4.0]]).unwrap();
        let b = QfiMatrix::from_rows(&[vec![4.4]]).unwrap();
        assert!((max_rel_diff(&a, &b) - 0.4 / 4.4).abs() < 1e-15);
        assert_eq!(max_rel_diff(&QfiMatrix::zeros(2), &QfiMatrix::zeros(2)), 0.0);
    }
}
