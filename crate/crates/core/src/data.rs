//! Row-major matrices and the observational dataset triple (X, T, Y).

use serde::{Deserialize, Serialize};

use crate::error::{CpteError, Result};

/// Treatment arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arm {
    Control,
    Treated,
}

impl Arm {
    pub fn from_indicator(t: bool) -> Self {
        if t {
            Arm::Treated
        } else {
            Arm::Control
        }
    }

    pub fn is_treated(self) -> bool {
        self == Arm::Treated
    }

    pub fn opposite(self) -> Self {
        match self {
            Arm::Control => Arm::Treated,
            Arm::Treated => Arm::Control,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Arm::Control => 0,
            Arm::Treated => 1,
        }
    }
}

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    data: Vec<f64>,
    ncols: usize,
}

impl Matrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            data: vec![0.0; nrows * ncols],
            ncols,
        }
    }

    pub fn from_vec(data: Vec<f64>, ncols: usize) -> Result<Self> {
        if ncols == 0 || !data.len().is_multiple_of(ncols) {
            return Err(CpteError::InvalidInput(format!(
                "buffer of length {} does not split into rows of {ncols}",
                data.len()
            )));
        }
        Ok(Self { data, ncols })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map(Vec::len).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * ncols);
        for row in rows {
            if row.len() != ncols {
                return Err(CpteError::DimensionMismatch {
                    expected: ncols,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { data, ncols })
    }

    /// Single-column matrix.
    pub fn column_vector(values: Vec<f64>) -> Self {
        Self {
            data: values,
            ncols: 1,
        }
    }

    pub fn nrows(&self) -> usize {
        self.data.len().checked_div(self.ncols).unwrap_or(0)
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ncols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.ncols + j] = v;
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.ncols.max(1))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.ncols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            data,
            ncols: self.ncols,
        }
    }

    /// Duplicates rows: the result holds `self` followed by `other`.
    pub fn vstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.ncols != other.ncols {
            return Err(CpteError::DimensionMismatch {
                expected: self.ncols,
                got: other.ncols,
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Matrix {
            data,
            ncols: self.ncols,
        })
    }
}

/// Observed data: covariates, binary treatment and (possibly multivariate) outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Matrix,
    pub t: Vec<bool>,
    pub y: Matrix,
}

impl Dataset {
    pub fn new(x: Matrix, t: Vec<bool>, y: Matrix) -> Result<Self> {
        let n = x.nrows();
        if t.len() != n {
            return Err(CpteError::DimensionMismatch {
                expected: n,
                got: t.len(),
            });
        }
        if y.nrows() != n {
            return Err(CpteError::DimensionMismatch {
                expected: n,
                got: y.nrows(),
            });
        }
        if y.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(CpteError::InvalidInput("outcomes must be finite".into()));
        }
        Ok(Self { x, t, y })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn outcome_dim(&self) -> usize {
        self.y.ncols()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn arm(&self, i: usize) -> Arm {
        Arm::from_indicator(self.t[i])
    }

    /// Indices of the units assigned to `arm`, ascending.
    pub fn arm_indices(&self, arm: Arm) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.t[i] == arm.is_treated())
            .collect()
    }

    pub fn arm_sizes(&self) -> (usize, usize) {
        let treated = self.t.iter().filter(|&&t| t).count();
        (self.len() - treated, treated)
    }

    /// Errors when either arm has no unit.
    pub fn require_both_arms(&self) -> Result<()> {
        let (n0, n1) = self.arm_sizes();
        if n0 == 0 {
            return Err(CpteError::EmptyArm { arm: 0 });
        }
        if n1 == 0 {
            return Err(CpteError::EmptyArm { arm: 1 });
        }
        Ok(())
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(idx),
            t: idx.iter().map(|&i| self.t[i]).collect(),
            y: self.y.select_rows(idx),
        }
    }
}

/// Per-column z-scoring fitted on training covariates. Zero-variance columns keep unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let n = x.nrows().max(1) as f64;
        let p = x.ncols();
        let mut mean = vec![0.0; p];
        for row in x.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; p];
        for row in x.rows() {
            for j in 0..p {
                let d = row[j] - mean[j];
                var[j] += d * d;
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn transform_row(&self, row: &[f64], out: &mut [f64]) {
        for j in 0..row.len() {
            out[j] = (row[j] - self.mean[j]) / self.scale[j];
        }
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.nrows(), x.ncols());
        for i in 0..x.nrows() {
            self.transform_row(x.row(i), out.row_mut(i));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_rejects_non_finite_outcomes() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let y = Matrix::column_vector(vec![0.0, f64::NAN]);
        assert!(Dataset::new(x, vec![true, false], y).is_err());
    }

    #[test]
    fn standardizer_keeps_constant_columns_finite() {
        let x = Matrix::from_rows(&[vec![2.0, 1.0], vec![2.0, 3.0]]).unwrap();
        let s = Standardizer::fit(&x);
        let z = s.transform(&x);
        assert_eq!(z.row(0), &[0.0, -1.0]);
        assert_eq!(z.row(1), &[0.0, 1.0]);
    }
}
