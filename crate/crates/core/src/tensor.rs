//! Small dense matrices of size N×N with N ∈ {1, 2}.

use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

pub const MAX_DIM: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallMat {
    dim: usize,
    data: [[f64; MAX_DIM]; MAX_DIM],
}

impl SmallMat {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} not supported");
        SmallMat {
            dim,
            data: [[0.0; MAX_DIM]; MAX_DIM],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, c: f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i][i] = c;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            m.data[i][i] = *v;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.data[i][j] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        Self::from_fn(rows.len(), |i, j| rows[i][j])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.dim && j < self.dim);
        self.data[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.dim && j < self.dim);
        self.data[i][j] = v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.data[i][j]).collect())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self.data[j][i])
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::from_fn(self.dim, |i, j| c * self.data[i][j])
    }

    pub fn apply(&self, v: &[f64]) -> [f64; MAX_DIM] {
        let mut out = [0.0; MAX_DIM];
        for (i, o) in out.iter_mut().enumerate().take(self.dim) {
            *o = (0..self.dim).map(|j| self.data[i][j] * v[j]).sum();
        }
        out
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                m = m.max(self.data[i][j].abs());
            }
        }
        m
    }

    /// max |a_ij - a_ji| / max |a_ij| (zero for the zero matrix).
    pub fn asymmetry(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut d: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..i {
                d = d.max((self.data[i][j] - self.data[j][i]).abs());
            }
        }
        d / scale
    }

    pub fn max_abs_diff(&self, other: &SmallMat) -> f64 {
        assert_eq!(self.dim, other.dim);
        let mut d: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                d = d.max((self.data[i][j] - other.data[i][j]).abs());
            }
        }
        d
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn sym_eigenvalues(&self) -> Vec<f64> {
        match self.dim {
            1 => vec![self.data[0][0]],
            _ => {
                let a = self.data[0][0];
                let d = self.data[1][1];
                let b = 0.5 * (self.data[0][1] + self.data[1][0]);
                let mean = 0.5 * (a + d);
                let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
                vec![mean - r, mean + r]
            }
        }
    }

    /// Symmetric part (A + Aᵀ)/2.
    pub fn symmetrized(&self) -> Self {
        Self::from_fn(self.dim, |i, j| 0.5 * (self.data[i][j] + self.data[j][i]))
    }
}

impl Add for SmallMat {
    type Output = SmallMat;

    fn add(self, rhs: SmallMat) -> SmallMat {
        assert_eq!(self.dim, rhs.dim);
        SmallMat::from_fn(self.dim, |i, j| self.data[i][j] + rhs.data[i][j])
    }
}

impl Mul for SmallMat {
    type Output = SmallMat;

    fn mul(self, rhs: SmallMat) -> SmallMat {
        assert_eq!(self.dim, rhs.dim);
        SmallMat::from_fn(self.dim, |i, j| {
            (0..self.dim).map(|k| self.data[i][k] * rhs.data[k][j]).sum()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_symmetric_2x2() {
        let m = SmallMat::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let ev = m.sym_eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-15 && (ev[1] - 3.0).abs() < 1e-15);
        assert_eq!(m.asymmetry(), 0.0);
    }

    #[test]
    fn products_and_asymmetry() {
        let a = SmallMat::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]);
        let p = a * a.transpose();
        assert_eq!(p.rows(), vec![vec![5.0, 2.0], vec![2.0, 1.0]]);
        assert!((a.asymmetry() - 1.0).abs() < 1e-15);
        assert_eq!((a + a).get(0, 1), 4.0);
    }
}
