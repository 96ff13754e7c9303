//! Dense matrices over GF(2^m) with exact, deterministic elimination.
//!
//! Pivots are chosen by the first nonzero entry scanning top to bottom,
//! columns left to right, so every routine returns bit-identical results
//! across runs.

use crate::gf2m::{Field, Gf};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LinalgError {
    #[error("matrix is singular")]
    Singular,
    #[error("system is inconsistent")]
    Inconsistent,
    #[error("kernel dimension is {0}, expected 1")]
    DegenerateKernel(usize),
}

/// Row-major matrix of field values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Gf>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: vec![Gf::ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Gf::ONE);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Gf>>) -> Matrix {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c));
        Matrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, r: usize, c: usize) -> Gf {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Gf) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Gf] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.at(r, c));
            }
        }
        t
    }

    /// New matrix keeping the listed columns, in the order given.
    pub fn columns(&self, cols: &[usize]) -> Matrix {
        let mut m = Matrix::zeros(self.rows, cols.len());
        for r in 0..self.rows {
            for (j, &c) in cols.iter().enumerate() {
                m.set(r, j, self.at(r, c));
            }
        }
        m
    }

    pub fn mul(&self, f: &Field, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for i in 0..self.cols {
                let a = self.at(r, i);
                if a.is_zero() {
                    continue;
                }
                for c in 0..other.cols {
                    let cur = out.at(r, c);
                    out.set(r, c, f.add(cur, f.mul(a, other.at(i, c))));
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, f: &Field, v: &[Gf]) -> Vec<Gf> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(v)
                    .fold(Gf::ZERO, |acc, (&a, &x)| f.add(acc, f.mul(a, x)))
            })
            .collect()
    }

    /// Left-multiply by a row vector: c * M.
    pub fn vec_mul(&self, f: &Field, c: &[Gf]) -> Vec<Gf> {
        assert_eq!(self.rows, c.len());
        (0..self.cols)
            .map(|j| {
                (0..self.rows).fold(Gf::ZERO, |acc, r| {
                    f.add(acc, f.mul(c[r], self.at(r, j)))
                })
            })
            .collect()
    }

    /// In-place reduced row echelon form; returns the pivot columns.
    fn rref(&mut self, f: &Field) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let Some(p) = (r..self.rows).find(|&i| !self.at(i, c).is_zero()) else {
                continue;
            };
            for j in 0..self.cols {
                let tmp = self.at(r, j);
                self.set(r, j, self.at(p, j));
                self.set(p, j, tmp);
            }
            let scale = f.inv(self.at(r, c)).unwrap();
            for j in 0..self.cols {
                self.set(r, j, f.mul(scale, self.at(r, j)));
            }
            for i in 0..self.rows {
                if i == r || self.at(i, c).is_zero() {
                    continue;
                }
                let factor = self.at(i, c);
                for j in 0..self.cols {
                    let v = f.add(self.at(i, j), f.mul(factor, self.at(r, j)));
                    self.set(i, j, v);
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    pub fn rank(&self, f: &Field) -> usize {
        let mut work = self.clone();
        work.rref(f).len()
    }

    pub fn invert(&self, f: &Field) -> Result<Matrix, LinalgError> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut aug = Matrix::zeros(n, 2 * n);
        for r in 0..n {
            for c in 0..n {
                aug.set(r, c, self.at(r, c));
            }
            aug.set(r, n + r, Gf::ONE);
        }
        let pivots = aug.rref(f);
        if pivots.len() < n || pivots.iter().any(|&p| p >= n) {
            return Err(LinalgError::Singular);
        }
        let mut inv = Matrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                inv.set(r, c, aug.at(r, n + c));
            }
        }
        Ok(inv)
    }

    /// Solve M x = b for a matrix with full column rank; rows may exceed
    /// columns, in which case the extra equations must be consistent.
    pub fn solve(&self, f: &Field, b: &[Gf]) -> Result<Vec<Gf>, LinalgError> {
        assert_eq!(self.rows, b.len());
        let mut aug = Matrix::zeros(self.rows, self.cols + 1);
        for (r, &rhs) in b.iter().enumerate() {
            for c in 0..self.cols {
                aug.set(r, c, self.at(r, c));
            }
            aug.set(r, self.cols, rhs);
        }
        let pivots = aug.rref(f);
        if pivots.contains(&self.cols) {
            return Err(LinalgError::Inconsistent);
        }
        if pivots.len() < self.cols {
            return Err(LinalgError::Singular);
        }
        Ok((0..self.cols).map(|c| aug.at(c, self.cols)).collect())
    }

    /// The unique (up to scale) nonzero row vector c with c M = 0, for a
    /// matrix whose left kernel is one-dimensional. Normalized so the first
    /// nonzero entry is 1.
    pub fn left_kernel_vector(&self, f: &Field) -> Result<Vec<Gf>, LinalgError> {
        let mut t = self.transpose();
        let pivots = t.rref(f);
        let dim = self.rows - pivots.len();
        if dim != 1 {
            return Err(LinalgError::DegenerateKernel(dim));
        }
        let free = (0..self.rows)
            .find(|c| !pivots.contains(c))
            .expect("kernel dimension 1 leaves one free column");
        let mut v = vec![Gf::ZERO; self.rows];
        v[free] = Gf::ONE;
        for (r, &p) in pivots.iter().enumerate() {
            v[p] = t.at(r, free);
        }
        let lead = v.iter().find(|x| !x.is_zero()).copied().unwrap();
        let scale = f.inv(lead).unwrap();
        for x in &mut v {
            *x = f.mul(scale, *x);
        }
        Ok(v)
    }
}
