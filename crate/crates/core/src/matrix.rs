//! Dense square and rectangular matrices over a [`Scalar`].

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::scalar::{Scalar, C64};

#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

pub type FloatMatrix = Matrix<C64>;
pub type ExactMatrix = Matrix<crate::scalar::Exact>;

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|row| row.len() != c) {
            return Err(Error::DimensionMismatch { expected: c, found: bad.len() });
        }
        Ok(Matrix { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    pub fn diagonal(entries: &[T]) -> Self {
        let n = entries.len();
        Self::from_fn(n, n, |i, j| if i == j { entries[i].clone() } else { T::zero() })
    }

    /// `v v*` for a column vector `v`.
    pub fn outer(v: &[T]) -> Self {
        Self::from_fn(v.len(), v.len(), |i, j| v[i].clone() * v[j].conj())
    }

    pub fn column(v: &[T]) -> Self {
        Matrix { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dim(&self) -> usize {
        self.rows
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).fold(T::zero(), |acc, i| acc + self[(i, i)].clone())
    }

    pub fn scale(&self, c: &T) -> Self {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x.clone() * c.clone()).collect() }
    }

    pub fn map(&self, f: impl Fn(&T) -> T) -> Self {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect() }
    }

    pub fn apply(&self, v: &[T]) -> Vec<T> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone()))
            .collect()
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, found: other.rows });
        }
        Ok(self * other)
    }

    pub fn ensure_same_shape(&self, other: &Self) -> Result<()> {
        if self.rows != other.rows {
            return Err(Error::DimensionMismatch { expected: self.rows, found: other.rows });
        }
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, found: other.cols });
        }
        Ok(())
    }

    /// Frobenius norm of `self − other`, in f64.
    pub fn distance(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.clone() - b.clone()).abs().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|a| a.abs().powi(2)).sum::<f64>().sqrt()
    }

    /// Entrywise equality: exact in exact mode, within `tol` (Frobenius) otherwise.
    pub fn near(&self, other: &Self, tol: f64) -> bool {
        if self.rows != other.rows || self.cols != other.cols {
            return false;
        }
        if T::EXACT {
            self == other
        } else {
            self.distance(other) <= tol
        }
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        if T::EXACT {
            self.data.iter().all(Scalar::is_zero_exact)
        } else {
            self.frobenius_norm() <= tol
        }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.near(&self.adjoint(), tol)
    }

    /// Commutator `AB − BA`.
    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    pub fn to_float(&self) -> FloatMatrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(Scalar::to_c64).collect() }
    }

    /// Radicand shared by the entries, if any are irrational.
    pub fn radicand(&self) -> u32 {
        self.data.iter().map(Scalar::radicand).max().unwrap_or(0)
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, found: other.cols });
        }
        let mut data = self.data.clone();
        data.extend(other.data.iter().cloned());
        Ok(Matrix { rows: self.rows + other.rows, cols: self.cols, data })
    }

    /// Places `block` at `(offset, offset)` inside an `n × n` zero matrix.
    pub fn embed(block: &Self, n: usize, offset: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..block.rows {
            for j in 0..block.cols {
                m[(offset + i, offset + j)] = block[(i, j)].clone();
            }
        }
        m
    }

    pub fn sub_block(&self, offset: usize, size: usize) -> Self {
        Self::from_fn(size, size, |i, j| self[(offset + i, offset + j)].clone())
    }

    fn pivot_in(&self, col: usize, from: usize, tol: f64) -> Option<usize> {
        if T::EXACT {
            (from..self.rows).find(|&r| !self[(r, col)].is_zero_exact())
        } else {
            (from..self.rows)
                .map(|r| (r, self[(r, col)].abs()))
                .filter(|&(_, a)| a > tol)
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(r, _)| r)
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for j in 0..self.cols {
                self.data.swap(a * self.cols + j, b * self.cols + j);
            }
        }
    }

    /// Reduced row echelon form; returns the pivot columns.
    pub fn rref(&mut self, tol: f64) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..self.cols {
            if row == self.rows {
                break;
            }
            let Some(p) = self.pivot_in(col, row, tol) else {
                continue;
            };
            self.swap_rows(row, p);
            let inv = T::one() / self[(row, col)].clone();
            for j in 0..self.cols {
                self[(row, j)] = self[(row, j)].clone() * inv.clone();
            }
            for r in 0..self.rows {
                if r != row && !self[(r, col)].is_negligible(0.0) {
                    let factor = self[(r, col)].clone();
                    for j in 0..self.cols {
                        let v = self[(row, j)].clone() * factor.clone();
                        self[(r, j)] = self[(r, j)].clone() - v;
                    }
                }
            }
            pivots.push(col);
            row += 1;
        }
        pivots
    }

    pub fn rank(&self, tol: f64) -> usize {
        self.clone().rref(tol).len()
    }

    /// Basis of the null space from the reduced row echelon form.
    pub fn kernel_rref(&self, tol: f64) -> Vec<Vec<T>> {
        let mut m = self.clone();
        let pivots = m.rref(tol);
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![T::zero(); self.cols];
                v[f] = T::one();
                for (r, &p) in pivots.iter().enumerate() {
                    v[p] = -m[(r, f)].clone();
                }
                v
            })
            .collect()
    }

    pub fn inverse(&self, tol: f64) -> Option<Self> {
        if !self.is_square() {
            return None;
        }
        let n = self.rows;
        let mut aug = Self::from_fn(n, 2 * n, |i, j| {
            if j < n {
                self[(i, j)].clone()
            } else if j - n == i {
                T::one()
            } else {
                T::zero()
            }
        });
        let pivots = aug.rref(tol);
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return None;
        }
        Some(Self::from_fn(n, n, |i, j| aug[(i, n + j)].clone()))
    }

    /// Orthogonal projection onto the span of linearly independent `vectors`,
    /// `B (B*B)⁻¹ B*`.
    pub fn span_projection(dim: usize, vectors: &[Vec<T>], tol: f64) -> Self {
        if vectors.is_empty() {
            return Self::zeros(dim, dim);
        }
        let b = Self::from_fn(dim, vectors.len(), |i, j| vectors[j][i].clone());
        let bh = b.adjoint();
        let gram = &bh * &b;
        let inv = gram.inverse(tol).expect("span vectors must be linearly independent");
        &(&b * &inv) * &bh
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Scalar> Mul for &Matrix<T> {
    type Output = Matrix<T>;
    fn mul(self, o: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.cols, o.rows, "matrix product shape mismatch");
        let mut out: Matrix<T> = Matrix::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero_exact() {
                    continue;
                }
                for j in 0..o.cols {
                    let prod = a.clone() * o[(k, j)].clone();
                    out[(i, j)] = out[(i, j)].clone() + prod;
                }
            }
        }
        out
    }
}

impl<T: Scalar> Add for &Matrix<T> {
    type Output = Matrix<T>;
    fn add(self, o: &Matrix<T>) -> Matrix<T> {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols), "matrix sum shape mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&o.data).map(|(a, b)| a.clone() + b.clone()).collect(),
        }
    }
}

impl<T: Scalar> Sub for &Matrix<T> {
    type Output = Matrix<T>;
    fn sub(self, o: &Matrix<T>) -> Matrix<T> {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols), "matrix difference shape mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&o.data).map(|(a, b)| a.clone() - b.clone()).collect(),
        }
    }
}

impl<T: Scalar> Neg for &Matrix<T> {
    type Output = Matrix<T>;
    fn neg(self) -> Matrix<T> {
        self.map(|x| -x.clone())
    }
}

impl<T: fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", &self.data[i * self.cols..(i + 1) * self.cols])?;
        }
        write!(f, "]")
    }
}

impl FloatMatrix {
    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<C64> {
        nalgebra::DMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)])
    }

    pub fn from_nalgebra(m: &nalgebra::DMatrix<C64>) -> Self {
        Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        if self.rows == 0 || self.cols == 0 {
            return 0.0;
        }
        let svd = self.to_nalgebra().svd(false, false);
        svd.singular_values.iter().cloned().fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Exact;

    fn q(p: i64) -> Exact {
        Exact::from_ratio(p, 1)
    }

    #[test]
    fn exact_inverse_and_kernel() {
        let m = Matrix::from_rows(vec![vec![q(2), q(1)], vec![q(1), q(1)]]).unwrap();
        let inv = m.inverse(0.0).unwrap();
        assert_eq!(&m * &inv, Matrix::identity(2));
        let singular = Matrix::from_rows(vec![vec![q(1), q(2)], vec![q(2), q(4)]]).unwrap();
        assert!(singular.inverse(0.0).is_none());
        let ker = singular.kernel_rref(0.0);
        assert_eq!(ker.len(), 1);
        assert!(singular.apply(&ker[0]).iter().all(Scalar::is_zero_exact));
    }

    #[test]
    fn span_projection_is_idempotent() {
        let v = vec![vec![q(1), q(1), q(0)]];
        let p = Matrix::<Exact>::span_projection(3, &v, 0.0);
        assert_eq!(&p * &p, p);
        assert_eq!(p[(0, 1)], Exact::from_ratio(1, 2));
    }

    #[test]
    fn float_rank_with_tolerance() {
        let m = Matrix::from_rows(vec![
            vec![C64::new(1.0, 0.0), C64::new(2.0, 0.0)],
            vec![C64::new(2.0, 0.0), C64::new(4.0 + 1e-13, 0.0)],
        ])
        .unwrap();
        assert_eq!(m.rank(1e-9), 1);
        assert_eq!(m.rank(0.0), 2);
    }
}
