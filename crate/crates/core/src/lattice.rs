//! Projections and the lattice operations on `P(H)`.

use crate::error::{Error, Result};
use crate::linalg::{Field, LinalgConfig};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// A self-adjoint idempotent with its rank.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection<T> {
    op: Matrix<T>,
    rank: usize,
}

impl<T: Scalar> Projection<T> {
    /// Validates `P² = P = P*` and reads the rank off the trace.
    pub fn new(op: Matrix<T>) -> Result<Self> {
        Self::new_with(op, LinalgConfig::default().tolerance)
    }

    pub fn new_with(op: Matrix<T>, tol: f64) -> Result<Self> {
        if !op.is_square() {
            return Err(Error::DimensionMismatch { expected: op.rows(), found: op.cols() });
        }
        if !op.is_hermitian(tol) {
            return Err(Error::NotProjection("not self-adjoint".into()));
        }
        if !(&op * &op).near(&op, tol) {
            return Err(Error::NotProjection("not idempotent".into()));
        }
        let trace = op.trace();
        let rank = trace.re_f64().round();
        if T::EXACT && trace != T::from_i64(rank as i64) {
            return Err(Error::NotProjection("trace is not an integer".into()));
        }
        Ok(Projection { op, rank: rank as usize })
    }

    pub(crate) fn from_parts(op: Matrix<T>, rank: usize) -> Self {
        Projection { op, rank }
    }

    pub fn zero(n: usize) -> Self {
        Projection { op: Matrix::zeros(n, n), rank: 0 }
    }

    pub fn identity(n: usize) -> Self {
        Projection { op: Matrix::identity(n), rank: n }
    }

    /// Rank-1 projection `v v* / ⟨v, v⟩` onto the line through `v`.
    pub fn onto_ray(v: &[T]) -> Result<Self> {
        let norm = v.iter().fold(T::zero(), |acc, x| acc + x.conj() * x.clone());
        if norm.is_negligible(0.0) {
            return Err(Error::ZeroVector(0));
        }
        let op = Matrix::outer(v).scale(&(T::one() / norm));
        Ok(Projection { op, rank: 1 })
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.op
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.op
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// `E ≤ F` iff `EF = E`.
    pub fn leq(&self, other: &Self, tol: f64) -> bool {
        (&self.op * &other.op).near(&self.op, tol)
    }

    /// `EF = 0`.
    pub fn orthogonal_to(&self, other: &Self, tol: f64) -> bool {
        (&self.op * &other.op).is_zero(tol)
    }

    pub fn commutes_with(&self, other: &Self, tol: f64) -> bool {
        self.op.commutator(&other.op).is_zero(tol)
    }

    /// Sum of pairwise orthogonal projections.
    pub fn orthogonal_sum<'a>(n: usize, parts: impl IntoIterator<Item = &'a Projection<T>>) -> Self {
        let mut op = Matrix::zeros(n, n);
        let mut rank = 0;
        for p in parts {
            op = &op + &p.op;
            rank += p.rank;
        }
        Projection { op, rank }
    }

    /// `⟨x, P x⟩ / ⟨x, x⟩`.
    pub fn expectation(&self, x: &[T]) -> T {
        let px = self.op.apply(x);
        let num = x.iter().zip(&px).fold(T::zero(), |acc, (a, b)| acc + a.conj() * b.clone());
        let den = x.iter().fold(T::zero(), |acc, a| acc + a.conj() * a.clone());
        num / den
    }
}

/// `I − E`.
pub fn ortho_complement<T: Scalar>(e: &Projection<T>) -> Projection<T> {
    let n = e.dim();
    Projection { op: &Matrix::identity(n) - &e.op, rank: n - e.rank }
}

/// Projection onto `range(E) ∩ range(F)`, the kernel of `[(I−E); (I−F)]`.
pub fn lattice_meet<T: Field>(e: &Projection<T>, f: &Projection<T>) -> Result<Projection<T>> {
    lattice_meet_with(e, f, LinalgConfig::default().tolerance)
}

pub fn lattice_meet_with<T: Field>(e: &Projection<T>, f: &Projection<T>, tol: f64) -> Result<Projection<T>> {
    if e.dim() != f.dim() {
        return Err(Error::DimensionMismatch { expected: e.dim(), found: f.dim() });
    }
    let n = e.dim();
    let stacked = ortho_complement(e).op.vstack(&ortho_complement(f).op)?;
    let basis = T::null_space(&stacked, tol);
    let rank = basis.len();
    Ok(Projection { op: Matrix::span_projection(n, &basis, tol), rank })
}

/// Projection onto `range(E) + range(F)`, computed as `(E⊥ ∧ F⊥)⊥`.
pub fn lattice_join<T: Field>(e: &Projection<T>, f: &Projection<T>) -> Result<Projection<T>> {
    lattice_join_with(e, f, LinalgConfig::default().tolerance)
}

pub fn lattice_join_with<T: Field>(e: &Projection<T>, f: &Projection<T>, tol: f64) -> Result<Projection<T>> {
    let meet = lattice_meet_with(&ortho_complement(e), &ortho_complement(f), tol)?;
    Ok(ortho_complement(&meet))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{Exact, C64};

    fn diag(bits: &[i64]) -> Projection<Exact> {
        let entries: Vec<Exact> = bits.iter().map(|&b| Exact::from_ratio(b, 1)).collect();
        Projection::new(Matrix::diagonal(&entries)).unwrap()
    }

    fn ray(v: &[i64]) -> Projection<Exact> {
        let v: Vec<Exact> = v.iter().map(|&x| Exact::from_ratio(x, 1)).collect();
        Projection::onto_ray(&v).unwrap()
    }

    #[test]
    fn validation() {
        assert!(Projection::new(Matrix::<Exact>::identity(2).scale(&Exact::from_ratio(2, 1))).is_err());
        let p = Projection::new(Matrix::<Exact>::identity(3)).unwrap();
        assert_eq!(p.rank(), 3);
        assert!(matches!(Projection::<Exact>::onto_ray(&[Exact::zero(), Exact::zero()]), Err(Error::ZeroVector(_))));
    }

    #[test]
    fn meet_examples() {
        let e = diag(&[1, 0, 1]);
        assert_eq!(lattice_meet(&e, &Projection::identity(3)).unwrap(), e);
        let m = lattice_meet(&ray(&[1, 0]), &ray(&[1, 1])).unwrap();
        assert_eq!(m.rank(), 0);
        assert!(m.matrix().is_zero(0.0));
        // null-space oracle: vectors fixed by both diag(1,1,0) and diag(0,1,1) are multiples of e₂
        let m = lattice_meet(&diag(&[1, 1, 0]), &diag(&[0, 1, 1])).unwrap();
        assert_eq!(m, diag(&[0, 1, 0]));
    }

    #[test]
    fn join_examples() {
        let e = diag(&[1, 0, 0]);
        assert_eq!(lattice_join(&e, &Projection::zero(3)).unwrap(), e);
        assert_eq!(lattice_join(&e, &diag(&[0, 1, 0])).unwrap(), diag(&[1, 1, 0]));
        // span of (1,0) and (1,1) is all of C²
        assert_eq!(lattice_join(&ray(&[1, 0]), &ray(&[1, 1])).unwrap(), Projection::identity(2));
    }

    #[test]
    fn complement_examples() {
        assert_eq!(ortho_complement(&Projection::<Exact>::zero(3)), Projection::identity(3));
        assert_eq!(ortho_complement(&Projection::<Exact>::identity(3)), Projection::zero(3));
        assert_eq!(ortho_complement(&diag(&[1, 0, 0])), diag(&[0, 1, 1]));
    }

    #[test]
    fn float_meet_join_agree_with_exact() {
        let to_f = |p: &Projection<Exact>| Projection::new(p.matrix().to_float()).unwrap();
        let a = diag(&[1, 1, 0]);
        let b = ray(&[1, 2, 2]);
        let exact = lattice_join(&a, &b).unwrap();
        let float: Projection<C64> = lattice_join(&to_f(&a), &to_f(&b)).unwrap();
        assert_eq!(float.rank(), exact.rank());
        assert!(float.matrix().near(&exact.matrix().to_float(), 1e-10));
        assert!(matches!(lattice_meet(&a, &Projection::identity(2)), Err(Error::DimensionMismatch { .. })));
    }
}
