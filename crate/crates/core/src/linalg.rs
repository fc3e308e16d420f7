//! Spectral decomposition, finite Borel functional calculus and commutation.
//!
//! Float operators are diagonalized with nalgebra's Hermitian eigensolver and
//! their eigenvalues clustered at [`LinalgConfig::eigen_gap`]. Exact operators
//! take a float pass to locate the spectrum, snap each eigenvalue to a field
//! element of small height, and then certify the result exactly: the product
//! `Π (A − λⱼ)` must vanish and the Lagrange projections must resolve `I`.
//! Anything that fails certification is reported as
//! [`Error::InexactSpectrum`] instead of being rounded.

use std::cmp::Ordering;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{Signed, Zero};

use crate::error::{Error, Result};
use crate::lattice::Projection;
use crate::matrix::Matrix;
use crate::scalar::{square_free_split, Exact, Scalar, Surd, C64};

/// Numerical settings shared by linear-algebra routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinalgConfig {
    /// Float residual tolerance.
    pub tolerance: f64,
    /// Eigenvalues closer than this are merged into one eigenprojection.
    pub eigen_gap: f64,
    /// Largest operator dimension accepted.
    pub max_dim: usize,
}

impl Default for LinalgConfig {
    fn default() -> Self {
        LinalgConfig { tolerance: 1e-9, eigen_gap: 1e-7, max_dim: 64 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition<T> {
    /// Distinct eigenvalues, ascending.
    pub eigenvalues: Vec<T>,
    pub projections: Vec<Projection<T>>,
}

impl<T: Field> SpectralDecomposition<T> {
    pub fn reconstruct(&self) -> Matrix<T> {
        let n = self.projections.first().map_or(0, |p| p.dim());
        self.eigenvalues
            .iter()
            .zip(&self.projections)
            .fold(Matrix::zeros(n, n), |acc, (l, p)| &acc + &p.matrix().scale(l))
    }

    pub fn to_float(&self) -> SpectralDecomposition<C64> {
        SpectralDecomposition {
            eigenvalues: self.eigenvalues.iter().map(Scalar::to_c64).collect(),
            projections: self.projections.iter().map(|p| Projection::from_parts(p.matrix().to_float(), p.rank())).collect(),
        }
    }

    /// Index of the eigenvalue equal to `value`, if any.
    pub fn position(&self, value: &T, tol: f64) -> Option<usize> {
        self.eigenvalues.iter().position(|l| l.near(value, tol))
    }
}

/// Scalars with a Hermitian eigensolver and null-space routine.
pub trait Field: Scalar {
    fn hermitian_decomposition(a: &Matrix<Self>, cfg: &LinalgConfig) -> Result<SpectralDecomposition<Self>>;
    fn null_space(m: &Matrix<Self>, tol: f64) -> Vec<Vec<Self>>;
}

fn check_input<T: Scalar>(a: &Matrix<T>, cfg: &LinalgConfig) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.rows(), found: a.cols() });
    }
    if a.dim() > cfg.max_dim {
        return Err(Error::DimensionCap(a.dim(), cfg.max_dim));
    }
    let skew = a.distance(&a.adjoint());
    let hermitian = if T::EXACT { skew == 0.0 && a == &a.adjoint() } else { skew <= cfg.tolerance * a.frobenius_norm().max(1.0) };
    if !hermitian {
        return Err(Error::NotSelfAdjoint(skew));
    }
    Ok(())
}

/// Float eigenpairs clustered at the configured gap: (mean eigenvalue, eigenvectors).
fn float_clusters(a: &Matrix<C64>, cfg: &LinalgConfig) -> Result<Vec<(f64, Vec<Vec<C64>>)>> {
    let n = a.dim();
    if n == 0 {
        return Ok(Vec::new());
    }
    let h = a.to_nalgebra();
    let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(h);
    let mut pairs: Vec<(f64, Vec<C64>)> = (0..n)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors.column(k).iter().cloned().collect()))
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut clusters: Vec<(Vec<f64>, Vec<Vec<C64>>)> = Vec::new();
    let mut last: Option<f64> = None;
    for (value, vector) in pairs {
        match last {
            Some(prev) if value - prev < cfg.eigen_gap => {
                let c = clusters.last_mut().expect("cluster exists");
                c.0.push(value);
                c.1.push(vector);
            }
            Some(prev) if value - prev < 10.0 * cfg.eigen_gap => {
                return Err(Error::NumericalDegeneracy(format!(
                    "eigenvalues {prev:.3e} and {value:.3e} are separated by less than 10× the gap threshold {:.1e}",
                    cfg.eigen_gap
                )));
            }
            _ => clusters.push((vec![value], vec![vector])),
        }
        last = Some(value);
    }
    clusters
        .into_iter()
        .map(|(values, vectors)| {
            let spread = values.last().unwrap() - values[0];
            if spread >= 10.0 * cfg.eigen_gap {
                return Err(Error::NumericalDegeneracy(format!("eigenvalue cluster spans {spread:.3e}")));
            }
            Ok((values.iter().sum::<f64>() / values.len() as f64, vectors))
        })
        .collect()
}

impl Field for C64 {
    fn hermitian_decomposition(a: &Matrix<C64>, cfg: &LinalgConfig) -> Result<SpectralDecomposition<C64>> {
        check_input(a, cfg)?;
        let n = a.dim();
        let mut eigenvalues = Vec::new();
        let mut projections = Vec::new();
        for (value, vectors) in float_clusters(a, cfg)? {
            let p = vectors.iter().fold(Matrix::zeros(n, n), |acc, v| &acc + &Matrix::outer(v));
            let p = (&p + &p.adjoint()).scale(&C64::new(0.5, 0.0));
            eigenvalues.push(C64::new(value, 0.0));
            projections.push(Projection::from_parts(p, vectors.len()));
        }
        Ok(SpectralDecomposition { eigenvalues, projections })
    }

    fn null_space(m: &Matrix<C64>, tol: f64) -> Vec<Vec<C64>> {
        let cols = m.cols();
        if cols == 0 {
            return Vec::new();
        }
        if m.rows() == 0 {
            return (0..cols).map(|j| (0..cols).map(|i| if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }).collect()).collect();
        }
        // pad to at least as many rows as columns so V is square
        let mut a = m.to_nalgebra();
        if a.nrows() < cols {
            a = a.resize(cols, cols, C64::new(0.0, 0.0));
        }
        let svd = a.svd(false, true);
        let v_t = svd.v_t.expect("requested V");
        (0..cols)
            .filter(|&k| svd.singular_values[k] <= tol)
            .map(|k| v_t.row(k).iter().map(|z| z.conj()).collect())
            .collect()
    }
}

/// Best rational approximation with denominator at most `max_den`, accepted
/// when within `tol` of `x`.
pub fn snap_rational(x: f64, max_den: i64, tol: f64) -> Option<BigRational> {
    if !x.is_finite() {
        return None;
    }
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e15 {
            break;
        }
        let ai = a as i128;
        let h2 = ai * h1 + h0;
        let k2 = ai * k1 + k0;
        if k2 > max_den as i128 {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (x - h1 as f64 / k1 as f64).abs() <= tol {
            return Some(BigRational::new(BigInt::from(h1), BigInt::from(k1)));
        }
        let frac = r - a;
        if frac.abs() < 1e-300 {
            break;
        }
        r = 1.0 / frac;
    }
    None
}

/// Largest radicand tried for rational matrices with irrational spectrum.
const RADICAND_SEARCH: u64 = 199;

/// Candidate field elements near `x`, simplest first, generated lazily.
fn exact_candidates(x: f64, radicand: u32) -> impl Iterator<Item = Surd> {
    let rational = snap_rational(x, 1_000_000, 1e-9).map(Surd::rational);
    let root = (radicand as f64).sqrt();
    let max_den: i64 = if radicand >= 2 { 12 } else { 0 };
    let dens = 1..=max_den;
    let irrational = dens.flat_map(move |den| {
        (-(64 * den)..=(64 * den)).filter(|&num| num != 0).filter_map(move |num| {
            let b = num as f64 / den as f64;
            snap_rational(x - b * root, 144, 1e-9).map(|a| {
                let coeff = BigRational::new(BigInt::from(num), BigInt::from(den));
                Surd::rational(a) + Surd::new(BigRational::zero(), coeff, radicand)
            })
        })
    });
    rational.into_iter().chain(irrational)
}

impl Field for Exact {
    fn hermitian_decomposition(a: &Matrix<Exact>, cfg: &LinalgConfig) -> Result<SpectralDecomposition<Exact>> {
        check_input(a, cfg)?;
        let n = a.dim();
        if n == 0 {
            return Ok(SpectralDecomposition { eigenvalues: Vec::new(), projections: Vec::new() });
        }
        let mut radicand = a.radicand();
        let clusters = float_clusters(&a.to_float(), cfg)?;
        let id = Matrix::<Exact>::identity(n);
        let shifted = |l: &Exact| &id.scale(l) - a;
        // an exact eigenvalue makes A − λ singular with the clustered multiplicity
        let certify = |value: f64, r: u32, mult: usize| {
            exact_candidates(value, r)
                .map(Exact::real)
                .find(|l| Exact::null_space(&shifted(l), 0.0).len() == mult)
        };
        let mut eigenvalues: Vec<Exact> = Vec::new();
        for (value, vectors) in &clusters {
            let mut found = certify(*value, radicand, vectors.len());
            if found.is_none() && radicand == 0 {
                // rational entries, irrational eigenvalue: fix the field from the first one
                for r in (2..=RADICAND_SEARCH).filter(|&r| square_free_split(r).0 == 1) {
                    if let Some(l) = certify(*value, r as u32, vectors.len()) {
                        radicand = r as u32;
                        found = Some(l);
                        break;
                    }
                }
            }
            match found {
                Some(l) => eigenvalues.push(l),
                None => return Err(Error::InexactSpectrum(format!("no field element matches eigenvalue {value:.12}"))),
            }
        }
        eigenvalues.sort_by(|x, y| x.cmp_re(y));
        let mut projections = Vec::with_capacity(eigenvalues.len());
        for (i, li) in eigenvalues.iter().enumerate() {
            let mut p = id.clone();
            for (j, lj) in eigenvalues.iter().enumerate() {
                if i != j {
                    let factor = (a - &id.scale(lj)).scale(&(Exact::one() / (li.clone() - lj.clone())));
                    p = &p * &factor;
                }
            }
            let rank = p.trace().re.to_f64().round() as usize;
            projections.push(Projection::from_parts(p, rank));
        }
        let decomposition = SpectralDecomposition { eigenvalues, projections };
        let total = decomposition.projections.iter().fold(Matrix::zeros(n, n), |acc, p| &acc + p.matrix());
        if total != id || &decomposition.reconstruct() != a {
            return Err(Error::InexactSpectrum("eigenprojections failed exact certification".into()));
        }
        Ok(decomposition)
    }

    fn null_space(m: &Matrix<Exact>, _tol: f64) -> Vec<Vec<Exact>> {
        m.kernel_rref(0.0)
    }
}

/// Spectral decomposition with the default configuration.
pub fn spectral_decompose<T: Field>(a: &Matrix<T>) -> Result<SpectralDecomposition<T>> {
    T::hermitian_decomposition(a, &LinalgConfig::default())
}

pub fn spectral_decompose_with<T: Field>(a: &Matrix<T>, cfg: &LinalgConfig) -> Result<SpectralDecomposition<T>> {
    T::hermitian_decomposition(a, cfg)
}

/// A function on a finite spectrum.
///
/// Symbolic variants are total; `Table` and `Indicator` are finite value maps.
#[derive(Debug, Clone, PartialEq)]
pub enum BorelFunction<T> {
    Identity,
    Square,
    /// `x ↦ scale·x + shift`
    Affine { scale: T, shift: T },
    /// Indicator of a finite set of reals.
    Indicator(Vec<T>),
    /// Explicit value map; undefined outside its keys.
    Table(Vec<(T, T)>),
    /// `outer ∘ inner`
    Compose { outer: Box<BorelFunction<T>>, inner: Box<BorelFunction<T>> },
    /// `re + i·im` with real-valued parts.
    Complex { re: Box<BorelFunction<T>>, im: Box<BorelFunction<T>> },
}

impl<T: Scalar> BorelFunction<T> {
    pub fn scalar_multiple(c: T) -> Self {
        BorelFunction::Affine { scale: c, shift: T::zero() }
    }

    pub fn indicator_of(value: T) -> Self {
        BorelFunction::Indicator(vec![value])
    }

    pub fn compose(outer: Self, inner: Self) -> Self {
        BorelFunction::Compose { outer: Box::new(outer), inner: Box::new(inner) }
    }

    pub fn complex(re: Self, im: Self) -> Self {
        BorelFunction::Complex { re: Box::new(re), im: Box::new(im) }
    }

    pub fn eval(&self, x: &T, tol: f64) -> Option<T> {
        match self {
            BorelFunction::Identity => Some(x.clone()),
            BorelFunction::Square => Some(x.clone() * x.clone()),
            BorelFunction::Affine { scale, shift } => Some(scale.clone() * x.clone() + shift.clone()),
            BorelFunction::Indicator(set) => {
                Some(if set.iter().any(|s| s.near(x, tol)) { T::one() } else { T::zero() })
            }
            BorelFunction::Table(map) => map.iter().find(|(k, _)| k.near(x, tol)).map(|(_, v)| v.clone()),
            BorelFunction::Compose { outer, inner } => inner.eval(x, tol).and_then(|y| outer.eval(&y, tol)),
            BorelFunction::Complex { re, im } => {
                let r = re.eval(x, tol)?;
                let i = im.eval(x, tol)?;
                Some(r + T::i() * i)
            }
        }
    }

    /// True when the function maps reals to reals on `points`.
    pub fn is_real_on(&self, points: &[T], tol: f64) -> bool {
        points.iter().all(|x| self.eval(x, tol).is_some_and(|y| y.im().is_negligible(tol)))
    }

    pub fn tag(&self) -> String {
        match self {
            BorelFunction::Identity => "identity".into(),
            BorelFunction::Square => "square".into(),
            BorelFunction::Affine { scale, shift } => format!("affine({scale:?},{shift:?})"),
            BorelFunction::Indicator(set) => format!("indicator{set:?}"),
            BorelFunction::Table(map) => format!("table[{}]", map.len()),
            BorelFunction::Compose { outer, inner } => format!("{}∘{}", outer.tag(), inner.tag()),
            BorelFunction::Complex { re, im } => format!("({})+i({})", re.tag(), im.tag()),
        }
    }
}

/// `f(A) = Σ f(λᵢ) Pᵢ` on a precomputed decomposition.
pub fn borel_apply_decomposed<T: Field>(f: &BorelFunction<T>, d: &SpectralDecomposition<T>, tol: f64) -> Result<Matrix<T>> {
    let n = d.projections.first().map_or(0, |p| p.dim());
    let mut out = Matrix::zeros(n, n);
    for (l, p) in d.eigenvalues.iter().zip(&d.projections) {
        let value = f.eval(l, tol).ok_or_else(|| Error::DomainGap(format!("{l:?}")))?;
        out = &out + &p.matrix().scale(&value);
    }
    Ok(out)
}

pub fn borel_apply<T: Field>(f: &BorelFunction<T>, a: &Matrix<T>) -> Result<Matrix<T>> {
    let cfg = LinalgConfig::default();
    let d = spectral_decompose_with(a, &cfg)?;
    borel_apply_decomposed(f, &d, cfg.tolerance)
}

/// `‖AB − BA‖ ≤ tol` (exact mode: `AB = BA`).
pub fn commutes<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<bool> {
    commutes_within(a, b, LinalgConfig::default().tolerance)
}

pub fn commutes_within<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>, tol: f64) -> Result<bool> {
    a.ensure_same_shape(b)?;
    if !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.rows(), found: a.cols() });
    }
    Ok(a.commutator(b).is_zero(tol))
}

/// Orders reals exactly in exact mode; used to keep spectra sorted.
pub fn cmp_real<T: Scalar>(x: &T, y: &T) -> Ordering {
    x.cmp_re(y)
}

/// Height of a rational, handy for diagnostics.
pub fn rational_height(q: &BigRational) -> BigInt {
    q.numer().abs().max(q.denom().clone())
}
