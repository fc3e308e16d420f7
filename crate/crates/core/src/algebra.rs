//! Density operators and direct sums of full matrix algebras
//! `M_{n₁} ⊕ … ⊕ M_{n_k}`: Gleason measures, fractional-value witnesses,
//! equivalent-projection partitions, the GNS construction, no-go
//! certificates for multiplicative states and the central decomposition.

use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Projection;
use crate::linalg::Field;
use crate::matrix::{ExactMatrix, FloatMatrix, Matrix};
use crate::measures::{Functional, ProbabilityMeasure, ProjectionFamily, TraceFunctional};
use crate::random::{cayley_unitary, ginibre, seeded};
use crate::rays::{FromEntry, LoadOptions, RayConfiguration};
use crate::rayset::Entry;
use crate::scalar::{Exact, Scalar, Surd, C64};

/// Threshold below which a value counts as 0 (or above `1 − δ` as 1) when
/// looking for fractional witnesses.
pub const FRACTIONAL_DELTA: f64 = 1e-6;

/// Attempts at random unitary conjugation per block.
pub const CONJUGATION_ATTEMPTS: usize = 100;

/// A positive operator of trace one.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator<T> {
    rho: Matrix<T>,
}

impl<T: Field> DensityOperator<T> {
    /// Validates self-adjointness, `tr ρ = 1` (exactly in exact mode, within
    /// 1e-10 otherwise) and eigenvalues `≥ −1e-12`.
    pub fn new(rho: Matrix<T>) -> Result<Self> {
        if !rho.is_square() {
            return Err(Error::DimensionMismatch { expected: rho.rows(), found: rho.cols() });
        }
        if !rho.is_hermitian(1e-12) {
            return Err(Error::InvalidDensity("not self-adjoint".into()));
        }
        let tr = rho.trace();
        let trace_ok = if T::EXACT { tr == T::one() } else { (tr.re_f64() - 1.0).abs() <= 1e-10 };
        if !trace_ok {
            return Err(Error::InvalidDensity(format!("trace {tr:?} ≠ 1")));
        }
        let f = rho.to_float().to_nalgebra();
        let f = (&f + f.adjoint()) * C64::new(0.5, 0.0);
        if let Some(min) = f.symmetric_eigenvalues().iter().copied().reduce(f64::min) {
            if min < -1e-12 {
                return Err(Error::InvalidDensity(format!("eigenvalue {min:.3e} < 0")));
            }
        }
        Ok(DensityOperator { rho })
    }

    pub fn maximally_mixed(n: usize) -> Self {
        DensityOperator { rho: Matrix::identity(n).scale(&T::from_ratio(1, n as i64)) }
    }

    /// `|x⟩⟨x| / ⟨x, x⟩`.
    pub fn pure(x: &[T]) -> Result<Self> {
        Ok(DensityOperator { rho: Projection::onto_ray(x)?.into_matrix() })
    }

    pub fn diagonal(weights: &[T]) -> Result<Self> {
        Self::new(Matrix::diagonal(weights))
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.rho
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    /// `tr(ρA)`.
    pub fn expectation(&self, a: &Matrix<T>) -> T {
        (&self.rho * a).trace()
    }

    pub fn functional(&self) -> TraceFunctional<T> {
        TraceFunctional { rho: self.rho.clone() }
    }

    /// `ρ = P` for a rank-one projection `P`, i.e. `ρ² = ρ`.
    pub fn is_pure(&self, tol: f64) -> bool {
        (&self.rho * &self.rho).near(&self.rho, tol)
    }
}

impl DensityOperator<C64> {
    /// Random full-rank density matrix (normalized Wishart).
    pub fn random(n: usize, rng: &mut impl Rng) -> Self {
        DensityOperator { rho: crate::random::random_density(n, rng) }
    }
}

/// Textual density specifications: `I/n` (or `mixed`), `e<k>` for a basis
/// vector, `diag:w1,w2,…` and `pure:x1,x2,…`. Entries use the exact literal
/// syntax of ray documents.
#[derive(Debug, Clone, PartialEq)]
pub enum DensitySpec {
    MaximallyMixed(Option<usize>),
    Basis(usize),
    Diagonal(Vec<Surd>),
    Pure(Vec<Surd>),
}

impl std::str::FromStr for DensitySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::BadDensitySpec(s.to_string());
        let list = |body: &str| -> Result<Vec<Surd>> {
            body.split(',').map(|t| t.trim().parse::<Surd>().map_err(|_| bad())).collect()
        };
        let s = s.trim();
        if s == "mixed" || s == "I/n" {
            return Ok(DensitySpec::MaximallyMixed(None));
        }
        if let Some(n) = s.strip_prefix("I/") {
            return n.parse().map(|n| DensitySpec::MaximallyMixed(Some(n))).map_err(|_| bad());
        }
        if let Some(k) = s.strip_prefix('e') {
            let k: usize = k.parse().map_err(|_| bad())?;
            return if k == 0 { Err(bad()) } else { Ok(DensitySpec::Basis(k - 1)) };
        }
        if let Some(body) = s.strip_prefix("diag:") {
            return list(body).map(DensitySpec::Diagonal);
        }
        if let Some(body) = s.strip_prefix("pure:") {
            return list(body).map(DensitySpec::Pure);
        }
        Err(bad())
    }
}

impl DensitySpec {
    pub fn build<T: Field + FromEntry>(&self, dim: usize) -> Result<DensityOperator<T>> {
        let conv = |xs: &[Surd]| -> Result<Vec<T>> {
            if xs.len() != dim {
                return Err(Error::BadDensitySpec(format!("{} entries for dimension {dim}", xs.len())));
            }
            Ok(xs.iter().map(|x| T::from_entry(&Entry::Exact(x.clone()))).collect())
        };
        match self {
            DensitySpec::MaximallyMixed(Some(n)) if *n != dim => {
                Err(Error::BadDensitySpec(format!("I/{n} for dimension {dim}")))
            }
            DensitySpec::MaximallyMixed(_) => Ok(DensityOperator::maximally_mixed(dim)),
            DensitySpec::Basis(k) if *k >= dim => Err(Error::BadDensitySpec(format!("e{} in dimension {dim}", k + 1))),
            DensitySpec::Basis(k) => {
                let x: Vec<T> = (0..dim).map(|i| if i == *k { T::one() } else { T::zero() }).collect();
                DensityOperator::pure(&x)
            }
            DensitySpec::Diagonal(w) => DensityOperator::diagonal(&conv(w)?).map_err(|e| Error::BadDensitySpec(e.to_string())),
            DensitySpec::Pure(x) => DensityOperator::pure(&conv(x)?).map_err(|e| Error::BadDensitySpec(e.to_string())),
        }
    }
}

/// `μ(E) = tr(ρE)` on every member of the family.
pub fn gleason_measure<T: Field>(rho: &DensityOperator<T>, family: &ProjectionFamily<T>) -> Result<ProbabilityMeasure<T>> {
    if rho.dim() != family.dim() {
        return Err(Error::DimensionMismatch { expected: family.dim(), found: rho.dim() });
    }
    Ok(ProbabilityMeasure { values: family.members().iter().map(|p| rho.expectation(p.matrix())).collect() })
}

/// `(|μ(E) − μ(F)|, ‖E − F‖)` for the Gleason measure of `ρ`.
pub fn norm_property<T: Field>(rho: &DensityOperator<T>, e: &Matrix<T>, f: &Matrix<T>) -> (f64, f64) {
    let gap = (rho.expectation(e) - rho.expectation(f)).abs();
    (gap, (e - f).to_float().operator_norm())
}

/// `M_{n₁} ⊕ … ⊕ M_{n_k}` acting block-diagonally on `C^{Σnᵢ}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteAlgebra {
    blocks: Vec<usize>,
}

/// A matrix unit `e_{ij}` of block `block`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatrixUnit {
    pub block: usize,
    pub i: usize,
    pub j: usize,
}

impl FiniteAlgebra {
    pub fn new(blocks: Vec<usize>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::EmptyAlgebra);
        }
        if blocks.contains(&0) {
            return Err(Error::BadBlockSpec("block sizes must be positive".into()));
        }
        Ok(FiniteAlgebra { blocks })
    }

    /// Parses `"1,3"`-style block lists.
    pub fn parse(spec: &str) -> Result<Self> {
        if spec.trim().is_empty() {
            return Err(Error::EmptyAlgebra);
        }
        let blocks = spec
            .split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|_| Error::BadBlockSpec(format!("`{t}` is not a positive integer"))))
            .collect::<Result<_>>()?;
        Self::new(blocks)
    }

    pub fn full(n: usize) -> Self {
        FiniteAlgebra { blocks: vec![n] }
    }

    pub fn abelian(n: usize) -> Self {
        FiniteAlgebra { blocks: vec![1; n] }
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().sum()
    }

    pub fn offset(&self, block: usize) -> usize {
        self.blocks[..block].iter().sum()
    }

    pub fn is_abelian(&self) -> bool {
        self.blocks.iter().all(|&n| n == 1)
    }

    pub fn central_projection<T: Scalar>(&self, block: usize) -> Projection<T> {
        let n = self.blocks[block];
        Projection::from_parts(Matrix::embed(&Matrix::identity(n), self.dim(), self.offset(block)), n)
    }

    /// All matrix units, block by block, row-major within a block.
    pub fn matrix_units(&self) -> Vec<MatrixUnit> {
        let mut out = Vec::new();
        for (block, &n) in self.blocks.iter().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    out.push(MatrixUnit { block, i, j });
                }
            }
        }
        out
    }

    pub fn unit_matrix<T: Scalar>(&self, u: MatrixUnit) -> Matrix<T> {
        let o = self.offset(u.block);
        let mut m = Matrix::zeros(self.dim(), self.dim());
        m[(o + u.i, o + u.j)] = T::one();
        m
    }

    /// Places a block-local operator into the full algebra.
    pub fn embed<T: Scalar>(&self, block: usize, m: &Matrix<T>) -> Result<Matrix<T>> {
        if m.rows() != self.blocks[block] || m.cols() != self.blocks[block] {
            return Err(Error::DimensionMismatch { expected: self.blocks[block], found: m.rows() });
        }
        Ok(Matrix::embed(m, self.dim(), self.offset(block)))
    }

    /// Whether `m` is block-diagonal with the declared block sizes.
    pub fn contains<T: Scalar>(&self, m: &Matrix<T>, tol: f64) -> bool {
        let d = self.dim();
        if m.rows() != d || m.cols() != d {
            return false;
        }
        let block_of: Vec<usize> = self.blocks.iter().enumerate().flat_map(|(k, &n)| std::iter::repeat_n(k, n)).collect();
        (0..d).all(|i| (0..d).all(|j| block_of[i] == block_of[j] || m[(i, j)].is_negligible(tol)))
    }

    /// Direct sum of ray configurations, one per listed block, with rays
    /// zero outside their block. Labels are prefixed with `b<k>.`.
    pub fn direct_sum_configuration<T: Scalar>(&self, parts: &[(usize, &RayConfiguration<T>)]) -> Result<RayConfiguration<T>> {
        let d = self.dim();
        let mut vectors = Vec::new();
        let mut labels = Vec::new();
        for &(block, cfg) in parts {
            if block >= self.blocks.len() || cfg.dim() != self.blocks[block] {
                return Err(Error::DimensionMismatch { expected: self.blocks.get(block).copied().unwrap_or(0), found: cfg.dim() });
            }
            let o = self.offset(block);
            for r in 0..cfg.len() {
                let mut v = vec![T::zero(); d];
                for (i, c) in cfg.ray(r).iter().enumerate() {
                    v[o + i] = c.clone();
                }
                vectors.push(v);
                labels.push(format!("b{}.{}", block + 1, cfg.label(r)));
            }
        }
        let tolerance = parts.first().map_or(LoadOptions::default().tolerance, |(_, c)| c.tolerance());
        RayConfiguration::from_vectors(d, vectors, labels, &LoadOptions { dedup: false, max_dim: d.max(1), tolerance })
    }
}

impl fmt::Display for FiniteAlgebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.blocks.iter().map(|n| format!("M_{n}")).collect();
        f.write_str(&parts.join(" ⊕ "))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FractionalWitness<T> {
    pub projection: Projection<T>,
    pub value: T,
    pub block: usize,
    /// `standard-partition`, `conjugated-partition #k` or `central-projection`.
    pub method: String,
}

fn strictly_fractional<T: Scalar>(v: &T) -> bool {
    let x = v.re_f64();
    x > FRACTIONAL_DELTA && x < 1.0 - FRACTIONAL_DELTA
}

/// A projection of the algebra whose value `tr(ρE)` lies in `(δ, 1−δ)`.
///
/// Tries, for each block of size ≥ 2, the diagonal rank-one partition and
/// then up to [`CONJUGATION_ATTEMPTS`] conjugates of it by seeded Cayley
/// unitaries (exact in exact mode); falls back to the central projections.
/// Returns `None` when no candidate is fractional, as for a character of an
/// abelian algebra.
pub fn fractional_witness<T: Field>(rho: &DensityOperator<T>, algebra: &FiniteAlgebra, seed: u64) -> Result<Option<FractionalWitness<T>>> {
    if rho.dim() != algebra.dim() {
        return Err(Error::DimensionMismatch { expected: algebra.dim(), found: rho.dim() });
    }
    let mut rng = seeded(seed);
    for (block, &n) in algebra.blocks().iter().enumerate() {
        if n < 2 {
            continue;
        }
        let diagonal: Vec<Matrix<T>> = (0..n)
            .map(|j| {
                let mut m = Matrix::zeros(n, n);
                m[(j, j)] = T::one();
                m
            })
            .collect();
        for attempt in 0..=CONJUGATION_ATTEMPTS {
            let u = if attempt == 0 { Matrix::identity(n) } else { cayley_unitary::<T>(n, 2, &mut rng) };
            for e in &diagonal {
                let local = &(&u * e) * &u.adjoint();
                let full = algebra.embed(block, &local)?;
                let value = rho.expectation(&full);
                if strictly_fractional(&value) {
                    let method = if attempt == 0 { "standard-partition".to_string() } else { format!("conjugated-partition #{attempt}") };
                    return Ok(Some(FractionalWitness { projection: Projection::from_parts(full, 1), value, block, method }));
                }
            }
        }
    }
    for block in 0..algebra.blocks().len() {
        let c = algebra.central_projection::<T>(block);
        let value = rho.expectation(c.matrix());
        if strictly_fractional(&value) {
            return Ok(Some(FractionalWitness { projection: c, value, block, method: "central-projection".into() }));
        }
    }
    Ok(None)
}

/// `E = E₁ + … + E_n` with partial isometries `θⱼ`, `θⱼ*θⱼ = E₁`,
/// `θⱼθⱼ* = Eⱼ`. `isometries[0]` is `E₁` itself.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalencePartition<T> {
    pub target: Projection<T>,
    pub parts: Vec<Projection<T>>,
    pub isometries: Vec<Matrix<T>>,
}

impl<T: Field> EquivalencePartition<T> {
    /// Largest deviation over all defining identities (0 when exact).
    pub fn residual(&self) -> f64 {
        let n = self.target.dim();
        let mut worst: f64 = 0.0;
        let mut total = Matrix::zeros(n, n);
        let e1 = self.parts[0].matrix();
        for (j, (p, theta)) in self.parts.iter().zip(&self.isometries).enumerate() {
            total = &total + p.matrix();
            worst = worst.max((&theta.adjoint() * theta).distance(e1));
            worst = worst.max((theta * &theta.adjoint()).distance(p.matrix()));
            for q in &self.parts[j + 1..] {
                worst = worst.max((p.matrix() * q.matrix()).frobenius_norm());
            }
        }
        worst.max(total.distance(self.target.matrix()))
    }
}

/// Splits `target` into `parts` mutually orthogonal, pairwise equivalent
/// projections of equal rank. Requires `rank(target)` divisible by `parts`.
pub fn partition_identity<T: Field>(target: &Projection<T>, parts: usize, tol: f64) -> Result<EquivalencePartition<T>> {
    let rank = target.rank();
    if parts == 0 || !rank.is_multiple_of(parts) {
        return Err(Error::IndivisibleRank { rank, parts });
    }
    let n = target.dim();
    let m = target.matrix();
    // orthogonal (unnormalized) basis of the range by Gram-Schmidt on columns
    let mut basis: Vec<(Vec<T>, T)> = Vec::new();
    for c in 0..n {
        let mut v: Vec<T> = (0..n).map(|r| m[(r, c)].clone()).collect();
        for (b, bb) in &basis {
            let coeff = b.iter().zip(&v).fold(T::zero(), |acc, (x, y)| acc + x.conj() * y.clone()) / bb.clone();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi = vi.clone() - coeff.clone() * bi.clone();
            }
        }
        let norm2 = v.iter().fold(T::zero(), |acc, x| acc + x.conj() * x.clone());
        if norm2.is_negligible(tol) {
            continue;
        }
        basis.push((v, norm2));
    }
    if basis.len() != rank {
        return Err(Error::NotProjection(format!("range has dimension {} but rank is {rank}", basis.len())));
    }
    let size = rank / parts;
    let mut projections = Vec::with_capacity(parts);
    let mut isometries = Vec::with_capacity(parts);
    for j in 0..parts {
        let mut p = Matrix::zeros(n, n);
        let mut theta = Matrix::zeros(n, n);
        for i in 0..size {
            let (v, vv) = &basis[j * size + i];
            let (w, ww) = &basis[i];
            p = &p + &Matrix::outer(v).scale(&(T::one() / vv.clone()));
            let norm = (vv.clone() * ww.clone())
                .sqrt_re()
                .ok_or_else(|| Error::NotExactlyRepresentable(format!("‖v‖·‖w‖ for basis vectors {} and {i}", j * size + i)))?;
            let vw = Matrix::from_fn(n, n, |r, c| v[r].clone() * w[c].conj());
            theta = &theta + &vw.scale(&(T::one() / norm));
        }
        projections.push(Projection::from_parts(p, size));
        isometries.push(theta);
    }
    Ok(EquivalencePartition { target: target.clone(), parts: projections, isometries })
}

/// `A ↦ A_{cc}`; a character when `c` indexes a one-dimensional block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoordinateCharacter {
    pub coordinate: usize,
}

impl<T: Scalar> Functional<T> for CoordinateCharacter {
    fn evaluate(&self, b: &Matrix<T>) -> Result<T> {
        if self.coordinate >= b.rows() {
            return Err(Error::DimensionMismatch { expected: self.coordinate + 1, found: b.rows() });
        }
        Ok(b[(self.coordinate, self.coordinate)].clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnsConfig {
    /// Gram eigenvalues at or below this are null directions.
    pub null_threshold: f64,
    /// Random element pairs added to the matrix-unit products.
    pub random_pairs: usize,
    pub seed: u64,
}

impl Default for GnsConfig {
    fn default() -> Self {
        GnsConfig { null_threshold: 1e-10, random_pairs: 50, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GnsResult {
    /// Dimension of `H_φ`, the rank of the Gram form.
    pub dimension: usize,
    /// Exact rank of the Gram matrix, in exact mode.
    pub exact_rank: Option<usize>,
    pub gram_eigenvalues: Vec<f64>,
    /// `π(e_ij)` for every matrix unit, in [`FiniteAlgebra::matrix_units`] order.
    #[serde(skip)]
    pub representation: Vec<FloatMatrix>,
    #[serde(skip)]
    pub cyclic_vector: Vec<C64>,
    pub cyclic_norm: f64,
    /// `max |φ(A) − ⟨π(A)x, x⟩|`.
    pub reconstruction_residual: f64,
    /// `max ‖π(AB) − π(A)π(B)‖`.
    pub homomorphism_residual: f64,
    /// `max |φ(AB) − φ(A)φ(B)|`; zero exactly for multiplicative states.
    pub multiplicativity_residual: f64,
    pub sampled_pairs: usize,
}

/// The GNS construction for a functional on the algebra, built on the
/// matrix-unit basis `b_p`: Gram matrix `G_pq = φ(b_p* b_q)`, quotient by its
/// null directions, orthonormal basis `W_k = Σ u_k[p] b_p / √λ_k`,
/// `π(A)_kl = φ(W_k* A W_l)` and cyclic vector `x_k = φ(W_k*)`.
pub fn gns_construct<T: Field>(phi: &dyn Functional<T>, algebra: &FiniteAlgebra, cfg: &GnsConfig) -> Result<GnsResult> {
    let d = algebra.dim();
    let one = phi.evaluate(&Matrix::identity(d))?;
    let normalized = if T::EXACT { one == T::one() } else { (one.clone() - T::one()).abs() <= 1e-9 };
    if !normalized {
        return Err(Error::NotNormalized(format!("{one:?}")));
    }
    let units = algebra.matrix_units();
    let index = |u: MatrixUnit| units.iter().position(|v| *v == u).expect("unit exists");
    let values: Vec<T> = units.iter().map(|&u| phi.evaluate(&algebra.unit_matrix(u))).collect::<Result<_>>()?;
    let fvalues: Vec<C64> = values.iter().map(Scalar::to_c64).collect();
    // e_ij e_kl = δ_jk e_il within a block
    let product = |a: MatrixUnit, b: MatrixUnit| (a.block == b.block && a.j == b.i).then(|| index(MatrixUnit { block: a.block, i: a.i, j: b.j }));
    let adjoint = |a: MatrixUnit| MatrixUnit { block: a.block, i: a.j, j: a.i };

    let big_n = units.len();
    let exact_gram = Matrix::<T>::from_fn(big_n, big_n, |p, q| {
        product(adjoint(units[p]), units[q]).map_or(T::zero(), |k| values[k].clone())
    });
    let exact_rank = T::EXACT.then(|| exact_gram.rank(0.0));
    let gram = exact_gram.to_float().to_nalgebra();
    let gram = (&gram + gram.adjoint()) * C64::new(0.5, 0.0);
    let eig = gram.symmetric_eigen();
    if let Some(min) = eig.eigenvalues.iter().copied().reduce(f64::min) {
        if min < -cfg.null_threshold {
            return Err(Error::NotPositive(min));
        }
    }
    let mut kept: Vec<usize> = (0..big_n).filter(|&k| eig.eigenvalues[k] > cfg.null_threshold).collect();
    kept.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let dim = kept.len();

    // φ extended linearly from its values on matrix units
    let phi_f = |m: &FloatMatrix| -> C64 {
        units.iter().zip(&fvalues).fold(C64::new(0.0, 0.0), |acc, (u, v)| {
            let o = algebra.offset(u.block);
            acc + m[(o + u.i, o + u.j)] * v
        })
    };
    let w: Vec<FloatMatrix> = kept
        .iter()
        .map(|&k| {
            let scale = 1.0 / eig.eigenvalues[k].sqrt();
            units.iter().enumerate().fold(Matrix::zeros(d, d), |acc, (p, &u)| {
                let mut m = acc;
                let o = algebra.offset(u.block);
                m[(o + u.i, o + u.j)] += eig.eigenvectors[(p, k)] * scale;
                m
            })
        })
        .collect();
    let w_adj: Vec<FloatMatrix> = w.iter().map(Matrix::adjoint).collect();
    let represent = |a: &FloatMatrix| -> FloatMatrix {
        let aw: Vec<FloatMatrix> = w.iter().map(|wl| a * wl).collect();
        Matrix::from_fn(dim, dim, |k, l| phi_f(&(&w_adj[k] * &aw[l])))
    };
    let x: Vec<C64> = w_adj.iter().map(&phi_f).collect();
    let cyclic_norm = x.iter().map(C64::norm_sqr).sum::<f64>().sqrt();
    let expect = |pa: &FloatMatrix| -> C64 {
        let px = pa.apply(&x);
        x.iter().zip(&px).fold(C64::new(0.0, 0.0), |acc, (a, b)| acc + a.conj() * b)
    };

    let unit_mats: Vec<FloatMatrix> = units.iter().map(|&u| algebra.unit_matrix::<C64>(u)).collect();
    let representation: Vec<FloatMatrix> = unit_mats.iter().map(&represent).collect();

    let mut reconstruction: f64 = 0.0;
    for (p, pa) in representation.iter().enumerate() {
        reconstruction = reconstruction.max((expect(pa) - fvalues[p]).norm());
    }
    let mut homomorphism: f64 = 0.0;
    let mut multiplicativity: f64 = 0.0;
    let mut pairs = 0;
    let zero = Matrix::zeros(dim, dim);
    for p in 0..big_n {
        for q in 0..big_n {
            let (pab, phi_ab) = match product(units[p], units[q]) {
                Some(k) => (&representation[k], fvalues[k]),
                None => (&zero, C64::new(0.0, 0.0)),
            };
            homomorphism = homomorphism.max((&representation[p] * &representation[q]).distance(pab));
            multiplicativity = multiplicativity.max((phi_ab - fvalues[p] * fvalues[q]).norm());
            pairs += 1;
        }
    }
    let mut rng = seeded(cfg.seed);
    let random_element = |rng: &mut crate::random::SeededRng| -> FloatMatrix {
        let coeffs = ginibre(big_n, 1, rng);
        unit_mats.iter().enumerate().fold(Matrix::zeros(d, d), |acc, (p, m)| &acc + &m.scale(&coeffs[(p, 0)]))
    };
    for _ in 0..cfg.random_pairs {
        let a = random_element(&mut rng);
        let b = random_element(&mut rng);
        let ab = &a * &b;
        let (pa, pb, pab) = (represent(&a), represent(&b), represent(&ab));
        homomorphism = homomorphism.max((&pa * &pb).distance(&pab));
        reconstruction = reconstruction.max((expect(&pab) - phi_f(&ab)).norm());
        multiplicativity = multiplicativity.max((phi_f(&ab) - phi_f(&a) * phi_f(&b)).norm());
        pairs += 1;
    }

    let mut gram_eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    gram_eigenvalues.sort_by(|a, b| b.total_cmp(a));
    Ok(GnsResult {
        dimension: dim,
        exact_rank,
        gram_eigenvalues,
        representation,
        cyclic_vector: x,
        cyclic_norm,
        reconstruction_residual: reconstruction,
        homomorphism_residual: homomorphism,
        multiplicativity_residual: multiplicativity,
        sampled_pairs: pairs,
    })
}

pub const NO_GO_FORMAT: &str = "kslat-multiplicative-no-go";
pub const NO_GO_VERSION: u32 = 1;

/// Exact matrix as rows of `[re, im]` surd literals.
type MatrixPayload = Vec<Vec<[String; 2]>>;

fn to_payload(m: &ExactMatrix) -> MatrixPayload {
    (0..m.rows()).map(|i| (0..m.cols()).map(|j| [m[(i, j)].re.to_string(), m[(i, j)].im.to_string()]).collect()).collect()
}

fn from_payload(p: &MatrixPayload) -> Result<ExactMatrix> {
    let rows = p
        .iter()
        .map(|row| {
            row.iter()
                .map(|[re, im]| {
                    let re: Surd = re.parse().map_err(|e| Error::CorruptCertificate(format!("{e}")))?;
                    let im: Surd = im.parse().map_err(|e| Error::CorruptCertificate(format!("{e}")))?;
                    Ok(Exact { re, im })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Matrix::from_rows(rows).map_err(|e| Error::CorruptCertificate(e.to_string()))
}

/// Certificate that `M_n` (n ≥ 2) has no multiplicative state: `I = ΣEⱼ`
/// with pairwise equivalent `Eⱼ`, so a multiplicative (hence {0,1}-valued
/// and, through the isometries, tracial) functional would give
/// `φ(I) ∈ {0, n}`, never 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoGoCertificate {
    pub format: String,
    pub version: u32,
    pub n: usize,
    pub projections: Vec<MatrixPayload>,
    /// `θⱼ` with `θⱼ*θⱼ = E₁`, `θⱼθⱼ* = Eⱼ`; the first is `E₁`.
    pub isometries: Vec<MatrixPayload>,
    /// Values `φ(I) = Σ φ(Eⱼ)` allowed for a multiplicative tracial functional.
    pub possible_sums: Vec<u64>,
    pub required_sum: u64,
}

pub fn multiplicative_no_go_witness(n: usize) -> Result<NoGoCertificate> {
    if n < 2 {
        return Err(Error::BadBlockSpec(format!("no-go witness needs n ≥ 2, got {n}")));
    }
    let partition = partition_identity(&Projection::<Exact>::identity(n), n, 0.0)?;
    Ok(NoGoCertificate {
        format: NO_GO_FORMAT.into(),
        version: NO_GO_VERSION,
        n,
        projections: partition.parts.iter().map(|p| to_payload(p.matrix())).collect(),
        isometries: partition.isometries.iter().map(to_payload).collect(),
        possible_sums: vec![0, n as u64],
        required_sum: 1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoGoVerification {
    pub valid: bool,
    pub detail: String,
}

/// Re-checks every operator identity exactly and recomputes the arithmetic
/// schema.
pub fn verify_no_go(cert: &NoGoCertificate) -> Result<NoGoVerification> {
    if cert.format != NO_GO_FORMAT || cert.version != NO_GO_VERSION {
        return Err(Error::CorruptCertificate(format!("unsupported format {} v{}", cert.format, cert.version)));
    }
    let n = cert.n;
    let fail = |detail: String| Ok(NoGoVerification { valid: false, detail });
    if n < 2 || cert.projections.len() != n || cert.isometries.len() != n {
        return fail(format!("expected {n} projections and isometries"));
    }
    let es: Vec<ExactMatrix> = cert.projections.iter().map(from_payload).collect::<Result<_>>()?;
    let thetas: Vec<ExactMatrix> = cert.isometries.iter().map(from_payload).collect::<Result<_>>()?;
    if es.iter().chain(&thetas).any(|m| m.rows() != n || m.cols() != n) {
        return fail(format!("operators must be {n}×{n}"));
    }
    let mut total = Matrix::zeros(n, n);
    for (j, (e, theta)) in es.iter().zip(&thetas).enumerate() {
        if !e.is_hermitian(0.0) || &(e * e) != e {
            return fail(format!("E{} is not a projection", j + 1));
        }
        if (&theta.adjoint() * theta) != es[0] {
            return fail(format!("θ{}*θ{} ≠ E1", j + 1, j + 1));
        }
        if &(theta * &theta.adjoint()) != e {
            return fail(format!("θ{}θ{}* ≠ E{}", j + 1, j + 1, j + 1));
        }
        total = &total + e;
    }
    if total != Matrix::identity(n) {
        return fail("Σ Eⱼ ≠ I".into());
    }
    // multiplicative ⇒ φ(Eⱼ) = φ(Eⱼ)² ∈ {0,1}; tracial ⇒ all equal
    let sums: Vec<u64> = [0u64, 1].iter().map(|v| v * n as u64).collect();
    if sums != cert.possible_sums {
        return fail(format!("schema lists {:?}, recomputed {sums:?}", cert.possible_sums));
    }
    if sums.contains(&cert.required_sum) || cert.required_sum != 1 {
        return fail(format!("φ(I) = {} is attainable", cert.required_sum));
    }
    Ok(NoGoVerification { valid: true, detail: format!("φ(I) ∈ {{0, {n}}} but φ(I) = 1") })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValuationVerdict {
    /// Some block is one-dimensional; a character on it is a valuation.
    #[serde(rename = "EXISTS-ABELIAN")]
    ExistsAbelian,
    /// No abelian block but a 2×2 block; two-valued measures exist on every
    /// finite configuration there, constructively only configuration-wise.
    #[serde(rename = "EXISTS-I2-FINITE")]
    ExistsI2Finite,
    /// All blocks have size ≥ 3.
    #[serde(rename = "NONE")]
    None,
}

impl fmt::Display for ValuationVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValuationVerdict::ExistsAbelian => "EXISTS-ABELIAN",
            ValuationVerdict::ExistsI2Finite => "EXISTS-I2-FINITE",
            ValuationVerdict::None => "NONE",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CenterDecomposition {
    pub algebra: FiniteAlgebra,
    pub central_projections: Vec<Projection<Exact>>,
    /// Sum of the central projections of one-dimensional blocks.
    pub p_i1: Projection<Exact>,
    /// Sum of the central projections of blocks of size ≥ 3.
    pub p_i: Projection<Exact>,
    /// Indices of 2×2 blocks.
    pub i2_blocks: Vec<usize>,
    pub verdict: ValuationVerdict,
    /// For [`ValuationVerdict::ExistsAbelian`]: the character concentrated on
    /// the first abelian block.
    pub valuation: Option<CoordinateCharacter>,
}

pub fn decompose_center(algebra: &FiniteAlgebra) -> Result<CenterDecomposition> {
    if algebra.blocks().is_empty() {
        return Err(Error::EmptyAlgebra);
    }
    let d = algebra.dim();
    let central: Vec<Projection<Exact>> = (0..algebra.blocks().len()).map(|k| algebra.central_projection(k)).collect();
    let sum_where = |pred: &dyn Fn(usize) -> bool| {
        Projection::orthogonal_sum(d, central.iter().zip(algebra.blocks()).filter(|(_, &n)| pred(n)).map(|(p, _)| p))
    };
    let p_i1 = sum_where(&|n| n == 1);
    let p_i = sum_where(&|n| n >= 3);
    let i2_blocks: Vec<usize> = (0..algebra.blocks().len()).filter(|&k| algebra.blocks()[k] == 2).collect();
    let first_abelian = algebra.blocks().iter().position(|&n| n == 1);
    let verdict = if first_abelian.is_some() {
        ValuationVerdict::ExistsAbelian
    } else if !i2_blocks.is_empty() {
        ValuationVerdict::ExistsI2Finite
    } else {
        ValuationVerdict::None
    };
    Ok(CenterDecomposition {
        algebra: algebra.clone(),
        central_projections: central,
        p_i1,
        p_i,
        i2_blocks,
        verdict,
        valuation: first_abelian.map(|k| CoordinateCharacter { coordinate: algebra.offset(k) }),
    })
}

/// `DMatrix` view of a float matrix; re-exported for callers that need
/// nalgebra routines on algebra elements.
pub fn to_dmatrix(m: &FloatMatrix) -> DMatrix<C64> {
    m.to_nalgebra()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contexts::{enumerate_contexts, ContextClosure};
    use crate::measures::check_probability_measure;
    use crate::random::random_projection;
    use crate::rays::load_ray_configuration;

    fn q(p: i64, r: i64) -> Exact {
        Exact::from_ratio(p, r)
    }

    #[test]
    fn gleason_examples() {
        let mixed = DensityOperator::<Exact>::maximally_mixed(3);
        let e = Matrix::diagonal(&[q(1, 1), q(1, 1), q(0, 1)]);
        assert_eq!(mixed.expectation(&e), q(2, 3));
        let x = [q(1, 1), q(2, 1), q(0, 1)];
        let pure = DensityOperator::pure(&x).unwrap();
        assert_eq!(pure.expectation(Projection::onto_ray(&x).unwrap().matrix()), q(1, 1));
        // tr(diag(.5,.3,.2) · P_(1,1,0)) = (.5 + .3)/2
        let rho = DensityOperator::diagonal(&[q(1, 2), q(3, 10), q(1, 5)]).unwrap();
        let p = Projection::onto_ray(&[q(1, 1), q(1, 1), q(0, 1)]).unwrap();
        assert_eq!(rho.expectation(p.matrix()), q(2, 5));
    }

    #[test]
    fn density_validation() {
        assert!(matches!(DensityOperator::new(Matrix::diagonal(&[q(1, 2), q(1, 1)])), Err(Error::InvalidDensity(_))));
        assert!(matches!(DensityOperator::new(Matrix::diagonal(&[q(3, 2), q(-1, 2)])), Err(Error::InvalidDensity(_))));
        let spec: DensitySpec = "diag:1/2,3/10,1/5".parse().unwrap();
        assert_eq!(spec.build::<Exact>(3).unwrap().matrix()[(1, 1)], q(3, 10));
        assert!(matches!("diag:1/2".parse::<DensitySpec>().unwrap().build::<Exact>(3), Err(Error::BadDensitySpec(_))));
        assert!(matches!("rho".parse::<DensitySpec>(), Err(Error::BadDensitySpec(_))));
        assert!(matches!("I/4".parse::<DensitySpec>().unwrap().build::<Exact>(3), Err(Error::BadDensitySpec(_))));
        assert_eq!("e2".parse::<DensitySpec>().unwrap().build::<Exact>(3).unwrap().matrix()[(1, 1)], q(1, 1));
    }

    #[test]
    fn gleason_measure_on_family() {
        let cfg: RayConfiguration<Exact> =
            load_ray_configuration("rays 3 exact 4\n1 0 0\n0 1 0\n0 0 1\n1 1 0\n", &LoadOptions::default()).unwrap();
        let fam = ProjectionFamily::from_contexts(&cfg, &enumerate_contexts(&cfg, ContextClosure::Maximal)).unwrap();
        let rho = DensityOperator::diagonal(&[q(1, 2), q(3, 10), q(1, 5)]).unwrap();
        let mu = gleason_measure(&rho, &fam).unwrap();
        assert!(check_probability_measure(&mu.values, &fam, 0.0).unwrap().passes);
        assert!(matches!(gleason_measure(&DensityOperator::maximally_mixed(2), &fam), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn fractional_witness_examples() {
        for n in 2..6 {
            let rho = DensityOperator::<Exact>::maximally_mixed(n);
            let w = fractional_witness(&rho, &FiniteAlgebra::full(n), 0).unwrap().unwrap();
            assert_eq!(w.value, q(1, n as i64));
            assert_eq!(w.method, "standard-partition");
        }
        // pure state: the diagonal partition gives 1,0 and a rotation is needed
        let e1 = DensityOperator::<Exact>::pure(&[q(1, 1), q(0, 1)]).unwrap();
        let w = fractional_witness(&e1, &FiniteAlgebra::full(2), 4).unwrap().unwrap();
        assert!(w.method.starts_with("conjugated"));
        assert!(strictly_fractional(&w.value));
        let character = DensityOperator::<Exact>::diagonal(&[q(1, 1), q(0, 1), q(0, 1)]).unwrap();
        assert_eq!(fractional_witness(&character, &FiniteAlgebra::abelian(3), 0).unwrap(), None);
    }

    #[test]
    fn halving_in_m2() {
        let halves = partition_identity(&Projection::<Exact>::identity(2), 2, 0.0).unwrap();
        let rho = DensityOperator::<Exact>::maximally_mixed(2);
        for p in &halves.parts {
            assert_eq!(rho.expectation(p.matrix()), q(1, 2));
        }
        assert_eq!(halves.residual(), 0.0);
    }

    #[test]
    fn partitions() {
        let id3 = partition_identity(&Projection::<Exact>::identity(3), 3, 0.0).unwrap();
        assert_eq!(id3.parts[2].matrix(), &Matrix::diagonal(&[q(0, 1), q(0, 1), q(1, 1)]));
        let id4 = partition_identity(&Projection::<Exact>::identity(4), 2, 0.0).unwrap();
        assert_eq!(id4.parts[0].rank(), 2);
        // block shift e₃e₁* + e₄e₂*
        let mut shift = Matrix::<Exact>::zeros(4, 4);
        shift[(2, 0)] = q(1, 1);
        shift[(3, 1)] = q(1, 1);
        assert_eq!(id4.isometries[1], shift);
        let top = Projection::new(Matrix::diagonal(&[q(1, 1), q(1, 1), q(0, 1), q(0, 1)])).unwrap();
        let split = partition_identity(&top, 2, 0.0).unwrap();
        let (t, e1, e2) = (&split.isometries[1], split.parts[0].matrix(), split.parts[1].matrix());
        assert_eq!(&(&t.adjoint() * t), e1);
        assert_eq!(&(t * &t.adjoint()), e2);
        assert!(matches!(partition_identity(&top, 3, 0.0), Err(Error::IndivisibleRank { rank: 2, parts: 3 })));
    }

    #[test]
    fn partition_of_rotated_projection() {
        let mut rng = seeded(2);
        let p = Projection::new_with(random_projection(4, 2, &mut rng), 1e-10).unwrap();
        let split = partition_identity(&p, 2, 1e-9).unwrap();
        assert!(split.residual() < 1e-10);
    }

    #[test]
    fn gns_dimensions() {
        let c3 = FiniteAlgebra::abelian(3);
        for k in 0..3 {
            let r = gns_construct::<Exact>(&CoordinateCharacter { coordinate: k }, &c3, &GnsConfig::default()).unwrap();
            assert_eq!(r.dimension, 1);
            assert_eq!(r.exact_rank, Some(1));
            assert!(r.multiplicativity_residual < 1e-12);
        }
        let tr = DensityOperator::<Exact>::maximally_mixed(2).functional();
        let r = gns_construct(&tr, &FiniteAlgebra::full(2), &GnsConfig::default()).unwrap();
        assert_eq!(r.dimension, 4);
        assert_eq!(r.exact_rank, Some(4));
        assert!(r.reconstruction_residual < 1e-9 && r.homomorphism_residual < 1e-9);
        assert!((r.cyclic_norm - 1.0).abs() < 1e-12);
        assert!(r.multiplicativity_residual > 0.1);
        let vector = DensityOperator::<Exact>::pure(&[q(1, 1), q(1, 1)]).unwrap().functional();
        let r = gns_construct(&vector, &FiniteAlgebra::full(2), &GnsConfig::default()).unwrap();
        assert_eq!(r.dimension, 2);
    }

    #[test]
    fn gns_rejects_bad_functionals() {
        let doubled = TraceFunctional { rho: Matrix::<Exact>::identity(2) };
        assert!(matches!(gns_construct(&doubled, &FiniteAlgebra::full(2), &GnsConfig::default()), Err(Error::NotNormalized(_))));
        let negative = TraceFunctional { rho: Matrix::diagonal(&[q(2, 1), q(-1, 1)]) };
        assert!(matches!(gns_construct(&negative, &FiniteAlgebra::full(2), &GnsConfig::default()), Err(Error::NotPositive(_))));
    }

    #[test]
    fn no_go_certificates() {
        for n in 2..=6 {
            let cert = multiplicative_no_go_witness(n).unwrap();
            assert_eq!(cert.possible_sums, vec![0, n as u64]);
            assert!(verify_no_go(&cert).unwrap().valid);
        }
        let mut cert = multiplicative_no_go_witness(3).unwrap();
        cert.isometries[1][0][0] = ["1".into(), "0".into()];
        let report = verify_no_go(&cert).unwrap();
        assert!(!report.valid);
        assert!(report.detail.contains("θ2"), "{}", report.detail);
    }

    #[test]
    fn center_examples() {
        let d = decompose_center(&FiniteAlgebra::parse("1,3").unwrap()).unwrap();
        assert_eq!(d.verdict, ValuationVerdict::ExistsAbelian);
        assert_eq!(d.p_i1.rank(), 1);
        assert_eq!(d.p_i.rank(), 3);
        let v = d.valuation.unwrap();
        let mut rng = seeded(5);
        let alg = FiniteAlgebra::parse("1,3").unwrap();
        for _ in 0..20 {
            let e = alg.embed(1, &random_projection(3, 1, &mut rng)).unwrap();
            assert_eq!(Functional::<C64>::evaluate(&v, &e).unwrap(), C64::new(0.0, 0.0));
        }
        assert_eq!(decompose_center(&FiniteAlgebra::parse("3,4").unwrap()).unwrap().verdict, ValuationVerdict::None);
        let two = decompose_center(&FiniteAlgebra::parse("2").unwrap()).unwrap();
        assert_eq!(two.verdict, ValuationVerdict::ExistsI2Finite);
        assert_eq!(two.i2_blocks, vec![0]);
        assert_eq!(FiniteAlgebra::parse(""), Err(Error::EmptyAlgebra));
        assert!(matches!(FiniteAlgebra::parse("1,x"), Err(Error::BadBlockSpec(_))));
        assert!(matches!(FiniteAlgebra::parse("0"), Err(Error::BadBlockSpec(_))));
    }

    #[test]
    fn central_projections_resolve_identity() {
        let alg = FiniteAlgebra::parse("2,1,3").unwrap();
        let sum = (0..3).fold(Matrix::<Exact>::zeros(6, 6), |acc, k| &acc + alg.central_projection::<Exact>(k).matrix());
        assert_eq!(sum, Matrix::identity(6));
        assert!(alg.contains(&alg.unit_matrix::<Exact>(MatrixUnit { block: 2, i: 0, j: 2 }), 0.0));
        assert!(!alg.contains(&Matrix::<Exact>::from_fn(6, 6, |_, _| q(1, 1)), 0.0));
    }
}
