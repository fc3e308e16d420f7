//! Ray configurations: finite sets of lines with their orthogonality relation.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lattice::Projection;
use crate::linalg::LinalgConfig;
use crate::matrix::Matrix;
use crate::rayset::{Entry, EntryMode, RayLine, RaySetDocument};
use crate::scalar::{Exact, Scalar, C64};

/// Scalars that can be built from ray-set document entries.
pub trait FromEntry: Scalar {
    const MODE: EntryMode;
    fn from_entry(entry: &Entry) -> Self;
    fn to_entry(&self) -> Entry;
}

impl FromEntry for Exact {
    const MODE: EntryMode = EntryMode::Exact;
    fn from_entry(entry: &Entry) -> Self {
        Exact::real(entry.to_surd())
    }
    fn to_entry(&self) -> Entry {
        Entry::Exact(self.re.clone())
    }
}

impl FromEntry for C64 {
    const MODE: EntryMode = EntryMode::Float;
    fn from_entry(entry: &Entry) -> Self {
        C64::new(entry.to_f64(), 0.0)
    }
    fn to_entry(&self) -> Entry {
        let literal = format!("{:e}", self.re);
        let exact = num::rational::BigRational::from_float(self.re).expect("finite component");
        Entry::Float { value: self.re, exact, literal }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadOptions {
    /// Drop parallel duplicates instead of rejecting the document.
    pub dedup: bool,
    pub max_dim: usize,
    /// Float orthogonality / parallelism tolerance.
    pub tolerance: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        let cfg = LinalgConfig::default();
        LoadOptions { dedup: false, max_dim: cfg.max_dim, tolerance: cfg.tolerance }
    }
}

#[derive(Debug, Clone)]
pub struct RayConfiguration<T> {
    dim: usize,
    rays: Vec<Vec<T>>,
    labels: Vec<String>,
    orthogonal: Vec<Vec<bool>>,
    tolerance: f64,
}

fn inner<T: Scalar>(u: &[T], v: &[T]) -> T {
    u.iter().zip(v).fold(T::zero(), |acc, (a, b)| acc + a.conj() * b.clone())
}

/// Projective normal form: exact rays get first nonzero component 1, float
/// rays unit norm with first non-negligible component real and positive.
fn normalize<T: Scalar>(v: &[T], tol: f64) -> Option<Vec<T>> {
    if T::EXACT {
        let lead = v.iter().find(|c| !c.is_zero_exact())?.clone();
        return Some(v.iter().map(|c| c.clone() / lead.clone()).collect());
    }
    let norm = inner(v, v).re_f64().sqrt();
    if norm <= tol {
        return None;
    }
    let lead = v.iter().find(|c| c.abs() > tol * norm)?.to_c64();
    let phase = lead.conj() / lead.norm();
    Some(v.iter().map(|c| T::from_c64(c.to_c64() * phase / norm)).collect())
}

impl<T: FromEntry> RayConfiguration<T> {
    pub fn from_document(doc: &RaySetDocument, opts: &LoadOptions) -> Result<Self> {
        let vectors = doc.rays.iter().map(|r| r.components.iter().map(T::from_entry).collect()).collect();
        let labels = doc.rays.iter().map(|r| r.label.clone()).collect();
        Self::from_vectors(doc.dim, vectors, labels, opts)
    }

    pub fn to_document(&self) -> RaySetDocument {
        let rays = self
            .rays
            .iter()
            .zip(&self.labels)
            .map(|(v, l)| RayLine { label: l.clone(), components: v.iter().map(FromEntry::to_entry).collect() })
            .collect();
        RaySetDocument::new(self.dim, T::MODE, rays)
    }
}

/// Parses a ray-set document and builds the configuration in mode `T`.
pub fn load_ray_configuration<T: FromEntry>(source: &str, opts: &LoadOptions) -> Result<RayConfiguration<T>> {
    RayConfiguration::from_document(&RaySetDocument::parse(source)?, opts)
}

impl<T: Scalar> RayConfiguration<T> {
    pub fn from_vectors(dim: usize, vectors: Vec<Vec<T>>, labels: Vec<String>, opts: &LoadOptions) -> Result<Self> {
        if dim > opts.max_dim {
            return Err(Error::DimensionCap(dim, opts.max_dim));
        }
        let tol = opts.tolerance;
        let mut rays: Vec<Vec<T>> = Vec::with_capacity(vectors.len());
        let mut kept_labels = Vec::with_capacity(vectors.len());
        for (idx, (v, label)) in vectors.into_iter().zip(labels).enumerate() {
            if v.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: v.len() });
            }
            let Some(n) = normalize(&v, tol) else {
                return Err(Error::ZeroVector(idx));
            };
            let duplicate = rays.iter().position(|r| {
                if T::EXACT {
                    r == &n
                } else {
                    inner(r, &n).abs() >= 1.0 - tol
                }
            });
            match duplicate {
                Some(_) if opts.dedup => continue,
                Some(first) => return Err(Error::DuplicateRay(first, idx)),
                None => {
                    rays.push(n);
                    kept_labels.push(label);
                }
            }
        }
        let count = rays.len();
        let mut orthogonal = vec![vec![false; count]; count];
        for i in 0..count {
            for j in i + 1..count {
                let ip = inner(&rays[i], &rays[j]);
                let scale = if T::EXACT { 1.0 } else { inner(&rays[i], &rays[i]).re_f64().sqrt() * inner(&rays[j], &rays[j]).re_f64().sqrt() };
                let orth = ip.is_negligible(tol * scale);
                orthogonal[i][j] = orth;
                orthogonal[j][i] = orth;
            }
        }
        Ok(RayConfiguration { dim, rays, labels: kept_labels, orthogonal, tolerance: tol })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rays.is_empty()
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn ray(&self, i: usize) -> &[T] {
        &self.rays[i]
    }

    pub fn rays(&self) -> &[Vec<T>] {
        &self.rays
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn is_orthogonal(&self, i: usize, j: usize) -> bool {
        self.orthogonal[i][j]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.orthogonal[i].iter().enumerate().filter(|(_, &o)| o).map(|(j, _)| j)
    }

    pub fn orthogonal_pairs(&self) -> usize {
        (0..self.len()).map(|i| self.neighbors(i).filter(|&j| j > i).count()).sum()
    }

    pub fn projection(&self, i: usize) -> Projection<T> {
        Projection::onto_ray(&self.rays[i]).expect("rays are nonzero")
    }

    /// Hex SHA-256 over mode, dimension and the normalized rays in order.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(if T::EXACT { b"exact\n" as &[u8] } else { b"float\n" });
        h.update(format!("{}\n", self.dim).as_bytes());
        for r in &self.rays {
            let line: Vec<String> = r.iter().map(|c| if T::EXACT { c.key() } else { format!("{:.9e},{:.9e}", c.to_c64().re, c.to_c64().im) }).collect();
            h.update(line.join(" ").as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    /// Reorders rays: ray `k` of the result is ray `order[k]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let vectors = order.iter().map(|&i| self.rays[i].clone()).collect();
        let labels = order.iter().map(|&i| self.labels[i].clone()).collect();
        let opts = LoadOptions { tolerance: self.tolerance, max_dim: self.dim.max(1), dedup: false };
        Self::from_vectors(self.dim, vectors, labels, &opts)
    }

    /// Applies `u` to every ray.
    pub fn transformed(&self, u: &Matrix<T>) -> Result<Self> {
        if u.rows() != self.dim || u.cols() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: u.rows() });
        }
        let vectors = self.rays.iter().map(|r| u.apply(r)).collect();
        let opts = LoadOptions { tolerance: self.tolerance, max_dim: self.dim.max(1), dedup: false };
        Self::from_vectors(self.dim, vectors, self.labels.clone(), &opts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIS: &str = "rays 3 exact 3\n1 0 0\n0 1 0\n0 0 1\n";

    #[test]
    fn basis_orthogonality() {
        let cfg: RayConfiguration<Exact> = load_ray_configuration(BASIS, &LoadOptions::default()).unwrap();
        assert_eq!(cfg.len(), 3);
        assert_eq!(cfg.orthogonal_pairs(), 3);
        assert!(cfg.is_orthogonal(0, 2));
    }

    #[test]
    fn duplicate_ray_policy() {
        let doc = "rays 2 exact 2\n1 2\n2 4\n";
        let err = load_ray_configuration::<Exact>(doc, &LoadOptions::default()).unwrap_err();
        assert_eq!(err, Error::DuplicateRay(0, 1));
        let opts = LoadOptions { dedup: true, ..Default::default() };
        assert_eq!(load_ray_configuration::<Exact>(doc, &opts).unwrap().len(), 1);
        let float = "rays 2 float 2\n1 2\n-2 -4\n";
        assert!(load_ray_configuration::<C64>(float, &LoadOptions::default()).is_err());
    }

    #[test]
    fn zero_vector_rejected() {
        let err = load_ray_configuration::<Exact>("rays 2 exact 2\n1 0\n0 0\n", &LoadOptions::default()).unwrap_err();
        assert_eq!(err, Error::ZeroVector(1));
    }

    #[test]
    fn surd_orthogonality_is_exact() {
        // (1,1,√2)·(1,1,-√2) = 0 exactly; (1,1,√2)·(1,0,0) = 1
        let cfg: RayConfiguration<Exact> =
            load_ray_configuration("rays 3 exact 3\n1 1 √2\n1 1 -√2\n1 0 0\n", &LoadOptions::default()).unwrap();
        assert!(cfg.is_orthogonal(0, 1));
        assert!(!cfg.is_orthogonal(0, 2));
    }

    #[test]
    fn hash_depends_on_order_not_labels() {
        let a: RayConfiguration<Exact> = load_ray_configuration(BASIS, &LoadOptions::default()).unwrap();
        let b: RayConfiguration<Exact> =
            load_ray_configuration("rays 3 exact 3\nx: 2 0 0\ny: 0 1 0\nz: 0 0 1\n", &LoadOptions::default()).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), a.permuted(&[1, 0, 2]).unwrap().hash());
    }

    #[test]
    fn dimension_cap() {
        let opts = LoadOptions { max_dim: 2, ..Default::default() };
        assert!(matches!(load_ray_configuration::<Exact>(BASIS, &opts), Err(Error::DimensionCap(3, 2))));
    }
}
