//! Abelian contexts of a ray configuration.
//!
//! A context is a set of pairwise orthogonal rays; the algebra it generates
//! has those rays as atoms plus, when they do not resolve the identity, the
//! remainder `I − Σ rays`. Maximal contexts are the maximal cliques of the
//! orthogonality graph. A maximal context with `dim` rays is complete.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{ortho_complement, Projection};
use crate::matrix::Matrix;
use crate::rays::RayConfiguration;
use crate::scalar::Scalar;

/// Ray indices of one context, sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RayContext {
    pub rays: Vec<usize>,
    pub complete: bool,
}

impl RayContext {
    pub fn contains(&self, ray: usize) -> bool {
        self.rays.binary_search(&ray).is_ok()
    }

    pub fn is_subset_of(&self, other: &RayContext) -> bool {
        self.rays.iter().all(|r| other.contains(*r))
    }

    /// Atoms of the generated algebra as projections.
    pub fn to_context<T: Scalar>(&self, cfg: &RayConfiguration<T>) -> Context<T> {
        let atoms = self.rays.iter().map(|&r| cfg.projection(r)).collect();
        let labels = self.rays.iter().map(|&r| cfg.label(r).to_string()).collect();
        Context { dim: cfg.dim(), atoms, complete: self.complete, labels }
    }
}

/// Which sub-contexts to add beyond the maximal ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContextClosure {
    /// Maximal contexts only.
    #[default]
    Maximal,
    /// Maximal contexts closed under nonempty intersections; the shared
    /// sub-contexts that glue overlapping maximal contexts together.
    Intersections,
    /// Every nonempty orthogonal subset, except `(dim−1)`-subsets of complete
    /// contexts, which generate the same algebra as their completion.
    AllSubsets,
}

/// A finite abelian subalgebra given by pairwise orthogonal atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct Context<T> {
    pub dim: usize,
    pub atoms: Vec<Projection<T>>,
    /// Whether the atoms sum to the identity.
    pub complete: bool,
    pub labels: Vec<String>,
}

impl<T: Scalar> Context<T> {
    /// Builds a context, checking orthogonality and completeness.
    pub fn new(dim: usize, atoms: Vec<Projection<T>>, tol: f64) -> Result<Self> {
        for (i, a) in atoms.iter().enumerate() {
            if a.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: a.dim() });
            }
            if atoms[..i].iter().any(|b| !a.orthogonal_to(b, tol)) {
                return Err(Error::NotProjection(format!("atom {i} is not orthogonal to an earlier atom")));
            }
        }
        let complete = Projection::orthogonal_sum(dim, &atoms).matrix().near(&Matrix::identity(dim), tol);
        let labels = (0..atoms.len()).map(|i| format!("a{}", i + 1)).collect();
        Ok(Context { dim, atoms, complete, labels })
    }

    pub fn span(&self) -> Projection<T> {
        Projection::orthogonal_sum(self.dim, &self.atoms)
    }

    /// `I − Σ atoms`; zero for complete contexts.
    pub fn remainder(&self) -> Projection<T> {
        ortho_complement(&self.span())
    }

    /// Atoms of the generated algebra, including a nonzero remainder.
    pub fn full_atoms(&self) -> Vec<Projection<T>> {
        let mut out = self.atoms.clone();
        if !self.complete {
            out.push(self.remainder());
        }
        out
    }

    /// `Σ (k+1) atomₖ`, a self-adjoint generator whose eigenprojections
    /// are the atoms (the remainder gets eigenvalue 0).
    pub fn generator(&self) -> Matrix<T> {
        self.atoms
            .iter()
            .enumerate()
            .fold(Matrix::zeros(self.dim, self.dim), |acc, (k, a)| &acc + &a.matrix().scale(&T::from_i64(k as i64 + 1)))
    }

    /// `Σ cₖ atomₖ` over the full atom list.
    pub fn combination(&self, coefficients: &[T]) -> Matrix<T> {
        self.full_atoms()
            .iter()
            .zip(coefficients)
            .fold(Matrix::zeros(self.dim, self.dim), |acc, (a, c)| &acc + &a.matrix().scale(c))
    }
}

/// Maximal cliques by Bron–Kerbosch with pivoting.
fn maximal_cliques<T: Scalar>(cfg: &RayConfiguration<T>) -> Vec<Vec<usize>> {
    fn expand<T: Scalar>(
        cfg: &RayConfiguration<T>,
        r: &mut Vec<usize>,
        mut p: BTreeSet<usize>,
        mut x: BTreeSet<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if p.is_empty() && x.is_empty() {
            let mut c = r.clone();
            c.sort_unstable();
            out.push(c);
            return;
        }
        let pivot = p
            .iter()
            .chain(x.iter())
            .max_by_key(|&&u| p.iter().filter(|&&v| cfg.is_orthogonal(u, v)).count())
            .copied()
            .expect("p ∪ x nonempty");
        let candidates: Vec<usize> = p.iter().copied().filter(|&v| !cfg.is_orthogonal(pivot, v)).collect();
        for v in candidates {
            let np = p.iter().copied().filter(|&w| cfg.is_orthogonal(v, w)).collect();
            let nx = x.iter().copied().filter(|&w| cfg.is_orthogonal(v, w)).collect();
            r.push(v);
            expand(cfg, r, np, nx, out);
            r.pop();
            p.remove(&v);
            x.insert(v);
        }
    }
    let mut out = Vec::new();
    if !cfg.is_empty() {
        expand(cfg, &mut Vec::new(), (0..cfg.len()).collect(), BTreeSet::new(), &mut out);
    }
    out
}

/// All maximal contexts, plus sub-contexts according to `closure`, in sorted
/// canonical order (by ray index list).
pub fn enumerate_contexts<T: Scalar>(cfg: &RayConfiguration<T>, closure: ContextClosure) -> Vec<RayContext> {
    let d = cfg.dim();
    let maximal = maximal_cliques(cfg);
    let mut sets: BTreeSet<Vec<usize>> = maximal.iter().cloned().collect();
    match closure {
        ContextClosure::Maximal => {}
        ContextClosure::Intersections => loop {
            let current: Vec<&Vec<usize>> = sets.iter().collect();
            let mut extra = BTreeSet::new();
            for (i, a) in current.iter().enumerate() {
                for b in &current[i + 1..] {
                    let meet: Vec<usize> = a.iter().copied().filter(|r| b.binary_search(r).is_ok()).collect();
                    if !meet.is_empty() && !sets.contains(&meet) {
                        extra.insert(meet);
                    }
                }
            }
            if extra.is_empty() {
                break;
            }
            sets.extend(extra);
        },
        ContextClosure::AllSubsets => {
            for clique in &maximal {
                let k = clique.len();
                for mask in 1u64..(1u64 << k) {
                    let subset: Vec<usize> = (0..k).filter(|b| mask >> b & 1 == 1).map(|b| clique[b]).collect();
                    if k == d && subset.len() == d - 1 {
                        continue;
                    }
                    sets.insert(subset);
                }
            }
        }
    }
    sets.into_iter().map(|rays| RayContext { complete: rays.len() == d, rays }).collect()
}

/// Complete and maximal incomplete contexts, each sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextCensus {
    pub complete: Vec<Vec<usize>>,
    pub maximal_incomplete: Vec<Vec<usize>>,
}

pub fn context_census<T: Scalar>(cfg: &RayConfiguration<T>) -> ContextCensus {
    let (complete, incomplete): (Vec<_>, Vec<_>) =
        enumerate_contexts(cfg, ContextClosure::Maximal).into_iter().partition(|c| c.complete);
    ContextCensus {
        complete: complete.into_iter().map(|c| c.rays).collect(),
        maximal_incomplete: incomplete.into_iter().map(|c| c.rays).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rays::{load_ray_configuration, LoadOptions};
    use crate::scalar::Exact;

    fn cfg(text: &str) -> RayConfiguration<Exact> {
        load_ray_configuration(text, &LoadOptions::default()).unwrap()
    }

    #[test]
    fn standard_basis_has_one_context() {
        let c = cfg("rays 3 exact 3\n1 0 0\n0 1 0\n0 0 1\n");
        let ctx = enumerate_contexts(&c, ContextClosure::Maximal);
        assert_eq!(ctx, vec![RayContext { rays: vec![0, 1, 2], complete: true }]);
        assert_eq!(enumerate_contexts(&c, ContextClosure::Intersections).len(), 1);
    }

    #[test]
    fn diagonal_ray_gives_incomplete_context() {
        // pairwise scan: (1,1,0) is orthogonal only to e₃
        let c = cfg("rays 3 exact 4\n1 0 0\n0 1 0\n0 0 1\n1 1 0\n");
        let ctx = enumerate_contexts(&c, ContextClosure::Maximal);
        assert_eq!(
            ctx,
            vec![RayContext { rays: vec![0, 1, 2], complete: true }, RayContext { rays: vec![2, 3], complete: false }]
        );
        let closed = enumerate_contexts(&c, ContextClosure::Intersections);
        assert!(closed.contains(&RayContext { rays: vec![2], complete: false }));
        assert_eq!(closed.len(), 3);
    }

    #[test]
    fn all_subsets_skips_codimension_one_faces() {
        let c = cfg("rays 3 exact 3\n1 0 0\n0 1 0\n0 0 1\n");
        let all = enumerate_contexts(&c, ContextClosure::AllSubsets);
        // 3 singletons + the full triple; pairs generate the same algebra as the triple
        assert_eq!(all.len(), 4);
    }

    #[test]
    fn context_algebra() {
        let c = cfg("rays 3 exact 2\n1 0 0\n0 1 1\n");
        let ctx = enumerate_contexts(&c, ContextClosure::Maximal);
        assert_eq!(ctx.len(), 1);
        let context = ctx[0].to_context(&c);
        assert!(!context.complete);
        assert_eq!(context.remainder().rank(), 1);
        assert_eq!(context.full_atoms().len(), 3);
        let total = context.full_atoms().iter().fold(Matrix::zeros(3, 3), |acc, a| &acc + a.matrix());
        assert_eq!(total, Matrix::identity(3));
    }
}
