//! Finitely additive measures on projection families, valuation functions
//! and quasi-states.

use std::collections::HashMap;

use serde::Serialize;

use crate::contexts::{Context, RayContext};
use crate::error::{Error, Result};
use crate::lattice::Projection;
use crate::linalg::{borel_apply_decomposed, spectral_decompose_with, BorelFunction, Field, LinalgConfig, SpectralDecomposition};
use crate::matrix::Matrix;
use crate::rays::RayConfiguration;
use crate::scalar::Scalar;

fn matrix_key<T: Scalar>(m: &Matrix<T>) -> String {
    m.entries().iter().map(Scalar::key).collect::<Vec<_>>().join(";")
}

/// A finite family of projections with its orthogonal-sum structure
/// precomputed: every triple `(i, j, k)` with `EᵢEⱼ = 0` and `Eᵢ + Eⱼ = Eₖ`.
#[derive(Debug, Clone)]
pub struct ProjectionFamily<T> {
    dim: usize,
    members: Vec<Projection<T>>,
    labels: Vec<String>,
    identity: Option<usize>,
    sums: Vec<(usize, usize, usize)>,
    tolerance: f64,
    index: HashMap<String, usize>,
}

impl<T: Scalar> ProjectionFamily<T> {
    /// Builds the family, dropping repeated members.
    pub fn new(dim: usize, members: Vec<Projection<T>>, labels: Vec<String>, tol: f64) -> Result<Self> {
        let mut family = ProjectionFamily {
            dim,
            members: Vec::new(),
            labels: Vec::new(),
            identity: None,
            sums: Vec::new(),
            tolerance: tol,
            index: HashMap::new(),
        };
        for (p, l) in members.into_iter().zip(labels) {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: p.dim() });
            }
            if family.index_of(p.matrix()).is_none() {
                if T::EXACT {
                    family.index.insert(matrix_key(p.matrix()), family.members.len());
                }
                family.members.push(p);
                family.labels.push(l);
            }
        }
        family.identity = family.index_of(&Matrix::identity(dim));
        let n = family.members.len();
        for i in 0..n {
            for j in i + 1..n {
                let (e, f) = (&family.members[i], &family.members[j]);
                if e.rank() + f.rank() > dim || !e.orthogonal_to(f, tol) {
                    continue;
                }
                let join = e.matrix() + f.matrix();
                if let Some(k) = family.index_of(&join) {
                    family.sums.push((i, j, k));
                }
            }
        }
        Ok(family)
    }

    /// Rays plus every sum of atoms (remainders included) of each context.
    pub fn from_contexts(cfg: &RayConfiguration<T>, contexts: &[RayContext]) -> Result<Self> {
        let mut members = Vec::new();
        let mut labels = Vec::new();
        for r in 0..cfg.len() {
            members.push(cfg.projection(r));
            labels.push(cfg.label(r).to_string());
        }
        for ctx in contexts {
            let context = ctx.to_context(cfg);
            let atoms = context.full_atoms();
            let mut names = context.labels.clone();
            if !context.complete {
                names.push(format!("rem[{}]", context.labels.join(",")));
            }
            for mask in 1u64..(1u64 << atoms.len()) {
                let chosen: Vec<usize> = (0..atoms.len()).filter(|b| mask >> b & 1 == 1).collect();
                let sum = Projection::orthogonal_sum(cfg.dim(), chosen.iter().map(|&b| &atoms[b]));
                members.push(sum);
                labels.push(chosen.iter().map(|&b| names[b].as_str()).collect::<Vec<_>>().join("+"));
            }
        }
        Self::new(cfg.dim(), members, labels, cfg.tolerance())
    }

    pub fn index_of(&self, m: &Matrix<T>) -> Option<usize> {
        if T::EXACT {
            self.index.get(&matrix_key(m)).copied()
        } else {
            self.members.iter().position(|p| p.matrix().near(m, self.tolerance))
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[Projection<T>] {
        &self.members
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn identity_index(&self) -> Option<usize> {
        self.identity
    }

    pub fn orthogonal_sums(&self) -> &[(usize, usize, usize)] {
        &self.sums
    }
}

/// Values on the members of a [`ProjectionFamily`], in member order.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMeasure<T> {
    pub values: Vec<T>,
}

/// A measure whose values are exactly 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoValuedMeasure<T> {
    measure: ProbabilityMeasure<T>,
}

impl<T: Scalar> TwoValuedMeasure<T> {
    pub fn new(values: Vec<T>, tol: f64) -> Result<Self> {
        if let Some(bad) = values.iter().position(|v| !v.near(&T::zero(), tol) && !v.near(&T::one(), tol)) {
            return Err(Error::NotQuasiState(format!("value {:?} at member {bad} is not 0 or 1", values[bad])));
        }
        Ok(TwoValuedMeasure { measure: ProbabilityMeasure { values } })
    }

    pub fn measure(&self) -> &ProbabilityMeasure<T> {
        &self.measure
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct M1Violation {
    pub member: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct M2Violation {
    pub e: String,
    pub f: String,
    pub join: String,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureReport {
    pub passes: bool,
    pub m1_violations: Vec<M1Violation>,
    pub m2_violations: Vec<M2Violation>,
    /// Largest `|μ(E ∨ F) − μ(E) − μ(F)|` over the orthogonal pairs checked.
    pub max_m2_residual: f64,
    /// `μ(I)` when the identity is in the family.
    pub normalization: Option<f64>,
    pub pairs_checked: usize,
}

/// Checks (M1) `0 ≤ μ(E) ≤ 1`, `μ(I) = 1` and (M2) additivity on orthogonal
/// pairs whose join lies in the family.
pub fn check_probability_measure<T: Scalar>(
    values: &[T],
    family: &ProjectionFamily<T>,
    tol: f64,
) -> Result<MeasureReport> {
    if values.len() != family.len() {
        let missing = values.len().min(family.len());
        return Err(Error::MissingValue(format!("measure has {} values for {} projections (first missing: {})", values.len(), family.len(), family.labels.get(missing).map_or("?", String::as_str))));
    }
    let mut m1 = Vec::new();
    for (i, v) in values.iter().enumerate() {
        let real = v.im().is_negligible(tol);
        let in_range = if T::EXACT {
            v.cmp_re(&T::zero()).is_ge() && v.cmp_re(&T::one()).is_le()
        } else {
            v.re_f64() >= -tol && v.re_f64() <= 1.0 + tol
        };
        if !real || !in_range {
            m1.push(M1Violation { member: family.labels[i].clone(), value: v.re_f64() });
        }
    }
    let normalization = family.identity.map(|k| values[k].re_f64());
    if let Some(k) = family.identity {
        if !values[k].near(&T::one(), tol) {
            m1.push(M1Violation { member: family.labels[k].clone(), value: values[k].re_f64() });
        }
    }
    let mut m2 = Vec::new();
    let mut max_res: f64 = 0.0;
    for &(i, j, k) in &family.sums {
        let diff = values[k].clone() - values[i].clone() - values[j].clone();
        let residual = diff.abs();
        max_res = max_res.max(residual);
        if !diff.is_negligible(tol) {
            m2.push(M2Violation {
                e: family.labels[i].clone(),
                f: family.labels[j].clone(),
                join: family.labels[k].clone(),
                residual,
            });
        }
    }
    Ok(MeasureReport {
        passes: m1.is_empty() && m2.is_empty(),
        m1_violations: m1,
        m2_violations: m2,
        max_m2_residual: max_res,
        normalization,
        pairs_checked: family.sums.len(),
    })
}

/// Named Borel functions used to test FUNC.
#[derive(Debug, Clone)]
pub struct FunctionLibrary<T> {
    functions: Vec<(String, BorelFunction<T>)>,
    /// Also test the indicator of every spectral value of each operator.
    pub spectral_indicators: bool,
}

impl<T: Scalar> FunctionLibrary<T> {
    pub fn empty() -> Self {
        FunctionLibrary { functions: Vec::new(), spectral_indicators: false }
    }

    /// Identity, square, negation, `2x + 1`, and the indicator family.
    pub fn standard() -> Self {
        let mut lib = Self::empty();
        lib.register("identity", BorelFunction::Identity);
        lib.register("square", BorelFunction::Square);
        lib.register("negate", BorelFunction::scalar_multiple(-T::one()));
        lib.register("affine-2x+1", BorelFunction::Affine { scale: T::from_i64(2), shift: T::one() });
        lib.spectral_indicators = true;
        lib
    }

    /// [`standard`](Self::standard) plus complex-valued `g = g_r + i·g_i` functions.
    pub fn with_complex() -> Self {
        let mut lib = Self::standard();
        lib.register("i-times", BorelFunction::complex(BorelFunction::scalar_multiple(T::zero()), BorelFunction::Identity));
        lib.register("square+i·x", BorelFunction::complex(BorelFunction::Square, BorelFunction::Identity));
        lib
    }

    pub fn register(&mut self, name: &str, f: BorelFunction<T>) {
        self.functions.push((name.to_string(), f));
    }

    pub fn get(&self, name: &str) -> Option<&BorelFunction<T>> {
        self.functions.iter().find(|(n, _)| n == name).map(|(_, f)| f)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.functions.iter().map(|(n, _)| n.as_str())
    }

    /// Functions to test on an operator with the given spectrum.
    pub fn functions_for(&self, spectrum: &[T]) -> Vec<(String, BorelFunction<T>)> {
        let mut out = self.functions.clone();
        if self.spectral_indicators {
            for l in spectrum {
                out.push((format!("indicator{{{l:?}}}"), BorelFunction::indicator_of(l.clone())));
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
struct Registered<T> {
    label: String,
    op: Matrix<T>,
    value: T,
    decomposition: SpectralDecomposition<T>,
}

/// A finite valuation: real values on a registered family of self-adjoint
/// operators, extended to their Borel images through FUNC.
#[derive(Debug, Clone)]
pub struct ValuationCandidate<T> {
    entries: Vec<Registered<T>>,
    cfg: LinalgConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FuncConflict {
    pub operator: String,
    pub registered: String,
    pub derived: String,
    pub via: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosureReport {
    pub derived: usize,
    pub conflicts: Vec<FuncConflict>,
}

impl<T: Field> ValuationCandidate<T> {
    pub fn new(cfg: LinalgConfig) -> Self {
        ValuationCandidate { entries: Vec::new(), cfg }
    }

    pub fn tolerance(&self) -> f64 {
        self.cfg.tolerance
    }

    /// Registers `v(op) = value`; `op` must be self-adjoint.
    pub fn assign(&mut self, label: impl Into<String>, op: Matrix<T>, value: T) -> Result<()> {
        let decomposition = spectral_decompose_with(&op, &self.cfg)?;
        self.entries.push(Registered { label: label.into(), op, value, decomposition });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.label.as_str())
    }

    /// Registered operators whose value is not one of their eigenvalues.
    pub fn spectrum_rule_violations(&self) -> Vec<String> {
        self.entries
            .iter()
            .filter(|e| e.decomposition.position(&e.value, self.cfg.tolerance).is_none())
            .map(|e| e.label.clone())
            .collect()
    }

    /// Adds `v(f(A)) := f(v(A))` for every registered `A` and real-valued
    /// library function `f`, reporting operators reached twice with
    /// different values.
    pub fn close_under(&mut self, library: &FunctionLibrary<T>) -> Result<ClosureReport> {
        let tol = self.cfg.tolerance;
        let base = self.entries.len();
        let mut conflicts = Vec::new();
        let mut derived = 0;
        for idx in 0..base {
            let (label, value, decomposition) = {
                let e = &self.entries[idx];
                (e.label.clone(), e.value.clone(), e.decomposition.clone())
            };
            for (name, f) in library.functions_for(&decomposition.eigenvalues) {
                if !f.is_real_on(&decomposition.eigenvalues, tol) {
                    continue;
                }
                let image = borel_apply_decomposed(&f, &decomposition, tol)?;
                let Some(image_value) = f.eval(&value, tol) else {
                    return Err(Error::DomainGap(format!("{name} at v({label})")));
                };
                let via = format!("{name}({label})");
                match self.entries.iter().find(|e| e.op.near(&image, tol)) {
                    Some(existing) => {
                        if !existing.value.near(&image_value, tol) {
                            conflicts.push(FuncConflict {
                                operator: existing.label.clone(),
                                registered: format!("{:?}", existing.value),
                                derived: format!("{image_value:?}"),
                                via,
                            });
                        }
                    }
                    None => {
                        self.assign(via, image, image_value)?;
                        derived += 1;
                    }
                }
            }
        }
        Ok(ClosureReport { derived, conflicts })
    }

    /// `v(A)` for self-adjoint `A`: the value `g(v(R))` for any registered `R`
    /// with `A = g(R)`. Errors when no registered operator generates `A` or
    /// when two generators disagree.
    pub fn value_of(&self, a: &Matrix<T>) -> Result<T> {
        let tol = self.cfg.tolerance;
        let mut found: Option<(T, &str)> = None;
        for e in &self.entries {
            if e.op.dim() != a.dim() {
                return Err(Error::DimensionMismatch { expected: e.op.dim(), found: a.dim() });
            }
            let Some(k) = e.decomposition.position(&e.value, tol) else {
                continue;
            };
            let Some(coeffs) = function_coefficients(a, &e.decomposition, tol) else {
                continue;
            };
            let value = coeffs[k].clone();
            match &found {
                Some((v, other)) if !v.near(&value, tol) => {
                    return Err(Error::NotQuasiState(format!(
                        "FUNC violation: generators {other} and {} give different values",
                        e.label
                    )));
                }
                Some(_) => {}
                None => found = Some((value, e.label.as_str())),
            }
        }
        found.map(|(v, _)| v).ok_or_else(|| Error::IncompleteAssignment("operator is not a function of any registered observable".into()))
    }

    pub fn extend(&self) -> ExtendedValuation<'_, T> {
        ExtendedValuation { base: self }
    }
}

/// Coefficients `cᵢ` with `A = Σ cᵢ Pᵢ` over the eigenprojections of a
/// decomposition, if `A` is a function of that operator.
fn function_coefficients<T: Field>(a: &Matrix<T>, d: &SpectralDecomposition<T>, tol: f64) -> Option<Vec<T>> {
    // exact products are slow, so rule out most non-functions in floats first
    if T::EXACT && function_coefficients(&a.to_float(), &d.to_float(), 1e-7).is_none() {
        return None;
    }
    let mut coeffs = Vec::with_capacity(d.projections.len());
    let mut rebuilt = Matrix::zeros(a.dim(), a.dim());
    for p in &d.projections {
        let ap = a * p.matrix();
        let c = ap.trace() / T::from_i64(p.rank() as i64);
        if !ap.near(&p.matrix().scale(&c), tol) {
            return None;
        }
        rebuilt = &rebuilt + &p.matrix().scale(&c);
        coeffs.push(c);
    }
    rebuilt.near(a, tol).then_some(coeffs)
}

/// A complex functional on operators.
pub trait Functional<T>: Sync {
    fn evaluate(&self, b: &Matrix<T>) -> Result<T>;
}

/// `v′(A₁ + iA₂) = v(A₁) + i·v(A₂)` with `A₁ = (B+B*)/2`, `A₂ = (B−B*)/(2i)`.
#[derive(Debug, Clone, Copy)]
pub struct ExtendedValuation<'a, T> {
    base: &'a ValuationCandidate<T>,
}

/// Self-adjoint parts `(A₁, A₂)` of `B = A₁ + iA₂`.
pub fn self_adjoint_parts<T: Scalar>(b: &Matrix<T>) -> (Matrix<T>, Matrix<T>) {
    let half = T::from_ratio(1, 2);
    let bh = b.adjoint();
    let a1 = (b + &bh).scale(&half);
    let a2 = (b - &bh).scale(&(half / T::i()));
    (a1, a2)
}

impl<T: Field> Functional<T> for ExtendedValuation<'_, T> {
    fn evaluate(&self, b: &Matrix<T>) -> Result<T> {
        let tol = self.base.tolerance();
        let (a1, a2) = self_adjoint_parts(b);
        let re = self.base.value_of(&a1)?;
        let im = if a2.is_zero(tol) { T::zero() } else { self.base.value_of(&a2)? };
        Ok(re + T::i() * im)
    }
}

/// `B ↦ tr(ρB)`.
#[derive(Debug, Clone)]
pub struct TraceFunctional<T> {
    pub rho: Matrix<T>,
}

impl<T: Scalar> Functional<T> for TraceFunctional<T> {
    fn evaluate(&self, b: &Matrix<T>) -> Result<T> {
        self.rho.ensure_same_shape(b)?;
        Ok((&self.rho * b).trace())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FuncReport {
    pub context: Vec<String>,
    /// `v′` on each atom of the context (remainder last, if any).
    pub atom_values: Vec<f64>,
    /// Exactly one atom has value 1 and the others 0.
    pub character: bool,
    /// `v′(Σ atoms) = Σ v′(atom)`.
    pub sum_rule_residual: f64,
    pub linearity_residual: f64,
    /// `v′(AB) = v′(A)·v′(B)` on sampled context elements.
    pub product_rule_residual: f64,
    /// `v′(f(A)) = f(v′(A))` over the function library.
    pub func_residual: f64,
    pub checks: usize,
    /// Context elements with no value in the valuation's closure.
    pub unchecked: usize,
    pub passes: bool,
}

fn coefficient_sets<T: Scalar>(k: usize) -> Vec<Vec<T>> {
    vec![
        (0..k).map(|j| T::from_i64(j as i64 + 1)).collect(),
        (0..k).map(|j| T::from_i64((k - j) as i64 * 3 - 7)).collect(),
        (0..k).map(|j| T::from_ratio(j as i64 * j as i64 - 2, 2)).collect(),
        (0..k).map(|j| if j % 2 == 0 { T::one() } else { T::i() }).collect(),
        (0..k).map(|j| T::from_i64(j as i64) + T::i() * T::from_i64(1 - j as i64)).collect(),
    ]
}

/// Verifies that `v′` restricted to the span of the context's atoms is a
/// character, with sum rule, product rule and FUNC as named sub-checks.
pub fn check_func_on_context<T: Field>(
    v: &ValuationCandidate<T>,
    ctx: &Context<T>,
    fns: &FunctionLibrary<T>,
) -> Result<FuncReport> {
    let tol = v.tolerance();
    let ext = v.extend();
    let atoms = ctx.full_atoms();
    let mut atom_values = Vec::with_capacity(atoms.len());
    for (i, a) in atoms.iter().enumerate() {
        let value = v.value_of(a.matrix()).map_err(|e| match e {
            Error::IncompleteAssignment(_) => Error::IncompleteAssignment(format!("atom {i} of the context has no value")),
            other => other,
        })?;
        atom_values.push(value);
    }
    let ones = atom_values.iter().filter(|x| x.near(&T::one(), tol)).count();
    let zeros = atom_values.iter().filter(|x| x.near(&T::zero(), tol)).count();
    let character = ones == 1 && ones + zeros == atom_values.len();

    let mut checks = 0;
    let span = atoms.iter().fold(Matrix::zeros(ctx.dim, ctx.dim), |acc, a| &acc + a.matrix());
    let sum_of_values = atom_values.iter().cloned().fold(T::zero(), |acc, x| acc + x);
    let sum_rule_residual = (ext.evaluate(&span)? - sum_of_values).abs();
    checks += 1;

    // combinations outside the registered closure are counted, not failed
    let mut unchecked = 0;
    let mut attempt = |m: &Matrix<T>| -> Result<Option<T>> {
        match ext.evaluate(m) {
            Ok(x) => Ok(Some(x)),
            Err(Error::IncompleteAssignment(_)) => {
                unchecked += 1;
                Ok(None)
            }
            Err(e) => Err(e),
        }
    };

    let k = atoms.len();
    let mut linearity: f64 = 0.0;
    let mut elements = Vec::new();
    for c in coefficient_sets::<T>(k) {
        let m = ctx.combination(&c);
        let expected = c.iter().zip(&atom_values).fold(T::zero(), |acc, (x, y)| acc + x.clone() * y.clone());
        if let Some(got) = attempt(&m)? {
            linearity = linearity.max((got.clone() - expected).abs());
            checks += 1;
            elements.push((c, m, got));
        }
    }

    let mut product: f64 = 0.0;
    for (_, ma, va) in &elements {
        for (_, mb, vb) in &elements {
            if let Some(got) = attempt(&(ma * mb))? {
                product = product.max((got - va.clone() * vb.clone()).abs());
                checks += 1;
            }
        }
    }

    let mut func: f64 = 0.0;
    for (c, m, value) in &elements {
        if !c.iter().all(|x| x.im().is_negligible(tol)) {
            continue;
        }
        let d = spectral_decompose_with(m, &LinalgConfig { tolerance: tol, ..LinalgConfig::default() })?;
        for (_, f) in fns.functions_for(&d.eigenvalues) {
            let image = borel_apply_decomposed(&f, &d, tol)?;
            let Some(expected) = f.eval(value, tol) else {
                func = f64::INFINITY;
                continue;
            };
            if let Some(got) = attempt(&image)? {
                func = func.max((got - expected).abs());
                checks += 1;
            }
        }
    }

    let ok = |r: f64| if T::EXACT { r == 0.0 } else { r <= tol };
    let passes = character && ok(sum_rule_residual) && ok(linearity) && ok(product) && ok(func);
    Ok(FuncReport {
        context: ctx.labels.clone(),
        atom_values: atom_values.iter().map(Scalar::re_f64).collect(),
        character,
        sum_rule_residual,
        linearity_residual: linearity,
        product_rule_residual: product,
        func_residual: func,
        checks,
        unchecked,
        passes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorCheck {
    pub generator: usize,
    /// Largest linearity residual on the subalgebra `{B}''`.
    pub linearity_residual: f64,
    /// `φ` is non-negative on every eigenprojection of `B`.
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuasiStateReport {
    pub generators: Vec<GeneratorCheck>,
    /// `|φ(A₁ + iA₂) − φ(A₁) − iφ(A₂)|` over generator pairs.
    pub additivity_residual: f64,
    pub normalization: f64,
    pub normalization_residual: f64,
    pub passes: bool,
}

/// Checks the quasi-state conditions on the singly generated subalgebras of
/// `generators`: linearity and positivity on each `{B}''`, additivity over the
/// self-adjoint decomposition for every ordered pair, and `φ(I) = 1`.
pub fn quasi_state_check<T: Field>(
    phi: &dyn Functional<T>,
    generators: &[Matrix<T>],
    cfg: &LinalgConfig,
) -> Result<QuasiStateReport> {
    let tol = cfg.tolerance;
    let Some(first) = generators.first() else {
        return Err(Error::MissingValue("no generators".into()));
    };
    let n = first.dim();
    let mut self_adjoint = Vec::new();
    for g in generators {
        if g.is_hermitian(tol) {
            self_adjoint.push(g.clone());
        } else {
            let (a1, a2) = self_adjoint_parts(g);
            self_adjoint.push(a1);
            self_adjoint.push(a2);
        }
    }
    let mut checks = Vec::new();
    for (gi, b) in self_adjoint.iter().enumerate() {
        let d = spectral_decompose_with(b, cfg)?;
        let values: Vec<T> = d.projections.iter().map(|p| phi.evaluate(p.matrix())).collect::<Result<_>>()?;
        let positive = values.iter().all(|x| {
            x.im().is_negligible(tol) && if T::EXACT { x.cmp_re(&T::zero()).is_ge() } else { x.re_f64() >= -tol }
        });
        let mut residual: f64 = 0.0;
        let mut sets = coefficient_sets::<T>(d.projections.len());
        sets.push(d.eigenvalues.clone());
        for c in sets {
            let m = d.projections.iter().zip(&c).fold(Matrix::zeros(n, n), |acc, (p, x)| &acc + &p.matrix().scale(x));
            let expected = values.iter().zip(&c).fold(T::zero(), |acc, (x, y)| acc + x.clone() * y.clone());
            residual = residual.max((phi.evaluate(&m)? - expected).abs());
        }
        checks.push(GeneratorCheck { generator: gi, linearity_residual: residual, positive });
    }
    let mut additivity: f64 = 0.0;
    for a in &self_adjoint {
        for b in &self_adjoint {
            let combined = a + &b.scale(&T::i());
            let expected = phi.evaluate(a)? + T::i() * phi.evaluate(b)?;
            additivity = additivity.max((phi.evaluate(&combined)? - expected).abs());
        }
    }
    let norm_value = phi.evaluate(&Matrix::identity(n))?;
    let normalization_residual = (norm_value.clone() - T::one()).abs();
    let ok = |r: f64| if T::EXACT { r == 0.0 } else { r <= tol };
    let passes = checks.iter().all(|c| c.positive && ok(c.linearity_residual)) && ok(additivity) && ok(normalization_residual);
    Ok(QuasiStateReport {
        generators: checks,
        additivity_residual: additivity,
        normalization: norm_value.re_f64(),
        normalization_residual,
        passes,
    })
}

/// Values of a quasi-state on a projection family; fails unless the
/// functional passes [`quasi_state_check`] on the family members.
pub fn restrict_to_projections<T: Field>(
    phi: &dyn Functional<T>,
    family: &ProjectionFamily<T>,
    cfg: &LinalgConfig,
) -> Result<ProbabilityMeasure<T>> {
    let generators: Vec<Matrix<T>> = family.members().iter().map(|p| p.matrix().clone()).collect();
    if generators.is_empty() {
        return Ok(ProbabilityMeasure { values: Vec::new() });
    }
    let report = quasi_state_check(phi, &generators, cfg)?;
    if !report.passes {
        return Err(Error::NotQuasiState(format!(
            "additivity residual {:.3e}, normalization {:.6}",
            report.additivity_residual, report.normalization
        )));
    }
    let values = generators.iter().map(|g| phi.evaluate(g).map(|x| x.re())).collect::<Result<_>>()?;
    Ok(ProbabilityMeasure { values })
}

/// Lifts a two-valued colouring of the rays to a valuation: each ray
/// projection gets its colour, `I` gets 1, and each context generator
/// `Σ (k+1) atomₖ` gets the eigenvalue of its true atom (0 when only the
/// remainder is true).
pub fn valuation_from_coloring<T: Field>(
    cfg: &RayConfiguration<T>,
    contexts: &[RayContext],
    coloring: &[bool],
    linalg: LinalgConfig,
) -> Result<ValuationCandidate<T>> {
    if coloring.len() != cfg.len() {
        return Err(Error::MissingValue(format!("colouring has {} entries for {} rays", coloring.len(), cfg.len())));
    }
    let mut v = ValuationCandidate::new(linalg);
    v.assign("I", Matrix::identity(cfg.dim()), T::one())?;
    for r in 0..cfg.len() {
        let bit = if coloring[r] { T::one() } else { T::zero() };
        v.assign(cfg.label(r), cfg.projection(r).into_matrix(), bit)?;
    }
    for ctx in contexts {
        let context = ctx.to_context(cfg);
        let value = ctx.rays.iter().position(|&r| coloring[r]).map_or(T::zero(), |k| T::from_i64(k as i64 + 1));
        v.assign(format!("gen[{}]", context.labels.join(",")), context.generator(), value)?;
    }
    Ok(v)
}

/// The measure `E ↦ v′(E)` on a family, from a valuation.
pub fn measure_from_valuation<T: Field>(v: &ValuationCandidate<T>, family: &ProjectionFamily<T>) -> Result<ProbabilityMeasure<T>> {
    let ext = v.extend();
    let values = family.members().iter().map(|p| ext.evaluate(p.matrix())).collect::<Result<_>>()?;
    Ok(ProbabilityMeasure { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contexts::{enumerate_contexts, ContextClosure};
    use crate::rays::{load_ray_configuration, LoadOptions};
    use crate::scalar::{Exact, C64};

    fn basis() -> RayConfiguration<Exact> {
        load_ray_configuration("rays 3 exact 3\n1 0 0\n0 1 0\n0 0 1\n", &LoadOptions::default()).unwrap()
    }

    fn family_of(cfg: &RayConfiguration<Exact>) -> (Vec<RayContext>, ProjectionFamily<Exact>) {
        let ctx = enumerate_contexts(cfg, ContextClosure::Maximal);
        let fam = ProjectionFamily::from_contexts(cfg, &ctx).unwrap();
        (ctx, fam)
    }

    #[test]
    fn normalized_trace_passes() {
        let cfg = basis();
        let (_, fam) = family_of(&cfg);
        // rays + 7 subset sums, deduplicated: e₁,e₂,e₃ repeat
        assert_eq!(fam.len(), 7);
        let values: Vec<Exact> = fam.members().iter().map(|p| Exact::from_ratio(p.rank() as i64, 3)).collect();
        let report = check_probability_measure(&values, &fam, 0.0).unwrap();
        assert!(report.passes, "{report:?}");
        assert_eq!(report.normalization, Some(1.0));
    }

    #[test]
    fn constant_one_fails_additivity() {
        let cfg = basis();
        let (_, fam) = family_of(&cfg);
        let values = vec![Exact::one(); fam.len()];
        let report = check_probability_measure(&values, &fam, 0.0).unwrap();
        assert!(!report.passes);
        assert!(!report.m2_violations.is_empty());
        assert!(report.m1_violations.is_empty());
    }

    #[test]
    fn missing_values_are_reported() {
        let cfg = basis();
        let (_, fam) = family_of(&cfg);
        assert!(matches!(check_probability_measure(&[Exact::one()], &fam, 0.0), Err(Error::MissingValue(_))));
    }

    #[test]
    fn basis_two_valued_measure_passes() {
        let cfg = basis();
        let (ctx, fam) = family_of(&cfg);
        let v = valuation_from_coloring(&cfg, &ctx, &[true, false, false], LinalgConfig::default()).unwrap();
        let mu = measure_from_valuation(&v, &fam).unwrap();
        // direct check over all orthogonal pairs
        for &(i, j, k) in fam.orthogonal_sums() {
            assert_eq!(mu.values[k], mu.values[i].clone() + mu.values[j].clone());
        }
        let report = check_probability_measure(&mu.values, &fam, 0.0).unwrap();
        assert!(report.passes);
        assert!(TwoValuedMeasure::new(mu.values, 0.0).is_ok());
    }

    #[test]
    fn extension_on_self_adjoint_and_imaginary() {
        let cfg = basis();
        let (ctx, _) = family_of(&cfg);
        let v = valuation_from_coloring(&cfg, &ctx, &[false, true, false], LinalgConfig::default()).unwrap();
        let a = ctx[0].to_context(&cfg).combination(&[Exact::from_ratio(5, 1), Exact::from_ratio(-3, 1), Exact::from_ratio(7, 2)]);
        let ext = v.extend();
        assert_eq!(ext.evaluate(&a).unwrap(), Exact::from_ratio(-3, 1));
        assert_eq!(ext.evaluate(&a.scale(&Exact::i())).unwrap(), Exact::i() * Exact::from_ratio(-3, 1));
        assert_eq!(ext.evaluate(&Matrix::zeros(3, 3)).unwrap(), Exact::zero());
        assert_eq!(ext.evaluate(&Matrix::identity(3)).unwrap(), Exact::one());
    }

    #[test]
    fn self_adjoint_parts_reassemble() {
        // B = [[0,1],[0,0]]: A₁ = [[0,½],[½,0]], A₂ = [[0,-i/2],[i/2,0]]
        let b = Matrix::from_rows(vec![vec![Exact::zero(), Exact::one()], vec![Exact::zero(), Exact::zero()]]).unwrap();
        let (a1, a2) = self_adjoint_parts(&b);
        let half = Exact::from_ratio(1, 2);
        let a1_expected = Matrix::from_rows(vec![vec![Exact::zero(), half.clone()], vec![half.clone(), Exact::zero()]]).unwrap();
        let a2_expected = Matrix::from_rows(vec![
            vec![Exact::zero(), -(Exact::i() * half.clone())],
            vec![Exact::i() * half.clone(), Exact::zero()],
        ])
        .unwrap();
        assert_eq!(a1, a1_expected);
        assert_eq!(a2, a2_expected);
        assert!(a1.is_hermitian(0.0) && a2.is_hermitian(0.0));
        assert_eq!(&a1 + &a2.scale(&Exact::i()), b);

        // v′(B) = v(A₁) + i v(A₂) with both parts registered
        let mut v = ValuationCandidate::new(LinalgConfig::default());
        v.assign("A1", a1, half.clone()).unwrap();
        v.assign("A2", a2, -half.clone()).unwrap();
        assert!(v.spectrum_rule_violations().is_empty());
        assert_eq!(v.extend().evaluate(&b).unwrap(), half.clone() - Exact::i() * half);
    }

    #[test]
    fn point_valuation_is_character() {
        let cfg = basis();
        let (ctx, _) = family_of(&cfg);
        let v = valuation_from_coloring(&cfg, &ctx, &[false, false, true], LinalgConfig::default()).unwrap();
        let context = ctx[0].to_context(&cfg);
        let report = check_func_on_context(&v, &context, &FunctionLibrary::with_complex()).unwrap();
        assert!(report.passes, "{report:?}");
        assert_eq!(report.atom_values, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn two_true_atoms_break_the_sum_rule() {
        let cfg = basis();
        let (ctx, _) = family_of(&cfg);
        let mut v = ValuationCandidate::new(LinalgConfig::default());
        v.assign("I", Matrix::identity(3), Exact::one()).unwrap();
        for (r, bit) in [1, 1, 0].into_iter().enumerate() {
            v.assign(cfg.label(r), cfg.projection(r).into_matrix(), Exact::from_ratio(bit, 1)).unwrap();
        }
        let report = check_func_on_context(&v, &ctx[0].to_context(&cfg), &FunctionLibrary::standard()).unwrap();
        assert!(!report.character);
        assert_eq!(report.sum_rule_residual, 1.0);
        assert!(report.unchecked > 0);
        assert!(!report.passes);
    }

    #[test]
    fn closure_finds_func_conflict() {
        let cfg = basis();
        let (ctx, _) = family_of(&cfg);
        let mut v = valuation_from_coloring(&cfg, &ctx, &[true, false, false], LinalgConfig::default()).unwrap();
        // register e₂ a second time with the wrong value through a scaled copy: 2·P₂ ↦ 2
        v.assign("2P2", cfg.projection(1).matrix().scale(&Exact::from_ratio(2, 1)), Exact::from_ratio(2, 1)).unwrap();
        let report = v.close_under(&FunctionLibrary::standard()).unwrap();
        assert!(!report.conflicts.is_empty());
    }

    #[test]
    fn spectrum_rule() {
        let mut v = ValuationCandidate::new(LinalgConfig::default());
        v.assign("P", basis().projection(0).into_matrix(), Exact::from_ratio(1, 2)).unwrap();
        assert_eq!(v.spectrum_rule_violations(), vec!["P".to_string()]);
    }

    #[test]
    fn traces_are_quasi_states() {
        let rho = Matrix::diagonal(&[Exact::from_ratio(1, 2), Exact::from_ratio(1, 3), Exact::from_ratio(1, 6)]);
        let gens = vec![
            Matrix::from_rows(vec![
                vec![Exact::zero(), Exact::one(), Exact::zero()],
                vec![Exact::one(), Exact::zero(), Exact::zero()],
                vec![Exact::zero(), Exact::zero(), Exact::from_ratio(2, 1)],
            ])
            .unwrap(),
            Matrix::diagonal(&[Exact::from_ratio(1, 1), Exact::from_ratio(2, 1), Exact::from_ratio(3, 1)]),
        ];
        let phi = TraceFunctional { rho: rho.clone() };
        let report = quasi_state_check(&phi, &gens, &LinalgConfig::default()).unwrap();
        assert!(report.passes, "{report:?}");
        let doubled = TraceFunctional { rho: rho.scale(&Exact::from_ratio(2, 1)) };
        let report = quasi_state_check(&doubled, &gens, &LinalgConfig::default()).unwrap();
        assert!(!report.passes);
        assert_eq!(report.normalization, 2.0);
    }

    #[test]
    fn restriction_gives_measures() {
        let cfg = basis();
        let (_, fam) = family_of(&cfg);
        let maximally_mixed = TraceFunctional { rho: Matrix::identity(3).scale(&Exact::from_ratio(1, 3)) };
        let mu = restrict_to_projections(&maximally_mixed, &fam, &LinalgConfig::default()).unwrap();
        for (p, value) in fam.members().iter().zip(&mu.values) {
            assert_eq!(value, &Exact::from_ratio(p.rank() as i64, 3));
        }
        // ρ = P_x: μ(E) = ‖Ex‖² by inner-product recomputation
        let x = [C64::new(0.6, 0.0), C64::new(0.0, 0.8), C64::new(0.0, 0.0)];
        let fcfg: RayConfiguration<C64> = load_ray_configuration("rays 3 float 4\n1 0 0\n0 1 0\n0 0 1\n1 1 0\n", &LoadOptions::default()).unwrap();
        let ctx = enumerate_contexts(&fcfg, ContextClosure::Maximal);
        let ffam = ProjectionFamily::from_contexts(&fcfg, &ctx).unwrap();
        let pure = TraceFunctional { rho: Matrix::outer(&x) };
        let mu = restrict_to_projections(&pure, &ffam, &LinalgConfig::default()).unwrap();
        for (p, value) in ffam.members().iter().zip(&mu.values) {
            let ex = p.matrix().apply(&x);
            let norm2: f64 = ex.iter().map(|z| z.norm_sqr()).sum();
            assert!((value.re - norm2).abs() < 1e-12);
        }
        let bad = TraceFunctional { rho: Matrix::identity(3).scale(&Exact::from_ratio(2, 3)) };
        assert!(matches!(restrict_to_projections(&bad, &fam, &LinalgConfig::default()), Err(Error::NotQuasiState(_))));
    }
}
