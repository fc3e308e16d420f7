//! Spectral and state presheaves over the poset of contexts of a ray
//! configuration.
//!
//! Nodes are the maximal contexts closed under nonempty intersection. The
//! spectrum of a node is its list of atoms: one per ray, plus the remainder
//! `I − Σ rays` when the node is incomplete. Data runs against inclusion:
//! for `M ⊆ N` the restriction sends each atom of `N` to the unique atom of
//! `M` above it.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::algebra::DensityOperator;
use crate::contexts::{enumerate_contexts, ContextClosure};
use crate::error::{Error, Result};
use crate::lattice::Projection;
use crate::linalg::Field;
use crate::matrix::Matrix;
use crate::rays::RayConfiguration;
use crate::scalar::{Scalar, C64};
use crate::search::{SearchOptions, Verdict, VerificationReport};

pub const BUNDLE_VERSION: u32 = 1;
pub const BUNDLE_FORMAT: &str = "kslat-spectral-presheaf";
pub const SECTION_FORMAT: &str = "kslat-section-certificate";

/// Weights at least `1 − POINT_TOLERANCE` make a point measure.
pub const POINT_TOLERANCE: f64 = 1e-10;

/// Largest spectrum a node may have (domains are `u128` bitmasks).
const MAX_SPECTRUM: usize = 128;

/// Element of a node's finite Gelfand spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Atom {
    Ray(usize),
    /// `I − Σ rays` of an incomplete node.
    Remainder,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresheafNode {
    pub rays: Vec<usize>,
    pub complete: bool,
    /// Not contained in any other node.
    pub maximal: bool,
}

/// Restriction along `sub ⊂ sup`: `table[b]` is the atom of `sub` above
/// atom `b` of `sup`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Restriction {
    pub sub: usize,
    pub sup: usize,
    pub cover: bool,
    pub table: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralPresheafBundle<T> {
    dim: usize,
    config_hash: String,
    labels: Vec<String>,
    rays: Vec<Vec<T>>,
    nodes: Vec<PresheafNode>,
    spectra: Vec<Vec<Atom>>,
    atoms: Vec<Vec<Projection<T>>>,
    restrictions: Vec<Restriction>,
    index: HashMap<(usize, usize), usize>,
}

/// Builds the bundle: intersection-closed nodes, atoms, restriction tables
/// found by a dominance scan over the atom projections, and a functoriality
/// check over every chain `M ⊂ N ⊂ C`.
pub fn build_spectral_presheaf<T: Field>(cfg: &RayConfiguration<T>) -> Result<SpectralPresheafBundle<T>> {
    let d = cfg.dim();
    if d + 1 > MAX_SPECTRUM {
        return Err(Error::DimensionCap(d, MAX_SPECTRUM - 1));
    }
    let tol = cfg.tolerance();
    let mut sets: Vec<Vec<usize>> = enumerate_contexts(cfg, ContextClosure::Intersections).into_iter().map(|c| c.rays).collect();
    sets.sort_by(|a, b| (a.len(), a).cmp(&(b.len(), b)));
    let present: BTreeSet<&Vec<usize>> = sets.iter().collect();
    for (i, a) in sets.iter().enumerate() {
        for b in &sets[i + 1..] {
            let meet: Vec<usize> = a.iter().copied().filter(|r| b.contains(r)).collect();
            if !meet.is_empty() && !present.contains(&meet) {
                return Err(Error::ClosureFailure(format!("intersection {meet:?} of {a:?} and {b:?} is not a node")));
            }
        }
    }
    let subset = |a: &[usize], b: &[usize]| a.len() < b.len() && a.iter().all(|r| b.contains(r));
    let nodes: Vec<PresheafNode> = sets
        .iter()
        .map(|s| PresheafNode { rays: s.clone(), complete: s.len() == d, maximal: !sets.iter().any(|t| subset(s, t)) })
        .collect();

    let id = Projection::<T>::identity(d);
    let mut spectra = Vec::with_capacity(nodes.len());
    let mut atoms = Vec::with_capacity(nodes.len());
    for node in &nodes {
        let mut spectrum: Vec<Atom> = node.rays.iter().map(|&r| Atom::Ray(r)).collect();
        let mut projections: Vec<Projection<T>> = node.rays.iter().map(|&r| cfg.projection(r)).collect();
        if !node.complete {
            let span = Projection::orthogonal_sum(d, &projections);
            let rest = Projection::new_with(id.matrix() - span.matrix(), tol)?;
            spectrum.push(Atom::Remainder);
            projections.push(rest);
        }
        spectra.push(spectrum);
        atoms.push(projections);
    }

    let mut restrictions = Vec::new();
    for (m, sm) in sets.iter().enumerate() {
        for (n, sn) in sets.iter().enumerate() {
            if !subset(sm, sn) {
                continue;
            }
            let cover = !sets.iter().any(|t| subset(sm, t) && subset(t, sn));
            let table = atoms[n]
                .iter()
                .enumerate()
                .map(|(b, pb)| {
                    let above: Vec<usize> = (0..atoms[m].len()).filter(|&a| pb.leq(&atoms[m][a], tol)).collect();
                    match above[..] {
                        [a] => Ok(a),
                        _ => Err(Error::ClosureFailure(format!(
                            "atom {:?} of node {n} lies under {} atoms of node {m}",
                            spectra[n][b],
                            above.len()
                        ))),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            restrictions.push(Restriction { sub: m, sup: n, cover, table });
        }
    }
    let index = restrictions.iter().enumerate().map(|(k, r)| ((r.sub, r.sup), k)).collect();
    let bundle = SpectralPresheafBundle {
        dim: d,
        config_hash: cfg.hash(),
        labels: cfg.labels().to_vec(),
        rays: cfg.rays().to_vec(),
        nodes,
        spectra,
        atoms,
        restrictions,
        index,
    };
    if let Some(detail) = bundle.functoriality_violation() {
        return Err(Error::ClosureFailure(detail));
    }
    Ok(bundle)
}

impl<T: Scalar> SpectralPresheafBundle<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn nodes(&self) -> &[PresheafNode] {
        &self.nodes
    }

    pub fn spectrum(&self, node: usize) -> &[Atom] {
        &self.spectra[node]
    }

    pub fn atom_projection(&self, node: usize, atom: usize) -> &Projection<T> {
        &self.atoms[node][atom]
    }

    /// All strict inclusions `sub ⊂ sup`.
    pub fn restrictions(&self) -> &[Restriction] {
        &self.restrictions
    }

    pub fn restriction(&self, sub: usize, sup: usize) -> Option<&Restriction> {
        self.index.get(&(sub, sup)).map(|&k| &self.restrictions[k])
    }

    pub fn order_pairs(&self) -> usize {
        self.restrictions.len()
    }

    pub fn cover_edges(&self) -> usize {
        self.restrictions.iter().filter(|r| r.cover).count()
    }

    pub fn atom_label(&self, node: usize, atom: usize) -> String {
        match self.spectra[node][atom] {
            Atom::Ray(r) => self.labels[r].clone(),
            Atom::Remainder => "remainder".into(),
        }
    }

    /// First chain `M ⊂ N ⊂ C` where restricting `C → M` directly differs
    /// from going through `N`.
    pub fn functoriality_violation(&self) -> Option<String> {
        for outer in &self.restrictions {
            for inner in self.restrictions.iter().filter(|r| r.sub == outer.sub) {
                let Some(upper) = self.restriction(inner.sup, outer.sup) else { continue };
                for (c, &direct) in outer.table.iter().enumerate() {
                    let composed = inner.table[upper.table[c]];
                    if composed != direct {
                        return Some(format!(
                            "chain {} ⊂ {} ⊂ {}: atom {} restricts to {} directly but {} through the middle",
                            outer.sub,
                            inner.sup,
                            outer.sup,
                            self.atom_label(outer.sup, c),
                            self.atom_label(outer.sub, direct),
                            self.atom_label(outer.sub, composed)
                        ));
                    }
                }
            }
        }
        None
    }

    /// Same bundle with atom projections in floating point.
    pub fn to_float(&self) -> SpectralPresheafBundle<C64> {
        SpectralPresheafBundle {
            dim: self.dim,
            config_hash: self.config_hash.clone(),
            labels: self.labels.clone(),
            rays: self.rays.iter().map(|r| r.iter().map(Scalar::to_c64).collect()).collect(),
            nodes: self.nodes.clone(),
            spectra: self.spectra.clone(),
            atoms: self.atoms.iter().map(|ps| ps.iter().map(|p| Projection::from_parts(p.matrix().to_float(), p.rank())).collect()).collect(),
            restrictions: self.restrictions.clone(),
            index: self.index.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleNodeRecord {
    pub rays: Vec<usize>,
    pub complete: bool,
    pub maximal: bool,
    pub spectrum: Vec<String>,
}

/// Serialized bundle; ray components are rendered with their field's
/// `Display`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleDocument {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub dim: usize,
    pub labels: Vec<String>,
    pub rays: Vec<Vec<String>>,
    pub nodes: Vec<BundleNodeRecord>,
    pub restrictions: Vec<Restriction>,
}

impl<T: Scalar + fmt::Display> SpectralPresheafBundle<T> {
    pub fn to_document(&self) -> BundleDocument {
        BundleDocument {
            format: BUNDLE_FORMAT.into(),
            version: BUNDLE_VERSION,
            config_hash: self.config_hash.clone(),
            dim: self.dim,
            labels: self.labels.clone(),
            rays: self.rays.iter().map(|r| r.iter().map(ToString::to_string).collect()).collect(),
            nodes: self
                .nodes
                .iter()
                .enumerate()
                .map(|(k, n)| BundleNodeRecord {
                    rays: n.rays.clone(),
                    complete: n.complete,
                    maximal: n.maximal,
                    spectrum: (0..self.spectra[k].len()).map(|a| self.atom_label(k, a)).collect(),
                })
                .collect(),
            restrictions: self.restrictions.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("bundle serializes")
    }
}

impl BundleDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: BundleDocument = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if doc.format != BUNDLE_FORMAT || doc.version != BUNDLE_VERSION {
            return Err(Error::Parse(format!("unsupported bundle format {} v{}", doc.format, doc.version)));
        }
        Ok(doc)
    }
}

/// One atom per node.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SpectralSection {
    pub choice: Vec<usize>,
}

impl<T: Scalar> SpectralPresheafBundle<T> {
    /// First edge on which `σ(sub)` is not the restriction of `σ(sup)`.
    pub fn section_violation(&self, section: &SpectralSection) -> Option<String> {
        if section.choice.len() != self.nodes.len() {
            return Some(format!("{} choices for {} nodes", section.choice.len(), self.nodes.len()));
        }
        if let Some(k) = (0..self.nodes.len()).find(|&k| section.choice[k] >= self.spectra[k].len()) {
            return Some(format!("node {k} has no atom {}", section.choice[k]));
        }
        self.restrictions.iter().find(|r| r.table[section.choice[r.sup]] != section.choice[r.sub]).map(|r| {
            format!(
                "edge {} ⊂ {}: {} restricts to {}, section picks {}",
                r.sub,
                r.sup,
                self.atom_label(r.sup, section.choice[r.sup]),
                self.atom_label(r.sub, r.table[section.choice[r.sup]]),
                self.atom_label(r.sub, section.choice[r.sub])
            )
        })
    }

    /// Ray `r` is true iff some node picks it.
    pub fn section_to_coloring(&self, section: &SpectralSection) -> Vec<bool> {
        let mut out = vec![false; self.rays.len()];
        for (k, &a) in section.choice.iter().enumerate() {
            if let Atom::Ray(r) = self.spectra[k][a] {
                out[r] = true;
            }
        }
        out
    }

    /// Each node picks its unique true ray, or its remainder when none is
    /// true.
    pub fn coloring_to_section(&self, coloring: &[bool]) -> Result<SpectralSection> {
        if coloring.len() != self.rays.len() {
            return Err(Error::DimensionMismatch { expected: self.rays.len(), found: coloring.len() });
        }
        let choice = self
            .spectra
            .iter()
            .enumerate()
            .map(|(k, spectrum)| {
                let on: Vec<usize> = (0..spectrum.len()).filter(|&a| matches!(spectrum[a], Atom::Ray(r) if coloring[r])).collect();
                match on[..] {
                    [a] => Ok(a),
                    [] => spectrum
                        .iter()
                        .position(|a| *a == Atom::Remainder)
                        .ok_or_else(|| Error::IncompleteAssignment(format!("complete node {k} has no true ray"))),
                    _ => Err(Error::IncompleteAssignment(format!("node {k} has {} true rays", on.len()))),
                }
            })
            .collect::<Result<_>>()?;
        Ok(SpectralSection { choice })
    }
}

/// Preorder trace of the section search. A branch on `node` is followed by
/// one subtree per atom still in its domain, in increasing order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SectionStep {
    Branch(usize),
    /// Propagation empties this node's domain.
    Leaf(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectionOutcome {
    pub verdict: Verdict,
    pub section: Option<SpectralSection>,
    pub sections: Vec<SpectralSection>,
    pub section_count: u64,
    pub trace: Option<Vec<SectionStep>>,
    pub nodes_visited: u64,
    pub wall_ms: f64,
}

type Domains = Vec<u128>;

fn bits(mask: u128) -> impl Iterator<Item = usize> {
    (0..MAX_SPECTRUM).filter(move |b| mask >> b & 1 == 1)
}

/// Arc consistency over every restriction, run to the greatest fixpoint.
fn propagate(restrictions: &[Restriction], doms: &mut Domains) {
    loop {
        let mut changed = false;
        for r in restrictions {
            let (sub, sup) = (doms[r.sub], doms[r.sup]);
            let mut image = 0u128;
            let mut support = 0u128;
            for b in bits(sup) {
                image |= 1 << r.table[b];
                if sub >> r.table[b] & 1 == 1 {
                    support |= 1 << b;
                }
            }
            if sub & image != sub || support != sup {
                doms[r.sub] = sub & image;
                doms[r.sup] = support;
                changed = true;
            }
        }
        if !changed {
            return;
        }
    }
}

struct SectionEngine<'a, T> {
    bundle: &'a SpectralPresheafBundle<T>,
    opts: &'a SearchOptions,
    visited: u64,
    exhausted: bool,
    count: u64,
    sections: Vec<SpectralSection>,
    trace: Vec<SectionStep>,
}

impl<T: Scalar> SectionEngine<'_, T> {
    /// Returns `true` to stop the search.
    fn search(&mut self, mut doms: Domains) -> bool {
        self.visited += 1;
        if self.visited > self.opts.budget {
            self.exhausted = true;
            return true;
        }
        propagate(&self.bundle.restrictions, &mut doms);
        if let Some(k) = doms.iter().position(|&m| m == 0) {
            self.trace.push(SectionStep::Leaf(k));
            return false;
        }
        // smallest open domain, larger nodes first on ties
        let open = (0..doms.len())
            .filter(|&k| doms[k].count_ones() > 1)
            .min_by_key(|&k| (doms[k].count_ones(), std::cmp::Reverse(self.bundle.nodes[k].rays.len()), k));
        let Some(node) = open else {
            let section = SpectralSection { choice: doms.iter().map(|m| m.trailing_zeros() as usize).collect() };
            debug_assert!(self.bundle.section_violation(&section).is_none());
            self.count += 1;
            if self.sections.len() < self.opts.witness_limit {
                self.sections.push(section);
            }
            return !self.opts.enumerate_all;
        };
        self.trace.push(SectionStep::Branch(node));
        for a in bits(doms[node]) {
            let mut child = doms.clone();
            child[node] = 1 << a;
            if self.search(child) {
                return true;
            }
        }
        false
    }
}

/// Backtracking search for global sections with arc-consistency
/// propagation along every restriction. UNSAT outcomes carry an exhaustion
/// trace for [`verify_section_certificate`].
pub fn global_section_search<T: Scalar>(bundle: &SpectralPresheafBundle<T>, opts: &SearchOptions) -> SectionOutcome {
    let start = Instant::now();
    let mut engine = SectionEngine { bundle, opts, visited: 0, exhausted: false, count: 0, sections: Vec::new(), trace: Vec::new() };
    let full: Domains = bundle.spectra.iter().map(|s| if s.len() == MAX_SPECTRUM { u128::MAX } else { (1u128 << s.len()) - 1 }).collect();
    engine.search(full);
    let verdict = if engine.count > 0 {
        Verdict::Sat
    } else if engine.exhausted {
        Verdict::Indeterminate
    } else {
        Verdict::Unsat
    };
    SectionOutcome {
        verdict,
        section: engine.sections.first().cloned(),
        section_count: engine.count,
        sections: engine.sections,
        trace: (verdict == Verdict::Unsat).then_some(engine.trace),
        nodes_visited: engine.visited,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionCertificate {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub verdict: Verdict,
    pub section: Option<Vec<usize>>,
    pub trace: Option<Vec<SectionStep>>,
}

impl SectionCertificate {
    pub fn from_outcome<T: Scalar>(bundle: &SpectralPresheafBundle<T>, outcome: &SectionOutcome) -> Self {
        SectionCertificate {
            format: SECTION_FORMAT.into(),
            version: BUNDLE_VERSION,
            config_hash: bundle.config_hash.clone(),
            verdict: outcome.verdict,
            section: outcome.section.as_ref().map(|s| s.choice.clone()),
            trace: outcome.trace.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::CorruptCertificate(e.to_string()))
    }
}

/// Checks a SAT section edge by edge, or replays an UNSAT trace with a
/// separately written fixpoint computation.
pub fn verify_section_certificate<T: Scalar>(cert: &SectionCertificate, bundle: &SpectralPresheafBundle<T>) -> Result<VerificationReport> {
    if cert.format != SECTION_FORMAT || cert.version != BUNDLE_VERSION {
        return Err(Error::CorruptCertificate(format!("unsupported format {} v{}", cert.format, cert.version)));
    }
    if cert.config_hash != bundle.config_hash {
        return Err(Error::HashMismatch { expected: bundle.config_hash.clone(), found: cert.config_hash.clone() });
    }
    let report = |valid: bool, detail: String, branches: usize, leaves: usize| VerificationReport { valid, verdict: cert.verdict, detail, branches, leaves };
    match cert.verdict {
        Verdict::Sat => {
            let Some(choice) = &cert.section else { return Ok(report(false, "SAT certificate without a section".into(), 0, 0)) };
            Ok(match bundle.section_violation(&SpectralSection { choice: choice.clone() }) {
                None => report(true, format!("section satisfies all {} restrictions", bundle.order_pairs()), 0, 0),
                Some(v) => report(false, v, 0, 0),
            })
        }
        Verdict::Unsat => {
            let Some(trace) = &cert.trace else { return Ok(report(false, "UNSAT certificate without a trace".into(), 0, 0)) };
            let mut replay = SectionReplay { bundle, trace, pos: 0, branches: 0, leaves: 0 };
            let full: Domains = bundle.spectra.iter().map(|s| (0..s.len()).fold(0u128, |m, a| m | 1 << a)).collect();
            let outcome = replay.subtree(full);
            Ok(match outcome {
                Err(detail) => report(false, detail, replay.branches, replay.leaves),
                Ok(()) if replay.pos != trace.len() => {
                    report(false, format!("{} trailing steps", trace.len() - replay.pos), replay.branches, replay.leaves)
                }
                Ok(()) => report(true, format!("{} branches and {} leaves replayed", replay.branches, replay.leaves), replay.branches, replay.leaves),
            })
        }
        Verdict::Indeterminate => Ok(report(false, "INDETERMINATE proves nothing".into(), 0, 0)),
    }
}

struct SectionReplay<'a, T> {
    bundle: &'a SpectralPresheafBundle<T>,
    trace: &'a [SectionStep],
    pos: usize,
    branches: usize,
    leaves: usize,
}

impl<T: Scalar> SectionReplay<'_, T> {
    /// Removes unsupported atoms one at a time until nothing changes.
    fn fixpoint(&self, doms: &mut [Vec<bool>]) {
        let mut changed = true;
        while changed {
            changed = false;
            for r in &self.bundle.restrictions {
                for b in 0..doms[r.sup].len() {
                    if doms[r.sup][b] && !doms[r.sub][r.table[b]] {
                        doms[r.sup][b] = false;
                        changed = true;
                    }
                }
                for a in 0..doms[r.sub].len() {
                    let supported = (0..doms[r.sup].len()).any(|b| doms[r.sup][b] && r.table[b] == a);
                    if doms[r.sub][a] && !supported {
                        doms[r.sub][a] = false;
                        changed = true;
                    }
                }
            }
        }
    }

    fn subtree(&mut self, doms: Domains) -> std::result::Result<(), String> {
        let mut open: Vec<Vec<bool>> =
            doms.iter().zip(&self.bundle.spectra).map(|(m, s)| (0..s.len()).map(|a| m >> a & 1 == 1).collect()).collect();
        self.fixpoint(&mut open);
        let step = *self.trace.get(self.pos).ok_or("trace ends early")?;
        self.pos += 1;
        match step {
            SectionStep::Leaf(k) => {
                self.leaves += 1;
                match open.get(k) {
                    Some(d) if d.iter().all(|x| !x) => Ok(()),
                    Some(_) => Err(format!("leaf claims node {k} is empty but it keeps atoms")),
                    None => Err(format!("leaf names unknown node {k}")),
                }
            }
            SectionStep::Branch(k) => {
                self.branches += 1;
                let values: Vec<usize> = open.get(k).ok_or(format!("branch on unknown node {k}"))?.iter().enumerate().filter(|(_, x)| **x).map(|(a, _)| a).collect();
                if values.len() < 2 {
                    return Err(format!("branch on node {k} with {} open atoms", values.len()));
                }
                let narrowed: Domains = open.iter().map(|d| d.iter().enumerate().fold(0u128, |m, (a, &x)| if x { m | 1 << a } else { m })).collect();
                for a in values {
                    let mut child = narrowed.clone();
                    child[k] = 1 << a;
                    self.subtree(child)?;
                }
                Ok(())
            }
        }
    }
}

/// Per node, one weight per spectrum entry (the remainder included).
#[derive(Debug, Clone, PartialEq)]
pub struct StateSection<T> {
    pub weights: Vec<Vec<T>>,
}

impl<T: Scalar> StateSection<T> {
    /// The point-measure section concentrated on a spectral section.
    pub fn point<U>(bundle: &SpectralPresheafBundle<U>, section: &SpectralSection) -> Self {
        StateSection {
            weights: bundle
                .spectra
                .iter()
                .zip(&section.choice)
                .map(|(s, &c)| (0..s.len()).map(|a| if a == c { T::one() } else { T::zero() }).collect())
                .collect(),
        }
    }

    /// `max |μ_sub(a) − Σ_{b ↦ a} μ_sup(b)|` over all restrictions.
    pub fn edge_residual<U>(&self, bundle: &SpectralPresheafBundle<U>) -> f64 {
        let mut worst: f64 = 0.0;
        for r in &bundle.restrictions {
            let mut pushed = vec![T::zero(); self.weights[r.sub].len()];
            for (b, &a) in r.table.iter().enumerate() {
                pushed[a] = pushed[a].clone() + self.weights[r.sup][b].clone();
            }
            for (a, w) in pushed.into_iter().enumerate() {
                worst = worst.max((w - self.weights[r.sub][a].clone()).abs());
            }
        }
        worst
    }

    /// `max |Σ_a μ_M(a) − 1|` over nodes.
    pub fn mass_residual(&self) -> f64 {
        self.weights.iter().map(|w| (w.iter().fold(T::zero(), |acc, x| acc + x.clone()) - T::one()).abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSectionReport<T> {
    pub section: StateSection<T>,
    pub edge_residual: f64,
    pub mass_residual: f64,
    pub min_weight: f64,
}

/// `μ_M(α) = tr(ρα)` on every atom of every node, the remainder included,
/// with image-measure compatibility measured on all restrictions.
pub fn state_presheaf_section<T: Field>(rho: &DensityOperator<T>, bundle: &SpectralPresheafBundle<T>) -> Result<StateSectionReport<T>> {
    if rho.dim() != bundle.dim {
        return Err(Error::DimensionMismatch { expected: bundle.dim, found: rho.dim() });
    }
    let weights: Vec<Vec<T>> = bundle.atoms.iter().map(|ps| ps.iter().map(|p| rho.expectation(p.matrix())).collect()).collect();
    let min_weight = weights.iter().flatten().map(Scalar::re_f64).fold(f64::INFINITY, f64::min);
    let section = StateSection { weights };
    Ok(StateSectionReport { edge_residual: section.edge_residual(bundle), mass_residual: section.mass_residual(), min_weight, section })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointVerdict {
    #[serde(rename = "ALL-POINT")]
    AllPoint,
    #[serde(rename = "NOT-ALL-POINT")]
    NotAllPoint,
}

impl fmt::Display for PointVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PointVerdict::AllPoint => "ALL-POINT",
            PointVerdict::NotAllPoint => "NOT-ALL-POINT",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PointMeasureReport {
    /// The atom carrying weight 1 at each node, if any.
    pub point_atoms: Vec<Option<usize>>,
    pub verdict: PointVerdict,
}

impl PointMeasureReport {
    /// The spectral section traced out by the point atoms, when every node
    /// (complete or not) is a point measure.
    pub fn spectral_section(&self) -> Option<SpectralSection> {
        self.point_atoms.iter().copied().collect::<Option<Vec<_>>>().map(|choice| SpectralSection { choice })
    }
}

/// A node is a point measure when one atom carries weight 1 within
/// [`POINT_TOLERANCE`]; ALL-POINT when every complete node is one.
pub fn point_measure_classify<T: Scalar, U>(section: &StateSection<T>, bundle: &SpectralPresheafBundle<U>) -> PointMeasureReport {
    let point_atoms: Vec<Option<usize>> =
        section.weights.iter().map(|w| w.iter().position(|x| (x.clone() - T::one()).abs() <= POINT_TOLERANCE)).collect();
    let all = bundle.nodes.iter().zip(&point_atoms).all(|(n, p)| !n.complete || p.is_some());
    PointMeasureReport { point_atoms, verdict: if all { PointVerdict::AllPoint } else { PointVerdict::NotAllPoint } }
}

/// Rays that are atoms of every complete node.
pub fn common_complete_atoms<T>(bundle: &SpectralPresheafBundle<T>) -> Vec<usize> {
    let mut complete = bundle.nodes.iter().filter(|n| n.complete);
    let Some(first) = complete.next() else { return Vec::new() };
    let mut common = first.rays.clone();
    for n in complete {
        common.retain(|r| n.rays.contains(r));
    }
    common
}

/// Whether `ρ` is the rank-one projection onto one of `rays`, decided from
/// its eigen-decomposition.
pub fn is_rank_one_onto<T: Scalar>(rho: &Matrix<T>, candidates: &[Vec<T>], tol: f64) -> bool {
    let f = rho.to_float().to_nalgebra();
    let eig = ((&f + f.adjoint()) * C64::new(0.5, 0.0)).symmetric_eigen();
    let large: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&k| eig.eigenvalues[k] > tol).collect();
    let [top] = large[..] else { return false };
    if (eig.eigenvalues[top] - 1.0).abs() > tol {
        return false;
    }
    let v: Vec<C64> = eig.eigenvectors.column(top).iter().copied().collect();
    candidates.iter().any(|x| {
        let x: Vec<C64> = x.iter().map(Scalar::to_c64).collect();
        let nx: f64 = x.iter().map(C64::norm_sqr).sum();
        let overlap: C64 = x.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
        (overlap.norm_sqr() / nx - 1.0).abs() <= tol
    })
}

impl<T> SpectralPresheafBundle<T> {
    pub fn ray_vectors(&self) -> &[Vec<T>] {
        &self.rays
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

    fn q(p: i64, r: i64) -> Exact {
        Exact::from_ratio(p, r)
    }

    const TWO_BASES: &str = "rays 3 exact 5\n1 0 0\n0 1 0\n0 0 1\n0 1 1\n0 1 -1\n";

    #[test]
    fn single_context() {
        let b = build_spectral_presheaf(&cfg("rays 3 exact 3\n1 0 0\n0 1 0\n0 0 1\n")).unwrap();
        assert_eq!((b.nodes().len(), b.order_pairs()), (1, 0));
        assert_eq!(b.spectrum(0).len(), 3);
        let out = global_section_search(&b, &SearchOptions { enumerate_all: true, ..Default::default() });
        assert_eq!(out.verdict, Verdict::Sat);
        assert_eq!(out.section_count, 3);
    }

    #[test]
    fn shared_ray_restrictions() {
        let b = build_spectral_presheaf(&cfg(TWO_BASES)).unwrap();
        // {e1}, {e1,e2,e3}, {e1,(0,1,1),(0,1,-1)}
        assert_eq!(b.nodes().iter().map(|n| n.rays.clone()).collect::<Vec<_>>(), vec![vec![0], vec![0, 1, 2], vec![0, 3, 4]]);
        assert_eq!(b.spectrum(0), &[Atom::Ray(0), Atom::Remainder]);
        let r = b.restriction(0, 1).unwrap();
        assert_eq!(r.table, vec![0, 1, 1]);
        assert!(r.cover);
        // dominance scan agrees with the combinatorial rule
        for r in b.restrictions() {
            for (atom, &image) in r.table.iter().enumerate() {
                let expected = match b.spectrum(r.sup)[atom] {
                    Atom::Ray(x) if b.nodes()[r.sub].rays.contains(&x) => Atom::Ray(x),
                    _ => Atom::Remainder,
                };
                assert_eq!(b.spectrum(r.sub)[image], expected);
            }
        }
        let out = global_section_search(&b, &SearchOptions { enumerate_all: true, ..Default::default() });
        // e1 true, or e1 false and one of two from each side
        assert_eq!(out.section_count, 5);
    }

    #[test]
    fn unsat_certificate_replays_and_tampering_is_caught() {
        assert_eq!(build_spectral_presheaf(&cfg("rays 3 exact 0\n")).unwrap().nodes().len(), 0);
        let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/peres33.rays")).unwrap();
        let peres = cfg(&text);
        let b = build_spectral_presheaf(&peres).unwrap();
        let out = global_section_search(&b, &SearchOptions::default());
        assert_eq!(out.verdict, Verdict::Unsat);
        let cert = SectionCertificate::from_json(&SectionCertificate::from_outcome(&b, &out).to_json()).unwrap();
        let report = verify_section_certificate(&cert, &b).unwrap();
        assert!(report.valid, "{}", report.detail);
        let mut bad = cert.clone();
        let trace = bad.trace.as_mut().unwrap();
        let leaf = trace.iter().position(|s| matches!(s, SectionStep::Leaf(_))).unwrap();
        trace.truncate(leaf);
        assert!(!verify_section_certificate(&bad, &b).unwrap().valid);
    }

    #[test]
    fn state_sections() {
        let b = build_spectral_presheaf(&cfg(TWO_BASES)).unwrap();
        let rho = DensityOperator::diagonal(&[q(1, 2), q(3, 10), q(1, 5)]).unwrap();
        let s = state_presheaf_section(&rho, &b).unwrap();
        assert_eq!(s.edge_residual, 0.0);
        assert_eq!(s.mass_residual, 0.0);
        assert_eq!(s.section.weights[0], vec![q(1, 2), q(1, 2)]);
        assert_eq!(point_measure_classify(&s.section, &b).verdict, PointVerdict::NotAllPoint);
        let e1 = DensityOperator::pure(&[q(1, 1), q(0, 1), q(0, 1)]).unwrap();
        let s = state_presheaf_section(&e1, &b).unwrap();
        let report = point_measure_classify(&s.section, &b);
        assert_eq!(report.verdict, PointVerdict::AllPoint);
        assert!(b.section_violation(&report.spectral_section().unwrap()).is_none());
        assert_eq!(common_complete_atoms(&b), vec![0]);
        assert!(is_rank_one_onto(e1.matrix(), b.ray_vectors(), 1e-9));
        assert!(!is_rank_one_onto(rho.matrix(), b.ray_vectors(), 1e-9));
        let mixed = DensityOperator::<Exact>::maximally_mixed(3);
        assert!(matches!(state_presheaf_section(&DensityOperator::maximally_mixed(2), &b), Err(Error::DimensionMismatch { .. })));
        let s = state_presheaf_section(&mixed, &b).unwrap();
        assert_eq!(s.section.weights[1], vec![q(1, 3); 3]);
        assert!(point_measure_classify(&s.section, &b).point_atoms.iter().all(Option::is_none));
    }

    #[test]
    fn sections_biject_with_colorings() {
        let b = build_spectral_presheaf(&cfg(TWO_BASES)).unwrap();
        let out = global_section_search(&b, &SearchOptions { enumerate_all: true, ..Default::default() });
        for s in &out.sections {
            let coloring = b.section_to_coloring(s);
            assert_eq!(&b.coloring_to_section(&coloring).unwrap(), s);
            let point: StateSection<Exact> = StateSection::point(&b, s);
            assert_eq!(point.edge_residual(&b), 0.0);
            assert_eq!(point_measure_classify(&point, &b).spectral_section().as_ref(), Some(s));
        }
    }

    #[test]
    fn bundle_json_round_trips() {
        let b = build_spectral_presheaf(&cfg(TWO_BASES)).unwrap();
        let doc = BundleDocument::from_json(&b.to_json()).unwrap();
        assert_eq!(doc, b.to_document());
        assert_eq!(doc.nodes[0].spectrum, vec!["v1".to_string(), "remainder".into()]);
        assert!(BundleDocument::from_json("{}").is_err());
    }
}
