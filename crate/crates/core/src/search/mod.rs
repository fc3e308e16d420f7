//! Two-valued measures on ray configurations (Kochen-Specker colourings).
//!
//! A colouring gives every ray 0 or 1 so that each complete context has
//! exactly one ray coloured 1 and no two orthogonal rays are both 1. The
//! search engine is a backtracking solver with unit propagation; branching
//! and solver strategies are looked up by name in small registries so the
//! CLI can pick them at runtime.

mod certificate;
mod cnf;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::contexts::context_census;
use crate::error::{Error, Result};
use crate::rays::RayConfiguration;
use crate::scalar::Scalar;

pub use certificate::{verify_certificate, verify_witness, Certificate, VerificationReport, CERTIFICATE_FORMAT, CERTIFICATE_VERSION};
pub use cnf::{export_cnf, CnfDocument, CnfVariable};

/// Default node budget before giving up with [`Verdict::Indeterminate`].
pub const DEFAULT_BUDGET: u64 = 100_000_000;

/// Constraint model of a configuration. Rays shared between contexts are
/// the same variable, so no separate equality constraints are needed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColoringModel {
    pub variables: usize,
    pub labels: Vec<String>,
    /// Exactly one ray of each complete context is 1.
    pub exactly_one: Vec<Vec<usize>>,
    /// At most one ray of each maximal incomplete context is 1.
    pub at_most_one: Vec<Vec<usize>>,
    /// Orthogonal rays per ray, ascending.
    pub neighbors: Vec<Vec<usize>>,
    /// Indices into `exactly_one` of the contexts containing each ray.
    pub contexts_of: Vec<Vec<usize>>,
    pub config_hash: String,
}

impl ColoringModel {
    pub fn new<T: Scalar>(cfg: &RayConfiguration<T>) -> Self {
        let census = context_census(cfg);
        let n = cfg.len();
        let mut contexts_of = vec![Vec::new(); n];
        for (c, rays) in census.complete.iter().enumerate() {
            for &r in rays {
                contexts_of[r].push(c);
            }
        }
        ColoringModel {
            variables: n,
            labels: cfg.labels().to_vec(),
            exactly_one: census.complete,
            at_most_one: census.maximal_incomplete,
            neighbors: (0..n).map(|i| cfg.neighbors(i).collect()).collect(),
            contexts_of,
            config_hash: cfg.hash(),
        }
    }

    /// Checks a full colouring, naming the first violated constraint.
    pub fn violation(&self, coloring: &[bool]) -> Option<String> {
        if coloring.len() != self.variables {
            return Some(format!("colouring has {} entries for {} rays", coloring.len(), self.variables));
        }
        let name = |rays: &[usize]| rays.iter().map(|&r| self.labels[r].as_str()).collect::<Vec<_>>().join(",");
        for ctx in &self.exactly_one {
            let ones = ctx.iter().filter(|&&r| coloring[r]).count();
            if ones != 1 {
                return Some(format!("complete context {{{}}} has {ones} rays coloured 1", name(ctx)));
            }
        }
        for (a, nb) in self.neighbors.iter().enumerate() {
            if let Some(&b) = nb.iter().find(|&&b| b > a && coloring[a] && coloring[b]) {
                return Some(format!("orthogonal rays {{{}}} are both coloured 1", name(&[a, b])));
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "SAT")]
    Sat,
    #[serde(rename = "UNSAT")]
    Unsat,
    #[serde(rename = "INDETERMINATE")]
    Indeterminate,
}

impl Verdict {
    /// What the verdict does and does not establish.
    pub fn wording(self) -> &'static str {
        match self {
            Verdict::Sat => "configuration is colorable: a two-valued measure exists on this finite family (this does not certify a valuation on all projections)",
            Verdict::Unsat => "no extension exists within this configuration family: no two-valued measure, hence no valuation on all projections",
            Verdict::Indeterminate => "node budget exhausted before the search finished",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Sat => "SAT",
            Verdict::Unsat => "UNSAT",
            Verdict::Indeterminate => "INDETERMINATE",
        })
    }
}

/// Why a leaf of the search tree is refuted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Conflict {
    /// Every ray of this complete context (index into `exactly_one`) is 0.
    Context(usize),
    /// Two orthogonal rays are both 1.
    Pair(usize, usize),
}

/// One step of a preorder decision-tree trace. A branch on `var` is
/// followed by the subtree for `var = 1`, then the subtree for `var = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Step {
    Branch(usize),
    Leaf(Conflict),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub nodes: u64,
    pub backtracks: u64,
    /// Not serialized, so certificates are reproducible byte for byte.
    #[serde(skip)]
    pub wall_ms: f64,
    pub solver: String,
    pub heuristic: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub verdict: Verdict,
    /// First colouring found.
    pub witness: Option<Vec<bool>>,
    /// All colourings found when enumerating (up to the witness limit).
    pub witnesses: Vec<Vec<bool>>,
    pub witness_count: u64,
    /// Exhaustion trace for UNSAT, when the solver records one.
    pub trace: Option<Vec<Step>>,
    pub stats: SearchStats,
    pub config_hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOptions {
    pub budget: u64,
    pub enumerate_all: bool,
    /// Cap on stored witnesses while enumerating; counting continues.
    pub witness_limit: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { budget: DEFAULT_BUDGET, enumerate_all: false, witness_limit: 100_000 }
    }
}

/// Partial assignment handed to branching heuristics.
pub struct SearchState<'a> {
    pub model: &'a ColoringModel,
    pub assignment: &'a [Option<bool>],
}

/// Picks the next unassigned variable, or `None` when all are assigned.
pub trait BranchHeuristic: Send + Sync {
    fn name(&self) -> &'static str;
    fn choose(&self, state: &SearchState<'_>) -> Option<usize>;
}

/// Among complete contexts without a 1, the one with the fewest unassigned
/// rays (lowest index on ties), then its lowest unassigned ray.
pub struct MostConstrained;

impl BranchHeuristic for MostConstrained {
    fn name(&self) -> &'static str {
        "most-constrained"
    }

    fn choose(&self, s: &SearchState<'_>) -> Option<usize> {
        let mut best: Option<(usize, usize)> = None;
        for ctx in &s.model.exactly_one {
            if ctx.iter().any(|&r| s.assignment[r] == Some(true)) {
                continue;
            }
            let free = ctx.iter().filter(|&&r| s.assignment[r].is_none()).count();
            if free > 0 && best.is_none_or(|(f, _)| free < f) {
                let first = *ctx.iter().find(|&&r| s.assignment[r].is_none()).expect("free > 0");
                best = Some((free, first));
            }
        }
        best.map(|(_, r)| r).or_else(|| LowestId.choose(s))
    }
}

pub struct LowestId;

impl BranchHeuristic for LowestId {
    fn name(&self) -> &'static str {
        "lowest-id"
    }

    fn choose(&self, s: &SearchState<'_>) -> Option<usize> {
        s.assignment.iter().position(Option::is_none)
    }
}

/// Unassigned ray with the most unassigned orthogonal neighbours.
pub struct MaxDegree;

impl BranchHeuristic for MaxDegree {
    fn name(&self) -> &'static str {
        "max-degree"
    }

    fn choose(&self, s: &SearchState<'_>) -> Option<usize> {
        (0..s.assignment.len())
            .filter(|&r| s.assignment[r].is_none())
            .max_by_key(|&r| (s.model.neighbors[r].iter().filter(|&&u| s.assignment[u].is_none()).count(), std::cmp::Reverse(r)))
    }
}

pub const HEURISTICS: &[&str] = &["most-constrained", "lowest-id", "max-degree"];

pub fn heuristic_by_name(name: &str) -> Result<Box<dyn BranchHeuristic>> {
    match name {
        "most-constrained" => Ok(Box::new(MostConstrained)),
        "lowest-id" => Ok(Box::new(LowestId)),
        "max-degree" => Ok(Box::new(MaxDegree)),
        _ => Err(Error::UnknownStrategy { kind: "heuristic", name: name.to_string() }),
    }
}

/// A complete colouring procedure.
pub trait ColoringSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, model: &ColoringModel, heuristic: &dyn BranchHeuristic, opts: &SearchOptions) -> Result<SearchOutcome>;
}

/// Backtracking with unit propagation; records an exhaustion trace.
pub struct Backtracking;

impl ColoringSolver for Backtracking {
    fn name(&self) -> &'static str {
        "backtrack"
    }

    fn solve(&self, model: &ColoringModel, heuristic: &dyn BranchHeuristic, opts: &SearchOptions) -> Result<SearchOutcome> {
        let start = Instant::now();
        let mut engine = Engine::new(model, heuristic, *opts);
        let root = engine.propagate_units();
        let completed = match root {
            Err(conflict) => {
                engine.trace.push(Step::Leaf(conflict));
                engine.backtracks += 1;
                true
            }
            Ok(()) => engine.search() != Flow::Abort,
        };
        let verdict = if engine.witness_count > 0 {
            Verdict::Sat
        } else if completed {
            Verdict::Unsat
        } else {
            Verdict::Indeterminate
        };
        Ok(SearchOutcome {
            verdict,
            witness: engine.witnesses.first().cloned(),
            trace: (verdict == Verdict::Unsat).then_some(engine.trace),
            witnesses: engine.witnesses,
            witness_count: engine.witness_count,
            stats: SearchStats {
                nodes: engine.nodes,
                backtracks: engine.backtracks,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
                solver: self.name().into(),
                heuristic: heuristic.name().into(),
            },
            config_hash: model.config_hash.clone(),
        })
    }
}

/// Brute force over all `2ⁿ` colourings; a cross-check for small inputs.
/// Produces no trace.
pub struct Exhaustive;

pub const EXHAUSTIVE_MAX_RAYS: usize = 26;

impl ColoringSolver for Exhaustive {
    fn name(&self) -> &'static str {
        "exhaustive"
    }

    fn solve(&self, model: &ColoringModel, _heuristic: &dyn BranchHeuristic, opts: &SearchOptions) -> Result<SearchOutcome> {
        let n = model.variables;
        if n > EXHAUSTIVE_MAX_RAYS {
            return Err(Error::SolverLimit(format!("exhaustive solver handles at most {EXHAUSTIVE_MAX_RAYS} rays, got {n}")));
        }
        let start = Instant::now();
        let masks: Vec<u64> = model.exactly_one.iter().map(|c| c.iter().fold(0u64, |m, &r| m | 1 << r)).collect();
        let pairs: Vec<u64> = (0..n)
            .flat_map(|a| model.neighbors[a].iter().filter(move |&&b| b > a).map(move |&b| (1u64 << a) | (1u64 << b)))
            .collect();
        let mut witnesses = Vec::new();
        let mut count = 0u64;
        let mut nodes = 0u64;
        let mut aborted = false;
        for x in 0u64..(1u64 << n) {
            nodes += 1;
            if nodes > opts.budget {
                aborted = true;
                break;
            }
            if masks.iter().all(|m| (x & m).count_ones() == 1) && pairs.iter().all(|p| x & p != *p) {
                count += 1;
                if witnesses.len() < opts.witness_limit {
                    witnesses.push((0..n).map(|r| x >> r & 1 == 1).collect());
                }
                if !opts.enumerate_all {
                    break;
                }
            }
        }
        let verdict = if count > 0 {
            Verdict::Sat
        } else if aborted {
            Verdict::Indeterminate
        } else {
            Verdict::Unsat
        };
        Ok(SearchOutcome {
            verdict,
            witness: witnesses.first().cloned(),
            witnesses,
            witness_count: count,
            trace: None,
            stats: SearchStats {
                nodes,
                backtracks: 0,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
                solver: self.name().into(),
                heuristic: "none".into(),
            },
            config_hash: model.config_hash.clone(),
        })
    }
}

pub const SOLVERS: &[&str] = &["backtrack", "exhaustive"];

pub fn solver_by_name(name: &str) -> Result<Box<dyn ColoringSolver>> {
    match name {
        "backtrack" => Ok(Box::new(Backtracking)),
        "exhaustive" => Ok(Box::new(Exhaustive)),
        _ => Err(Error::UnknownStrategy { kind: "solver", name: name.to_string() }),
    }
}

/// Searches for a two-valued measure with the default strategies.
pub fn search_two_valued_measure<T: Scalar>(cfg: &RayConfiguration<T>, opts: &SearchOptions) -> Result<SearchOutcome> {
    Backtracking.solve(&ColoringModel::new(cfg), &MostConstrained, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Flow {
    Continue,
    Stop,
    Abort,
}

struct Engine<'a> {
    model: &'a ColoringModel,
    heuristic: &'a dyn BranchHeuristic,
    opts: SearchOptions,
    assignment: Vec<Option<bool>>,
    trail: Vec<usize>,
    queue: Vec<usize>,
    trace: Vec<Step>,
    witnesses: Vec<Vec<bool>>,
    witness_count: u64,
    nodes: u64,
    backtracks: u64,
}

impl<'a> Engine<'a> {
    fn new(model: &'a ColoringModel, heuristic: &'a dyn BranchHeuristic, opts: SearchOptions) -> Self {
        Engine {
            model,
            heuristic,
            opts,
            assignment: vec![None; model.variables],
            trail: Vec::new(),
            queue: Vec::new(),
            trace: Vec::new(),
            witnesses: Vec::new(),
            witness_count: 0,
            nodes: 0,
            backtracks: 0,
        }
    }

    fn set(&mut self, var: usize, value: bool) {
        self.assignment[var] = Some(value);
        self.trail.push(var);
        self.queue.push(var);
    }

    fn undo_to(&mut self, mark: usize) {
        for var in self.trail.drain(mark..) {
            self.assignment[var] = None;
        }
    }

    /// Contexts with a single ray force it to 1 before any branching.
    fn propagate_units(&mut self) -> Result<(), Conflict> {
        for ctx in &self.model.exactly_one {
            if let [r] = ctx[..] {
                if self.assignment[r].is_none() {
                    self.set(r, true);
                }
            }
        }
        self.propagate()
    }

    fn propagate(&mut self) -> Result<(), Conflict> {
        while let Some(var) = self.queue.pop() {
            if self.assignment[var] == Some(true) {
                for &u in &self.model.neighbors[var] {
                    match self.assignment[u] {
                        Some(true) => {
                            self.queue.clear();
                            return Err(Conflict::Pair(var.min(u), var.max(u)));
                        }
                        Some(false) => {}
                        None => self.set(u, false),
                    }
                }
            } else {
                for &c in &self.model.contexts_of[var] {
                    let ctx = &self.model.exactly_one[c];
                    if ctx.iter().any(|&r| self.assignment[r] == Some(true)) {
                        continue;
                    }
                    let mut free = ctx.iter().filter(|&&r| self.assignment[r].is_none());
                    match (free.next(), free.next()) {
                        (None, _) => {
                            self.queue.clear();
                            return Err(Conflict::Context(c));
                        }
                        (Some(&r), None) => self.set(r, true),
                        _ => {}
                    }
                }
            }
        }
        Ok(())
    }

    fn search(&mut self) -> Flow {
        self.nodes += 1;
        if self.nodes > self.opts.budget {
            return Flow::Abort;
        }
        let state = SearchState { model: self.model, assignment: &self.assignment };
        let Some(var) = self.heuristic.choose(&state) else {
            self.witness_count += 1;
            if self.witnesses.len() < self.opts.witness_limit {
                self.witnesses.push(self.assignment.iter().map(|v| v.expect("all assigned")).collect());
            }
            return if self.opts.enumerate_all { Flow::Continue } else { Flow::Stop };
        };
        self.trace.push(Step::Branch(var));
        for value in [true, false] {
            let mark = self.trail.len();
            self.set(var, value);
            match self.propagate() {
                Err(conflict) => {
                    self.trace.push(Step::Leaf(conflict));
                    self.backtracks += 1;
                }
                Ok(()) => match self.search() {
                    Flow::Continue => {}
                    other => {
                        self.undo_to(mark);
                        return other;
                    }
                },
            }
            self.undo_to(mark);
        }
        Flow::Continue
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

    const BASIS: &str = "rays 3 exact 3\n1 0 0\n0 1 0\n0 0 1\n";

    #[test]
    fn basis_has_three_witnesses() {
        let c = cfg(BASIS);
        let opts = SearchOptions { enumerate_all: true, ..Default::default() };
        for name in SOLVERS {
            let out = solver_by_name(name).unwrap().solve(&ColoringModel::new(&c), &MostConstrained, &opts).unwrap();
            assert_eq!(out.verdict, Verdict::Sat);
            assert_eq!(out.witness_count, 3, "{name}");
        }
    }

    #[test]
    fn unsat_by_hand() {
        // two singleton contexts whose rays are orthogonal: both are forced
        // to 1 before branching
        let model = ColoringModel {
            variables: 2,
            labels: vec!["a".into(), "b".into()],
            exactly_one: vec![vec![0], vec![1]],
            at_most_one: vec![],
            neighbors: vec![vec![1], vec![0]],
            contexts_of: vec![vec![0], vec![1]],
            config_hash: String::new(),
        };
        let out = Backtracking.solve(&model, &MostConstrained, &SearchOptions::default()).unwrap();
        assert_eq!(out.verdict, Verdict::Unsat);
        assert_eq!(out.trace.unwrap(), vec![Step::Leaf(Conflict::Pair(0, 1))]);
    }

    #[test]
    fn budget_gives_indeterminate() {
        let c = cfg(BASIS);
        let opts = SearchOptions { budget: 0, ..Default::default() };
        let out = search_two_valued_measure(&c, &opts).unwrap();
        assert_eq!(out.verdict, Verdict::Indeterminate);
    }

    #[test]
    fn registry_rejects_unknown_names() {
        assert!(matches!(heuristic_by_name("random"), Err(Error::UnknownStrategy { .. })));
        assert!(matches!(solver_by_name("cdcl"), Err(Error::UnknownStrategy { .. })));
        for h in HEURISTICS {
            assert_eq!(heuristic_by_name(h).unwrap().name(), *h);
        }
    }

    #[test]
    fn violations_name_the_context() {
        let c = cfg(BASIS);
        let model = ColoringModel::new(&c);
        assert!(model.violation(&[true, false, false]).is_none());
        let msg = model.violation(&[false, false, false]).unwrap();
        assert!(msg.contains("{v1,v2,v3}"), "{msg}");
    }
}
