//! Versioned colouring certificates and their independent replay.

use serde::{Deserialize, Serialize};

use super::{Conflict, SearchOutcome, SearchStats, Step, Verdict};
use crate::contexts::{context_census, enumerate_contexts, ContextClosure};
use crate::error::{Error, Result};
use crate::linalg::{Field, LinalgConfig};
use crate::measures::{check_probability_measure, measure_from_valuation, valuation_from_coloring, ProjectionFamily, TwoValuedMeasure};
use crate::rays::RayConfiguration;
use crate::rayset::EntryMode;

pub const CERTIFICATE_VERSION: u32 = 1;
pub const CERTIFICATE_FORMAT: &str = "kslat-coloring-certificate";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub dim: usize,
    pub mode: EntryMode,
    pub rays: usize,
    pub verdict: Verdict,
    /// Colour of each ray (0 or 1) for SAT.
    pub witness: Option<Vec<u8>>,
    /// Preorder decision tree for UNSAT.
    pub trace: Option<Vec<Step>>,
    pub stats: SearchStats,
}

impl Certificate {
    pub fn from_outcome<T: Field>(cfg: &RayConfiguration<T>, outcome: &SearchOutcome) -> Self {
        Certificate {
            format: CERTIFICATE_FORMAT.into(),
            version: CERTIFICATE_VERSION,
            config_hash: outcome.config_hash.clone(),
            dim: cfg.dim(),
            mode: if T::EXACT { EntryMode::Exact } else { EntryMode::Float },
            rays: cfg.len(),
            verdict: outcome.verdict,
            witness: outcome.witness.as_ref().map(|w| w.iter().map(|&b| b as u8).collect()),
            trace: outcome.trace.clone(),
            stats: outcome.stats.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::CorruptCertificate(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub valid: bool,
    pub verdict: Verdict,
    pub detail: String,
    /// Decision points and refuted leaves replayed (UNSAT only).
    pub branches: usize,
    pub leaves: usize,
}

impl VerificationReport {
    fn sat(valid: bool, detail: String) -> Self {
        VerificationReport { valid, verdict: Verdict::Sat, detail, branches: 0, leaves: 0 }
    }
}

/// Checks a colouring against a freshly computed context census, then lifts
/// it to a measure on the projection family and re-runs the measure checks.
pub fn verify_witness<T: Field>(cfg: &RayConfiguration<T>, witness: &[bool]) -> Result<VerificationReport> {
    if witness.len() != cfg.len() {
        return Err(Error::CorruptCertificate(format!("witness has {} entries for {} rays", witness.len(), cfg.len())));
    }
    let names = |rays: &[usize]| rays.iter().map(|&r| cfg.label(r)).collect::<Vec<_>>().join(",");
    let census = context_census(cfg);
    for ctx in &census.complete {
        let ones = ctx.iter().filter(|&&r| witness[r]).count();
        if ones != 1 {
            return Ok(VerificationReport::sat(false, format!("complete context {{{}}} has {ones} rays coloured 1", names(ctx))));
        }
    }
    for ctx in &census.maximal_incomplete {
        let ones = ctx.iter().filter(|&&r| witness[r]).count();
        if ones > 1 {
            return Ok(VerificationReport::sat(false, format!("context {{{}}} has {ones} rays coloured 1", names(ctx))));
        }
    }
    let contexts = enumerate_contexts(cfg, ContextClosure::Maximal);
    let family = ProjectionFamily::from_contexts(cfg, &contexts)?;
    let linalg = LinalgConfig { tolerance: cfg.tolerance(), ..LinalgConfig::default() };
    let valuation = valuation_from_coloring(cfg, &contexts, witness, linalg)?;
    let measure = measure_from_valuation(&valuation, &family)?;
    let report = check_probability_measure(&measure.values, &family, cfg.tolerance())?;
    if !report.passes {
        return Ok(VerificationReport::sat(false, format!("lifted measure fails: {:?} {:?}", report.m1_violations, report.m2_violations)));
    }
    if let Err(e) = TwoValuedMeasure::new(measure.values, cfg.tolerance()) {
        return Ok(VerificationReport::sat(false, e.to_string()));
    }
    Ok(VerificationReport::sat(
        true,
        format!("witness satisfies {} complete contexts; lifted measure passes on {} projections", census.complete.len(), family.len()),
    ))
}

/// Replays a certificate against `cfg`. Structural damage is an error;
/// a well-formed certificate that does not prove its verdict yields a
/// report with `valid == false`.
pub fn verify_certificate<T: Field>(cert: &Certificate, cfg: &RayConfiguration<T>) -> Result<VerificationReport> {
    let hash = cfg.hash();
    if cert.config_hash != hash {
        return Err(Error::HashMismatch { expected: cert.config_hash.clone(), found: hash });
    }
    if cert.format != CERTIFICATE_FORMAT || cert.version != CERTIFICATE_VERSION {
        return Err(Error::CorruptCertificate(format!("unsupported format {} v{}", cert.format, cert.version)));
    }
    match cert.verdict {
        Verdict::Sat => {
            let w = cert.witness.as_ref().ok_or_else(|| Error::CorruptCertificate("SAT certificate without witness".into()))?;
            if w.iter().any(|&b| b > 1) {
                return Err(Error::CorruptCertificate("witness values must be 0 or 1".into()));
            }
            let bits: Vec<bool> = w.iter().map(|&b| b == 1).collect();
            verify_witness(cfg, &bits)
        }
        Verdict::Unsat => {
            let Some(trace) = cert.trace.as_ref() else {
                return Ok(VerificationReport {
                    valid: false,
                    verdict: Verdict::Unsat,
                    detail: "UNSAT claim without an exhaustion trace".into(),
                    branches: 0,
                    leaves: 0,
                });
            };
            Replay::new(cfg).run(trace)
        }
        Verdict::Indeterminate => Ok(VerificationReport {
            valid: false,
            verdict: Verdict::Indeterminate,
            detail: "indeterminate outcome carries no proof".into(),
            branches: 0,
            leaves: 0,
        }),
    }
}

enum Clause {
    AtLeastOne(Vec<usize>),
    NotBoth(usize, usize),
}

struct Replay {
    clauses: Vec<Clause>,
    complete: usize,
    orthogonal: Vec<Vec<bool>>,
    branches: usize,
    leaves: usize,
}

enum Outcome {
    Refuted,
    Open(String),
}

impl Replay {
    fn new<T: Field>(cfg: &RayConfiguration<T>) -> Self {
        let census = context_census(cfg);
        let n = cfg.len();
        let orthogonal: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| cfg.is_orthogonal(i, j)).collect()).collect();
        let mut clauses: Vec<Clause> = census.complete.iter().map(|c| Clause::AtLeastOne(c.clone())).collect();
        for i in 0..n {
            for j in i + 1..n {
                if orthogonal[i][j] {
                    clauses.push(Clause::NotBoth(i, j));
                }
            }
        }
        Replay { clauses, complete: census.complete.len(), orthogonal, branches: 0, leaves: 0 }
    }

    /// Naive unit propagation to a fixpoint; `true` on conflict.
    fn propagate(&self, a: &mut [Option<bool>]) -> bool {
        loop {
            let mut changed = false;
            for clause in &self.clauses {
                match *clause {
                    Clause::AtLeastOne(ref rays) => {
                        if rays.iter().any(|&r| a[r] == Some(true)) {
                            continue;
                        }
                        let free: Vec<usize> = rays.iter().copied().filter(|&r| a[r].is_none()).collect();
                        match free[..] {
                            [] => return true,
                            [r] => {
                                a[r] = Some(true);
                                changed = true;
                            }
                            _ => {}
                        }
                    }
                    Clause::NotBoth(x, y) => match (a[x], a[y]) {
                        (Some(true), Some(true)) => return true,
                        (Some(true), None) => {
                            a[y] = Some(false);
                            changed = true;
                        }
                        (None, Some(true)) => {
                            a[x] = Some(false);
                            changed = true;
                        }
                        _ => {}
                    },
                }
            }
            if !changed {
                return false;
            }
        }
    }

    fn take<'t>(&self, trace: &'t [Step], pos: &mut usize) -> Result<&'t Step> {
        let step = trace.get(*pos).ok_or_else(|| Error::CorruptCertificate(format!("trace ends early at step {}", *pos)))?;
        *pos += 1;
        Ok(step)
    }

    fn check_leaf(&mut self, step: &Step, at: usize) -> Result<()> {
        match *step {
            Step::Leaf(Conflict::Context(c)) if c < self.complete => {}
            Step::Leaf(Conflict::Pair(x, y)) if x < self.orthogonal.len() && y < self.orthogonal.len() && self.orthogonal[x][y] => {}
            Step::Leaf(c) => return Err(Error::CorruptCertificate(format!("step {at}: conflict {c:?} names no constraint"))),
            Step::Branch(_) => return Err(Error::CorruptCertificate(format!("step {at}: branch below a refuted assignment"))),
        }
        self.leaves += 1;
        Ok(())
    }

    fn node(&mut self, trace: &[Step], pos: &mut usize, a: &[Option<bool>]) -> Result<Outcome> {
        let at = *pos;
        let var = match *self.take(trace, pos)? {
            Step::Leaf(_) => return Ok(Outcome::Open(format!("leaf at step {at} is not refuted by propagation"))),
            Step::Branch(v) => v,
        };
        if var >= a.len() || a[var].is_some() {
            return Err(Error::CorruptCertificate(format!("step {at}: branch on unavailable variable {var}")));
        }
        self.branches += 1;
        for value in [true, false] {
            let mut child = a.to_vec();
            child[var] = Some(value);
            if self.propagate(&mut child) {
                let leaf_at = *pos;
                let step = *self.take(trace, pos)?;
                self.check_leaf(&step, leaf_at)?;
            } else if let Outcome::Open(why) = self.node(trace, pos, &child)? {
                return Ok(Outcome::Open(why));
            }
        }
        Ok(Outcome::Refuted)
    }

    fn run(mut self, trace: &[Step]) -> Result<VerificationReport> {
        let mut a = vec![None; self.orthogonal.len()];
        let mut pos = 0;
        let outcome = if self.propagate(&mut a) {
            let step = *self.take(trace, &mut pos)?;
            self.check_leaf(&step, 0)?;
            Outcome::Refuted
        } else {
            self.node(trace, &mut pos, &a)?
        };
        if let Outcome::Refuted = outcome {
            if pos != trace.len() {
                return Err(Error::CorruptCertificate(format!("{} trailing steps", trace.len() - pos)));
            }
        }
        let (valid, detail) = match outcome {
            Outcome::Refuted => (true, format!("every branch binary-complete, {} leaves refuted by propagation", self.leaves)),
            Outcome::Open(why) => (false, why),
        };
        Ok(VerificationReport { valid, verdict: Verdict::Unsat, detail, branches: self.branches, leaves: self.leaves })
    }
}
