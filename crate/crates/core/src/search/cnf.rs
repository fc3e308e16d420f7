//! DIMACS CNF export of the colouring model.

use std::collections::BTreeSet;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::ColoringModel;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnfVariable {
    /// 1-based DIMACS variable.
    pub var: usize,
    /// 0-based ray index.
    pub ray: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnfDocument {
    pub variables: usize,
    pub clauses: Vec<Vec<i64>>,
    pub map: Vec<CnfVariable>,
    pub config_hash: String,
}

impl CnfDocument {
    pub fn to_dimacs(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "c kslat colouring model");
        let _ = writeln!(out, "c config {}", self.config_hash);
        let _ = writeln!(out, "p cnf {} {}", self.variables, self.clauses.len());
        for clause in &self.clauses {
            for lit in clause {
                let _ = write!(out, "{lit} ");
            }
            out.push_str("0\n");
        }
        out
    }

    /// JSON sidecar mapping DIMACS variables to rays.
    pub fn sidecar_json(&self) -> String {
        serde_json::to_string_pretty(&serde_json::json!({
            "config_hash": self.config_hash,
            "variables": self.map,
        }))
        .expect("sidecar serializes")
    }
}

/// One positive clause per complete context, then one negative binary
/// clause per orthogonal pair occurring in any context (each pair once).
pub fn export_cnf(model: &ColoringModel) -> CnfDocument {
    let mut clauses: Vec<Vec<i64>> =
        model.exactly_one.iter().map(|c| c.iter().map(|&r| r as i64 + 1).collect()).collect();
    let mut negatives = BTreeSet::new();
    for ctx in model.exactly_one.iter().chain(&model.at_most_one) {
        for (i, &a) in ctx.iter().enumerate() {
            for &b in &ctx[i + 1..] {
                negatives.insert((a.min(b), a.max(b)));
            }
        }
    }
    clauses.extend(negatives.into_iter().map(|(a, b)| vec![-(a as i64 + 1), -(b as i64 + 1)]));
    CnfDocument {
        variables: model.variables,
        clauses,
        map: model
            .labels
            .iter()
            .enumerate()
            .map(|(ray, label)| CnfVariable { var: ray + 1, ray, label: label.clone() })
            .collect(),
        config_hash: model.config_hash.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rays::{load_ray_configuration, LoadOptions, RayConfiguration};
    use crate::scalar::Exact;

    #[test]
    fn basis_counts() {
        let c: RayConfiguration<Exact> = load_ray_configuration("rays 3 exact 3\n1 0 0\n0 1 0\n0 0 1\n", &LoadOptions::default()).unwrap();
        let cnf = export_cnf(&ColoringModel::new(&c));
        assert_eq!(cnf.variables, 3);
        assert_eq!(cnf.clauses.len(), 4);
        assert_eq!(cnf.clauses[0], vec![1, 2, 3]);
        assert!(cnf.clauses[1..].iter().all(|c| c.len() == 2 && c.iter().all(|&l| l < 0)));
        assert!(cnf.to_dimacs().contains("p cnf 3 4\n1 2 3 0\n"));
    }

    #[test]
    fn empty_configuration() {
        let c: RayConfiguration<Exact> = load_ray_configuration("rays 3 exact 0\n", &LoadOptions::default()).unwrap();
        let cnf = export_cnf(&ColoringModel::new(&c));
        assert!(cnf.to_dimacs().contains("p cnf 0 0\n"));
    }
}
