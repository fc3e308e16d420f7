use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use kslat::algebra::{decompose_center, fractional_witness, multiplicative_no_go_witness, verify_no_go, DensityOperator, FiniteAlgebra};
use kslat::measures::Functional;
use kslat::scalar::{Exact, Scalar};

use crate::report::{emit, OutDir, RunReport};

#[derive(Args, Debug)]
pub struct AlgebraArgs {
    /// Comma-separated block sizes, e.g. `1,3`.
    pub blocks: String,
    /// Seed for the conjugation search of fractional witnesses.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for the report and no-go certificates.
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

pub fn run(args: &AlgebraArgs) -> Result<u8> {
    let algebra = FiniteAlgebra::parse(&args.blocks)?;
    let out = OutDir::new(args.out_dir.clone())?;
    let mut report = RunReport::new("algebra");
    report.input = Some(args.blocks.clone());
    report.seed = Some(args.seed);
    let center = decompose_center(&algebra)?;
    report.stat("algebra", algebra.to_string());
    report.stat("blocks", algebra.blocks());
    report.stat("dim", algebra.dim());
    report.stat("central_projection_ranks", center.central_projections.iter().map(|p| p.rank()).collect::<Vec<_>>());
    report.stat("rank_p_i1", center.p_i1.rank());
    report.stat("rank_p_i_ge3", center.p_i.rank());
    report.stat("i2_blocks", center.i2_blocks.iter().map(|k| k + 1).collect::<Vec<_>>());
    let detail = match center.verdict {
        kslat::algebra::ValuationVerdict::ExistsAbelian => "a character of an abelian block extends to a valuation",
        kslat::algebra::ValuationVerdict::ExistsI2Finite => "2×2 blocks only; two-valued measures exist on every finite configuration",
        kslat::algebra::ValuationVerdict::None => "every block has size ≥ 3; no valuation",
    };
    report.verdict("decompose_center", "gleason-gns", center.verdict, detail);

    if let Some(v) = center.valuation {
        let values: Vec<String> = center
            .central_projections
            .iter()
            .map(|p| Functional::<Exact>::evaluate(&v, p.matrix()).map(|x| x.to_string()))
            .collect::<kslat::Result<_>>()?;
        let block = algebra.blocks().iter().position(|&n| n == 1).expect("abelian block exists") + 1;
        report.stat("valuation", serde_json::json!({ "block": block, "coordinate": v.coordinate + 1, "central_values": values }));
        if Functional::<Exact>::evaluate(&v, center.p_i.matrix())? != <Exact as Scalar>::zero() {
            bail!("valuation is not trivial on the non-abelian part");
        }
    }

    let sizes: BTreeSet<usize> = algebra.blocks().iter().copied().filter(|&n| n >= 2).collect();
    let mut all_valid = true;
    for n in sizes {
        let cert = multiplicative_no_go_witness(n)?;
        let check = verify_no_go(&cert)?;
        all_valid &= check.valid;
        report.verdict(&format!("multiplicative_no_go_witness[M_{n}]"), "gleason-gns", if check.valid { "VALID" } else { "INVALID" }, check.detail);
        if let Some(p) = out.write(&format!("no-go-M{n}.json"), &serde_json::to_string_pretty(&cert)?)? {
            report.outputs.push(p);
        }
    }

    let rho = DensityOperator::<Exact>::maximally_mixed(algebra.dim());
    match fractional_witness(&rho, &algebra, args.seed)? {
        Some(w) => report.verdict(
            "fractional_witness[I/n]",
            "gleason-gns",
            "FOUND",
            format!("value {} on block {} via {}", w.value, w.block + 1, w.method),
        ),
        None => report.verdict("fractional_witness[I/n]", "gleason-gns", "NONE", "every tested projection has value 0 or 1"),
    }

    if out.enabled() {
        out.write("report.json", &report.to_json())?;
    }
    emit(&report);
    Ok(if all_valid { 0 } else { 1 })
}
