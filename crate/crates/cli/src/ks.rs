use std::collections::BTreeSet;
use std::fmt::Display;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use kslat::contexts::context_census;
use kslat::linalg::Field;
use kslat::presheaf::{build_spectral_presheaf, global_section_search, verify_section_certificate, SectionCertificate};
use kslat::rays::{FromEntry, RayConfiguration};
use kslat::rayset::EntryMode;
use kslat::scalar::{Exact, C64};
use kslat::search::{
    export_cnf, heuristic_by_name, solver_by_name, verify_certificate, Certificate, ColoringModel, SearchOptions, Verdict,
    HEURISTICS, SOLVERS,
};

use crate::report::{emit, write_atomic, OutDir, RunReport};
use crate::{load_as, read_document, ModeArgs};

#[derive(Args, Debug)]
pub struct KsArgs {
    /// Ray-set document.
    pub config: PathBuf,
    #[command(flatten)]
    pub mode: ModeArgs,
    /// Write the DIMACS CNF here, with a `.map.json` sidecar next to it.
    #[arg(long, value_name = "PATH")]
    pub export_cnf: Option<PathBuf>,
    /// Search-node budget before giving up with INDETERMINATE.
    #[arg(long, default_value_t = kslat::search::DEFAULT_BUDGET)]
    pub budget: u64,
    /// Count every colouring instead of stopping at the first.
    #[arg(long)]
    pub enumerate_all: bool,
    #[arg(long, default_value = "backtrack", value_parser = clap::builder::PossibleValuesParser::new(SOLVERS))]
    pub solver: String,
    #[arg(long, default_value = "most-constrained", value_parser = clap::builder::PossibleValuesParser::new(HEURISTICS))]
    pub heuristic: String,
    /// Skip the global-section cross-check.
    #[arg(long)]
    pub no_presheaf: bool,
    /// Directory for the report, certificates and presheaf bundle.
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

pub fn run(args: &KsArgs) -> Result<u8> {
    let (text, doc) = read_document(&args.config)?;
    match args.mode.resolve(&doc) {
        EntryMode::Exact => run_with::<Exact>(args, &load_as(&text)?),
        EntryMode::Float => run_with::<C64>(args, &load_as(&text)?),
    }
}

fn run_with<T: Field + FromEntry + Display>(args: &KsArgs, cfg: &RayConfiguration<T>) -> Result<u8> {
    let out = OutDir::new(args.out_dir.clone())?;
    let mut report = RunReport::new("ks");
    report.input = Some(args.config.display().to_string());
    report.config_hash = Some(cfg.hash());
    report.stat("mode", if T::EXACT { "exact" } else { "float" });
    report.stat("dim", cfg.dim());
    report.stat("rays", cfg.len());
    let census = context_census(cfg);
    report.stat("complete_contexts", census.complete.len());
    report.stat("maximal_incomplete_contexts", census.maximal_incomplete.len());
    report.stat("orthogonal_pairs", cfg.orthogonal_pairs());

    let model = ColoringModel::new(cfg);
    if let Some(path) = &args.export_cnf {
        let cnf = export_cnf(&model);
        write_atomic(path, &cnf.to_dimacs())?;
        let mut sidecar = path.as_os_str().to_owned();
        sidecar.push(".map.json");
        write_atomic(&PathBuf::from(&sidecar), &cnf.sidecar_json())?;
        report.stat("cnf_variables", cnf.variables);
        report.stat("cnf_clauses", cnf.clauses.len());
        report.outputs.push(path.display().to_string());
        report.outputs.push(PathBuf::from(sidecar).display().to_string());
    }

    let opts = SearchOptions { budget: args.budget, enumerate_all: args.enumerate_all, ..Default::default() };
    let solver = solver_by_name(&args.solver)?;
    let heuristic = heuristic_by_name(&args.heuristic)?;
    let outcome = solver.solve(&model, heuristic.as_ref(), &opts)?;
    eprintln!("ks: {} after {} nodes ({:.1} ms)", outcome.verdict, outcome.stats.nodes, outcome.stats.wall_ms);
    report.verdict("search_two_valued_measure", "ks-search", outcome.verdict, outcome.verdict.wording());
    report.stat("solver", &outcome.stats.solver);
    report.stat("heuristic", &outcome.stats.heuristic);
    report.stat("search_nodes", outcome.stats.nodes);
    report.stat("backtracks", outcome.stats.backtracks);
    if args.enumerate_all {
        report.stat("witness_count", outcome.witness_count);
    }
    if let Some(w) = &outcome.witness {
        let true_rays: Vec<&str> = (0..cfg.len()).filter(|&r| w[r]).map(|r| cfg.label(r)).collect();
        report.stat("witness_true_rays", true_rays);
    }

    let cert = Certificate::from_outcome(cfg, &outcome);
    if outcome.verdict == Verdict::Unsat && outcome.trace.is_none() {
        report.verdict("verify_certificate", "ks-search", "UNVERIFIED", format!("solver `{}` records no trace", args.solver));
    } else if outcome.verdict != Verdict::Indeterminate {
        let check = verify_certificate(&cert, cfg)?;
        report.verdict("verify_certificate", "ks-search", if check.valid { "VALID" } else { "INVALID" }, check.detail);
        if !check.valid {
            bail!("the freshly written certificate does not verify");
        }
    }
    report.certificate_path = out.write("certificate.json", &cert.to_json())?;

    if !args.no_presheaf {
        let bundle = build_spectral_presheaf(cfg)?;
        report.stat("presheaf_nodes", bundle.nodes().len());
        report.stat("presheaf_order_pairs", bundle.order_pairs());
        report.stat("presheaf_cover_edges", bundle.cover_edges());
        let sections = global_section_search(&bundle, &opts);
        let cross = match (outcome.verdict, sections.verdict) {
            (Verdict::Sat, Verdict::Sat) | (Verdict::Unsat, Verdict::Unsat) => "AGREE",
            (Verdict::Indeterminate, _) | (_, Verdict::Indeterminate) => "INCONCLUSIVE",
            _ => "DISAGREE",
        };
        let mut detail = format!("global sections: {}, colourings: {}", sections.verdict, outcome.verdict);
        if args.enumerate_all && outcome.verdict == Verdict::Sat {
            report.stat("section_count", sections.section_count);
            let from_sections: BTreeSet<Vec<bool>> = sections.sections.iter().map(|s| bundle.section_to_coloring(s)).collect();
            let from_search: BTreeSet<Vec<bool>> = outcome.witnesses.iter().cloned().collect();
            let round_trip = sections.sections.iter().all(|s| bundle.coloring_to_section(&bundle.section_to_coloring(s)).ok().as_ref() == Some(s));
            let bijection = round_trip && from_sections == from_search && sections.section_count == outcome.witness_count;
            detail.push_str(&format!("; bijection {}", if bijection { "verified" } else { "FAILED" }));
            if !bijection {
                report.verdict("global_section_search", "presheaf", "DISAGREE", detail);
                emit(&report);
                bail!("sections and colourings are not in bijection");
            }
        }
        report.verdict("global_section_search", "presheaf", sections.verdict, detail);
        report.verdict("presheaf_cross_check", "presheaf", cross, "section existence against colouring existence");
        if cross == "DISAGREE" {
            emit(&report);
            bail!("presheaf and colouring searches disagree");
        }
        let section_cert = SectionCertificate::from_outcome(&bundle, &sections);
        if sections.verdict != Verdict::Indeterminate {
            let check = verify_section_certificate(&section_cert, &bundle)?;
            report.verdict("verify_section_certificate", "presheaf", if check.valid { "VALID" } else { "INVALID" }, check.detail);
        }
        if let Some(p) = out.write("section-certificate.json", &section_cert.to_json())? {
            report.outputs.push(p);
        }
        if let Some(p) = out.write("bundle.json", &bundle.to_json())? {
            report.outputs.push(p);
        }
    }

    if out.enabled() {
        let path = out.write("report.json", &report.to_json())?;
        eprintln!("ks: report written to {}", path.unwrap_or_default());
    }
    emit(&report);
    Ok(match outcome.verdict {
        Verdict::Sat => 0,
        Verdict::Unsat => 1,
        Verdict::Indeterminate => 2,
    })
}
