use std::fmt::Display;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use kslat::algebra::{fractional_witness, gleason_measure, gns_construct, DensityOperator, DensitySpec, FiniteAlgebra, GnsConfig};
use kslat::contexts::{enumerate_contexts, ContextClosure};
use kslat::linalg::Field;
use kslat::measures::{check_probability_measure, ProjectionFamily};
use kslat::presheaf::{
    build_spectral_presheaf, common_complete_atoms, is_rank_one_onto, point_measure_classify, state_presheaf_section, PointVerdict,
    SpectralPresheafBundle,
};
use kslat::random::seeded;
use kslat::rays::{FromEntry, RayConfiguration};
use kslat::rayset::EntryMode;
use kslat::scalar::{Exact, C64};
use rayon::prelude::*;

use crate::report::{emit, OutDir, RunReport};
use crate::{load_as, read_document, ModeArgs};

/// Float tolerance for measure and presheaf residuals.
const FLOAT_TOL: f64 = 1e-10;

#[derive(Args, Debug)]
pub struct GleasonArgs {
    /// Ray-set document.
    pub config: PathBuf,
    /// Density operator: `I/n`, `e<k>`, `diag:w1,…,wd` or `pure:x1,…,xd`.
    #[arg(long, conflicts_with = "random", required_unless_present = "random")]
    pub rho: Option<String>,
    /// Check this many seeded random density operators instead.
    #[arg(long, value_name = "N")]
    pub random: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub mode: ModeArgs,
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

struct Sample {
    measure_passes: bool,
    m1_violations: usize,
    m2_violations: usize,
    max_m2_residual: f64,
    witness: Option<(String, String)>,
    edge_residual: f64,
    mass_residual: f64,
    all_point: bool,
    rank_one_on_common_atom: bool,
    gns_dimension: usize,
}

impl Sample {
    fn passes(&self) -> bool {
        self.measure_passes && self.witness.is_some() && self.all_point == self.rank_one_on_common_atom
    }
}

fn check<T: Field + Display>(
    rho: &DensityOperator<T>,
    family: &ProjectionFamily<T>,
    bundle: &SpectralPresheafBundle<T>,
    seed: u64,
) -> Result<Sample> {
    let tol = if T::EXACT { 0.0 } else { FLOAT_TOL };
    let mu = gleason_measure(rho, family)?;
    let m = check_probability_measure(&mu.values, family, tol)?;
    let d = rho.dim();
    let witness = fractional_witness(rho, &FiniteAlgebra::full(d), seed)?.map(|w| (w.value.to_string(), w.method));
    let state = state_presheaf_section(rho, bundle)?;
    let points = point_measure_classify(&state.section, bundle);
    let common: Vec<Vec<T>> = common_complete_atoms(bundle).into_iter().map(|r| bundle.ray_vectors()[r].clone()).collect();
    let gns = gns_construct(&rho.functional(), &FiniteAlgebra::full(d), &GnsConfig { random_pairs: 4, seed, ..Default::default() })?;
    Ok(Sample {
        measure_passes: m.passes,
        m1_violations: m.m1_violations.len(),
        m2_violations: m.m2_violations.len(),
        max_m2_residual: m.max_m2_residual,
        witness,
        edge_residual: state.edge_residual,
        mass_residual: state.mass_residual,
        all_point: points.verdict == PointVerdict::AllPoint,
        rank_one_on_common_atom: is_rank_one_onto(rho.matrix(), &common, 1e-9),
        gns_dimension: gns.dimension,
    })
}

fn setup<T: Field>(cfg: &RayConfiguration<T>) -> Result<(ProjectionFamily<T>, SpectralPresheafBundle<T>)> {
    let contexts = enumerate_contexts(cfg, ContextClosure::Maximal);
    Ok((ProjectionFamily::from_contexts(cfg, &contexts)?, build_spectral_presheaf(cfg)?))
}

pub fn run(args: &GleasonArgs) -> Result<u8> {
    let (text, doc) = read_document(&args.config)?;
    let out = OutDir::new(args.out_dir.clone())?;
    let mut report = RunReport::new("gleason");
    report.input = Some(args.config.display().to_string());
    report.seed = Some(args.seed);
    let ok = match (&args.rho, args.random) {
        (Some(spec), _) => {
            let spec: DensitySpec = spec.parse()?;
            match args.mode.resolve(&doc) {
                EntryMode::Exact => single::<Exact>(&load_as(&text)?, &spec, args.seed, &mut report)?,
                EntryMode::Float => single::<C64>(&load_as(&text)?, &spec, args.seed, &mut report)?,
            }
        }
        (None, Some(n)) => random(&load_as::<C64>(&text)?, n, args.seed, &mut report)?,
        (None, None) => bail!("one of --rho or --random is required"),
    };
    if out.enabled() {
        out.write("report.json", &report.to_json())?;
    }
    emit(&report);
    Ok(if ok { 0 } else { 1 })
}

fn single<T: Field + FromEntry + Display>(cfg: &RayConfiguration<T>, spec: &DensitySpec, seed: u64, report: &mut RunReport) -> Result<bool> {
    report.config_hash = Some(cfg.hash());
    let rho = spec.build::<T>(cfg.dim())?;
    let (family, bundle) = setup(cfg)?;
    let s = check(&rho, &family, &bundle, seed)?;
    report.stat("mode", if T::EXACT { "exact" } else { "float" });
    report.stat("family_size", family.len());
    report.stat("max_m2_residual", s.max_m2_residual);
    report.stat("presheaf_edge_residual", s.edge_residual);
    report.stat("presheaf_mass_residual", s.mass_residual);
    report.stat("gns_dimension", s.gns_dimension);
    report.verdict(
        "gleason_measure",
        "gleason-gns",
        if s.measure_passes { "PASS" } else { "FAIL" },
        format!("(M1) violations {}, (M2) violations {}", s.m1_violations, s.m2_violations),
    );
    match &s.witness {
        Some((value, method)) => report.verdict("fractional_witness", "gleason-gns", "FOUND", format!("value {value} via {method}")),
        None => report.verdict("fractional_witness", "gleason-gns", "NONE", "no projection with value in (δ, 1−δ)"),
    }
    report.verdict(
        "state_presheaf_section",
        "presheaf",
        if s.edge_residual <= 1e-12 { "COMPATIBLE" } else { "INCOMPATIBLE" },
        format!("edge residual {:.3e}", s.edge_residual),
    );
    report.verdict(
        "point_measure_classify",
        "presheaf",
        if s.all_point { PointVerdict::AllPoint } else { PointVerdict::NotAllPoint },
        format!("ρ rank-one onto an atom of every complete node: {}", s.rank_one_on_common_atom),
    );
    report.verdict("gns_construct", "gleason-gns", s.gns_dimension, "dimension of the GNS space of tr(ρ·) on the full matrix algebra");
    Ok(s.passes() && s.edge_residual <= 1e-12)
}

fn random(cfg: &RayConfiguration<C64>, n: usize, seed: u64, report: &mut RunReport) -> Result<bool> {
    report.config_hash = Some(cfg.hash());
    let (family, bundle) = setup(cfg)?;
    let d = cfg.dim();
    let samples: Vec<Sample> = (0..n as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = seeded(seed.wrapping_add(k));
            check(&DensityOperator::random(d, &mut rng), &family, &bundle, seed.wrapping_add(k))
        })
        .collect::<Result<_>>()?;
    let max = |f: fn(&Sample) -> f64| samples.iter().map(f).fold(0.0, f64::max);
    let count = |f: fn(&Sample) -> bool| samples.iter().filter(|s| f(s)).count();
    let edge = max(|s| s.edge_residual);
    report.stat("mode", "float");
    report.stat("samples", n);
    report.stat("family_size", family.len());
    report.stat("m1_violations", samples.iter().map(|s| s.m1_violations).sum::<usize>());
    report.stat("m2_violations", samples.iter().map(|s| s.m2_violations).sum::<usize>());
    report.stat("max_m2_residual", max(|s| s.max_m2_residual));
    report.stat("max_presheaf_edge_residual", edge);
    report.stat("max_presheaf_mass_residual", max(|s| s.mass_residual));
    report.stat("fractional_witnesses_found", count(|s| s.witness.is_some()));
    report.stat("all_point_sections", count(|s| s.all_point));
    let dims: std::collections::BTreeSet<usize> = samples.iter().map(|s| s.gns_dimension).collect();
    report.stat("gns_dimensions", dims);
    let measure_ok = samples.iter().all(|s| s.measure_passes);
    report.verdict(
        "gleason_measure",
        "gleason-gns",
        if measure_ok { "PASS" } else { "FAIL" },
        format!("{} of {n} density operators pass (M1)/(M2) at tolerance {FLOAT_TOL:e}", count(|s| s.measure_passes)),
    );
    report.verdict(
        "fractional_witness",
        "gleason-gns",
        if samples.iter().all(|s| s.witness.is_some()) { "FOUND" } else { "MISSING" },
        format!("{} of {n} density operators", count(|s| s.witness.is_some())),
    );
    report.verdict(
        "state_presheaf_section",
        "presheaf",
        if edge <= 1e-12 { "COMPATIBLE" } else { "INCOMPATIBLE" },
        format!("largest edge residual {edge:.3e}"),
    );
    let consistent = samples.iter().all(|s| s.all_point == s.rank_one_on_common_atom);
    report.verdict(
        "point_measure_classify",
        "presheaf",
        if consistent { "CONSISTENT" } else { "INCONSISTENT" },
        format!("{} ALL-POINT sections; each matches the rank-one test", count(|s| s.all_point)),
    );
    Ok(samples.iter().all(Sample::passes) && edge <= 1e-12)
}
