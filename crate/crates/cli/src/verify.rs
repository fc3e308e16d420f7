use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use kslat::algebra::{verify_no_go, NoGoCertificate, NO_GO_FORMAT};
use kslat::presheaf::{build_spectral_presheaf, verify_section_certificate, SectionCertificate, SECTION_FORMAT};
use kslat::rayset::EntryMode;
use kslat::scalar::{Exact, C64};
use kslat::search::{verify_certificate, Certificate, CERTIFICATE_FORMAT};

use crate::load_as;
use crate::report::{emit, RunReport};

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Certificate JSON written by `ks` or `algebra`.
    pub certificate: PathBuf,
    /// Ray-set document the certificate refers to (colouring and section
    /// certificates).
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

/// Exit status 0 when the certificate is valid, 1 when it is well formed
/// but proves nothing, 3 on errors such as a hash mismatch.
pub fn run(args: &VerifyArgs) -> Result<u8> {
    let text = std::fs::read_to_string(&args.certificate).with_context(|| format!("reading {}", args.certificate.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| kslat::Error::CorruptCertificate(e.to_string()))?;
    let format = value.get("format").and_then(|f| f.as_str()).ok_or_else(|| kslat::Error::CorruptCertificate("missing format".into()))?;
    let config = || -> Result<String> {
        let path = args.config.as_ref().ok_or_else(|| anyhow!("`{format}` certificates need --config"))?;
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
    };
    let mut report = RunReport::new("verify");
    report.input = Some(args.certificate.display().to_string());
    let (valid, verdict, detail) = match format {
        CERTIFICATE_FORMAT => {
            let cert = Certificate::from_json(&text)?;
            let source = config()?;
            let check = match cert.mode {
                EntryMode::Exact => verify_certificate(&cert, &load_as::<Exact>(&source)?)?,
                EntryMode::Float => verify_certificate(&cert, &load_as::<C64>(&source)?)?,
            };
            report.config_hash = Some(cert.config_hash.clone());
            report.stat("branches", check.branches);
            report.stat("leaves", check.leaves);
            (check.valid, check.verdict.to_string(), check.detail)
        }
        SECTION_FORMAT => {
            let cert = SectionCertificate::from_json(&text)?;
            let bundle = build_spectral_presheaf(&load_as::<Exact>(&config()?)?)?;
            let check = verify_section_certificate(&cert, &bundle)?;
            report.config_hash = Some(cert.config_hash.clone());
            report.stat("branches", check.branches);
            report.stat("leaves", check.leaves);
            (check.valid, check.verdict.to_string(), check.detail)
        }
        NO_GO_FORMAT => {
            let cert: NoGoCertificate = serde_json::from_str(&text).map_err(|e| kslat::Error::CorruptCertificate(e.to_string()))?;
            let check = verify_no_go(&cert)?;
            (check.valid, format!("NO-MULTIPLICATIVE-STATE[M_{}]", cert.n), check.detail)
        }
        other => bail!(kslat::Error::CorruptCertificate(format!("unknown certificate format `{other}`"))),
    };
    report.verdict(&format!("verify[{format}]"), "cli", if valid { "VALID" } else { "INVALID" }, format!("{verdict}: {detail}"));
    emit(&report);
    Ok(if valid { 0 } else { 1 })
}
