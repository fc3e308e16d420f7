//! Run reports and atomic file output.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

pub const REPORT_SCHEMA: &str = "kslat-run-report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictRecord {
    pub operation: String,
    pub module: String,
    pub verdict: String,
    pub detail: String,
}

/// Everything a command did. Contains no timings, so equal arguments
/// give byte-identical reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub schema: &'static str,
    pub schema_version: u32,
    pub tool_version: &'static str,
    pub command: String,
    pub input: Option<String>,
    pub config_hash: Option<String>,
    pub seed: Option<u64>,
    pub verdicts: Vec<VerdictRecord>,
    pub statistics: BTreeMap<String, Value>,
    pub certificate_path: Option<String>,
    pub outputs: Vec<String>,
}

impl RunReport {
    pub fn new(command: &str) -> Self {
        RunReport {
            schema: REPORT_SCHEMA,
            schema_version: REPORT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            input: None,
            config_hash: None,
            seed: None,
            verdicts: Vec::new(),
            statistics: BTreeMap::new(),
            certificate_path: None,
            outputs: Vec::new(),
        }
    }

    pub fn verdict(&mut self, operation: &str, module: &str, verdict: impl ToString, detail: impl Into<String>) {
        self.verdicts.push(VerdictRecord {
            operation: operation.into(),
            module: module.into(),
            verdict: verdict.to_string(),
            detail: detail.into(),
        });
    }

    pub fn stat(&mut self, key: &str, value: impl Serialize) {
        self.statistics.insert(key.into(), serde_json::to_value(value).expect("statistic serializes"));
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Output directory handling: every file goes through a temporary sibling
/// and a rename.
pub struct OutDir {
    root: Option<PathBuf>,
}

impl OutDir {
    pub fn new(root: Option<PathBuf>) -> Result<Self> {
        if let Some(dir) = &root {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        Ok(OutDir { root })
    }

    pub fn enabled(&self) -> bool {
        self.root.is_some()
    }

    /// Writes `name` under the output directory, returning its path, or
    /// `None` when no directory was requested.
    pub fn write(&self, name: &str, contents: &str) -> Result<Option<String>> {
        let Some(root) = &self.root else { return Ok(None) };
        let path = root.join(name);
        write_atomic(&path, contents)?;
        Ok(Some(path.display().to_string()))
    }
}

pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Prints the report on stdout; a closed pipe is not an error.
pub fn emit(report: &RunReport) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{}", report.to_json());
}
