//! The ray-set document format.
//!
//! ```text
//! # comment lines start with '#'; blank lines are ignored
//! rays <dimension> <exact|float> <count>
//! [<label>:] <c1> <c2> ... <c_dimension>
//! ```
//!
//! The header is the first non-comment line. Each body line holds one ray as
//! whitespace-separated components, optionally preceded by a label ending in
//! `:` (rays without one are labelled `v1`, `v2`, ...). Exact components are
//! integers, rationals `p/q`, or quadratic surds `a+b√r` / `a-b√r` / `b√r`
//! (`sqrt(r)` is accepted for `√r`); all surds in one document must share the
//! same radicand. Float components are decimal literals.

use std::fmt;

use num::rational::BigRational;

use crate::error::{Error, Result};
use crate::scalar::{parse_decimal, ratio_to_f64, Surd};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryMode {
    Exact,
    Float,
}

impl fmt::Display for EntryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntryMode::Exact => "exact",
            EntryMode::Float => "float",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Entry {
    Exact(Surd),
    /// A decimal; `exact` is its exact rational value.
    Float { value: f64, exact: BigRational, literal: String },
}

impl Entry {
    pub fn to_f64(&self) -> f64 {
        match self {
            Entry::Exact(s) => s.to_f64(),
            Entry::Float { value, .. } => *value,
        }
    }

    pub fn to_surd(&self) -> Surd {
        match self {
            Entry::Exact(s) => s.clone(),
            Entry::Float { exact, .. } => Surd::rational(exact.clone()),
        }
    }
}

impl fmt::Display for Entry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entry::Exact(s) => write!(f, "{s}"),
            Entry::Float { literal, .. } => f.write_str(literal),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RayLine {
    pub label: String,
    pub components: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RaySetDocument {
    pub dim: usize,
    pub mode: EntryMode,
    pub rays: Vec<RayLine>,
}

fn parse_err(line: usize, msg: impl fmt::Display) -> Error {
    Error::Parse(format!("line {line}: {msg}"))
}

impl RaySetDocument {
    pub fn new(dim: usize, mode: EntryMode, rays: Vec<RayLine>) -> Self {
        RaySetDocument { dim, mode, rays }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut header: Option<(usize, EntryMode, usize)> = None;
        let mut rays = Vec::new();
        let mut radicand = 0u32;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((dim, mode, _)) = header else {
                let fields: Vec<&str> = line.split_whitespace().collect();
                if fields.len() != 4 || fields[0] != "rays" {
                    return Err(parse_err(line_no, "expected header `rays <dimension> <exact|float> <count>`"));
                }
                let dim: usize = fields[1].parse().map_err(|_| parse_err(line_no, "bad dimension"))?;
                if dim == 0 {
                    return Err(parse_err(line_no, "dimension must be positive"));
                }
                let mode = match fields[2] {
                    "exact" => EntryMode::Exact,
                    "float" => EntryMode::Float,
                    other => return Err(parse_err(line_no, format!("unknown entry mode `{other}`"))),
                };
                let count: usize = fields[3].parse().map_err(|_| parse_err(line_no, "bad ray count"))?;
                header = Some((dim, mode, count));
                continue;
            };
            let (label, body) = match line.split_once(':') {
                Some((l, b)) if !l.trim().is_empty() && !l.contains(char::is_whitespace) => (l.trim().to_string(), b),
                Some(_) => return Err(parse_err(line_no, "bad label")),
                None => (format!("v{}", rays.len() + 1), line),
            };
            let mut components = Vec::with_capacity(dim);
            for token in body.split_whitespace() {
                let entry = match mode {
                    EntryMode::Exact => {
                        let s: Surd = token.parse().map_err(|e| parse_err(line_no, e))?;
                        if s.radicand() != 0 {
                            if radicand != 0 && radicand != s.radicand() {
                                return Err(parse_err(line_no, format!("mixed radicands √{radicand} and √{}", s.radicand())));
                            }
                            radicand = s.radicand();
                        }
                        Entry::Exact(s)
                    }
                    EntryMode::Float => {
                        let exact = parse_decimal(token).map_err(|e| parse_err(line_no, e))?;
                        Entry::Float { value: ratio_to_f64(&exact), exact, literal: token.to_string() }
                    }
                };
                components.push(entry);
            }
            if components.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: components.len() });
            }
            rays.push(RayLine { label, components });
        }
        let Some((dim, mode, count)) = header else {
            return Err(Error::Parse("missing header".into()));
        };
        if count != rays.len() {
            return Err(Error::Parse(format!("header declares {count} rays, body has {}", rays.len())));
        }
        Ok(RaySetDocument { dim, mode, rays })
    }

    /// Canonical text: header plus one labelled ray per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("rays {} {} {}\n", self.dim, self.mode, self.rays.len());
        for ray in &self.rays {
            out.push_str(&ray.label);
            out.push(':');
            for c in &ray.components {
                out.push(' ');
                out.push_str(&c.to_string());
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_exact_document() {
        let doc = RaySetDocument::parse("# basis\nrays 3 exact 3\n1 0 0\nb: 0 1 0\n0 0 1\n").unwrap();
        assert_eq!(doc.dim, 3);
        assert_eq!(doc.rays.len(), 3);
        assert_eq!(doc.rays[0].label, "v1");
        assert_eq!(doc.rays[1].label, "b");
    }

    #[test]
    fn surd_components() {
        let doc = RaySetDocument::parse("rays 3 exact 1\n1 -1 √2\n").unwrap();
        assert_eq!(doc.rays[0].components[2].to_string(), "√2");
        let mixed = RaySetDocument::parse("rays 2 exact 2\n1 √2\n1 √3\n");
        assert!(matches!(mixed, Err(Error::Parse(_))));
    }

    #[test]
    fn float_components_keep_exact_value() {
        let doc = RaySetDocument::parse("rays 2 float 1\n0.5 -1.25\n").unwrap();
        assert_eq!(doc.rays[0].components[1].to_surd(), Surd::from_ratio(-5, 4));
        assert!(RaySetDocument::parse("rays 2 float 1\n0.5 √2\n").is_err());
    }

    #[test]
    fn errors() {
        assert!(matches!(RaySetDocument::parse("rays 3 exact 1\n1 0\n"), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(RaySetDocument::parse("rays 3 exact 2\n1 0 0\n"), Err(Error::Parse(_))));
        assert!(matches!(RaySetDocument::parse("1 0 0\n"), Err(Error::Parse(_))));
        assert!(matches!(RaySetDocument::parse(""), Err(Error::Parse(_))));
        assert!(matches!(RaySetDocument::parse("rays 2 fuzzy 0\n"), Err(Error::Parse(_))));
    }

    #[test]
    fn canonical_text_round_trips() {
        let doc = RaySetDocument::parse("rays 3 exact 2\nx: 1 1/2 -√2\n0 1 1+√2\n").unwrap();
        let again = RaySetDocument::parse(&doc.to_text()).unwrap();
        assert_eq!(doc, again);
    }
}
