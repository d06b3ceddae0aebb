//! Versioned JSON documents: suite reports and counterexamples.
//!
//! Residual values go through [`Num`] so non-finite numbers survive as the
//! strings "NaN", "inf" and "-inf" instead of becoming `null`.

use std::path::Path;

use gfdprop_core::suites::{Bound, Family, PropertyCase, Residual, Verdict};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const REPORT_SCHEMA: &str = "gfdprop-report";
pub const COUNTEREXAMPLE_SCHEMA: &str = "gfdprop-counterexample";
pub const SCHEMA_VERSION: u32 = 1;

/// A double that may be non-finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let x = self.0;
        if x.is_finite() {
            s.serialize_f64(x)
        } else if x.is_nan() {
            s.serialize_str("NaN")
        } else if x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            F(f64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::F(x) => Ok(Num(x)),
            Raw::S(s) => match s.as_str() {
                "NaN" => Ok(Num(f64::NAN)),
                "inf" => Ok(Num(f64::INFINITY)),
                "-inf" => Ok(Num(f64::NEG_INFINITY)),
                _ => Err(serde::de::Error::custom(format!("not a number: {s:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualEntry {
    pub name: String,
    pub value: Num,
    pub tolerance: Num,
    pub bound: Bound,
    pub passed: bool,
}

impl From<&Residual> for ResidualEntry {
    fn from(r: &Residual) -> Self {
        Self {
            name: r.name.clone(),
            value: Num(r.value),
            tolerance: Num(r.tolerance),
            bound: r.bound,
            passed: r.passed,
        }
    }
}

pub fn residual_entries(rs: &[Residual]) -> Vec<ResidualEntry> {
    rs.iter().map(ResidualEntry::from).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseEntry {
    pub seed: u64,
    pub passed: bool,
    pub residuals: Vec<ResidualEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CaseEntry {
    pub fn from_verdict(seed: u64, v: &Verdict) -> Self {
        Self { seed, passed: v.passed, residuals: residual_entries(&v.residuals), note: v.note.clone() }
    }
}

/// A shrunk failing case. `case` is the exact case to re-execute;
/// `(seed, family, shrink_path)` rebuilds it from scratch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub schema: String,
    pub version: u32,
    pub seed: u64,
    pub family: Family,
    pub shrink_path: Vec<usize>,
    pub residuals: Vec<ResidualEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub case: PropertyCase,
}

impl Counterexample {
    pub fn new(case: PropertyCase, verdict: &Verdict) -> Self {
        Self {
            schema: COUNTEREXAMPLE_SCHEMA.into(),
            version: SCHEMA_VERSION,
            seed: case.seed,
            family: case.family,
            shrink_path: case.shrink_path.clone(),
            residuals: residual_entries(&verdict.residuals),
            note: verdict.note.clone(),
            case,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub family: Family,
    pub cases_run: usize,
    pub passed: usize,
    pub failed: usize,
    /// Sorted by seed.
    pub cases: Vec<CaseEntry>,
    /// Sorted by seed.
    pub failures: Vec<Counterexample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub version: u32,
    pub seed: u64,
    pub cases: usize,
    pub families: Vec<FamilyReport>,
}

impl Report {
    pub fn new(seed: u64, cases: usize, families: Vec<FamilyReport>) -> Self {
        Self { schema: REPORT_SCHEMA.into(), version: SCHEMA_VERSION, seed, cases, families }
    }

    pub fn passed(&self) -> bool {
        self.families.iter().all(|f| f.failed == 0)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types always serialise");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    std::fs::write(path, to_json(value)).map_err(CliError::io(path))
}

/// A document `replay` accepts.
#[derive(Debug, Clone, PartialEq)]
pub enum Replayable {
    One(Box<Counterexample>),
    Many(Report),
}

pub fn read_replayable(path: &Path) -> Result<Replayable, CliError> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let malformed = |reason: String| CliError::Malformed { path: path.to_path_buf(), reason };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| malformed(e.to_string()))?;
    let schema = value.get("schema").and_then(|s| s.as_str()).unwrap_or_default().to_string();
    let version = value.get("version").and_then(|v| v.as_u64());
    if version != Some(SCHEMA_VERSION as u64) {
        return Err(malformed(format!("unsupported schema version {version:?}")));
    }
    match schema.as_str() {
        COUNTEREXAMPLE_SCHEMA => {
            serde_json::from_value(value).map(|c| Replayable::One(Box::new(c))).map_err(|e| malformed(e.to_string()))
        }
        REPORT_SCHEMA => serde_json::from_value(value).map(Replayable::Many).map_err(|e| malformed(e.to_string())),
        other => Err(malformed(format!("unknown schema {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_numbers_survive() {
        for x in [1.5, -0.0, f64::INFINITY, f64::NEG_INFINITY] {
            let s = serde_json::to_string(&Num(x)).unwrap();
            let back: Num = serde_json::from_str(&s).unwrap();
            assert_eq!(back.0.to_bits(), x.to_bits(), "{s}");
        }
        let nan: Num = serde_json::from_str(&serde_json::to_string(&Num(f64::NAN)).unwrap()).unwrap();
        assert!(nan.0.is_nan());
        assert!(serde_json::from_str::<Num>("\"lots\"").is_err());
    }
}
