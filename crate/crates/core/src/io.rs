//! CSV and JSON artifacts. Every CSV starts with a `# spec_hash=` line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Result;

/// Serializes non-finite numbers as strings (`"inf"`, `"-inf"`, `"nan"`).
pub fn ser_f64<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(&fmt_f64(*v))
    }
}

/// Shortest round-trip text for a float; `inf` for `+inf`.
pub fn fmt_f64(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else if v.is_nan() {
        "nan".into()
    } else {
        format!("{v}")
    }
}

/// Slices of values with `+inf` stored as `null`. Finite values round-trip
/// bit for bit.
pub mod inf_as_null {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Vec<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<Option<f64>>> =
            v.iter().map(|r| r.iter().map(|&x| x.is_finite().then_some(x)).collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Vec<f64>>, D::Error> {
        let rows: Vec<Vec<Option<f64>>> = Deserialize::deserialize(d)?;
        Ok(rows.into_iter().map(|r| r.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect()).collect())
    }
}

/// Writes a CSV file with the spec-hash header line.
pub fn write_csv<I>(path: &Path, spec_hash: &str, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# spec_hash={spec_hash}")?;
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// The spec hash recorded in the first line of a CSV artifact.
pub fn read_csv_hash(path: &Path) -> Result<Option<String>> {
    let mut line = String::new();
    BufReader::new(File::open(path)?).read_line(&mut line)?;
    Ok(line.trim().strip_prefix("# spec_hash=").map(str::to_string))
}

/// Column names `prefix1..prefixN`.
pub fn axis_columns(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// One asserted check of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

/// Record of a CLI run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub spec_hash: String,
    pub command: String,
    pub parameters: serde_json::Map<String, serde_json::Value>,
    pub tolerances: serde_json::Map<String, serde_json::Value>,
    pub timings_ms: serde_json::Map<String, serde_json::Value>,
    pub outputs: Vec<PathBuf>,
    pub checks: Vec<CheckOutcome>,
    pub passed: bool,
}

impl RunManifest {
    pub fn new(spec_hash: &str, command: &str) -> Self {
        RunManifest {
            spec_hash: spec_hash.to_string(),
            command: command.to_string(),
            parameters: Default::default(),
            tolerances: Default::default(),
            timings_ms: Default::default(),
            outputs: Vec::new(),
            checks: Vec::new(),
            passed: true,
        }
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.passed &= passed;
        self.checks.push(CheckOutcome { name: name.to_string(), passed, detail: detail.into() });
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_header_carries_hash() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_csv(&p, "abc", &["x".into()], vec![vec![fmt_f64(f64::INFINITY)]]).unwrap();
        assert_eq!(read_csv_hash(&p).unwrap().as_deref(), Some("abc"));
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.ends_with("x\ninf\n"));
    }

    #[test]
    fn float_text_round_trips() {
        for v in [0.1, 1.0 / 3.0, 247.0 / 180.0, 1e-300, -2.5] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}
