//! Emitted artifacts: deterministic result JSON, separate timing JSON, CSV
//! files for plotting. All files are written atomically.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use boxreach::hub::Skipped;
use boxreach::ReachResult;
use serde::{Deserialize, Serialize};
use tempfile::NamedTempFile;

use crate::error::CliError;
use crate::validate::Containment;

pub const RESULT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxRecord {
    pub method: String,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub trajectory_evals: usize,
    pub notes: String,
}

impl From<&ReachResult> for BoxRecord {
    fn from(r: &ReachResult) -> Self {
        Self {
            method: r.method.name().into(),
            lower: r.over_approx.lower().to_vec(),
            upper: r.over_approx.upper().to_vec(),
            trajectory_evals: r.trajectory_evals,
            notes: r.notes.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkipRecord {
    pub method: String,
    pub reason: String,
    /// Attempted and failed, as opposed to inapplicable.
    pub failed: bool,
}

impl From<&Skipped> for SkipRecord {
    fn from(s: &Skipped) -> Self {
        Self {
            method: s.method.name().into(),
            reason: s.reason.clone(),
            failed: s.failed,
        }
    }
}

/// `result.json`: everything except wall times, so that identical inputs
/// give byte-identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultFile {
    pub version: u32,
    pub n_x: usize,
    pub request: String,
    pub results: Vec<BoxRecord>,
    pub skipped: Vec<SkipRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<Validation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Validation {
    pub samples: usize,
    pub seed: u64,
    pub methods: Vec<Containment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingRecord {
    pub method: String,
    /// Computing capability data: Jacobian or sensitivity bounds.
    pub bounds_seconds: f64,
    pub reach_seconds: f64,
    pub total_seconds: f64,
}

impl From<&ReachResult> for TimingRecord {
    fn from(r: &ReachResult) -> Self {
        Self {
            method: r.method.name().into(),
            bounds_seconds: r.timing.bounds,
            reach_seconds: r.timing.reach,
            total_seconds: r.timing.total(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingFile {
    pub version: u32,
    pub methods: Vec<TimingRecord>,
}

pub fn boxes_csv(results: &[ReachResult]) -> String {
    let mut s = String::from("method,dim,lower,upper\n");
    for r in results {
        for (i, (l, u)) in r.over_approx.lower().iter().zip(r.over_approx.upper()).enumerate() {
            let _ = writeln!(s, "{},{},{l:?},{u:?}", r.method.name(), i + 1);
        }
    }
    s
}

pub fn cloud_csv(cloud: &[Vec<f64>]) -> String {
    let n = cloud.first().map_or(0, Vec::len);
    let header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    let mut s = header.join(",");
    s.push('\n');
    for x in cloud {
        let row: Vec<String> = x.iter().map(|v| format!("{v:?}")).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("records always serialize");
    s.push('\n');
    s
}

/// Writes `contents` to `dir/name` via a temporary file in the same
/// directory and a rename.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let err = |e: std::io::Error| CliError::Output(format!("{}: {e}", dir.join(name).display()));
    std::fs::create_dir_all(dir).map_err(err)?;
    let mut tmp = NamedTempFile::new_in(dir).map_err(err)?;
    tmp.write_all(contents.as_bytes()).map_err(err)?;
    tmp.persist(dir.join(name)).map_err(|e| err(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use boxreach::{IntervalBox, Method};

    #[test]
    fn csv_rows_per_dimension() {
        let r = ReachResult {
            over_approx: IntervalBox::new(vec![0.0, -1.5], vec![1.0, 2.0]).unwrap(),
            method: Method::CtMixedMono,
            trajectory_evals: 1,
            timing: Default::default(),
            notes: String::new(),
        };
        assert_eq!(
            boxes_csv(&[r]),
            "method,dim,lower,upper\nct_mixed_mono,1,0.0,1.0\nct_mixed_mono,2,-1.5,2.0\n"
        );
        assert_eq!(cloud_csv(&[vec![1.0, 0.25]]), "x1,x2\n1.0,0.25\n");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        write_atomic(dir.path(), "a.txt", "one").unwrap();
        write_atomic(dir.path(), "a.txt", "two").unwrap();
        assert_eq!(std::fs::read_to_string(dir.path().join("a.txt")).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
