//! File formats and report envelopes.
//!
//! A table file is a JSON object
//!
//! ```json
//! {"k": 2, "entries": [2.0, 3.0, 4.0, 5.0], "labels": ["A", "B"]}
//! ```
//!
//! with entries in row-major order, variable 1 most significant: for `k = 2`
//! the order is `(1,1), (1,2), (2,1), (2,2)`. `labels` is optional. Floats are
//! written in shortest round-trip form, so a file re-serializes to the same
//! values it was read from.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param_system::ParamSet;
use crate::table::{BinaryTable, TableConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableFile {
    pub k: usize,
    pub entries: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl TableFile {
    pub fn from_table(table: &BinaryTable) -> Self {
        Self {
            k: table.k(),
            entries: table.entries().to_vec(),
            labels: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: TableFile = serde_json::from_str(text).map_err(|e| json_error("table", &e))?;
        if let Some(labels) = &file.labels {
            if labels.len() != file.k {
                return Err(Error::Parse(format!(
                    "field `labels`: expected {} labels, got {}",
                    file.k,
                    labels.len()
                )));
            }
        }
        Ok(file)
    }

    pub fn to_table(&self, config: &TableConfig) -> Result<BinaryTable> {
        BinaryTable::with_config(self.k, self.entries.clone(), config).map_err(|e| match e {
            Error::NonPositiveEntry { index, value, floor } => Error::Parse(format!(
                "field `entries[{index}]`: value {value} must be greater than {floor}"
            )),
            Error::EntryCount { k, expected, got } => Error::Parse(format!(
                "field `entries`: k = {k} needs {expected} entries, got {got}"
            )),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table files always serialize")
    }
}

pub fn parse_params(text: &str) -> Result<ParamSet> {
    serde_json::from_str(text).map_err(|e| json_error("parameter", &e))
}

fn json_error(what: &str, e: &serde_json::Error) -> Error {
    Error::Parse(format!(
        "invalid {what} file at line {}, column {}: {e}",
        e.line(),
        e.column()
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

/// Resolved settings echoed in every report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    /// The seed actually used; a requested seed of 0 is replaced by one drawn
    /// from entropy.
    pub seed: u64,
    pub threads: usize,
    pub format: OutputFormat,
    pub lor_tol: f64,
    pub lor_max_iter: usize,
    pub max_k: usize,
}

/// Returns `requested`, or a fresh nonzero seed when it is 0.
pub fn resolve_seed(requested: u64) -> u64 {
    if requested != 0 {
        return requested;
    }
    loop {
        let s: u64 = rand::random();
        if s != 0 {
            return s;
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report<T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: RunConfig,
    pub result: T,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorReport {
    pub error: String,
    pub code: i32,
    pub message: String,
}

impl ErrorReport {
    pub fn new(error: &Error, code: i32) -> Self {
        let name = match error {
            Error::NonRealizableParams { .. } => "non_realizable_params",
            Error::Convergence { .. } => "convergence",
            Error::NonFinite(_) | Error::Evaluation(_) | Error::DegenerateMarginal { .. } => "numeric",
            _ => "input",
        };
        Self {
            error: name.into(),
            code,
            message: error.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_reports_location() {
        let err = TableFile::parse("{\"k\": 1,\n \"entries\": [1.0, oops]}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn nonpositive_entry_names_the_field() {
        let file = TableFile::parse(r#"{"k": 1, "entries": [1.0, -2.0]}"#).unwrap();
        let msg = file.to_table(&TableConfig::default()).unwrap_err().to_string();
        assert!(msg.contains("entries[1]"), "{msg}");
        let file = TableFile::parse(r#"{"k": 2, "entries": [1.0, 2.0]}"#).unwrap();
        assert!(file.to_table(&TableConfig::default()).is_err());
        assert!(TableFile::parse(r#"{"k": 2, "entries": [1,1,1,1], "labels": ["a"]}"#).is_err());
    }

    #[test]
    fn error_report_names() {
        let e = Error::NonRealizableParams { index: 1, value: -1.0 };
        let r = ErrorReport::new(&e, 3);
        assert_eq!(r.error, "non_realizable_params");
        let text = serde_json::to_string(&r).unwrap();
        let back: ErrorReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.code, 3);
    }

    #[test]
    fn seed_resolution() {
        assert_eq!(resolve_seed(42), 42);
        assert_ne!(resolve_seed(0), 0);
    }

    proptest! {
        #[test]
        fn table_file_round_trips_bit_identically(
            entries in prop::collection::vec(1e-300f64..1e300, 8),
        ) {
            let file = TableFile { k: 3, entries, labels: None };
            let back = TableFile::parse(&file.to_json()).unwrap();
            for (a, b) in file.entries.iter().zip(&back.entries) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }

        #[test]
        fn decimal_inputs_survive_reserialization(
            mantissa in 1u64..99_999_999_999_999_999,
            exp in -20i32..20,
        ) {
            let text = format!("{{\"k\": 0, \"entries\": [{mantissa}e{exp}]}}");
            let first = TableFile::parse(&text).unwrap();
            let again = TableFile::parse(&first.to_json()).unwrap();
            prop_assert_eq!(first.entries[0].to_bits(), again.entries[0].to_bits());
            let expected: f64 = format!("{mantissa}e{exp}").parse().unwrap();
            prop_assert_eq!(first.entries[0].to_bits(), expected.to_bits());
        }
    }
}
