//! Uniform check reports: one record per checked obligation, printable as
//! human text or line-delimited structured records with a stable key order.

use poc_core::rel::{Status, Verdict};
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Text,
    Records,
}

/// One obligation outcome. Field order is the serialization order.
#[derive(Clone, Debug, Serialize)]
pub struct Record {
    /// Corpus entry name or the literal term checked.
    pub term: String,
    pub check: String,
    /// Sub-obligation of the check (e.g. completeness vs soundness).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<String>,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<String>,
    /// Classes of the target steps observed while checking.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<String>>,
}

impl Record {
    pub fn from_verdict(term: &str, check: &str, direction: Option<&str>, v: Verdict) -> Record {
        Record {
            term: term.to_string(),
            check: check.to_string(),
            direction: direction.map(String::from),
            status: v.status,
            witness: v.witness,
            counterexample: v.counterexample,
            classes: None,
        }
    }

    pub fn with_classes(mut self, classes: Vec<String>) -> Record {
        self.classes = Some(classes);
        self
    }
}

pub fn print_records(records: &[Record], format: OutputFormat) {
    for r in records {
        match format {
            OutputFormat::Records => {
                println!("{}", serde_json::to_string(r).expect("records serialize"));
            }
            OutputFormat::Text => {
                let dir = r
                    .direction
                    .as_deref()
                    .map(|d| format!(" {d}"))
                    .unwrap_or_default();
                let status = match r.status {
                    Status::Holds => "holds",
                    Status::Fails => "fails",
                    Status::Inconclusive => "inconclusive",
                };
                let mut line = format!("{} :: {}{}: {}", r.term, r.check, dir, status);
                if let Some(w) = &r.witness {
                    line.push_str(&format!(" [{w}]"));
                }
                if let Some(c) = &r.counterexample {
                    line.push_str(&format!(" [{c}]"));
                }
                if let Some(classes) = &r.classes {
                    line.push_str(&format!(" classes={}", classes.join(",")));
                }
                println!("{line}");
            }
        }
    }
}

/// 0 when everything holds, 1 when anything fails, 2 when the only
/// shortfalls are inconclusive verdicts.
pub fn exit_code(records: &[Record]) -> i32 {
    if records.iter().any(|r| r.status == Status::Fails) {
        1
    } else if records.iter().any(|r| r.status == Status::Inconclusive) {
        2
    } else {
        0
    }
}
