//! Run reports: one line per check per stage, then the audit and a summary.

use crate::script::Kind;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

// Fields are declared in key order so the JSON is sorted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Line {
    pub check: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub detail: Vec<String>,
    pub stage: u64,
    pub status: Status,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub lines: Vec<Line>,
    pub audit: Value,
    /// Observations that are not checks, such as bounds known to fail.
    pub notes: BTreeMap<String, Value>,
}

impl RunReport {
    /// Adds one line per name in `checks`, failing those present in `failures`.
    pub fn stage(&mut self, stage: u64, checks: &[&str], failures: &BTreeMap<String, Vec<String>>) {
        let mut names: BTreeSet<&str> = checks.iter().copied().collect();
        names.extend(failures.keys().map(String::as_str));
        for c in names {
            self.push(stage, c, failures.get(c).cloned().unwrap_or_default());
        }
    }

    pub fn push(&mut self, stage: u64, check: &str, detail: Vec<String>) {
        let status = if detail.is_empty() { Status::Pass } else { Status::Fail };
        self.lines.push(Line { check: check.to_string(), detail, stage, status });
    }

    pub fn skip(&mut self, stage: u64, check: &str, why: String) {
        self.lines.push(Line { check: check.to_string(), detail: vec![why], stage, status: Status::Skip });
    }

    pub fn breaches(&self) -> BTreeSet<String> {
        self.lines.iter().filter(|l| l.status == Status::Fail).map(|l| l.check.clone()).collect()
    }

    pub fn clean(&self) -> bool {
        self.lines.iter().all(|l| l.status != Status::Fail)
    }

    pub fn summary(&self, kind: Kind) -> Value {
        serde_json::json!({
            "breaches": self.breaches(),
            "clean": self.clean(),
            "kind": kind.name(),
            "notes": self.notes,
        })
    }

    /// JSON lines: the check lines, then `{"audit": ..}` and `{"summary": ..}`.
    pub fn to_jsonl(&self, kind: Kind) -> String {
        let mut out = String::new();
        for l in &self.lines {
            out.push_str(&serde_json::to_string(l).expect("lines serialize"));
            out.push('\n');
        }
        out.push_str(&serde_json::json!({ "audit": self.audit }).to_string());
        out.push('\n');
        out.push_str(&serde_json::json!({ "summary": self.summary(kind) }).to_string());
        out.push('\n');
        out
    }
}
