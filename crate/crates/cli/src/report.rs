//! Machine-readable run reports.
//!
//! Every invocation that gets past argument parsing writes one JSON report,
//! success or failure. Reports contain no timestamps or absolute-path
//! expansion, so identical inputs produce byte-identical reports.

use std::collections::BTreeMap;

use serde::Serialize;
use weave_core::property::{PropertyError, PropertyResult};
use weave_core::refine::{RefinementTrace, TraceEntry};
use weave_core::PropertyExpr;

#[derive(Debug, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub command: String,
    pub inputs: Vec<InputRecord>,
    pub stages: Vec<StageRecord>,
    pub outcome: Outcome,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Report {
            tool: "weave",
            command: command.to_string(),
            inputs: vec![],
            stages: vec![],
            outcome: Outcome::Ok,
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serialization");
        text.push('\n');
        text
    }
}

#[derive(Debug, Serialize)]
pub struct InputRecord {
    pub role: String,
    pub path: String,
    pub fingerprint: String,
}

#[derive(Debug, Serialize)]
pub struct StageRecord {
    pub stage: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub properties: Option<Vec<PropertyRecord>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceRecord>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub artifacts: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assignments: Option<Vec<AssignmentRecord>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unplaced: Option<Vec<String>>,
}

impl StageRecord {
    pub fn new(stage: impl Into<String>, ok: bool) -> Self {
        StageRecord {
            stage: stage.into(),
            ok,
            detail: None,
            properties: None,
            trace: None,
            artifacts: None,
            assignments: None,
            unplaced: None,
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    pub fn with_trace(mut self, trace: &RefinementTrace) -> Self {
        self.trace = Some(trace.iter().map(TraceRecord::from_entry).collect());
        self
    }
}

#[derive(Debug, Serialize)]
pub struct PropertyRecord {
    pub property: String,
    pub holds: bool,
    pub detail: String,
    /// Violating entities (or satisfying ones, where informative).
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub witnesses: Vec<String>,
}

impl PropertyRecord {
    pub fn from_result(
        property: &PropertyExpr,
        result: &Result<PropertyResult, PropertyError>,
    ) -> Self {
        match result {
            Ok(r) => PropertyRecord {
                property: property.to_string(),
                holds: r.holds,
                detail: r.detail.clone(),
                witnesses: r.witnesses.iter().map(|w| w.to_string()).collect(),
            },
            Err(e) => PropertyRecord {
                property: property.to_string(),
                holds: false,
                detail: e.to_string(),
                witnesses: Vec::new(),
            },
        }
    }
}

#[derive(Debug, Serialize)]
pub struct TraceRecord {
    pub index: usize,
    pub action: String,
    pub args: BTreeMap<String, String>,
    pub pre: String,
    pub post: String,
    pub preserved: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
}

impl TraceRecord {
    pub fn from_entry(entry: &TraceEntry) -> Self {
        TraceRecord {
            index: entry.index,
            action: entry.action.clone(),
            args: entry.args.iter().cloned().collect(),
            pre: entry.pre.summary(),
            post: entry.post.summary(),
            preserved: entry.preserved.summary(),
            fingerprint: entry.fingerprint.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct AssignmentRecord {
    pub component: String,
    pub node: String,
}

#[derive(Debug, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Ok,
    Failed {
        stage: String,
        error: String,
        exit_code: i32,
    },
}

/// Summary report for `weave matrix`.
#[derive(Debug, Serialize)]
pub struct MatrixReport {
    pub tool: &'static str,
    pub command: &'static str,
    pub inputs: Vec<InputRecord>,
    pub combinations: Vec<MatrixRow>,
    pub outcome: Outcome,
}

impl MatrixReport {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serialization");
        text.push('\n');
        text
    }
}

#[derive(Debug, Serialize)]
pub struct MatrixRow {
    pub combination: String,
    pub gecm_set: String,
    pub getm: String,
    pub dir: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}
