use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;
use thiserror::Error;

use super::{CaseResult, Outcome};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("no results to report")]
    EmptyInput,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SplitSummary {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CaseLine {
    pub id: String,
    pub split: String,
    pub outcome: String,
    pub models: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub overall: SplitSummary,
    pub splits: BTreeMap<String, SplitSummary>,
    pub histogram: BTreeMap<String, usize>,
    pub cases: Vec<CaseLine>,
}

fn summarize<'a>(results: impl Iterator<Item = &'a CaseResult>) -> SplitSummary {
    let mut s = SplitSummary::default();
    for r in results {
        s.total += 1;
        s.correct += usize::from(r.outcome == Outcome::Correct);
    }
    s.accuracy = if s.total == 0 {
        0.0
    } else {
        s.correct as f64 / s.total as f64
    };
    s
}

/// Accuracy per split and an outcome histogram. Contains no timings, so
/// replays of the same run produce identical reports.
pub fn report(results: &[CaseResult]) -> Result<Report, ReportError> {
    if results.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    let mut splits = BTreeMap::new();
    for r in results {
        splits
            .entry(r.split.to_string())
            .or_insert_with(Vec::new)
            .push(r);
    }
    let splits = splits
        .into_iter()
        .map(|(k, v)| (k, summarize(v.into_iter())))
        .collect();
    let mut histogram = BTreeMap::new();
    for r in results {
        *histogram.entry(r.outcome.label()).or_insert(0) += 1;
    }
    let cases = results
        .iter()
        .map(|r| CaseLine {
            id: r.id.clone(),
            split: r.split.to_string(),
            outcome: r.outcome.label(),
            models: r.models,
            detail: r.detail.clone(),
        })
        .collect();
    Ok(Report {
        overall: summarize(results.iter()),
        splits,
        histogram,
        cases,
    })
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{:<10} {:>7} {:>7} {:>9}",
            "split", "correct", "total", "accuracy"
        )
        .unwrap();
        let rows = self
            .splits
            .iter()
            .map(|(k, v)| (k.as_str(), v))
            .chain([("all", &self.overall)]);
        for (name, s) in rows {
            writeln!(
                out,
                "{:<10} {:>7} {:>7} {:>8.1}%",
                name,
                s.correct,
                s.total,
                s.accuracy * 100.0
            )
            .unwrap();
        }
        writeln!(out).unwrap();
        writeln!(out, "{:<40} {:>5}", "outcome", "count").unwrap();
        for (k, v) in &self.histogram {
            writeln!(out, "{k:<40} {v:>5}").unwrap();
        }
        out
    }
}
