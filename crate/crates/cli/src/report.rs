//! Metric reports: JSON for machines, a markdown table for people.

use std::fmt::Write as _;

use msgpm::imgcore::{EpeReport, MaskScore};
use serde::Serialize;

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpeJson {
    pub epe_all: Option<f64>,
    pub epe_nocc: Option<f64>,
    pub epe_occ: Option<f64>,
    pub count_all: usize,
    pub count_nocc: usize,
    pub count_occ: usize,
}

impl From<&EpeReport> for EpeJson {
    fn from(r: &EpeReport) -> Self {
        Self {
            epe_all: finite(r.epe_all),
            epe_nocc: finite(r.epe_nocc),
            epe_occ: finite(r.epe_occ),
            count_all: r.count_all,
            count_nocc: r.count_nocc,
            count_occ: r.count_occ,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OcclusionJson {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub predicted: usize,
    pub actual: usize,
}

impl From<&MaskScore> for OcclusionJson {
    fn from(s: &MaskScore) -> Self {
        Self {
            precision: s.precision,
            recall: s.recall,
            f1: s.f1,
            true_positives: s.true_positives,
            predicted: s.predicted,
            actual: s.actual,
        }
    }
}

/// Contents of `report.json`. Empty categories serialize as `null`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub method: String,
    pub epe: EpeJson,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub occlusion: Option<OcclusionJson>,
}

impl RunReport {
    pub fn new(method: &str, epe: &EpeReport, occ: Option<&MaskScore>) -> Self {
        Self {
            method: method.to_string(),
            epe: epe.into(),
            occlusion: occ.map(Into::into),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn cell(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.3}")
    } else {
        "-".to_string()
    }
}

/// Markdown table with one row per method: EPE nocc., occ., all.
pub fn epe_table(rows: &[(&str, &EpeReport)]) -> String {
    let mut s = String::from("| Method | EPE nocc. | EPE occ. | EPE all |\n|---|---:|---:|---:|\n");
    for (name, r) in rows {
        let _ = writeln!(
            s,
            "| {name} | {} | {} | {} |",
            cell(r.epe_nocc),
            cell(r.epe_occ),
            cell(r.epe_all)
        );
    }
    s
}
