use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{EvalConfig, GroupRow, MetricResult};
use crate::taxonomy::{Density, GroupKey};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed report: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub phi: f64,
    pub conditional_aggregation: bool,
    pub min_confidence: f64,
    pub code_version: String,
    pub group_by: Vec<GroupKey>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ReportConfig,
    pub overall: GroupRow,
    pub groups: Vec<GroupRow>,
    pub examples: Vec<MetricResult>,
    /// Wall-clock stamp; absent unless requested so reports stay byte-stable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
}

impl Report {
    pub fn new(
        cfg: &EvalConfig,
        group_by: &[GroupKey],
        overall: GroupRow,
        groups: Vec<GroupRow>,
        examples: Vec<MetricResult>,
    ) -> Self {
        let mut keys = group_by.to_vec();
        keys.sort();
        keys.dedup();
        Self {
            config: ReportConfig {
                phi: cfg.phi,
                conditional_aggregation: cfg.conditional_aggregation,
                min_confidence: cfg.min_confidence,
                code_version: CODE_VERSION.to_string(),
                group_by: keys,
            },
            overall,
            groups,
            examples,
            generated_at: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Text,
}

impl ReportFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Text => "txt",
        }
    }
}

/// Writes `out` with each format's extension; returns the written paths.
pub fn emit_report(report: &Report, out: &Path, formats: &[ReportFormat]) -> Result<Vec<PathBuf>, ReportError> {
    let mut written = Vec::new();
    for format in formats {
        let path = out.with_extension(format.extension());
        let body = match format {
            ReportFormat::Json => report.to_json(),
            ReportFormat::Text => render_table(report),
        };
        let io = |source| ReportError::Io {
            path: path.clone(),
            source,
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        std::fs::write(&path, body).map_err(io)?;
        written.push(path);
    }
    Ok(written)
}

pub fn load_report(path: &Path) -> Result<Report, ReportError> {
    let text = std::fs::read_to_string(path).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| ReportError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn pct1(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{:.1}%", x * 100.0))
}

fn pct2(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{:.2}%", x * 100.0))
}

fn fixed2(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{x:.2}"))
}

fn group_label(row: &GroupRow) -> String {
    if row.group.is_empty() {
        return "all".into();
    }
    row.group
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Plain-text rendering. A density-only grouping adds a wide table with
/// Text-Sparse, Text-Dense and Avg. (Total) column blocks ahead of the
/// per-group rows.
///
/// DTR prints as a percentage with one decimal, B-Dist with two decimals and
/// SR as a percentage with two decimals; `-` marks an undefined statistic.
pub fn render_table(report: &Report) -> String {
    let mut out = String::new();
    let mode = if report.config.conditional_aggregation {
        "conditional"
    } else {
        "unconditional"
    };
    let _ = writeln!(
        out,
        "phi={} aggregation={} min_confidence={} version={}",
        report.config.phi, mode, report.config.min_confidence, report.config.code_version
    );
    out.push('\n');

    if report.config.group_by == [GroupKey::Density] {
        render_density(&mut out, report);
        out.push('\n');
    }

    let rows: Vec<&GroupRow> = std::iter::once(&report.overall).chain(&report.groups).collect();
    let labels: Vec<String> = rows.iter().map(|r| group_label(r)).collect();
    let w = labels.iter().map(|l| l.chars().count()).max().unwrap_or(5).max(5);
    let _ = writeln!(
        out,
        "{:<w$}  {:>6}  {:>9}  {:>6}  {:>7}  {:>7}",
        "Group", "n", "triggered", "DTR↑", "B-Dist↓", "SR↑"
    );
    for (row, label) in rows.iter().zip(&labels) {
        let _ = writeln!(
            out,
            "{:<w$}  {:>6}  {:>9}  {:>6}  {:>7}  {:>7}",
            label,
            row.n,
            row.triggered,
            pct1(row.dtr),
            fixed2(row.mean_b_dist),
            pct2(row.sr_rate)
        );
    }
    out
}

fn render_density(out: &mut String, report: &Report) {
    let find = |d: Density| {
        report
            .groups
            .iter()
            .find(|g| g.group.get(&GroupKey::Density).map(String::as_str) == Some(d.as_str()))
    };
    let blocks = [
        (Density::Sparse.label(), find(Density::Sparse)),
        (Density::Dense.label(), find(Density::Dense)),
        ("Avg. (Total)", Some(&report.overall)),
    ];
    let _ = write!(out, "{:<6}  {:>6}", "", "");
    for (title, _) in &blocks {
        let _ = write!(out, " | {title:^16}");
    }
    out.push('\n');
    let _ = write!(out, "{:<6}  {:>6}", "n", "DTR↑");
    for _ in &blocks {
        let _ = write!(out, " | {:>7}  {:>7}", "B-Dist↓", "SR↑");
    }
    out.push('\n');
    let _ = write!(out, "{:<6}  {:>6}", report.overall.n, pct1(report.overall.dtr));
    for (_, row) in &blocks {
        let (b, s) = row.map_or(("-".into(), "-".into()), |r| (fixed2(r.mean_b_dist), pct2(r.sr_rate)));
        let _ = write!(out, " | {b:>7}  {s:>7}");
    }
    out.push('\n');
}
