//! Report files and kind x severity comparison tables.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use gaitcorrupt_core::metrics::{RetrievalScores, RobustnessReport};
use gaitcorrupt_core::{CorruptionFamily, CorruptionKind, Severity};

use crate::dataset_io::{read_json, write_json};
use crate::error::{IoError, Result};

pub fn write_report_json(path: &Path, report: &RobustnessReport) -> Result<()> {
    write_json(path, report)
}

pub fn read_report(path: &Path) -> Result<RobustnessReport> {
    read_json(path)
}

fn ks(report: &RobustnessReport) -> Vec<usize> {
    report.clean.ranks.iter().map(|r| r.k).collect()
}

fn score_fields(s: &RetrievalScores, ks: &[usize]) -> Vec<String> {
    ks.iter()
        .map(|&k| s.rank(k).map_or(String::new(), |v| format!("{v:?}")))
        .chain([format!("{:?}", s.map)])
        .collect()
}

/// One row per cell plus a leading `clean` row; deltas are blank there.
pub fn write_report_csv(path: &Path, report: &RobustnessReport) -> Result<()> {
    let csv_err = |source| IoError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let ks = ks(report);
    let mut header: Vec<String> = ["kind", "family", "severity"].iter().map(|s| s.to_string()).collect();
    header.extend(ks.iter().map(|k| format!("rank{k}")));
    header.extend(["map", "delta_a", "delta_r"].iter().map(|s| s.to_string()));
    w.write_record(&header).map_err(csv_err)?;
    let mut clean = vec!["clean".to_string(), String::new(), String::new()];
    clean.extend(score_fields(&report.clean, &ks));
    clean.extend([String::new(), String::new()]);
    w.write_record(&clean).map_err(csv_err)?;
    for row in &report.rows {
        let mut rec = vec![row.kind.to_string(), row.family.to_string(), row.severity.to_string()];
        rec.extend(score_fields(&row.scores, &ks));
        rec.extend([format!("{:?}", row.delta_a), format!("{:?}", row.delta_r)]);
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(IoError::io(path))
}

/// Which number fills the table cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum TableMetric {
    #[default]
    Rank1,
    Map,
    DeltaA,
    DeltaR,
}

impl TableMetric {
    fn clean(self, r: &RobustnessReport) -> Option<f64> {
        match self {
            TableMetric::Rank1 => Some(r.clean.rank1()),
            TableMetric::Map => Some(r.clean.map),
            TableMetric::DeltaA | TableMetric::DeltaR => None,
        }
    }

    fn cell(self, r: &RobustnessReport, kind: CorruptionKind, sev: Severity) -> Option<f64> {
        let row = r.rows.iter().find(|x| x.kind == kind && x.severity == sev)?;
        Some(match self {
            TableMetric::Rank1 => row.scores.rank1(),
            TableMetric::Map => row.scores.map,
            TableMetric::DeltaA => row.delta_a,
            TableMetric::DeltaR => row.delta_r,
        })
    }

    fn format(self, v: Option<f64>) -> String {
        match (self, v) {
            (_, None) => "-".into(),
            (TableMetric::Rank1 | TableMetric::Map, Some(v)) => format!("{v:.1}"),
            (_, Some(v)) => format!("{v:.3}"),
        }
    }
}

/// Reports that share protocol, distance and gallery mode.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub labels: Vec<String>,
    pub reports: Vec<RobustnessReport>,
}

impl Comparison {
    pub fn new(inputs: Vec<(String, RobustnessReport)>) -> Result<Self> {
        let Some((_, first)) = inputs.first() else {
            return Err(IoError::Usage("report needs at least one report JSON".into()));
        };
        let m0 = &first.metadata;
        for (label, r) in &inputs[1..] {
            let m = &r.metadata;
            let mut diffs = Vec::new();
            if m.protocol != m0.protocol {
                diffs.push(format!("protocol `{}` vs `{}`", m.protocol, m0.protocol));
            }
            if m.distance != m0.distance {
                diffs.push(format!("distance {:?} vs {:?}", m.distance, m0.distance));
            }
            if m.gallery_mode != m0.gallery_mode {
                diffs.push(format!("gallery mode {:?} vs {:?}", m.gallery_mode, m0.gallery_mode));
            }
            if !diffs.is_empty() {
                return Err(IoError::RefusesToMerge(format!("{label}: {}", diffs.join("; "))));
            }
        }
        let mut labels: Vec<String> = Vec::new();
        for (label, _) in &inputs {
            let mut l = label.clone();
            let mut n = 2;
            while labels.contains(&l) {
                l = format!("{label} ({n})");
                n += 1;
            }
            labels.push(l);
        }
        Ok(Self { labels, reports: inputs.into_iter().map(|x| x.1).collect() })
    }

    fn kinds(&self) -> Vec<CorruptionKind> {
        let set: BTreeSet<(usize, CorruptionKind)> =
            self.reports.iter().flat_map(|r| r.rows.iter().map(|x| (x.kind.ordinal(), x.kind))).collect();
        set.into_iter().map(|x| x.1).collect()
    }

    fn header(&self, metric: TableMetric) -> Vec<String> {
        let single = self.labels.len() == 1;
        let mut h = vec!["Corruption".to_string()];
        for l in &self.labels {
            let prefix = if single { String::new() } else { format!("{l} ") };
            if metric.clean(&self.reports[0]).is_some() {
                h.push(format!("{prefix}Clean"));
            }
            h.extend(Severity::ALL.iter().map(|s| format!("{prefix}Sev {s}")));
        }
        h
    }

    /// Kind rows x (Clean, Sev 1..Sev 5) columns per report.
    pub fn kind_table(&self, metric: TableMetric) -> Vec<Vec<String>> {
        let mut rows = vec![self.header(metric)];
        for kind in self.kinds() {
            let mut row = vec![kind.to_string()];
            for r in &self.reports {
                if let Some(c) = metric.clean(r) {
                    row.push(metric.format(Some(c)));
                }
                row.extend(Severity::ALL.iter().map(|&s| metric.format(metric.cell(r, kind, s))));
            }
            rows.push(row);
        }
        rows
    }

    /// Family rows with mean delta_a / delta_r per report.
    pub fn family_table(&self) -> Vec<Vec<String>> {
        let single = self.labels.len() == 1;
        let mut h = vec!["Family".to_string()];
        for l in &self.labels {
            let prefix = if single { String::new() } else { format!("{l} ") };
            h.push(format!("{prefix}delta_a"));
            h.push(format!("{prefix}delta_r"));
        }
        let mut rows = vec![h];
        for fam in CorruptionFamily::ALL {
            if !self.reports.iter().any(|r| r.families.iter().any(|f| f.family == fam)) {
                continue;
            }
            let mut row = vec![fam.to_string()];
            for r in &self.reports {
                let agg = r.families.iter().find(|f| f.family == fam);
                row.push(agg.map_or("-".into(), |a| format!("{:.3}", a.delta_a)));
                row.push(agg.map_or("-".into(), |a| format!("{:.3}", a.delta_r)));
            }
            rows.push(row);
        }
        rows
    }
}

pub fn markdown(rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let _ = writeln!(out, "| {} |", row.join(" | "));
        if i == 0 {
            let _ = writeln!(out, "|{}", row.iter().map(|_| " --- |").collect::<String>());
        }
    }
    out
}

pub fn csv_text(rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(row).map_err(|source| IoError::Csv { path: "<memory>".into(), source })?;
    }
    let bytes = w.into_inner().map_err(|e| IoError::Usage(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
