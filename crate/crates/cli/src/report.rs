//! Plot-ready summaries of a results directory. Output depends only on the
//! contents of `results.jsonl`, so re-running is byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use fastflow::analysis::{region_of, REL_L1_SENTINEL, THREE_REGIONS};

use crate::commands::{read_results, GenerationRecord};
use crate::error::CliError;

pub const REPORT_FILE: &str = "report.txt";
pub const SPEEDUP_FILE: &str = "speedup_table.csv";
pub const HISTOGRAM_FILE: &str = "skip_histogram.csv";
pub const REL_L1_FILE: &str = "rel_l1.csv";

/// Aggregate over all records sharing a label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSummary {
    pub label: String,
    pub method: String,
    pub mu: Option<f64>,
    pub records: usize,
    pub mean_eval_count: f64,
    pub mean_speedup: f64,
    pub mean_deviation: Option<f64>,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn group(records: &[GenerationRecord]) -> BTreeMap<&str, Vec<&GenerationRecord>> {
    let mut groups: BTreeMap<&str, Vec<&GenerationRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.label.as_str()).or_default().push(r);
    }
    groups
}

/// One summary per label, ordered by method, then trade-off, then label.
pub fn summarize(records: &[GenerationRecord]) -> Vec<LabelSummary> {
    let mut rows: Vec<LabelSummary> = group(records)
        .into_iter()
        .map(|(label, rs)| LabelSummary {
            label: label.to_string(),
            method: rs[0].method.clone(),
            mu: rs[0].mu,
            records: rs.len(),
            mean_eval_count: mean(rs.iter().map(|r| r.metrics.eval_count as f64)).unwrap_or(0.0),
            mean_speedup: mean(rs.iter().map(|r| r.metrics.speedup)).unwrap_or(0.0),
            mean_deviation: mean(rs.iter().filter_map(|r| r.metrics.final_deviation)),
        })
        .collect();
    rows.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(a.mu.unwrap_or(0.0).total_cmp(&b.mu.unwrap_or(0.0)))
            .then(a.label.cmp(&b.label))
    });
    rows
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOutcome {
    pub summaries: Vec<LabelSummary>,
    pub files: Vec<String>,
}

/// Writes `report.txt`, `speedup_table.csv`, `skip_histogram.csv` and
/// `rel_l1.csv` into `dir`.
pub fn report(dir: &Path) -> Result<ReportOutcome, CliError> {
    let records = read_results(dir)?;
    let summaries = summarize(&records);
    let groups = group(&records);

    let mut w = csv::Writer::from_path(dir.join(SPEEDUP_FILE))?;
    w.write_record(["label", "method", "mu", "records", "mean_eval_count", "speedup", "final_deviation"])?;
    for s in &summaries {
        w.write_record([
            s.label.clone(),
            s.method.clone(),
            opt(s.mu),
            s.records.to_string(),
            s.mean_eval_count.to_string(),
            s.mean_speedup.to_string(),
            opt(s.mean_deviation),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join(HISTOGRAM_FILE))?;
    w.write_record(["label", "region", "start", "end", "arm", "count"])?;
    for (label, rs) in &groups {
        let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for d in rs.iter().flat_map(|r| &r.decisions) {
            if let Some(region) = region_of(d.time, &THREE_REGIONS) {
                *counts.entry((region, d.arm)).or_default() += 1;
            }
        }
        for ((region, arm), n) in counts {
            let (a, b) = THREE_REGIONS[region];
            w.write_record([
                label.to_string(),
                region.to_string(),
                a.to_string(),
                b.to_string(),
                arm.to_string(),
                n.to_string(),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join(REL_L1_FILE))?;
    w.write_record(["label", "step", "mean_rel_l1"])?;
    for (label, rs) in &groups {
        let len = rs.iter().map(|r| r.rel_l1.len()).max().unwrap_or(0);
        for k in 0..len {
            let m =
                mean(rs.iter().filter_map(|r| r.rel_l1.get(k).copied()).filter(|v| *v != REL_L1_SENTINEL));
            w.write_record([label.to_string(), k.to_string(), opt(m)])?;
        }
    }
    w.flush()?;

    let mut text = String::new();
    writeln!(text, "{} records, {} configurations", records.len(), summaries.len()).unwrap();
    for s in &summaries {
        writeln!(text).unwrap();
        writeln!(text, "{}", s.label).unwrap();
        writeln!(text, "  records          {}", s.records).unwrap();
        writeln!(text, "  mean eval count  {:.3}", s.mean_eval_count).unwrap();
        writeln!(text, "  speedup          {:.3}x", s.mean_speedup).unwrap();
        if let Some(d) = s.mean_deviation {
            writeln!(text, "  final deviation  {d:.6e}").unwrap();
        }
        let rs = &groups[s.label.as_str()];
        let regions: Vec<String> = (0..3)
            .map(|i| {
                mean(rs.iter().filter_map(|r| r.metrics.region_mean_skip[i]))
                    .map_or("-".into(), |v| format!("{v:.2}"))
            })
            .collect();
        if rs.iter().any(|r| !r.decisions.is_empty()) {
            writeln!(text, "  mean skip by region (start/middle/end)  {}", regions.join(" / ")).unwrap();
        }
    }
    fs::write(dir.join(REPORT_FILE), text)?;

    Ok(ReportOutcome {
        summaries,
        files: [REPORT_FILE, SPEEDUP_FILE, HISTOGRAM_FILE, REL_L1_FILE].map(String::from).to_vec(),
    })
}
