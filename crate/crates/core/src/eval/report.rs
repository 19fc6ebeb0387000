//! Report files: full-precision JSON, two-decimal CSV tables, Sankey graphs.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::sankey::export_sankey;
use super::seg::{SampleScore, SegReport};
use super::trials::TrialReport;
use super::EvalError;
use crate::io::write_file;
use crate::sim::OutcomeTaxonomy;

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

fn csv_text(rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(r).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("utf-8 input")
}

fn json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("reports serialize");
    bytes.push(b'\n');
    bytes
}

/// One row per object with its category mean on the category's first row, then the
/// averaged rows.
pub fn seg_report_csv(report: &SegReport) -> String {
    let mut rows = vec![vec!["category", "object", "single", "group", "category_mean"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>()];
    let mut seen: Vec<&str> = Vec::new();
    for o in &report.objects {
        let first = !seen.contains(&o.category.as_str());
        if first {
            seen.push(&o.category);
        }
        let category_mean = if first {
            cell(report.category(&o.category).and_then(|c| c.mean))
        } else {
            String::new()
        };
        rows.push(vec![o.category.clone(), o.object.clone(), cell(o.single), cell(o.group), category_mean]);
    }
    let averaged = |label: &str, combined: Option<f64>| {
        vec![
            label.to_string(),
            String::new(),
            cell(report.overall_single),
            cell(report.overall_group),
            cell(combined),
        ]
    };
    rows.push(averaged("Averaged", report.combined_mean_of_two));
    rows.push(averaged("Averaged (sample weighted)", report.combined_sample_weighted));
    rows.push(averaged("Averaged (category mean)", report.combined_category_mean));
    csv_text(&rows)
}

/// Outcome rows then the derived rates, one column per scenario.
pub fn trial_report_csv(report: &TrialReport) -> String {
    let mut header = vec!["outcome".to_string()];
    header.extend(report.scenarios.iter().map(|s| s.scenario.token().to_string()));
    let mut rows = vec![header];
    for outcome in OutcomeTaxonomy::ALL {
        let mut row = vec![outcome.token().to_string()];
        row.extend(report.scenarios.iter().map(|s| cell(s.percent(outcome))));
        rows.push(row);
    }
    let mut part = vec!["CorrectPart".to_string()];
    part.extend(report.scenarios.iter().map(|s| cell(s.correct_part_rate)));
    let mut object = vec!["CorrectObject".to_string()];
    object.extend(report.scenarios.iter().map(|s| cell(s.correct_object_rate)));
    let mut trials = vec!["Trials".to_string()];
    trials.extend(report.scenarios.iter().map(|s| s.total.to_string()));
    rows.extend([part, object, trials]);
    csv_text(&rows)
}

#[derive(Serialize)]
struct SegDocument<'a> {
    report: &'a SegReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<&'a [SampleScore]>,
}

/// Writes `seg_report.json` and `seg_report.csv` into `dir`; returns the paths written.
pub fn write_seg_report(dir: &Path, report: &SegReport, samples: Option<&[SampleScore]>) -> Result<Vec<PathBuf>, EvalError> {
    let paths = vec![dir.join("seg_report.json"), dir.join("seg_report.csv")];
    write_file(&paths[0], &json(&SegDocument { report, samples }))?;
    write_file(&paths[1], seg_report_csv(report).as_bytes())?;
    Ok(paths)
}

/// Writes `trial_report.json`, `trial_report.csv` and `sankey_<scenario>.json` for each
/// scenario with trials; returns the paths written.
pub fn write_trial_report(dir: &Path, report: &TrialReport) -> Result<Vec<PathBuf>, EvalError> {
    let mut paths = vec![dir.join("trial_report.json"), dir.join("trial_report.csv")];
    write_file(&paths[0], &json(report))?;
    write_file(&paths[1], trial_report_csv(report).as_bytes())?;
    for s in report.scenarios.iter().filter(|s| s.total > 0) {
        let path = dir.join(format!("sankey_{}.json", s.scenario));
        write_file(&path, &json(&export_sankey(s)))?;
        paths.push(path);
    }
    Ok(paths)
}
