//! Report rendering: canonical JSON, CSV tables, and human-readable
//! markdown with "9.56% (8.83% to 10.00%)" interval formatting.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{EvalReport, ReportError};
use crate::stats::BootstrapResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Md,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "md" | "markdown" => Ok(ReportFormat::Md),
            other => Err(format!("unknown report format `{other}` (expected json, csv or md)")),
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), ReportError> {
    std::fs::write(path, contents)
        .map_err(|e| ReportError::Io { path: path.to_path_buf(), source: e })
}

/// "9.56% (8.83% to 10.00%)"
pub fn format_pct_interval(r: &BootstrapResult) -> String {
    format!("{:.2}% ({:.2}% to {:.2}%)", r.point, r.lo, r.hi)
}

/// "0.77 (0.70 to 0.82)"
pub fn format_corr_interval(r: &BootstrapResult) -> String {
    format!("{:.2} ({:.2} to {:.2})", r.point, r.lo, r.hi)
}

fn format_p(p: f64) -> String {
    if p < 0.005 {
        "<0.01".to_string()
    } else {
        format!("{p:.2}")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn csv_line(fields: &[String]) -> String {
    fields.iter().map(|f| csv_field(f)).collect::<Vec<_>>().join(",")
}

fn render_json(report: &EvalReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

fn render_csv(report: &EvalReport, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let mut files = Vec::new();

    let mut cases = String::from("case_id,method,poa,pov\n");
    for record in &report.cases {
        for (name, poa) in &record.poa_by_method {
            let pov = record.pov_ct.map(|v| v.to_string()).unwrap_or_default();
            cases.push_str(&csv_line(&[
                record.case_id.clone(),
                name.clone(),
                poa.to_string(),
                pov,
            ]));
            cases.push('\n');
        }
    }
    let path = dir.join("cases.csv");
    write_file(&path, &cases)?;
    files.push(path);

    let mut dist = String::from("name,n,min,max,mean,std\n");
    for row in &report.distribution {
        dist.push_str(&csv_line(&[
            row.name.clone(),
            row.n.to_string(),
            row.min.to_string(),
            row.max.to_string(),
            row.mean.to_string(),
            row.std.to_string(),
        ]));
        dist.push('\n');
    }
    let path = dir.join("distribution.csv");
    write_file(&path, &dist)?;
    files.push(path);

    let mut agreement =
        String::from("method,n_cases,mae,mae_lo,mae_hi,pearson,pearson_lo,pearson_hi\n");
    for row in &report.agreement {
        let (p, plo, phi) = row
            .pearson
            .map(|r| (r.point.to_string(), r.lo.to_string(), r.hi.to_string()))
            .unwrap_or_default();
        agreement.push_str(&csv_line(&[
            row.method.clone(),
            row.n_cases.to_string(),
            row.mae.point.to_string(),
            row.mae.lo.to_string(),
            row.mae.hi.to_string(),
            p,
            plo,
            phi,
        ]));
        agreement.push('\n');
    }
    let path = dir.join("agreement.csv");
    write_file(&path, &agreement)?;
    files.push(path);

    let mut ttests = String::from("method_a,method_b,n_cases,t,p_one_tailed,df,degenerate\n");
    for row in &report.ttests {
        ttests.push_str(&csv_line(&[
            row.method_a.clone(),
            row.method_b.clone(),
            row.n_cases.to_string(),
            row.result.t.to_string(),
            row.result.p_one_tailed.to_string(),
            row.result.df.to_string(),
            row.result.degenerate.to_string(),
        ]));
        ttests.push('\n');
    }
    let path = dir.join("ttests.csv");
    write_file(&path, &ttests)?;
    files.push(path);

    Ok(files)
}

fn render_md(report: &EvalReport) -> String {
    let mut md = String::new();
    let _ = writeln!(md, "# Evaluation report\n");
    let _ = writeln!(
        md,
        "{} cases evaluated, seed {}, {} bootstrap resamples.",
        report.cases.len(),
        report.config.seed,
        report.config.n_resamples
    );
    let _ = writeln!(
        md,
        "Lung cutoff {} mm; lesion cutoff {} ({:?} mode); probability threshold {}.\n",
        report.config.lung_cutoff_mm,
        report.config.lesion_cutoff.cutoff,
        report.config.lesion_cutoff.mode,
        report.config.probability_threshold
    );

    if !report.distribution.is_empty() {
        let _ = writeln!(md, "## Severity distribution\n");
        let _ = writeln!(md, "| Name | N | Min | Max | Mean | Std |");
        let _ = writeln!(md, "|------|---|-----|-----|------|-----|");
        for row in &report.distribution {
            let _ = writeln!(
                md,
                "| {} | {} | {:.2} | {:.2} | {:.2} | {:.2} |",
                row.name, row.n, row.min, row.max, row.mean, row.std
            );
        }
        md.push('\n');
    }

    let _ = writeln!(md, "## Agreement against POv\n");
    let _ = writeln!(md, "| Method | N | 95% Bootstrap MAE | 95% Bootstrap Pearson |");
    let _ = writeln!(md, "|--------|---|-------------------|-----------------------|");
    for row in &report.agreement {
        let pearson = row
            .pearson
            .as_ref()
            .map(format_corr_interval)
            .unwrap_or_else(|| "n/a".to_string());
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} |",
            row.method,
            row.n_cases,
            format_pct_interval(&row.mae),
            pearson
        );
    }
    md.push('\n');

    if !report.ttests.is_empty() {
        let _ = writeln!(md, "## Pairwise t-tests on absolute errors\n");
        let _ = writeln!(md, "| Comparison | N | t-score | One-tailed p |");
        let _ = writeln!(md, "|------------|---|---------|--------------|");
        for row in &report.ttests {
            let degenerate = if row.result.degenerate { " (degenerate)" } else { "" };
            let _ = writeln!(
                md,
                "| {} vs. {} | {} | {:.2} | {}{} |",
                row.method_a,
                row.method_b,
                row.n_cases,
                row.result.t,
                format_p(row.result.p_one_tailed),
                degenerate
            );
        }
        md.push('\n');
    }

    if !report.skipped_cases.is_empty() {
        let _ = writeln!(md, "## Skipped cases\n");
        for s in &report.skipped_cases {
            let _ = writeln!(md, "- `{}`: {}", s.case_id, s.error);
        }
        md.push('\n');
    }

    if !report.warnings.is_empty() {
        let _ = writeln!(md, "## Warnings\n");
        for w in &report.warnings {
            let _ = writeln!(md, "- {w}");
        }
        md.push('\n');
    }

    md
}

/// Writes the report in the requested formats, returning the file paths.
pub fn render_report(
    report: &EvalReport,
    dir: &Path,
    formats: &[ReportFormat],
) -> Result<Vec<PathBuf>, ReportError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| ReportError::Io { path: dir.to_path_buf(), source: e })?;
    let mut files = Vec::new();
    for format in formats {
        match format {
            ReportFormat::Json => {
                let path = dir.join("report.json");
                write_file(&path, &render_json(report))?;
                files.push(path);
            }
            ReportFormat::Csv => files.extend(render_csv(report, dir)?),
            ReportFormat::Md => {
                let path = dir.join("report.md");
                write_file(&path, &render_md(report))?;
                files.push(path);
            }
        }
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_formatting_matches_table_style() {
        let r = BootstrapResult { point: 9.56, lo: 8.83, hi: 10.0, n_resamples: 1000, seed: 0 };
        assert_eq!(format_pct_interval(&r), "9.56% (8.83% to 10.00%)");
        let c = BootstrapResult { point: 0.77, lo: 0.7, hi: 0.82, n_resamples: 1000, seed: 0 };
        assert_eq!(format_corr_interval(&c), "0.77 (0.70 to 0.82)");
    }

    #[test]
    fn p_value_formatting() {
        assert_eq!(format_p(0.05), "0.05");
        assert_eq!(format_p(0.35), "0.35");
        assert_eq!(format_p(0.004), "<0.01");
        assert_eq!(format_p(0.0), "<0.01");
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }

    #[test]
    fn empty_report_renders_headers_only() {
        let report = EvalReport {
            config: super::super::ManifestConfig::default(),
            cases: vec![],
            distribution: vec![],
            agreement: vec![],
            ttests: vec![],
            skipped_cases: vec![],
            warnings: vec![],
        };
        let md = render_md(&report);
        assert!(md.contains("| Method | N | 95% Bootstrap MAE | 95% Bootstrap Pearson |"));

        let dir = tempfile::tempdir().unwrap();
        let files = render_csv(&report, dir.path()).unwrap();
        assert_eq!(files.len(), 4);
        let agreement = std::fs::read_to_string(dir.path().join("agreement.csv")).unwrap();
        assert_eq!(agreement.lines().count(), 1); // header only
    }

    #[test]
    fn json_roundtrip_is_stable() {
        let report = EvalReport {
            config: super::super::ManifestConfig::default(),
            cases: vec![],
            distribution: vec![],
            agreement: vec![],
            ttests: vec![],
            skipped_cases: vec![],
            warnings: vec!["w".to_string()],
        };
        let first = render_json(&report);
        let parsed: EvalReport = serde_json::from_str(&first).unwrap();
        let second = render_json(&parsed);
        assert_eq!(first, second);
    }
}
