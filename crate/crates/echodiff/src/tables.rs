//! Metric tables as CSV, JSON and plain text.

use std::collections::BTreeSet;
use std::path::Path;

use echodiff_core::metrics::{MethodRank, MethodScores, MetricRow, EXTERNAL_METRIC_SLOTS};

use crate::dataset::write_json;
use crate::error::{Error, Result};
use crate::runs::EvalReport;

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        None => String::new(),
        Some(v) if v.is_nan() => "nan".into(),
        Some(v) if v == f64::INFINITY => "inf".into(),
        Some(v) if v == f64::NEG_INFINITY => "-inf".into(),
        Some(v) => format!("{v}"),
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|source| Error::Csv { path: path.into(), source })
}

/// External metric columns: the reserved slots plus any other names present.
fn external_columns(rows: &[MetricRow]) -> Vec<String> {
    let mut extra: BTreeSet<&str> = rows.iter().flat_map(|r| r.external.keys().map(String::as_str)).collect();
    let mut cols: Vec<String> = EXTERNAL_METRIC_SLOTS.iter().map(|s| s.to_string()).collect();
    for s in EXTERNAL_METRIC_SLOTS {
        extra.remove(s);
    }
    cols.extend(extra.into_iter().map(String::from));
    cols
}

/// Per-scene rows. Missing values are empty cells; infinities are `inf` / `-inf`.
pub fn write_rows_csv(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let ext = external_columns(rows);
    let mut w = csv_writer(path)?;
    let err = |source| Error::Csv { path: path.into(), source };
    let mut header: Vec<String> = ["scene_id", "method", "condition", "estoi", "snr_db", "erle_db", "residual_echo_db"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(ext.iter().cloned());
    w.write_record(&header).map_err(err)?;
    for r in rows {
        let mut rec = vec![r.scene_id.clone(), r.method.clone(), r.condition.label().to_string()];
        rec.extend(r.values().iter().map(|(_, v)| fmt_opt(*v)));
        rec.extend(ext.iter().map(|c| fmt_opt(r.external.get(c).copied())));
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn summary_columns(summary: &[MethodScores]) -> Vec<String> {
    summary
        .iter()
        .flat_map(|m| m.scores.keys().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// One line per method: condition-prefixed metric means and the average rank.
pub fn write_summary_csv(path: &Path, summary: &[MethodScores], ranks: Option<&[MethodRank]>) -> Result<()> {
    let cols = summary_columns(summary);
    let mut w = csv_writer(path)?;
    let err = |source| Error::Csv { path: path.into(), source };
    let mut header = vec!["method".to_string()];
    header.extend(cols.iter().cloned());
    header.push("avg_rank".into());
    w.write_record(&header).map_err(err)?;
    for m in summary {
        let mut rec = vec![m.method.clone()];
        rec.extend(cols.iter().map(|c| fmt_opt(m.scores.get(c).copied())));
        let rank = ranks.and_then(|rs| rs.iter().find(|r| r.method == m.method)).map(|r| r.average);
        rec.push(fmt_opt(rank));
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `rows.csv`, `summary.csv` and `eval.json` into `dir`.
pub fn write_report(dir: &Path, report: &EvalReport) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_rows_csv(&dir.join("rows.csv"), &report.rows)?;
    write_summary_csv(&dir.join("summary.csv"), &report.summary, report.ranks.as_deref())?;
    write_json(&dir.join("eval.json"), report)
}

/// Fixed-width summary for the terminal.
pub fn format_summary(summary: &[MethodScores], ranks: Option<&[MethodRank]>) -> String {
    let cols = summary_columns(summary);
    let name_w = summary.iter().map(|m| m.method.len()).max().unwrap_or(6).max(6);
    let mut out = format!("{:<name_w$}", "method");
    for c in &cols {
        out.push_str(&format!("  {c:>w$}", w = c.len().max(8)));
    }
    if ranks.is_some() {
        out.push_str("  avg_rank");
    }
    out.push('\n');
    for m in summary {
        out.push_str(&format!("{:<name_w$}", m.method));
        for c in &cols {
            let v = m.scores.get(c).map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
            out.push_str(&format!("  {v:>w$}", w = c.len().max(8)));
        }
        if let Some(r) = ranks.and_then(|rs| rs.iter().find(|r| r.method == m.method)) {
            out.push_str(&format!("  {:>8.2}", r.average));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use echodiff_core::metrics::Condition;

    fn row(method: &str, erle: Option<f64>) -> MetricRow {
        MetricRow {
            scene_id: "s0".into(),
            method: method.into(),
            condition: Condition::Stfe,
            estoi: None,
            snr_db: None,
            erle_db: erle,
            residual_echo_db: Some(f64::NEG_INFINITY),
            external: [("pesq".to_string(), 2.5), ("custom".to_string(), 1.0)].into_iter().collect(),
        }
    }

    #[test]
    fn rows_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rows.csv");
        write_rows_csv(&p, &[row("a", Some(3.5)), row("b", None)]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("scene_id,method,condition,estoi,snr_db,erle_db,residual_echo_db,pesq,lps"));
        assert!(lines[0].ends_with("dnsmos_ovrl,custom"));
        assert_eq!(lines[1], "s0,a,stfe,,,3.5,-inf,2.5,,,,,,,1");
        assert_eq!(lines[2], "s0,b,stfe,,,,-inf,2.5,,,,,,,1");
    }

    #[test]
    fn summary_text_has_every_method() {
        let s = vec![
            MethodScores { method: "alpha".into(), scores: [("dt_estoi".to_string(), 0.5)].into_iter().collect() },
            MethodScores { method: "b".into(), scores: Default::default() },
        ];
        let t = format_summary(&s, None);
        assert_eq!(t.lines().count(), 3);
        assert!(t.contains("0.500") && t.lines().nth(2).unwrap().contains('-'));
    }
}
