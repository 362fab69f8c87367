//! Report artifacts: per-email JSONL, the summary CSV (model, class,
//! CC-SHAP mean/std, accuracy %), the per-epoch training metrics CSV, and
//! the human-readable per-email text panels.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use ccshap_core::ccshap::{CcShapReport, ClassSummary};
use ccshap_core::model::EpochMetrics;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad report line in {path}: {detail}")]
    BadLine { path: PathBuf, detail: String },
}

pub fn write_reports_jsonl(path: &Path, reports: &[CcShapReport]) -> Result<(), ReportError> {
    let mut out = Vec::new();
    for report in reports {
        serde_json::to_writer(&mut out, report).expect("report serializes");
        out.push(b'\n');
    }
    fs::write(path, out).map_err(|source| ReportError::Io { path: path.to_path_buf(), source })
}

pub fn read_reports_jsonl(path: &Path) -> Result<Vec<CcShapReport>, ReportError> {
    let file = fs::File::open(path).map_err(|source| ReportError::Io { path: path.to_path_buf(), source })?;
    let mut reports = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|source| ReportError::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let report = serde_json::from_str(&line)
            .map_err(|e| ReportError::BadLine { path: path.to_path_buf(), detail: e.to_string() })?;
        reports.push(report);
    }
    Ok(reports)
}

/// RFC 4180 summary CSV, columns model,class,ccshap_mean,ccshap_std,accuracy_pct.
pub fn summary_csv_bytes(rows: &[ClassSummary]) -> Vec<u8> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    writer
        .write_record(["model", "class", "ccshap_mean", "ccshap_std", "accuracy_pct"])
        .expect("in-memory csv");
    for row in rows {
        writer
            .write_record([
                row.model.clone(),
                row.class.to_string(),
                format!("{:.4}", row.ccshap_mean),
                format!("{:.4}", row.ccshap_std),
                format!("{:.1}", row.accuracy_pct),
            ])
            .expect("in-memory csv");
    }
    writer.into_inner().expect("in-memory csv")
}

pub fn write_summary_csv(path: &Path, rows: &[ClassSummary]) -> Result<(), ReportError> {
    fs::write(path, summary_csv_bytes(rows)).map_err(|source| ReportError::Io { path: path.to_path_buf(), source })
}

/// Per-epoch training metrics, columns epoch,train_loss,val_loss,train_acc,val_acc.
pub fn metrics_csv_bytes(rows: &[EpochMetrics]) -> Vec<u8> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    writer
        .write_record(["epoch", "train_loss", "val_loss", "train_acc", "val_acc"])
        .expect("in-memory csv");
    for row in rows {
        writer
            .write_record([
                row.epoch.to_string(),
                format!("{:.6}", row.train_loss),
                format!("{:.6}", row.val_loss),
                format!("{:.6}", row.train_acc),
                format!("{:.6}", row.val_acc),
            ])
            .expect("in-memory csv");
    }
    writer.into_inner().expect("in-memory csv")
}

pub fn write_metrics_csv(path: &Path, rows: &[EpochMetrics]) -> Result<(), ReportError> {
    fs::write(path, metrics_csv_bytes(rows)).map_err(|source| ReportError::Io { path: path.to_path_buf(), source })
}

/// One human-readable panel per email: input, prediction, explanation,
/// CC-SHAP, and the two top-token tables.
pub fn text_report(report: &CcShapReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("=== Email {} ===\n", report.email_id));
    out.push_str("Input:\n");
    for line in report.input_text.lines() {
        out.push_str("  ");
        out.push_str(line);
        out.push('\n');
    }
    out.push_str(&format!("Ground truth: {}\n", report.ground_truth_label));
    out.push_str(&format!(
        "Prediction: {} (p={:.4})\n",
        report.predicted_label, report.predicted_probability
    ));
    out.push_str(&format!("Explanation: {}\n", report.explanation_text));
    out.push_str(&format!("CC-SHAP: {:.4}\n", report.cc_shap));
    if let Some(note) = &report.degenerate_note {
        out.push_str(&format!("Note: {note}\n"));
    }
    out.push_str("Top tokens (prediction):\n");
    for (token, value) in &report.top_pred_tokens {
        out.push_str(&format!("  {token:<20} {value:+.4}\n"));
    }
    out.push_str("Top tokens (explanation):\n");
    for (token, value) in &report.top_expl_tokens {
        out.push_str(&format!("  {token:<20} {value:+.4}\n"));
    }
    out
}

pub fn write_text_reports(path: &Path, reports: &[CcShapReport]) -> Result<(), ReportError> {
    let panels: Vec<String> = reports.iter().map(text_report).collect();
    fs::write(path, panels.join("\n"))
        .map_err(|source| ReportError::Io { path: path.to_path_buf(), source })
}

/// The Table-4-style line printed on stdout after an audit.
pub fn summary_console_line(row: &ClassSummary) -> String {
    format!(
        "{:<12} {:.4} \u{b1} {:.4} | {:.1}",
        row.class.to_string(),
        row.ccshap_mean,
        row.ccshap_std,
        row.accuracy_pct
    )
}
