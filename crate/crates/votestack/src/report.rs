//! Plain-text tables for the report files and terminal output.

use std::fmt::Write as _;

use votestack_core::MetricsReport;

use crate::commands::KfoldSummary;

/// Left-aligned first column, right-aligned numbers.
fn render(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut out = String::new();
        for (i, (cell, &w)) in cells.iter().zip(&widths).enumerate() {
            if i == 0 {
                let _ = write!(out, "{cell:<w$}");
            } else {
                let _ = write!(out, "  {cell:>w$}");
            }
        }
        out.trim_end().to_string() + "\n"
    };
    let mut out = line(&header.iter().map(|h| h.to_string()).collect::<Vec<_>>());
    out.push_str(&line(
        &widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>(),
    ));
    for row in rows {
        out.push_str(&line(row));
    }
    out
}

fn num(x: f64) -> String {
    format!("{x:.4}")
}

/// One row per named report.
pub fn metrics_table(rows: &[(String, &MetricsReport)]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(name, r)| {
            vec![
                name.clone(),
                num(r.accuracy),
                num(r.macro_f1),
                num(r.micro_f1),
                num(r.weighted_f1),
            ]
        })
        .collect();
    render(
        &["model", "accuracy", "macro_f1", "micro_f1", "weighted_f1"],
        &body,
    )
}

pub fn class_table(report: &MetricsReport) -> String {
    let body: Vec<Vec<String>> = report
        .per_class
        .iter()
        .map(|c| {
            vec![
                c.label.clone(),
                num(c.precision),
                num(c.recall),
                num(c.f1),
                c.support.to_string(),
            ]
        })
        .collect();
    render(&["label", "precision", "recall", "f1", "support"], &body)
}

pub fn kfold_table(summary: &KfoldSummary) -> String {
    let mut out = format!(
        "# config {}\n\n{}-fold cross-validation ({})\n",
        summary.config_hash,
        summary.k,
        if summary.stratify {
            "stratified"
        } else {
            "unstratified"
        }
    );
    for m in &summary.models {
        let r = &m.result;
        let _ = write!(out, "\n{} ({}), {}\n\n", m.id, m.kind, r.metric.name());
        let mut body: Vec<Vec<String>> = r
            .fold_scores
            .iter()
            .zip(&r.fold_reports)
            .enumerate()
            .map(|(i, (s, rep))| {
                vec![
                    (i + 1).to_string(),
                    num(*s),
                    num(rep.accuracy),
                    rep.total.to_string(),
                ]
            })
            .collect();
        body.push(vec![
            "mean".into(),
            format!("{} ± {}", num(r.mean), num(r.std_dev)),
            String::new(),
            String::new(),
        ]);
        out.push_str(&render(&["fold", "score", "accuracy", "examples"], &body));
    }
    out
}
