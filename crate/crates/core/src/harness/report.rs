use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Result, SnpError};

/// `1.96` standard errors.
pub const Z95: f64 = 1.96;

/// Mean and normal 95% half-width with Bessel-corrected standard deviation.
pub fn confidence_interval(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(SnpError::InvalidArgument(format!(
            "confidence interval needs at least 2 values, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, Z95 * var.sqrt() / n.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub kl: f64,
    pub max_skew: f64,
    pub wg_roc_auc: Option<f64>,
    /// Held-out accuracy of a fresh attribute probe on the debiased eval split.
    pub attribute_probe_accuracy: f64,
    pub task_probe_accuracy: Option<f64>,
    pub selected: Vec<usize>,
    pub projector_rank: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub kl: Option<f64>,
    pub max_skew: Option<f64>,
    pub wg_roc_auc: Option<f64>,
    pub attribute_probe_accuracy: Option<f64>,
    pub task_probe_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub method: String,
    pub selection: String,
    pub removal: String,
    pub interpolation: bool,
    pub k: usize,
    /// False for combinations that have no meaning; all metrics are then absent.
    pub applicable: bool,
    pub config: ExperimentConfig,
    pub folds: Vec<FoldMetrics>,
    pub mean: MetricSummary,
    pub ci95: Option<MetricSummary>,
}

type Getter = fn(&FoldMetrics) -> Option<f64>;

const GETTERS: [Getter; 5] = [
    |f| Some(f.kl),
    |f| Some(f.max_skew),
    |f| f.wg_roc_auc,
    |f| Some(f.attribute_probe_accuracy),
    |f| f.task_probe_accuracy,
];

fn summary_from(values: [Option<f64>; 5]) -> MetricSummary {
    let [kl, max_skew, wg_roc_auc, attribute_probe_accuracy, task_probe_accuracy] = values;
    MetricSummary {
        kl,
        max_skew,
        wg_roc_auc,
        attribute_probe_accuracy,
        task_probe_accuracy,
    }
}

fn column(folds: &[FoldMetrics], get: Getter) -> Option<Vec<f64>> {
    folds.iter().map(get).collect()
}

impl MetricReport {
    pub fn new(config: &ExperimentConfig, folds: Vec<FoldMetrics>) -> Self {
        let applicable = config.is_applicable();
        let mean = summary_from(GETTERS.map(|g| {
            column(&folds, g)
                .filter(|v| !v.is_empty())
                .map(|v| v.iter().sum::<f64>() / v.len() as f64)
        }));
        let ci95 = (folds.len() >= 2).then(|| {
            summary_from(GETTERS.map(|g| {
                column(&folds, g).and_then(|v| confidence_interval(&v).ok().map(|(_, h)| h))
            }))
        });
        Self {
            method: method_label(config),
            selection: config.selection.to_string(),
            removal: config.removal.to_string(),
            interpolation: config.interpolation,
            k: config.k,
            applicable,
            config: config.clone(),
            folds,
            mean,
            ci95,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn method_label(cfg: &ExperimentConfig) -> String {
    let mut s = format!("{}/{}", cfg.selection, cfg.removal);
    if cfg.interpolation {
        s.push_str("+interp");
    }
    s
}

const COLUMNS: [&str; 5] = ["KL", "MaxSkew", "wgROC-AUC", "attr acc", "task acc"];

fn cell(mean: Option<f64>, ci: Option<f64>, applicable: bool) -> String {
    match (applicable, mean, ci) {
        (false, _, _) => "N/A".to_string(),
        (true, None, _) => "-".to_string(),
        (true, Some(m), Some(h)) => format!("{m:.4} ± {h:.4}"),
        (true, Some(m), None) => format!("{m:.4}"),
    }
}

fn row_cells(r: &MetricReport) -> Vec<String> {
    let means = [
        r.mean.kl,
        r.mean.max_skew,
        r.mean.wg_roc_auc,
        r.mean.attribute_probe_accuracy,
        r.mean.task_probe_accuracy,
    ];
    let cis = match &r.ci95 {
        Some(c) => [c.kl, c.max_skew, c.wg_roc_auc, c.attribute_probe_accuracy, c.task_probe_accuracy],
        None => [None; 5],
    };
    let mut cells = vec![
        r.selection.clone(),
        r.removal.clone(),
        if r.interpolation { "yes" } else { "no" }.to_string(),
        r.k.to_string(),
    ];
    cells.extend(means.iter().zip(cis).map(|(&m, c)| cell(m, c, r.applicable)));
    cells
}

/// One table row per report, as a Markdown table.
pub fn render_markdown(reports: &[MetricReport]) -> String {
    let mut header = vec!["selection", "removal", "interp", "k"];
    header.extend(COLUMNS);
    let mut out = format!("| {} |\n", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    for r in reports {
        let _ = writeln!(out, "| {} |", row_cells(r).join(" | "));
    }
    out
}

/// Aligned plain-text table.
pub fn render_text(reports: &[MetricReport]) -> String {
    let mut header: Vec<String> = ["selection", "removal", "interp", "k"].map(String::from).to_vec();
    header.extend(COLUMNS.map(String::from));
    let mut rows = vec![header];
    rows.extend(reports.iter().map(row_cells));
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in &rows {
        let line: Vec<String> = r
            .iter()
            .zip(&widths)
            .map(|(s, &w)| format!("{s:<w$}"))
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ci_cases() {
        assert_eq!(confidence_interval(&[2.0, 2.0, 2.0]).unwrap(), (2.0, 0.0));
        let (m, h) = confidence_interval(&[0.0, 1.0]).unwrap();
        assert_eq!(m, 0.5);
        assert!((h - 1.96 * 0.5f64.sqrt() / 2f64.sqrt()).abs() < 1e-15);
        assert!(confidence_interval(&[1.0]).is_err());
    }
}
