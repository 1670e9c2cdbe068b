use std::fs;
use std::path::Path;

use serde_json::json;

use super::config::{ExperimentConfig, ReportFormat};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassTally {
    pub class_id: usize,
    pub name: String,
    pub correct: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Confusion {
    pub actual: usize,
    pub predicted: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub dataset: String,
    pub config: ExperimentConfig,
    pub recognition_rate: f64,
    pub correct: usize,
    pub total: usize,
    pub per_class: Vec<ClassTally>,
    /// Every (actual, predicted) pair seen, including correct ones.
    pub confusion: Vec<Confusion>,
    pub train_time_s: f64,
    pub mean_query_time_s: f64,
    pub gallery_bytes: usize,
    pub model_bytes: usize,
    /// Retained LDA dimension, 0 for the direct matcher.
    pub retained_dim: usize,
    /// Files that could not be loaded.
    pub failures: Vec<String>,
}

pub const CSV_HEADER: &str = "dataset,matcher,k_train,k_coeff,n_p,tau_rel,tau_m,m,rate,train_time_s,mean_query_time_s,gallery_bytes";

/// Columns holding wall-clock measurements.
pub const TIMING_COLUMNS: [usize; 2] = [9, 10];

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl EvalReport {
    pub fn tau_m_label(&self) -> String {
        self.config
            .tau_m
            .map(|t| t.to_string())
            .unwrap_or_else(|| "auto".to_string())
    }

    pub fn csv_row(&self) -> String {
        let c = &self.config;
        format!(
            "{},{},{},{},{},{},{},{},{:.4},{:.6},{:.6},{}",
            csv_field(&self.dataset),
            c.matcher,
            c.k_train,
            c.k_coeff,
            c.n_p,
            c.tau_rel,
            self.tau_m_label(),
            self.retained_dim,
            self.recognition_rate,
            self.train_time_s,
            self.mean_query_time_s,
            self.gallery_bytes
        )
    }

    pub fn to_csv(&self) -> String {
        format!("{CSV_HEADER}\n{}\n", self.csv_row())
    }

    /// One JSON object on one line. Numbers use the same fixed precision as
    /// the CSV output.
    pub fn to_json_line(&self) -> String {
        let str_json = |s: &str| serde_json::Value::String(s.to_string()).to_string();
        let per_class = serde_json::Value::Array(
            self.per_class
                .iter()
                .map(|t| json!({"class_id": t.class_id, "name": t.name, "correct": t.correct, "total": t.total}))
                .collect(),
        );
        let confusion = serde_json::Value::Array(
            self.confusion
                .iter()
                .map(|c| json!({"actual": c.actual, "predicted": c.predicted, "count": c.count}))
                .collect(),
        );
        let config = self
            .config
            .echo()
            .into_iter()
            .map(|(k, v)| format!("{}:{}", str_json(k), str_json(&v)))
            .collect::<Vec<_>>()
            .join(",");
        let c = &self.config;
        format!(
            concat!(
                "{{\"dataset\":{},\"matcher\":{},\"k_train\":{},\"k_coeff\":{},\"n_p\":{},",
                "\"tau_rel\":{},\"tau_m\":{},\"m\":{},\"rate\":{:.4},\"correct\":{},\"total\":{},",
                "\"train_time_s\":{:.6},\"mean_query_time_s\":{:.6},\"gallery_bytes\":{},",
                "\"model_bytes\":{},\"per_class\":{},\"confusion\":{},\"failures\":{},\"config\":{{{}}}}}"
            ),
            str_json(&self.dataset),
            str_json(c.matcher.name()),
            c.k_train,
            c.k_coeff,
            c.n_p,
            serde_json::Value::from(c.tau_rel),
            str_json(&self.tau_m_label()),
            self.retained_dim,
            self.recognition_rate,
            self.correct,
            self.total,
            self.train_time_s,
            self.mean_query_time_s,
            self.gallery_bytes,
            self.model_bytes,
            per_class,
            confusion,
            serde_json::Value::from(self.failures.clone()),
            config
        )
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::JsonLines => format!("{}\n", self.to_json_line()),
        }
    }

    /// Recount of the recognition rate from the confusion pairs.
    pub fn recount_rate(&self) -> f64 {
        let total: usize = self.confusion.iter().map(|c| c.count).sum();
        let correct: usize = self
            .confusion
            .iter()
            .filter(|c| c.actual == c.predicted)
            .map(|c| c.count)
            .sum();
        if total == 0 {
            0.0
        } else {
            correct as f64 / total as f64
        }
    }
}

pub fn emit_report(report: &EvalReport, format: ReportFormat, path: &Path) -> Result<()> {
    fs::write(path, report.render(format)).map_err(|e| Error::io(path, e))
}

/// Drops the timing columns from CSV text so runs can be compared.
pub fn strip_timing_columns(csv: &str) -> String {
    csv.lines()
        .map(|line| {
            line.split(',')
                .enumerate()
                .filter(|(i, _)| !TIMING_COLUMNS.contains(i))
                .map(|(_, f)| f)
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}
