//! Metric reporting: CSV rows plus a plain-text summary.

use std::fmt::Write as _;

/// One reported value: metric name, class (or `all`), threshold (or `-`).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub metric: String,
    pub class: String,
    pub threshold: Option<f64>,
    pub value: f64,
}

/// Accumulated metric rows with optional free-form notes.
#[derive(Debug, Clone, Default)]
pub struct MetricsReport {
    pub rows: Vec<MetricRow>,
    pub notes: Vec<String>,
}

impl MetricsReport {
    pub fn push(&mut self, metric: &str, class: &str, threshold: Option<f64>, value: f64) {
        self.rows.push(MetricRow {
            metric: metric.to_string(),
            class: class.to_string(),
            threshold,
            value,
        });
    }

    pub fn note(&mut self, text: &str) {
        self.notes.push(text.to_string());
    }

    /// `metric,class,threshold,value` with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,class,threshold,value\n");
        for r in &self.rows {
            let threshold = r
                .threshold
                .map_or_else(|| "-".to_string(), |t| format!("{t}"));
            let _ = writeln!(out, "{},{},{},{}", r.metric, r.class, threshold, r.value);
        }
        out
    }

    /// Aligned human-readable table with the notes appended.
    pub fn to_summary(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            let threshold = r.threshold.map_or_else(String::new, |t| format!(" @ {t}"));
            let _ = writeln!(
                out,
                "{:<18} {:<10}{:<8} {:.6}",
                r.metric, r.class, threshold, r.value
            );
        }
        for n in &self.notes {
            let _ = writeln!(out, "# {n}");
        }
        out
    }

    pub fn get(&self, metric: &str, class: &str, threshold: Option<f64>) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.metric == metric && r.class == class && r.threshold == threshold)
            .map(|r| r.value)
    }
}
