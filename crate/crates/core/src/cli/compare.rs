use std::path::Path;

use serde::Serialize;

use super::{report_columns, CliError};
use crate::mission::{MetricsReport, METRICS_SCHEMA_VERSION};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub a: Option<f64>,
    pub b: Option<f64>,
    /// `b - a`; `None` when either side is undefined.
    pub delta: Option<f64>,
}

impl ComparisonRow {
    /// -1, 0 or +1 for the direction of `b` relative to `a`.
    pub fn sign(&self) -> Option<i8> {
        self.delta.map(|d| if d > 0.0 { 1 } else if d < 0.0 { -1 } else { 0 })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub rows: Vec<ComparisonRow>,
    pub higher: usize,
    pub lower: usize,
    pub equal: usize,
}

impl Comparison {
    pub fn row(&self, metric: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.metric == metric)
    }

    pub fn table(&self) -> String {
        let f = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
        let mut out = format!("{:<24} {:>12} {:>12} {:>12}  sign\n", "metric", self.a, self.b, "delta");
        for r in &self.rows {
            let s = match r.sign() {
                Some(1) => "+",
                Some(-1) => "-",
                Some(_) => "=",
                None => "?",
            };
            out += &format!("{:<24} {:>12} {:>12} {:>12}  {s}\n", r.metric, f(r.a), f(r.b), f(r.delta));
        }
        out += &format!("higher {}  lower {}  equal {}\n", self.higher, self.lower, self.equal);
        out
    }
}

/// Reads `metrics.json`, or `<dir>/metrics.json` when given a run directory.
pub fn load_report(path: &Path) -> Result<MetricsReport, CliError> {
    let file = if path.is_dir() { path.join("metrics.json") } else { path.to_path_buf() };
    let text = std::fs::read_to_string(&file).map_err(|e| CliError::Io(format!("{}: {e}", file.display())))?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::IncompatibleReports(format!("{}: {e}", file.display())))?;
    let version = v.get("schema_version").and_then(|x| x.as_u64());
    if version != Some(METRICS_SCHEMA_VERSION as u64) {
        return Err(CliError::IncompatibleReports(format!(
            "{} has schema version {}, expected {METRICS_SCHEMA_VERSION}",
            file.display(),
            version.map_or("none".into(), |x| x.to_string())
        )));
    }
    serde_json::from_value(v).map_err(|e| CliError::IncompatibleReports(format!("{}: {e}", file.display())))
}

/// Per-metric deltas `b - a` with a sign summary.
pub fn compare_reports(a: &MetricsReport, b: &MetricsReport) -> Result<Comparison, CliError> {
    if a.schema_version != b.schema_version {
        return Err(CliError::IncompatibleReports(format!("schema versions {} and {}", a.schema_version, b.schema_version)));
    }
    let rows: Vec<ComparisonRow> = report_columns(a)
        .into_iter()
        .zip(report_columns(b))
        .map(|((name, x), (_, y))| ComparisonRow {
            metric: name.to_string(),
            a: x,
            b: y,
            delta: x.zip(y).map(|(x, y)| y - x),
        })
        .collect();
    let count = |s: i8| rows.iter().filter(|r| r.sign() == Some(s)).count();
    Ok(Comparison {
        a: format!("{}#{}", a.mode, a.seed),
        b: format!("{}#{}", b.mode, b.seed),
        higher: count(1),
        lower: count(-1),
        equal: count(0),
        rows,
    })
}
