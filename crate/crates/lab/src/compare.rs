//! Field-wise comparison of two reports.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::LabError;
use crate::report::load_report_value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDiff {
    /// JSON-pointer style path, e.g. `/poincare_gap/lambda1`.
    pub path: String,
    pub a: Value,
    pub b: Value,
    /// `|a − b| / max(|a|, |b|)` for numbers, `null` otherwise.
    pub relative: Option<f64>,
    pub exceeds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct DiffSummary {
    pub tolerance: f64,
    pub diffs: Vec<FieldDiff>,
}

impl DiffSummary {
    pub fn is_empty(&self) -> bool {
        self.diffs.is_empty()
    }

    pub fn exceeding(&self) -> impl Iterator<Item = &FieldDiff> {
        self.diffs.iter().filter(|d| d.exceeds)
    }

    pub fn within_tolerance(&self) -> bool {
        self.exceeding().next().is_none()
    }
}

fn walk(path: &mut String, a: &Value, b: &Value, tol: f64, out: &mut Vec<FieldDiff>) {
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            let mut keys: Vec<&String> = x.keys().chain(y.keys()).collect();
            keys.sort();
            keys.dedup();
            for k in keys {
                let len = path.len();
                path.push('/');
                path.push_str(k);
                walk(
                    path,
                    x.get(k).unwrap_or(&Value::Null),
                    y.get(k).unwrap_or(&Value::Null),
                    tol,
                    out,
                );
                path.truncate(len);
            }
        }
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => {
            for (i, (p, q)) in x.iter().zip(y).enumerate() {
                let len = path.len();
                path.push('/');
                path.push_str(&i.to_string());
                walk(path, p, q, tol, out);
                path.truncate(len);
            }
        }
        (Value::Number(p), Value::Number(q)) => {
            let (p, q) = (p.as_f64().unwrap_or(f64::NAN), q.as_f64().unwrap_or(f64::NAN));
            if p != q {
                let rel = (p - q).abs() / p.abs().max(q.abs());
                out.push(FieldDiff {
                    path: path.clone(),
                    a: a.clone(),
                    b: b.clone(),
                    relative: Some(rel),
                    exceeds: !(rel <= tol),
                });
            }
        }
        _ => {
            if a != b {
                out.push(FieldDiff {
                    path: path.clone(),
                    a: a.clone(),
                    b: b.clone(),
                    relative: None,
                    exceeds: true,
                });
            }
        }
    }
}

pub fn compare_values(a: &Value, b: &Value, tolerance: f64) -> DiffSummary {
    let mut diffs = Vec::new();
    walk(&mut String::new(), a, b, tolerance, &mut diffs);
    DiffSummary { tolerance, diffs }
}

/// Compares two report files. Fails if either does not parse or the schema
/// versions differ.
pub fn compare(report_a: &Path, report_b: &Path, tolerance: f64) -> Result<DiffSummary, LabError> {
    let a = load_report_value(report_a)?;
    let b = load_report_value(report_b)?;
    Ok(compare_values(&a, &b, tolerance))
}
