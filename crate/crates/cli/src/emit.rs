use std::collections::BTreeSet;

use mk_core::estimation::LabeledMatrix;
use mk_core::scenarios::{Computed, ParamValue, ScenarioResult};
use serde::Serialize;

/// Pretty JSON with a trailing newline.
pub fn json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable output");
    out.push(b'\n');
    out
}

fn table(header: Vec<String>, rows: Vec<Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Shortest round-trip form, switching to exponent notation for very small
/// or very large magnitudes.
fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn cell(v: &ParamValue) -> String {
    match v {
        ParamValue::Num(x) => num(*x),
        ParamValue::Text(t) => t.clone(),
    }
}

/// One row per result. Columns: name, sorted parameter keys, nbar, sorted
/// scalar entries, passed, slope.
pub fn scenario_csv(results: &[ScenarioResult], slope: Option<f64>) -> Vec<u8> {
    let keys: BTreeSet<&String> = results
        .iter()
        .flat_map(|r| r.params.keys())
        .filter(|k| *k != "nbar")
        .collect();
    let entries: BTreeSet<&String> = results
        .iter()
        .flat_map(|r| {
            r.computed
                .iter()
                .filter(|(_, v)| matches!(v, Computed::Scalar(_)))
                .map(|(k, _)| k)
        })
        .collect();
    let mut header = vec!["name".to_string()];
    header.extend(keys.iter().map(|k| k.to_string()));
    header.push("nbar".into());
    header.extend(entries.iter().map(|k| k.to_string()));
    header.push("passed".into());
    header.push("slope".into());
    let rows = results
        .iter()
        .map(|r| {
            let mut row = vec![r.name.clone()];
            row.extend(keys.iter().map(|k| r.params.get(*k).map(cell).unwrap_or_default()));
            let nbar = r.nbar.map(num).or_else(|| r.params.get("nbar").map(cell));
            row.push(nbar.unwrap_or_default());
            row.extend(entries.iter().map(|k| match r.computed.get(*k) {
                Some(Computed::Scalar(x)) => num(*x),
                _ => String::new(),
            }));
            row.push(r.passed.to_string());
            row.push(slope.map(num).unwrap_or_default());
            row
        })
        .collect();
    table(header, rows)
}

/// Rows of a labeled matrix, first column holding the row label.
pub fn matrix_csv(m: &LabeledMatrix) -> Vec<u8> {
    let mut header = vec!["label".to_string()];
    header.extend(m.cols.iter().cloned());
    let rows = m
        .rows
        .iter()
        .zip(&m.data)
        .map(|(l, r)| std::iter::once(l.clone()).chain(r.iter().map(|x| num(*x))).collect())
        .collect();
    table(header, rows)
}

pub fn list_csv(items: &[(&str, &str)]) -> Vec<u8> {
    let rows = items.iter().map(|(n, s)| vec![n.to_string(), s.to_string()]).collect();
    table(vec!["name".into(), "summary".into()], rows)
}

/// One row per batch: batch index then the estimate of each parameter.
pub fn estimates_csv(labels: &[String], estimates: &[Vec<f64>]) -> Vec<u8> {
    let mut header = vec!["batch".to_string()];
    header.extend(labels.iter().cloned());
    let rows = estimates
        .iter()
        .enumerate()
        .map(|(b, e)| {
            std::iter::once(b.to_string())
                .chain(e.iter().map(|x| num(*x)))
                .collect()
        })
        .collect();
    table(header, rows)
}
