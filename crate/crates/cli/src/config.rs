use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mk_core::scenarios::{ParamValue, Params};
use mk_core::states::StateSpec;
use serde::Deserialize;

use crate::{Format, UsageError};

/// Run configuration read from `--config`. Flags override these fields.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub state: Option<StateSpec>,
    pub algebra: Option<String>,
    pub target: Option<Vec<String>>,
    pub measure: Option<Vec<String>>,
    pub theta: Option<Vec<f64>>,
    pub nu: Option<u64>,
    pub batches: Option<usize>,
    pub seed: Option<u64>,
    pub params: Option<Params>,
    pub grid: Option<BTreeMap<String, Vec<ParamValue>>>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, UsageError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| UsageError(format!("malformed config {}: {e}", path.display())))
    }
}

/// `key=value`; numeric values become numbers.
pub fn parse_param(s: &str) -> Result<(String, ParamValue), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    if k.is_empty() {
        return Err(format!("empty key in `{s}`"));
    }
    Ok((k.to_string(), value(v)))
}

fn value(v: &str) -> ParamValue {
    v.parse()
        .map(ParamValue::Num)
        .unwrap_or_else(|_| ParamValue::Text(v.to_string()))
}

/// `key=v1,v2,...`
pub fn parse_grid(s: &str) -> Result<(String, Vec<ParamValue>), String> {
    let (k, vs) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=v1,v2,..., got `{s}`"))?;
    let vals: Vec<ParamValue> = vs.split(',').filter(|v| !v.is_empty()).map(value).collect();
    if k.is_empty() || vals.is_empty() {
        return Err(format!("bad grid `{s}`"));
    }
    Ok((k.to_string(), vals))
}

/// Splits observable labels on commas that are not inside braces, so
/// `Jx,{Jx,Jz}` gives `Jx` and `{Jx,Jz}`.
pub fn split_labels(items: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    for item in items {
        let mut depth = 0i32;
        let mut cur = String::new();
        for ch in item.chars() {
            match ch {
                '{' => depth += 1,
                '}' => depth -= 1,
                _ => {}
            }
            if ch == ',' && depth == 0 {
                out.push(std::mem::take(&mut cur));
            } else {
                cur.push(ch);
            }
        }
        out.push(cur);
    }
    out.into_iter()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Cartesian product of the grid axes, each point layered over `base`.
pub fn expand_grid(base: &Params, axes: &BTreeMap<String, Vec<ParamValue>>) -> Vec<Params> {
    let mut points = vec![base.clone()];
    for (k, vals) in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                vals.iter().map(move |v| {
                    let mut q = p.clone();
                    q.insert(k.clone(), v.clone());
                    q
                })
            })
            .collect();
    }
    points
}
