//! Stable output formatting shared by the library and the command line.
//!
//! Every float written to JSON or CSV is rounded to [`SIG_DIGITS`]
//! significant digits, which pins outputs byte-for-byte across platforms.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use crate::error::Result;
use crate::estimation::{ThetaEstimate, ThresholdRule, TailModel};
use crate::subset::SubsetFamily;

pub const SIG_DIGITS: usize = 6;

/// Rounds to [`SIG_DIGITS`] significant digits; non-finite values pass through.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Formats a float for CSV output.
pub fn format_float(x: f64) -> String {
    let r = round_sig(x);
    if r.is_finite() {
        // serde_json prints the shortest round-trip form
        serde_json::to_string(&r).unwrap_or_else(|_| r.to_string())
    } else {
        r.to_string()
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if n.is_f64() {
                if let Some(f) = n.as_f64() {
                    if let Some(r) = serde_json::Number::from_f64(round_sig(f)) {
                        *n = r;
                    }
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_value),
        Value::Object(o) => o.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Serializes to a JSON value with all floats rounded.
pub fn to_value<T: Serialize>(value: &T) -> Result<Value> {
    let mut v = serde_json::to_value(value)?;
    round_value(&mut v);
    Ok(v)
}

/// Pretty JSON with rounded floats and a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let v = to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

/// `{"[1,2]": c, ...}` in canonical subset order.
pub fn theta_map(family: &SubsetFamily) -> BTreeMap<String, f64> {
    // BTreeMap orders by key text; canonical order is kept in `constraints`
    family
        .entries()
        .iter()
        .map(|e| (e.set.to_string(), e.c))
        .collect()
}

/// Output of the estimation stage.
#[derive(Debug, Clone, Serialize)]
pub struct EstimatesReport {
    pub labels: Vec<String>,
    pub n: usize,
    pub dropped_rows: usize,
    pub q0: f64,
    pub xi: f64,
    pub sigma: Vec<f64>,
    pub p0: f64,
    pub thresholds: Vec<f64>,
    pub weights: Vec<f64>,
    pub threshold_rule: ThresholdRule,
    pub reference_threshold: f64,
    pub reference_exceedances: usize,
    pub theta: BTreeMap<String, f64>,
    pub family: SubsetFamily,
}

impl EstimatesReport {
    pub fn new(
        labels: Vec<String>,
        n: usize,
        dropped_rows: usize,
        q0: f64,
        model: &TailModel,
        weights: Vec<f64>,
        rule: ThresholdRule,
        est: &ThetaEstimate,
    ) -> Self {
        EstimatesReport {
            labels,
            n,
            dropped_rows,
            q0,
            xi: model.xi,
            sigma: model.sigma.clone(),
            p0: model.p0,
            thresholds: model.thresholds.clone(),
            weights,
            threshold_rule: rule,
            reference_threshold: est.thresholds[0],
            reference_exceedances: est.reference_count,
            theta: theta_map(&est.family),
            family: est.family.clone(),
        }
    }
}
