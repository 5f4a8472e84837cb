//! End-to-end report: tail fit, coefficient estimates, calibration, bounds,
//! VaR-bound curves and return levels.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use xvar::closed_form::frechet_result;
use xvar::estimation::{
    baseline_var_gp, empirical_var, return_level_bounds, ReturnLevelTable, TailModel, TRADING_DAYS,
};
use xvar::report::EstimatesReport;
use xvar::subset::SubsetId;
use xvar::{dvariate_bounds, tm_bounds, BoundsResult, Error, Result, SubsetFamily, TmLpConfig};

use crate::commands::{calibration_report, estimates, CalibrationReport, RuleArg, SetsArg};
use crate::config::{Format, Settings};
use crate::output::{Cell, Csv, Output};
use crate::{Failure, Stage};

#[derive(Args, Debug)]
pub struct PipelineArgs {
    /// Loss panel: header row, optional leading `date` column, one column per asset.
    pub csv: PathBuf,
    #[arg(long, value_enum, default_value = "reference")]
    pub threshold_rule: RuleArg,
    /// Grid size of the VaR curves.
    #[arg(long)]
    pub points: Option<usize>,
    /// Return-level horizons in years, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub years: Option<Vec<f64>>,
}

#[derive(Debug, Serialize)]
pub struct BoundsSection {
    pub xi: f64,
    pub frechet: BoundsResult,
    pub dvariate: BoundsResult,
    /// LP on singletons and pairs; absent above the LP cap or for `d < 2`.
    pub bivariate: Option<BoundsResult>,
    /// LP on singletons, pairs and the full set.
    pub bivariate_full: Option<BoundsResult>,
}

impl BoundsSection {
    /// `(label, chi)` for every available bound, in a fixed order.
    pub fn chi_labels(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            ("frechet_lower".to_string(), self.frechet.chi_lower),
            ("dvariate_lower".to_string(), self.dvariate.chi_lower),
        ];
        if let Some(b) = &self.bivariate {
            out.push(("bivariate_lower".into(), b.chi_lower));
        }
        if let Some(b) = &self.bivariate_full {
            out.push(("bivariate_full_lower".into(), b.chi_lower));
        }
        out.push(("dvariate_upper".into(), self.dvariate.chi_upper));
        out.push(("frechet_upper".into(), self.frechet.chi_upper));
        out
    }
}

#[derive(Debug, Serialize)]
pub struct VarCurveRow {
    pub alpha: f64,
    pub q: f64,
    pub empirical_portfolio: f64,
    pub baseline_gp: f64,
    pub baseline_empirical: f64,
    pub bounds_gp: BTreeMap<String, f64>,
    pub bounds_empirical: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize)]
pub struct PipelineReport {
    #[serde(flatten)]
    pub estimates: EstimatesReport,
    pub calibration: CalibrationReport,
    pub bounds: BoundsSection,
    pub var_curves: Vec<VarCurveRow>,
    pub return_levels: ReturnLevelTable,
}

fn without_full_set(family: &SubsetFamily) -> Result<SubsetFamily> {
    let d = family.dim();
    SubsetFamily::raw(
        d,
        family
            .entries()
            .iter()
            .filter(|e| e.set.len() <= 2)
            .map(|e| (e.set, e.c)),
    )
}

pub fn bounds_section(calibrated: &SubsetFamily, xi: f64, config: &TmLpConfig) -> Result<BoundsSection> {
    let d = calibrated.dim();
    let frechet = frechet_result(d, xi)?;
    let dvariate = if d == 1 {
        frechet.clone()
    } else {
        let theta = calibrated
            .get(SubsetId::full(d)?)
            .ok_or_else(|| Error::IncompleteInput("the full set is missing from the estimates".into()))?;
        dvariate_bounds(d, xi, theta)?
    };
    let (bivariate, bivariate_full) = if d >= 2 && d <= config.max_dim {
        let strip = |mut r: BoundsResult| {
            r.certificate = None;
            r
        };
        let pairs = without_full_set(calibrated)?;
        (
            Some(strip(tm_bounds(&pairs, xi, config)?)),
            Some(strip(tm_bounds(calibrated, xi, config)?)),
        )
    } else {
        (None, None)
    };
    Ok(BoundsSection {
        xi,
        frechet,
        dvariate,
        bivariate,
        bivariate_full,
    })
}

/// Log-spaced exceedance probabilities from `p0` down to `1/n`.
fn alpha_grid(p0: f64, n: usize, points: usize) -> Vec<f64> {
    let lo = (1.0 / n as f64).min(p0);
    if points < 2 || lo >= p0 {
        return vec![p0];
    }
    let (a, b) = (p0.ln(), lo.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

pub fn pipeline(a: &PipelineArgs, s: &Settings) -> std::result::Result<Output, Failure> {
    let (panel, fitted, est) = estimates(&a.csv, s.q0, SetsArg::BivariateFull, a.threshold_rule.into())?;
    let mut model: TailModel = fitted;
    match s.xi {
        Some(xi) => model.xi = xi,
        None if model.xi <= 0.0 => {
            log::error!("the fitted tail is not heavy; pass --xi to bound with a chosen tail index");
            return Err(Error::InvalidXi(model.xi)).stage("tail");
        }
        None => {}
    }
    let xi = model.xi;

    let calibration = calibration_report(&est.family, s.lambda).stage("calibrate")?;
    let config = TmLpConfig::with_max_dim(s.max_dim).stage("input")?;
    let bounds = bounds_section(&calibration.family, xi, &config).stage("bounds")?;
    let chi = bounds.chi_labels();

    let w1 = est.weights[0];
    let portfolio = panel.portfolio(&est.weights).stage("var_curves")?;
    let first: Vec<f64> = panel.column(0).iter().map(|x| w1 * x).collect();
    let var_curves = alpha_grid(model.p0, panel.rows(), s.points)
        .into_iter()
        .map(|alpha| {
            let q = 1.0 - alpha;
            let gp = baseline_var_gp(&model, w1, q)?;
            let emp = empirical_var(&first, q)?;
            Ok(VarCurveRow {
                alpha,
                q,
                empirical_portfolio: empirical_var(&portfolio, q)?,
                baseline_gp: gp,
                baseline_empirical: emp,
                bounds_gp: chi.iter().map(|(l, c)| (l.clone(), c * gp)).collect(),
                bounds_empirical: chi.iter().map(|(l, c)| (l.clone(), c * emp)).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()
        .stage("var_curves")?;

    let return_levels =
        return_level_bounds(&model, w1, &chi, &s.years, TRADING_DAYS).stage("return_levels")?;

    let report = PipelineReport {
        estimates: est,
        calibration,
        bounds,
        var_curves,
        return_levels,
    };
    match s.format {
        Format::Json => Ok(Output::json(&report)?),
        Format::Csv => {
            // the curves are the plot-ready part of the report
            let labels: Vec<&str> = chi.iter().map(|(l, _)| l.as_str()).collect();
            let mut header = vec!["alpha", "q", "empirical_portfolio", "baseline_gp", "baseline_empirical"];
            let gp: Vec<String> = labels.iter().map(|l| format!("gp_{l}")).collect();
            let emp: Vec<String> = labels.iter().map(|l| format!("empirical_{l}")).collect();
            header.extend(gp.iter().map(String::as_str));
            header.extend(emp.iter().map(String::as_str));
            let mut csv = Csv::new(&header);
            for r in &report.var_curves {
                let mut cells = vec![
                    Cell::Num(r.alpha),
                    Cell::Num(r.q),
                    Cell::Num(r.empirical_portfolio),
                    Cell::Num(r.baseline_gp),
                    Cell::Num(r.baseline_empirical),
                ];
                cells.extend(labels.iter().map(|l| Cell::Num(r.bounds_gp[*l])));
                cells.extend(labels.iter().map(|l| Cell::Num(r.bounds_empirical[*l])));
                csv.row(&cells);
            }
            Ok(csv.finish())
        }
    }
}
