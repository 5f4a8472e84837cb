use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use xvar::closed_form::{bounds_curve, frechet_result};
use xvar::estimation::{
    bivariate_plus_full_sets, common_xi_fit, estimate_extremal_coeffs, scale_balanced_weights,
    LossPanel, TailModel, ThresholdRule,
};
use xvar::mkt_sectors::{composite_bounds, SectorPartition};
use xvar::report::{theta_map, EstimatesReport};
use xvar::simulate::{sample_max_stable, sample_rv_portfolio};
use xvar::subset::SubsetId;
use xvar::tm_lp::{dvariate_lower_certificate, dvariate_upper_certificate, solve_lower_bound_with, tm_bounds};
use xvar::{
    dvariate_bounds, verify_kkt, BoundsResult, DiscreteSpectralMeasure, Error, KktReport, Result,
    SubsetFamily, TmLpConfig,
};

use crate::config::{Format, Settings};
use crate::output::{Cell, Csv, Output};
use crate::{Failure, MethodArg, Stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SetsArg {
    /// Singletons and the full set.
    Dvariate,
    /// Singletons and all pairs.
    Bivariate,
    /// Singletons, all pairs and the full set.
    BivariateFull,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    /// Common threshold at the q0-quantile of the first asset.
    Reference,
    /// Each asset at its own q0-quantile.
    PerAsset,
}

impl From<RuleArg> for ThresholdRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Reference => ThresholdRule::Reference,
            RuleArg::PerAsset => ThresholdRule::PerAsset,
        }
    }
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    /// Loss panel: header row, optional leading `date` column, one column per asset.
    pub csv: PathBuf,
    #[arg(long, value_enum, default_value = "bivariate-full")]
    pub sets: SetsArg,
    #[arg(long, value_enum, default_value = "reference")]
    pub threshold_rule: RuleArg,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    /// Constraint family JSON, or any JSON object with a `family` field.
    pub constraints: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CurveArg {
    /// `(theta, chi_lower, chi_upper)` over `[1, d]` for one d-variate constraint.
    Theta,
}

#[derive(Args, Debug)]
pub struct BoundsArgs {
    /// Constraint family JSON, or any JSON object with a `family` field.
    pub constraints: Option<PathBuf>,
    /// Dimension when no constraint file is given.
    #[arg(long)]
    pub d: Option<usize>,
    /// d-variate coefficient when no constraint file is given.
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long, value_enum, default_value = "auto")]
    pub method: MethodArg,
    /// Emit a curve instead of a single result.
    #[arg(long, value_enum)]
    pub curve: Option<CurveArg>,
    /// Grid size of the curve.
    #[arg(long)]
    pub points: Option<usize>,
    /// Also write the curve as CSV to this path, keeping the main output.
    #[arg(long)]
    pub curve_output: Option<PathBuf>,
    /// Include the optimality certificate of the lower bound.
    #[arg(long)]
    pub certificate: bool,
}

#[derive(Args, Debug)]
pub struct TmLpArgs {
    /// Constraint family JSON, or any JSON object with a `family` field.
    pub constraints: PathBuf,
    /// Quasi-random points used to check dual feasibility.
    #[arg(long)]
    pub kkt_samples: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SectorsArgs {
    /// JSON with `blocks` (1-based index lists) and either `beta` plus
    /// `sector_thetas`, or the portfolio coefficients `c0` and `ci`.
    pub partition: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    /// Regularly varying losses with tail index xi.
    Rv,
    /// Max-stable vectors with unit Fréchet margins.
    MaxStable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Lower,
    Upper,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Spectral measure JSON `{"d": .., "atoms": [{"u": [..], "h": ..}]}`.
    #[arg(long, conflicts_with_all = ["d", "theta"])]
    pub measure: Option<PathBuf>,
    /// Use the extremal measure of one d-variate constraint instead.
    #[arg(long, requires = "theta")]
    pub d: Option<usize>,
    #[arg(long, requires = "d")]
    pub theta: Option<f64>,
    /// Which bound the extremal measure attains.
    #[arg(long, value_enum, default_value = "lower")]
    pub side: SideArg,
    #[arg(long, short, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, value_enum, default_value = "rv")]
    pub kind: KindArg,
}

/// Reads a whole file, naming it in the error.
pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

/// Reads a family from a bare family object or from a report that embeds one.
pub fn load_family(path: &Path) -> Result<SubsetFamily> {
    let text = read_text(path)?;
    let mut value: serde_json::Value = serde_json::from_str(&text)?;
    if let Some(inner) = value.get_mut("family") {
        value = inner.take();
    }
    Ok(serde_json::from_value(value)?)
}

/// Refuses families that no spectral measure can satisfy.
pub fn require_consistent(family: &SubsetFamily) -> Result<()> {
    if !family.has_all_singletons() {
        family.validate()?;
    }
    let violations = family.check_consistency();
    let out_of_range = family
        .entries()
        .iter()
        .filter(|e| !e.set.is_singleton())
        .find(|e| e.c < 1.0 - 1e-9 || e.c > e.set.len() as f64 + 1e-9);
    if !violations.is_empty() || out_of_range.is_some() {
        let detail = match out_of_range {
            Some(e) => format!("theta{} = {} lies outside [1, {}]", e.set, e.c, e.set.len()),
            None => {
                let worst = violations.iter().map(|v| v.slack).fold(f64::INFINITY, f64::min);
                format!("{} consistency inequalities fail (worst slack {worst:.3e})", violations.len())
            }
        };
        return Err(Error::InconsistentInput(format!(
            "{detail}; run `xvar calibrate` to project the coefficients onto the valid cone"
        )));
    }
    family.validate()
}

pub fn estimate_sets(d: usize, sets: SetsArg) -> Result<Vec<SubsetId>> {
    let mut out: Vec<SubsetId> = (0..d).map(|j| SubsetId::singleton(j, d)).collect::<Result<_>>()?;
    if d > 1 {
        match sets {
            SetsArg::Dvariate => out.push(SubsetId::full(d)?),
            SetsArg::Bivariate => out = bivariate_plus_full_sets(d)?.into_iter().filter(|s| s.len() <= 2).collect(),
            SetsArg::BivariateFull => out = bivariate_plus_full_sets(d)?,
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

/// The estimation stage shared with the pipeline.
pub fn estimates(
    csv: &Path,
    q0: f64,
    sets: SetsArg,
    rule: ThresholdRule,
) -> std::result::Result<(LossPanel, TailModel, EstimatesReport), Failure> {
    let file = std::fs::File::open(csv)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", csv.display())))
        .stage("ingest")?;
    let (panel, dropped) = LossPanel::from_csv_reader(std::io::BufReader::new(file)).stage("ingest")?;
    let model = common_xi_fit(&panel, q0).stage("tail")?;
    let weights = scale_balanced_weights(&model.sigma).stage("tail")?;
    let scaled = panel.scaled(&weights).stage("estimate")?;
    let sets = estimate_sets(panel.dim(), sets).stage("estimate")?;
    let est = estimate_extremal_coeffs(&scaled, q0, &sets, rule).stage("estimate")?;
    let report = EstimatesReport::new(
        panel.labels().to_vec(),
        panel.rows(),
        dropped,
        q0,
        &model,
        weights,
        rule,
        &est,
    );
    Ok((panel, model, report))
}

pub fn estimate(a: &EstimateArgs, s: &Settings) -> std::result::Result<Output, Failure> {
    let (_, _, report) = estimates(&a.csv, s.q0, a.sets, a.threshold_rule.into())?;
    match s.format {
        Format::Json => Ok(Output::json(&report)?),
        Format::Csv => {
            let mut csv = Csv::new(&["set", "theta"]);
            for e in report.family.entries() {
                csv.row(&[Cell::Text(e.set.to_string()), Cell::Num(e.c)]);
            }
            Ok(csv.finish())
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SetValue {
    pub set: SubsetId,
    pub value: f64,
}

#[derive(Debug, Serialize)]
pub struct CalibrationReport {
    pub lambda: f64,
    pub fit_residual: f64,
    pub input_violations: usize,
    pub raw: std::collections::BTreeMap<String, f64>,
    pub theta: std::collections::BTreeMap<String, f64>,
    pub weights: Vec<SetValue>,
    pub family: SubsetFamily,
}

pub fn calibration_report(raw: &SubsetFamily, lambda: f64) -> Result<CalibrationReport> {
    let cal = xvar::calibration::project_to_consistent(raw, lambda)?;
    Ok(CalibrationReport {
        lambda,
        fit_residual: cal.fit_residual,
        input_violations: raw.check_consistency().len(),
        raw: theta_map(raw),
        theta: theta_map(&cal.family),
        weights: cal
            .weights
            .support()
            .into_iter()
            .map(|(set, value)| SetValue { set, value })
            .collect(),
        family: cal.family,
    })
}

pub fn calibrate(a: &CalibrateArgs, s: &Settings) -> std::result::Result<Output, Failure> {
    let raw = load_family(&a.constraints).stage("ingest")?;
    let report = calibration_report(&raw, s.lambda).stage("calibrate")?;
    match s.format {
        Format::Json => Ok(Output::json(&report)?),
        Format::Csv => {
            let mut csv = Csv::new(&["set", "raw", "calibrated"]);
            for (r, c) in raw.entries().iter().zip(report.family.entries()) {
                csv.row(&[Cell::Text(r.set.to_string()), Cell::Num(r.c), Cell::Num(c.c)]);
            }
            Ok(csv.finish())
        }
    }
}

fn is_dvariate_only(family: &SubsetFamily) -> bool {
    family.entries().iter().all(|e| e.set.is_singleton() || e.set.is_full())
}

/// Bounds for a validated, consistent family.
pub fn bounds_for(family: &SubsetFamily, xi: f64, method: MethodArg, config: &TmLpConfig) -> Result<BoundsResult> {
    let d = family.dim();
    let full = SubsetId::full(d)?;
    let theta_d = family.get(full).filter(|_| d > 1);
    let method = match method {
        MethodArg::Auto if d == 1 || family.len() == d => MethodArg::Frechet,
        MethodArg::Auto if is_dvariate_only(family) => MethodArg::Dvariate,
        MethodArg::Auto if d <= config.max_dim => MethodArg::TmLp,
        MethodArg::Auto if theta_d.is_some() => {
            log::warn!("d = {d} exceeds the LP cap; using the d-variate constraint only");
            MethodArg::Dvariate
        }
        MethodArg::Auto => return Err(Error::DimensionTooLarge { d, cap: config.max_dim }),
        m => m,
    };
    match method {
        MethodArg::Frechet => frechet_result(d, xi),
        MethodArg::Dvariate => match theta_d {
            Some(t) => dvariate_bounds(d, xi, t),
            None if d == 1 => frechet_result(d, xi),
            None => Err(Error::IncompleteInput("the d-variate method needs theta of the full set".into())),
        },
        _ => tm_bounds(family, xi, config),
    }
}

fn curve_csv(d: usize, xi: f64, points: usize) -> Result<Output> {
    let mut csv = Csv::new(&["theta", "chi_lower", "chi_upper"]);
    for (t, lo, hi) in bounds_curve(d, xi, points)? {
        csv.row(&[Cell::Num(t), Cell::Num(lo), Cell::Num(hi)]);
    }
    Ok(csv.finish())
}

#[derive(Serialize)]
struct CurvePoint {
    theta: f64,
    chi_lower: f64,
    chi_upper: f64,
}

fn bounds_csv(r: &BoundsResult) -> Output {
    let mut csv = Csv::new(&["rho_lower", "rho_upper", "chi_lower", "chi_upper", "method"]);
    let method = serde_json::to_value(r.method)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default();
    csv.row(&[
        Cell::Num(r.rho_lower),
        Cell::Num(r.rho_upper),
        Cell::Num(r.chi_lower),
        Cell::Num(r.chi_upper),
        Cell::Text(method),
    ]);
    csv.finish()
}

fn tm_config(s: &Settings) -> Result<TmLpConfig> {
    TmLpConfig::with_max_dim(s.max_dim)
}

pub fn bounds(a: &BoundsArgs, s: &Settings) -> std::result::Result<Output, Failure> {
    let xi = s.require_xi().stage("input")?;
    let family = match (&a.constraints, a.d, a.theta) {
        (Some(p), None, None) => Some(load_family(p).stage("ingest")?),
        (Some(_), _, _) => {
            return Err(Error::InvalidInput("give either a constraint file or --d/--theta, not both".into()).into())
        }
        (None, Some(d), Some(t)) => {
            Some(SubsetFamily::raw(d, single_dvariate_entries(d, t).stage("input")?).stage("input")?)
        }
        (None, Some(d), None) if a.curve.is_none() => {
            let singletons = single_dvariate_entries(d, 1.0).stage("input")?.into_iter().take(d);
            Some(SubsetFamily::raw(d, singletons).stage("input")?)
        }
        (None, _, _) if a.curve.is_some() => None,
        _ => return Err(Error::InvalidInput("give a constraint file or --d (with --theta)".into()).into()),
    };
    let curve_d = family.as_ref().map(SubsetFamily::dim).or(a.d);
    if let Some(path) = &a.curve_output {
        let d = curve_d.ok_or_else(|| Error::InvalidInput("the curve needs a dimension".into()))?;
        curve_csv(d, xi, s.points).stage("curve")?.write(Some(path)).stage("output")?;
    }
    if a.curve.is_some() && a.curve_output.is_none() {
        let d = curve_d.ok_or_else(|| Error::InvalidInput("--curve needs --d or a constraint file".into()))?;
        return match s.format {
            Format::Csv => Ok(curve_csv(d, xi, s.points).stage("curve")?),
            Format::Json => {
                let rows: Vec<CurvePoint> = bounds_curve(d, xi, s.points)
                    .stage("curve")?
                    .into_iter()
                    .map(|(theta, chi_lower, chi_upper)| CurvePoint { theta, chi_lower, chi_upper })
                    .collect();
                Ok(Output::json(&rows)?)
            }
        };
    }
    let family = family.ok_or_else(|| Error::InvalidInput("nothing to bound".into()))?;
    require_consistent(&family).stage("consistency")?;
    let config = tm_config(s).stage("input")?;
    let mut result = bounds_for(&family, xi, a.method, &config).stage("bounds")?;
    if !a.certificate {
        result.certificate = None;
    }
    match s.format {
        Format::Json => Ok(Output::json(&result)?),
        Format::Csv => Ok(bounds_csv(&result)),
    }
}

fn single_dvariate_entries(d: usize, theta: f64) -> Result<Vec<(SubsetId, f64)>> {
    let mut e: Vec<(SubsetId, f64)> = (0..d).map(|j| Ok((SubsetId::singleton(j, d)?, 1.0))).collect::<Result<_>>()?;
    if d > 1 {
        e.push((SubsetId::full(d)?, theta));
    }
    Ok(e)
}

#[derive(Serialize)]
pub struct TmLpReport {
    pub xi: f64,
    pub rho: f64,
    pub chi: f64,
    pub weights: Vec<SetValue>,
    pub multipliers: Vec<SetValue>,
    pub measure: DiscreteSpectralMeasure,
    pub kkt: KktReport,
}

pub fn tm_lp(a: &TmLpArgs, s: &Settings) -> std::result::Result<Output, Failure> {
    let xi = s.require_xi().stage("input")?;
    let family = load_family(&a.constraints).stage("ingest")?;
    require_consistent(&family).stage("consistency")?;
    let config = tm_config(s).stage("input")?;
    let lb = solve_lower_bound_with(&family, xi, &config).stage("tm-lp")?;
    let kkt = verify_kkt(&family, xi, &lb.certificate, s.kkt_samples).stage("kkt")?;
    if !kkt.certified {
        log::warn!("optimality certificate failed verification: {kkt:?}");
    }
    let report = TmLpReport {
        xi,
        rho: lb.rho,
        chi: lb.chi,
        weights: lb
            .weights
            .support()
            .into_iter()
            .map(|(set, value)| SetValue { set, value })
            .collect(),
        multipliers: lb
            .certificate
            .x
            .iter()
            .map(|(set, value)| SetValue { set: *set, value: *value })
            .collect(),
        measure: lb.measure,
        kkt,
    };
    match s.format {
        Format::Json => Ok(Output::json(&report)?),
        Format::Csv => {
            let mut csv = Csv::new(&["kind", "set", "value"]);
            for w in &report.weights {
                csv.row(&[Cell::Text("weight".into()), Cell::Text(w.set.to_string()), Cell::Num(w.value)]);
            }
            for m in &report.multipliers {
                csv.row(&[Cell::Text("multiplier".into()), Cell::Text(m.set.to_string()), Cell::Num(m.value)]);
            }
            Ok(csv.finish())
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SectorInput {
    blocks: Vec<Vec<usize>>,
    beta: Option<f64>,
    sector_thetas: Option<Vec<f64>>,
    c0: Option<f64>,
    ci: Option<Vec<f64>>,
}

#[derive(Serialize)]
pub struct SectorReport {
    #[serde(flatten)]
    pub bounds: BoundsResult,
    #[serde(flatten)]
    pub partition: SectorPartition,
    pub block_coefficients: Vec<f64>,
    pub overall_coefficient: f64,
}

pub fn parse_partition(text: &str) -> Result<SectorPartition> {
    let input: SectorInput = serde_json::from_str(text)?;
    match (input.beta, input.sector_thetas, input.c0, input.ci) {
        (Some(beta), Some(thetas), None, None) => SectorPartition::from_indices(&input.blocks, beta, thetas),
        (None, None, Some(c0), Some(ci)) => {
            let d: usize = input.blocks.iter().map(Vec::len).sum();
            let ids = input
                .blocks
                .iter()
                .map(|b| SubsetId::from_indices(b, d))
                .collect::<Result<Vec<_>>>()?;
            SectorPartition::from_coefficients(d, ids, c0, &ci)
        }
        _ => Err(Error::InvalidInput(
            "sector input needs either beta and sector_thetas, or c0 and ci".into(),
        )),
    }
}

pub fn sectors(a: &SectorsArgs, s: &Settings) -> std::result::Result<Output, Failure> {
    let xi = s.require_xi().stage("input")?;
    let text = read_text(&a.partition).stage("ingest")?;
    let partition = parse_partition(&text).stage("ingest")?;
    let bounds = composite_bounds(&partition, xi).stage("bounds")?;
    let report = SectorReport {
        bounds,
        block_coefficients: partition.block_coefficients(),
        overall_coefficient: partition.overall_coefficient(),
        partition,
    };
    match s.format {
        Format::Json => Ok(Output::json(&report)?),
        Format::Csv => Ok(bounds_csv(&report.bounds)),
    }
}

pub fn simulate(a: &SimulateArgs, s: &Settings) -> std::result::Result<Output, Failure> {
    let measure = match (&a.measure, a.d, a.theta) {
        (Some(p), _, _) => {
            let text = read_text(p).stage("ingest")?;
            serde_json::from_str::<DiscreteSpectralMeasure>(&text)
                .map_err(Error::from)
                .stage("ingest")?
        }
        (None, Some(d), Some(theta)) => {
            // the extremal measures do not depend on xi
            let xi = s.xi.unwrap_or(1.0).min(1.0);
            let cert = match a.side {
                SideArg::Lower => dvariate_lower_certificate(d, xi, theta),
                SideArg::Upper => dvariate_upper_certificate(d, xi, theta),
            };
            cert.stage("input")?.measure
        }
        _ => return Err(Error::InvalidInput("give --measure or --d with --theta".into()).into()),
    };
    let panel = match a.kind {
        KindArg::Rv => {
            let xi = s.require_xi().stage("input")?;
            sample_rv_portfolio(&measure, xi, a.n, s.seed).stage("simulate")?
        }
        KindArg::MaxStable => sample_max_stable(&measure, a.n, s.seed).stage("simulate")?,
    };
    let mut buf = Vec::new();
    panel.write_csv(&mut buf).stage("output")?;
    Ok(Output(String::from_utf8(buf).map_err(|e| Error::InvalidInput(e.to_string()))?))
}
