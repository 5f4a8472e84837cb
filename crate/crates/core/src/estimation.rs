//! From loss samples to model inputs: loss panels, extremal-coefficient
//! estimates, generalized Pareto tail fits, scale-balanced weights,
//! empirical and model-based VaR, and return levels.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::subset::{check_consistency, ExtremalCoefficients, SubsetFamily, SubsetId, MAX_DIM, MAX_ENUM_DIM};

/// Minimum number of exceedances for a tail fit.
pub const MIN_EXCEEDANCES: usize = 30;
/// Default threshold quantile.
pub const DEFAULT_Q0: f64 = 0.98;
pub const TRADING_DAYS: f64 = 252.0;

/// An `n x d` matrix of losses with asset labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LossPanel {
    n: usize,
    d: usize,
    /// Row-major.
    data: Vec<f64>,
    labels: Vec<String>,
    dates: Option<Vec<String>>,
}

impl LossPanel {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        let d = labels.len();
        if d == 0 {
            return Err(Error::InvalidInput("panel needs at least one asset".into()));
        }
        if d > MAX_DIM {
            return Err(Error::DimensionTooLarge { d, cap: MAX_DIM });
        }
        if rows.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        let mut data = Vec::with_capacity(rows.len() * d);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} values, expected {d}",
                    r.len()
                )));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("row {i} has a non-finite value")));
            }
            data.extend_from_slice(r);
        }
        Ok(LossPanel {
            n: rows.len(),
            d,
            data,
            labels,
            dates: None,
        })
    }

    /// Default labels `X1..Xd`.
    pub fn default_labels(d: usize) -> Vec<String> {
        (1..=d).map(|j| format!("X{j}")).collect()
    }

    /// Parses a CSV with a header row, an optional leading `date` column and
    /// numeric loss columns. Rows with a missing value are dropped.
    ///
    /// Returns the panel and the number of dropped rows.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<(Self, usize)> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| csv_error(e, 1))?
            .iter()
            .map(str::to_string)
            .collect::<Vec<_>>();
        if headers.is_empty() {
            return Err(Error::Parse {
                line: 1,
                msg: "empty header".into(),
            });
        }
        let has_date = headers[0].eq_ignore_ascii_case("date");
        let labels: Vec<String> = headers[usize::from(has_date)..].to_vec();
        if labels.is_empty() {
            return Err(Error::Parse {
                line: 1,
                msg: "no asset columns".into(),
            });
        }
        let mut rows = Vec::new();
        let mut dates = Vec::new();
        let mut dropped = 0usize;
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_error(e, 0))?;
            let line = rec.position().map_or(0, |p| p.line());
            let fields: Vec<&str> = rec.iter().collect();
            let values = &fields[usize::from(has_date)..];
            if values.iter().any(|f| is_missing(f)) {
                dropped += 1;
                continue;
            }
            let row = values
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::Parse {
                            line,
                            msg: format!("'{f}' is not a finite number"),
                        })
                })
                .collect::<Result<Vec<f64>>>()?;
            if has_date {
                dates.push(fields[0].to_string());
            }
            rows.push(row);
        }
        if dropped > 0 {
            log::warn!("dropped {dropped} rows with missing values");
        }
        let mut panel = LossPanel::new(rows, labels)?;
        if has_date {
            panel.dates = Some(dates);
        }
        Ok((panel, dropped))
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<(Self, usize)> {
        let f = std::fs::File::open(path)?;
        LossPanel::from_csv_reader(std::io::BufReader::new(f))
    }

    /// Writes the panel in the format read by [`LossPanel::from_csv_reader`].
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = Vec::new();
        if self.dates.is_some() {
            header.push("date".into());
        }
        header.extend(self.labels.iter().cloned());
        w.write_record(&header).map_err(|e| csv_error(e, 0))?;
        for i in 0..self.n {
            let mut rec: Vec<String> = Vec::with_capacity(self.d + 1);
            if let Some(d) = &self.dates {
                rec.push(d[i].clone());
            }
            rec.extend(self.row(i).iter().map(|v| format!("{v:e}")));
            w.write_record(&rec).map_err(|e| csv_error(e, 0))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dates(&self) -> Option<&[String]> {
        self.dates.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.data[i * self.d + j]).collect()
    }

    /// Multiplies column `j` by `w_j`.
    pub fn scaled(&self, w: &[f64]) -> Result<LossPanel> {
        if w.len() != self.d {
            return Err(Error::InvalidInput(format!(
                "{} weights for {} assets",
                w.len(),
                self.d
            )));
        }
        let mut out = self.clone();
        for (i, v) in out.data.iter_mut().enumerate() {
            *v *= w[i % self.d];
        }
        Ok(out)
    }

    /// Portfolio losses `Σ_j w_j X_j` per row.
    pub fn portfolio(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.d {
            return Err(Error::InvalidInput(format!(
                "{} weights for {} assets",
                w.len(),
                self.d
            )));
        }
        Ok((0..self.n)
            .map(|i| self.row(i).iter().zip(w).map(|(x, w)| x * w).sum())
            .collect())
    }
}

fn is_missing(f: &str) -> bool {
    matches!(
        f.to_ascii_lowercase().as_str(),
        "" | "na" | "nan" | "n/a" | "null" | "none"
    )
}

fn csv_error(e: csv::Error, fallback_line: u64) -> Error {
    let line = e.position().map_or(fallback_line, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Parse {
            line,
            msg: format!("{kind:?}"),
        },
    }
}

/// Smallest sample value `x` with empirical CDF `F_n(x) >= q`.
pub fn empirical_var(series: &[f64], q: f64) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::OutOfRange {
            what: "q",
            value: q,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let mut s = series.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    // guard against q*n landing a hair above an integer
    let k = ((q * n as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(s[k.min(n) - 1])
}

/// How exceedance thresholds are chosen when estimating coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    /// One common threshold: the `q0`-quantile of asset 1.
    #[default]
    Reference,
    /// Each asset thresholded at its own `q0`-quantile.
    PerAsset,
}

/// Raw coefficient estimates with the counts behind them.
#[derive(Debug, Clone)]
pub struct ThetaEstimate {
    pub family: SubsetFamily,
    pub thresholds: Vec<f64>,
    /// Number of exceedances of the reference asset.
    pub reference_count: usize,
}

/// Self-normalized estimator
/// `θ̂(J) = #{i : max_{j∈J} X_j(i) > x_j} / #{i : X_1(i) > x_1}`.
///
/// Each observation contributes an indicator vector, so the estimates always
/// satisfy the consistency inequalities.
pub fn estimate_extremal_coeffs(
    panel: &LossPanel,
    q0: f64,
    sets: &[SubsetId],
    rule: ThresholdRule,
) -> Result<ThetaEstimate> {
    check_q0(q0)?;
    let d = panel.dim();
    if let Some(s) = sets.iter().find(|s| s.dim() != d) {
        return Err(Error::InvalidInput(format!(
            "subset {s} has dimension {} but the panel has {d} assets",
            s.dim()
        )));
    }
    let thresholds: Vec<f64> = match rule {
        ThresholdRule::Reference => {
            let x = empirical_var(&panel.column(0), q0)?;
            vec![x; d]
        }
        ThresholdRule::PerAsset => (0..d)
            .map(|j| empirical_var(&panel.column(j), q0))
            .collect::<Result<_>>()?,
    };
    let mut hist: HashMap<u32, u64> = HashMap::new();
    for i in 0..panel.rows() {
        let mask = panel
            .row(i)
            .iter()
            .zip(&thresholds)
            .enumerate()
            .filter(|(_, (x, t))| x > t)
            .fold(0u32, |m, (j, _)| m | (1 << j));
        if mask != 0 {
            *hist.entry(mask).or_insert(0) += 1;
        }
    }
    let mut hist: Vec<(u32, u64)> = hist.into_iter().collect();
    hist.sort_unstable();
    let count = |j: u32| -> u64 { hist.iter().filter(|(m, _)| m & j != 0).map(|(_, c)| c).sum() };
    let denom = count(1);
    if denom == 0 {
        return Err(Error::NoExceedances);
    }
    let entries: Vec<(SubsetId, f64)> = sets
        .iter()
        .map(|s| (*s, count(s.mask()) as f64 / denom as f64))
        .collect();
    let family = SubsetFamily::raw(d, entries)?;
    if d <= MAX_ENUM_DIM {
        let v = check_consistency(&ExtremalCoefficients::from(&family));
        if !v.is_empty() {
            return Err(Error::NumericalFailure(format!(
                "estimated coefficients violate {} consistency inequalities",
                v.len()
            )));
        }
    }
    Ok(ThetaEstimate {
        family,
        thresholds,
        reference_count: denom as usize,
    })
}

/// Singletons, all pairs, and the full set.
pub fn bivariate_plus_full_sets(d: usize) -> Result<Vec<SubsetId>> {
    let mut sets = Vec::new();
    for i in 0..d {
        sets.push(SubsetId::singleton(i, d)?);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            sets.push(SubsetId::new((1 << i) | (1 << j), d)?);
        }
    }
    if d > 2 {
        sets.push(SubsetId::full(d)?);
    }
    sets.sort();
    Ok(sets)
}

fn check_q0(q0: f64) -> Result<()> {
    if !(q0 > 0.0 && q0 < 1.0) {
        return Err(Error::OutOfRange {
            what: "q0",
            value: q0,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(())
}

/// Generalized Pareto maximum-likelihood fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GpdFit {
    pub xi: f64,
    pub sigma: f64,
    pub se_xi: Option<f64>,
    pub se_sigma: Option<f64>,
    pub loglik: f64,
    pub n: usize,
}

/// Admissible tail-index range for the likelihood.
const XI_MIN: f64 = -0.5;
const XI_MAX: f64 = 1.0;

/// GPD log-likelihood `-n ln σ - (1 + 1/ξ) Σ ln(1 + ξ y/σ)`, with the
/// exponential limit at `ξ = 0`.
pub fn gpd_loglik(xi: f64, sigma: f64, y: &[f64]) -> f64 {
    if !(sigma > 0.0) {
        return f64::NEG_INFINITY;
    }
    let n = y.len() as f64;
    let mut acc = 0.0;
    for &v in y {
        let t = v / sigma;
        let z = xi * t;
        if z <= -1.0 {
            return f64::NEG_INFINITY;
        }
        let l1p = z.ln_1p();
        // ln(1+z)/ξ = t ln(1+z)/z, stable as ξ -> 0
        let ratio = if z.abs() < 1e-8 { t * (1.0 - z / 2.0) } else { t * l1p / z };
        acc += ratio + l1p;
    }
    -n * sigma.ln() - acc
}

/// `ξ(θ) = mean ln(1 + θ y)`, the inner maximizer for `θ = ξ/σ`.
fn xi_of_theta(theta: f64, y: &[f64]) -> f64 {
    y.iter().map(|v| (theta * v).ln_1p()).sum::<f64>() / y.len() as f64
}

/// Profile log-likelihood in `θ = ξ/σ`.
fn profile_theta(theta: f64, y: &[f64], mean: f64) -> f64 {
    let n = y.len() as f64;
    if theta.abs() < 1e-12 {
        return -n * mean.ln() - n;
    }
    let s: f64 = y.iter().map(|v| (theta * v).ln_1p()).sum();
    let scale = s / (n * theta);
    if !(scale > 0.0) || !s.is_finite() {
        return f64::NEG_INFINITY;
    }
    -n * scale.ln() - s - n
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol * (1.0 + a.abs() + b.abs()) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        c
    } else {
        d
    }
}

/// Grid search over `[a, b]` followed by golden-section refinement.
fn grid_golden_max(f: impl Fn(f64) -> f64, a: f64, b: f64, points: usize, tol: f64) -> f64 {
    let step = (b - a) / (points - 1) as f64;
    let (best, _) = (0..points)
        .map(|i| {
            let x = if i + 1 == points { b } else { a + step * i as f64 };
            (i, f(x))
        })
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let lo = a + step * best.saturating_sub(1) as f64;
    let hi = (a + step * (best + 1) as f64).min(b);
    golden_max(f, lo, hi, tol)
}

/// Root of the increasing function `g` on `[lo, hi]`.
fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Maximum-likelihood GPD fit to positive excesses over a threshold.
///
/// Maximizes the profile likelihood in `θ = ξ/σ` restricted to
/// `ξ ∈ (-0.5, 1)`; standard errors come from a finite-difference observed
/// information matrix.
pub fn fit_gpd(excesses: &[f64]) -> Result<GpdFit> {
    let n = excesses.len();
    if n < MIN_EXCEEDANCES {
        return Err(Error::InsufficientData {
            needed: MIN_EXCEEDANCES,
            got: n,
        });
    }
    if excesses.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidInput("excesses must be finite and non-negative".into()));
    }
    let ymax = excesses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ymin = excesses.iter().copied().fold(f64::INFINITY, f64::min);
    if ymax - ymin <= 1e-12 * ymax.abs().max(1e-300) {
        return Err(Error::DegenerateSample);
    }
    let mean = excesses.iter().sum::<f64>() / n as f64;
    let y = excesses;

    // ξ(θ) is increasing; map the ξ range to a θ range
    let theta_floor = -(1.0 - 1e-9) / ymax;
    let theta_lo = if xi_of_theta(theta_floor, y) > XI_MIN {
        theta_floor
    } else {
        bisect(|t| xi_of_theta(t, y) - XI_MIN, theta_floor, 0.0)
    };
    let mut cap = 1.0 / mean;
    while xi_of_theta(cap, y) < XI_MAX {
        cap *= 2.0;
        if !cap.is_finite() {
            return Err(Error::NonConvergence(0));
        }
    }
    let theta_hi = bisect(|t| xi_of_theta(t, y) - XI_MAX, 0.0, cap);

    let f = |t: f64| profile_theta(t, y, mean);
    let theta = grid_golden_max(f, theta_lo, theta_hi, 2001, 1e-12);
    let (xi, sigma) = if theta.abs() < 1e-12 {
        (0.0, mean)
    } else {
        let xi = xi_of_theta(theta, y);
        (xi, xi / theta)
    };
    if !(xi.is_finite() && sigma.is_finite() && sigma > 0.0) {
        return Err(Error::NonConvergence(2001));
    }
    let loglik = gpd_loglik(xi, sigma, y);
    let (se_xi, se_sigma) = standard_errors(xi, sigma, y);
    Ok(GpdFit {
        xi,
        sigma,
        se_xi,
        se_sigma,
        loglik,
        n,
    })
}

fn standard_errors(xi: f64, sigma: f64, y: &[f64]) -> (Option<f64>, Option<f64>) {
    let hx = 1e-4 * xi.abs().max(0.1);
    let hs = 1e-4 * sigma;
    let l = |a: f64, b: f64| gpd_loglik(a, b, y);
    let f0 = l(xi, sigma);
    let fxx = (l(xi + hx, sigma) - 2.0 * f0 + l(xi - hx, sigma)) / (hx * hx);
    let fss = (l(xi, sigma + hs) - 2.0 * f0 + l(xi, sigma - hs)) / (hs * hs);
    let fxs = (l(xi + hx, sigma + hs) - l(xi + hx, sigma - hs) - l(xi - hx, sigma + hs)
        + l(xi - hx, sigma - hs))
        / (4.0 * hx * hs);
    // observed information is -H; invert the 2x2 matrix
    let (a, b, c) = (-fxx, -fxs, -fss);
    let det = a * c - b * b;
    if !(det > 0.0 && a > 0.0 && det.is_finite()) {
        return (None, None);
    }
    let vx = c / det;
    let vs = a / det;
    (
        (vx > 0.0).then(|| vx.sqrt()),
        (vs > 0.0).then(|| vs.sqrt()),
    )
}

/// Per-asset GPD tails sharing one tail index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailModel {
    pub xi: f64,
    pub sigma: Vec<f64>,
    /// Exceedance probability of the thresholds.
    pub p0: f64,
    pub thresholds: Vec<f64>,
    pub loglik: f64,
}

impl TailModel {
    pub fn new(xi: f64, sigma: Vec<f64>, p0: f64, thresholds: Vec<f64>) -> Result<Self> {
        if !(xi.is_finite()) {
            return Err(Error::InvalidXi(xi));
        }
        if sigma.is_empty() || sigma.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidInput("scales must be positive".into()));
        }
        if !(p0 > 0.0 && p0 < 1.0) {
            return Err(Error::OutOfRange {
                what: "p0",
                value: p0,
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(TailModel {
            xi,
            sigma,
            p0,
            thresholds,
            loglik: f64::NAN,
        })
    }
}

/// Excesses of column `j` over its `q0`-quantile.
pub fn column_excesses(panel: &LossPanel, j: usize, q0: f64) -> Result<(f64, Vec<f64>)> {
    let col = panel.column(j);
    let u = empirical_var(&col, q0)?;
    Ok((u, col.iter().filter(|x| **x > u).map(|x| x - u).collect()))
}

/// Joint GPD fit with a common `ξ` and free scales, each asset thresholded
/// at its own `q0`-quantile.
pub fn common_xi_fit(panel: &LossPanel, q0: f64) -> Result<TailModel> {
    check_q0(q0)?;
    let d = panel.dim();
    let mut thresholds = Vec::with_capacity(d);
    let mut samples = Vec::with_capacity(d);
    for j in 0..d {
        let (u, y) = column_excesses(panel, j, q0)?;
        if y.len() < MIN_EXCEEDANCES {
            return Err(Error::InsufficientData {
                needed: MIN_EXCEEDANCES,
                got: y.len(),
            });
        }
        let ymax = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);
        if ymax - ymin <= 1e-12 * ymax.abs().max(1e-300) {
            return Err(Error::DegenerateSample);
        }
        thresholds.push(u);
        samples.push(y);
    }

    let profile = |xi: f64| -> (f64, Vec<f64>) {
        let fits: Vec<(f64, f64)> = samples.par_iter().map(|y| best_sigma(xi, y)).collect();
        // summed in asset order so the result does not depend on threads
        let total = fits.iter().map(|f| f.1).sum();
        (total, fits.into_iter().map(|f| f.0).collect())
    };
    let xi = grid_golden_max(|x| profile(x).0, XI_MIN + 1e-6, XI_MAX - 1e-6, 149, 1e-10);
    let (loglik, sigma) = profile(xi);
    if !loglik.is_finite() {
        return Err(Error::NonConvergence(149));
    }
    Ok(TailModel {
        xi,
        sigma,
        p0: 1.0 - q0,
        thresholds,
        loglik,
    })
}

/// `argmax_σ l(ξ, σ)`: the unique root of the score equation
/// `n = (1+ξ) Σ y_i/(σ + ξ y_i)`, whose right side decreases in `σ`.
fn best_sigma(xi: f64, y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let ymax = y.iter().copied().fold(0.0, f64::max);
    let g = |s: f64| n - (1.0 + xi) * y.iter().map(|v| v / (s + xi * v)).sum::<f64>();
    // support requires σ > -ξ max(y) when ξ < 0
    let lo = if xi < 0.0 { -xi * ymax * (1.0 + 1e-12) } else { 1e-12 * mean };
    let mut hi = 2.0 * mean * (1.0 + xi.abs());
    while g(hi) < 0.0 && hi.is_finite() {
        hi *= 2.0;
    }
    let s = bisect(g, lo, hi);
    (s, gpd_loglik(xi, s, y))
}

/// `w_j = σ_j^{-1} / Σ_k σ_k^{-1}`.
pub fn scale_balanced_weights(sigma: &[f64]) -> Result<Vec<f64>> {
    if sigma.is_empty() || sigma.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidInput("scales must be positive and finite".into()));
    }
    let total: f64 = sigma.iter().map(|s| 1.0 / s).sum();
    Ok(sigma.iter().map(|s| (1.0 / s) / total).collect())
}

/// GP-tail approximation of `VaR_q(w_1 X_1)`: `w_1 (σ_1/ξ) ((1-q)/p0)^{-ξ}`.
pub fn baseline_var_gp(model: &TailModel, w1: f64, q: f64) -> Result<f64> {
    crate::error::check_xi(model.xi)?;
    let level = 1.0 - model.p0;
    if !(q < 1.0) || q < level - 1e-12 {
        return Err(Error::QuantileBelowThreshold { q, threshold: level });
    }
    let s1 = model.sigma[0];
    Ok(w1 * (s1 / model.xi) * ((1.0 - q) / model.p0).powf(-model.xi))
}

/// Return levels `chi × baseline` for each horizon in years.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnLevelTable {
    pub labels: Vec<String>,
    pub rows: Vec<ReturnLevelRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnLevelRow {
    pub years: f64,
    pub q: f64,
    pub baseline: f64,
    /// One value per label.
    pub levels: Vec<f64>,
}

/// Evaluates `chi · VaR_q(w_1 X_1)` at `q = 1 - 1/(trading_days · m)`.
pub fn return_level_bounds(
    model: &TailModel,
    w1: f64,
    chi: &[(String, f64)],
    years: &[f64],
    trading_days: f64,
) -> Result<ReturnLevelTable> {
    let rows = years
        .iter()
        .map(|&m| {
            if !(m > 0.0) {
                return Err(Error::InvalidInput(format!("horizon must be positive, got {m}")));
            }
            let q = 1.0 - 1.0 / (trading_days * m);
            let baseline = baseline_var_gp(model, w1, q)?;
            Ok(ReturnLevelRow {
                years: m,
                q,
                baseline,
                levels: chi.iter().map(|(_, c)| c * baseline).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReturnLevelTable {
        labels: chi.iter().map(|(l, _)| l.clone()).collect(),
        rows,
    })
}
