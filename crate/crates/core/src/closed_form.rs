//! Exact bounds on the extreme-VaR functional `rho_w`.
//!
//! For balanced weights and a single constraint on the `d`-variate extremal
//! coefficient `theta`, both the sharp lower bound `L(theta)` and the sharp
//! upper bound `U(theta)` are explicit. Without constraints only the Fréchet
//! bounds apply.

use serde::Serialize;

use crate::error::{check_xi, check_xi_unit, Error, Result};
use crate::measure::KktCertificate;

/// How a pair of bounds was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Frechet,
    ClosedFormDvariate,
    TmLp,
    MktSectors,
}

/// Lower and upper bounds on `rho_w` and on the extreme-VaR ratio `chi = rho^xi`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsResult {
    pub rho_lower: f64,
    pub rho_upper: f64,
    pub xi: f64,
    pub chi_lower: f64,
    pub chi_upper: f64,
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<KktCertificate>,
}

impl BoundsResult {
    /// Builds a result; `chi` values are derived from `rho`.
    pub fn new(rho_lower: f64, rho_upper: f64, xi: f64, method: Method) -> Result<Self> {
        check_xi(xi)?;
        if !(rho_lower.is_finite() && rho_upper.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "non-finite bounds ({rho_lower}, {rho_upper})"
            )));
        }
        // tolerate round-off when the two bounds coincide analytically
        let tol = 1e-9 * rho_upper.abs().max(1.0);
        if rho_lower > rho_upper + tol {
            return Err(Error::NumericalFailure(format!(
                "lower bound {rho_lower} exceeds upper bound {rho_upper}"
            )));
        }
        let rho_lower = rho_lower.min(rho_upper);
        Ok(BoundsResult {
            rho_lower,
            rho_upper,
            xi,
            chi_lower: chi_from_rho(rho_lower, xi),
            chi_upper: chi_from_rho(rho_upper, xi),
            method,
            certificate: None,
        })
    }

    pub fn with_certificate(mut self, cert: KktCertificate) -> Self {
        self.certificate = Some(cert);
        self
    }
}

/// Universal bounds on `rho_w` over all spectral measures with unit marginals.
///
/// For `xi <= 1` these are `(sum w^{1/xi}, (sum w)^{1/xi})`; for `xi > 1` the
/// two expressions trade places.
pub fn frechet_bounds(weights: &[f64], xi: f64) -> Result<(f64, f64)> {
    check_xi(xi)?;
    check_weights(weights)?;
    let a: f64 = weights.iter().map(|w| w.powf(1.0 / xi)).sum();
    let b: f64 = weights.iter().sum::<f64>().powf(1.0 / xi);
    Ok(if xi <= 1.0 { (a, b) } else { (b, a) })
}

pub(crate) fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::InvalidInput("weight vector is empty".into()));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidInput(format!(
            "portfolio weights must be positive and finite, got {w}"
        )));
    }
    Ok(())
}

fn check_theta(d: usize, theta: f64) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidInput(format!(
            "closed-form bounds need d >= 2, got {d}"
        )));
    }
    let df = d as f64;
    if !(theta >= 1.0 && theta <= df) {
        return Err(Error::OutOfRange {
            what: "theta",
            value: theta,
            lo: 1.0,
            hi: df,
        });
    }
    Ok(())
}

/// Bin index `k` with `theta ∈ [d/(k+1), d/k)`, clamped to `1..=d-1`.
///
/// The top bin is closed at `theta = d` and `theta = 1` falls into `k = d-1`.
pub(crate) fn lower_bin(d: usize, theta: f64) -> usize {
    let k = (d as f64 / theta).floor() as usize;
    k.clamp(1, d - 1)
}

/// Mixing weight `lambda` with `theta/d = lambda/k + (1-lambda)/(k+1)`.
pub(crate) fn lower_lambda(d: usize, k: usize, theta: f64) -> f64 {
    let kf = k as f64;
    let a = 1.0 / kf;
    let b = 1.0 / (kf + 1.0);
    ((theta / d as f64 - b) / (a - b)).clamp(0.0, 1.0)
}

/// Sharp lower bound on `rho` for balanced weights given `theta(D) = theta`.
///
/// Piecewise linear in `theta`, interpolating `d k^{1/xi - 1}` at the points
/// `theta = d/k`.
pub fn lower_bound_l(d: usize, xi: f64, theta: f64) -> Result<f64> {
    check_xi_unit(xi)?;
    check_theta(d, theta)?;
    let k = lower_bin(d, theta);
    let lam = lower_lambda(d, k, theta);
    let e = 1.0 / xi - 1.0;
    let kf = k as f64;
    Ok(d as f64 * (lam * kf.powf(e) + (1.0 - lam) * (kf + 1.0).powf(e)))
}

/// Sharp upper bound `(theta^xi + (d-1)^{1-xi} (d-theta)^xi)^{1/xi}`.
pub fn upper_bound_u(d: usize, xi: f64, theta: f64) -> Result<f64> {
    check_xi_unit(xi)?;
    check_theta(d, theta)?;
    let df = d as f64;
    let rest = df - theta;
    // 0^xi is 0 at theta = d
    let tail = if rest <= 0.0 {
        0.0
    } else {
        (df - 1.0).powf(1.0 - xi) * rest.powf(xi)
    };
    Ok((theta.powf(xi) + tail).powf(1.0 / xi))
}

/// Both closed-form bounds as a [`BoundsResult`].
pub fn dvariate_bounds(d: usize, xi: f64, theta: f64) -> Result<BoundsResult> {
    let lo = lower_bound_l(d, xi, theta)?;
    let hi = upper_bound_u(d, xi, theta)?;
    BoundsResult::new(lo, hi, xi, Method::ClosedFormDvariate)
}

/// Fréchet bounds for balanced weights as a [`BoundsResult`].
pub fn frechet_result(d: usize, xi: f64) -> Result<BoundsResult> {
    let (lo, hi) = frechet_bounds(&vec![1.0; d], xi)?;
    BoundsResult::new(lo, hi, xi, Method::Frechet)
}

/// Rows `(theta, chi_L, chi_U)` on an evenly spaced grid over `[1, d]`.
pub fn bounds_curve(d: usize, xi: f64, points: usize) -> Result<Vec<(f64, f64, f64)>> {
    if points < 2 {
        return Err(Error::InvalidInput("a curve needs at least 2 points".into()));
    }
    let df = d as f64;
    (0..points)
        .map(|i| {
            let theta = if i + 1 == points {
                df
            } else {
                1.0 + (df - 1.0) * i as f64 / (points - 1) as f64
            };
            let lo = lower_bound_l(d, xi, theta)?;
            let hi = upper_bound_u(d, xi, theta)?;
            Ok((theta, chi_from_rho(lo, xi), chi_from_rho(hi, xi)))
        })
        .collect()
}

/// The extreme-VaR ratio `chi = rho^xi`.
pub fn chi_from_rho(rho: f64, xi: f64) -> f64 {
    rho.powf(xi)
}

/// Asymptotic bound on portfolio VaR: `chi` times the baseline VaR.
pub fn var_bound(chi: f64, baseline_var: f64) -> Result<f64> {
    if !(baseline_var >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "baseline VaR must be non-negative, got {baseline_var}"
        )));
    }
    Ok(chi * baseline_var)
}

#[cfg(test)]
mod tests {
    use super::*;

    const XI_T2: f64 = 0.1981;

    #[test]
    fn frechet_examples() {
        let (lo, hi) = frechet_bounds(&[1.0; 10], XI_T2).unwrap();
        assert!((chi_from_rho(lo, XI_T2) - 1.5782).abs() < 5e-4);
        assert!((chi_from_rho(hi, XI_T2) - 10.0).abs() < 1e-9);
        let (lo, hi) = frechet_bounds(&[1.0; 7], 1.0).unwrap();
        assert_eq!((lo, hi), (7.0, 7.0));
        let (lo, hi) = frechet_bounds(&[1.0; 4], 2.0).unwrap();
        assert!((lo - 2.0).abs() < 1e-12 && (hi - 4.0).abs() < 1e-12);
        assert!(matches!(frechet_bounds(&[1.0], 0.0), Err(Error::InvalidXi(_))));
        assert!(frechet_bounds(&[1.0, -1.0], 0.5).is_err());
    }

    #[test]
    fn dvariate_reference_values() {
        // independent evaluation of the bin-3 linear piece at theta = 3.15
        let xi = XI_T2;
        let e = 1.0 / xi - 1.0;
        let slope = (3f64.powf(e) - 4f64.powf(e)) / (1.0 / 3.0 - 0.25);
        let l = slope * (3.15 - 2.5) + 10.0 * 4f64.powf(e);
        let r = dvariate_bounds(10, xi, 3.15).unwrap();
        assert!((r.rho_lower - l).abs() < 1e-9 * l);
        assert!((r.chi_lower - 4.118325).abs() < 1e-6);
        let direct = 3.15f64.powf(xi) + 9f64.powf(1.0 - xi) * 6.85f64.powf(xi);
        assert!((r.chi_upper - direct).abs() < 1e-9);
        assert!((r.chi_upper - 9.7818).abs() < 5e-4);
        // the tabulated pair (4.1219, 9.7818) corresponds to theta = 3.1476 before rounding
        let r = dvariate_bounds(10, xi, 3.1476).unwrap();
        assert!((r.chi_lower - 4.1219).abs() < 5e-4);
        assert!((r.chi_upper - 9.7818).abs() < 5e-4);
    }

    #[test]
    fn two_dim_hand_values() {
        // k = 1 bin: L = 2(theta - 1) + 2^{1/xi}(2 - theta)
        let l = lower_bound_l(2, 0.5, 1.5).unwrap();
        assert!((l - 3.0).abs() < 1e-12);
        assert!((chi_from_rho(l, 0.5) - 3f64.sqrt()).abs() < 1e-12);
        let u = upper_bound_u(2, 0.5, 1.5).unwrap();
        assert!((chi_from_rho(u, 0.5) - (1.5f64.sqrt() + 0.5f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn upper_matches_two_atom_grid_search() {
        // theta(D) = sum_k h_k max_j u_jk with unit marginals; two atoms
        // u = (a, 1-a) and (1-a, a), each of mass 1, give theta = 2 max(a, 1-a).
        let xi = 0.5;
        let theta = 1.5;
        let a: f64 = theta / 2.0;
        let rho = 2.0 * (a.powf(xi) + (1.0 - a).powf(xi)).powf(1.0 / xi);
        let u = upper_bound_u(2, xi, theta).unwrap();
        assert!((rho - u).abs() < 1e-10);
    }

    #[test]
    fn endpoints() {
        for d in [2usize, 3, 10, 50] {
            for xi in [0.1, 0.4, 0.75, 1.0] {
                let full = (d as f64).powf(1.0 / xi);
                assert!((lower_bound_l(d, xi, 1.0).unwrap() - full).abs() < 1e-9 * full);
                assert!((upper_bound_u(d, xi, 1.0).unwrap() - full).abs() < 1e-9 * full);
                assert!((upper_bound_u(d, xi, d as f64).unwrap() - d as f64).abs() < 1e-9);
                assert!((lower_bound_l(d, xi, d as f64).unwrap() - d as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn xi_one_degenerates() {
        for th in [1.0, 2.2, 4.9, 7.0] {
            assert!((lower_bound_l(7, 1.0, th).unwrap() - 7.0).abs() < 1e-12);
            assert!((upper_bound_u(7, 1.0, th).unwrap() - 7.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(matches!(lower_bound_l(3, 0.5, 0.99), Err(Error::OutOfRange { .. })));
        assert!(matches!(upper_bound_u(3, 0.5, 3.01), Err(Error::OutOfRange { .. })));
        assert!(matches!(upper_bound_u(3, 1.5, 2.0), Err(Error::OutOfRange { .. })));
        assert!(lower_bound_l(1, 0.5, 1.0).is_err());
    }

    #[test]
    fn chi_and_var_examples() {
        assert!((chi_from_rho(10f64.powf(1.0 / XI_T2), XI_T2) - 10.0).abs() < 1e-9);
        assert_eq!(chi_from_rho(1.0, 0.3), 1.0);
        assert!((chi_from_rho(1268.4, XI_T2) - 4.12).abs() < 5e-3);
        assert_eq!(var_bound(1.0, 5.0).unwrap(), 5.0);
        assert!((var_bound(9.7818, 1.129).unwrap() - 11.0437).abs() < 1e-3);
        assert_eq!(var_bound(0.0, 5.0).unwrap(), 0.0);
        assert!(var_bound(1.0, -1.0).is_err());
    }

    #[test]
    fn curve_covers_interval() {
        let c = bounds_curve(10, 0.5, 200).unwrap();
        assert_eq!(c.len(), 200);
        assert_eq!(c[0].0, 1.0);
        assert_eq!(c[199].0, 10.0);
        assert!(c.iter().all(|(_, l, u)| l <= u));
    }
}
