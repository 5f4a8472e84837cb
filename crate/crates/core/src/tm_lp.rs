//! The Tawn–Molchanov linear program for the sharp lower bound on `rho`.
//!
//! For balanced weights the infimum of `rho` over all spectral measures with
//! prescribed coefficients `c_J` is attained by a measure supported on the
//! points `1_K/|K|`. Writing its masses as `|K| β_K` turns the problem into
//!
//! ```text
//! minimize   Σ_K |K|^{1/xi} β_K
//! subject to Σ_K 1{K ∩ J ≠ ∅} β_K = c_J  for every J in the family,  β >= 0.
//! ```
//!
//! The LP duals are the multipliers `x_J` of an optimality certificate.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::closed_form::{chi_from_rho, lower_bin, lower_lambda, upper_bound_u, BoundsResult, Method};
use crate::error::{check_xi_unit, Error, Result};
use crate::lp::{self, LpStatus, StandardLp};
use crate::measure::{Atom, CertificateSense, DiscreteSpectralMeasure, KktCertificate};
use crate::subset::{all_subsets, full_mask, MobiusWeights, SubsetFamily, SubsetId, MAX_ENUM_DIM};

/// Default largest dimension for the dense LP (`2^14 - 1` columns).
pub const DEFAULT_MAX_DIM: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TmLpConfig {
    /// Column cap; at most 20.
    pub max_dim: usize,
}

impl Default for TmLpConfig {
    fn default() -> Self {
        TmLpConfig {
            max_dim: DEFAULT_MAX_DIM,
        }
    }
}

impl TmLpConfig {
    pub fn with_max_dim(max_dim: usize) -> Result<Self> {
        if max_dim == 0 || max_dim > MAX_ENUM_DIM {
            return Err(Error::OutOfRange {
                what: "max_dim",
                value: max_dim as f64,
                lo: 1.0,
                hi: MAX_ENUM_DIM as f64,
            });
        }
        Ok(TmLpConfig { max_dim })
    }
}

/// The LP together with the subset attached to each column.
#[derive(Debug, Clone)]
pub struct TmLp {
    pub lp: StandardLp,
    pub columns: Vec<SubsetId>,
    pub rows: Vec<SubsetId>,
}

/// Builds the LP with the default column cap.
pub fn build_tm_lp(family: &SubsetFamily, xi: f64) -> Result<TmLp> {
    build_tm_lp_with(family, xi, &TmLpConfig::default())
}

pub fn build_tm_lp_with(family: &SubsetFamily, xi: f64, config: &TmLpConfig) -> Result<TmLp> {
    check_xi_unit(xi)?;
    let d = family.dim();
    if d > config.max_dim {
        return Err(Error::DimensionTooLarge {
            d,
            cap: config.max_dim,
        });
    }
    let columns = all_subsets(d)?;
    let rows: Vec<SubsetId> = family.sets().collect();
    let c = columns
        .iter()
        .map(|k| (k.len() as f64).powf(1.0 / xi))
        .collect();
    let a = DMatrix::from_fn(rows.len(), columns.len(), |i, j| {
        if rows[i].intersects(columns[j]) {
            1.0
        } else {
            0.0
        }
    });
    let lp = StandardLp::new(c, a, family.targets())?;
    Ok(TmLp { lp, columns, rows })
}

/// Optimal value, Möbius weights, measure and certificate of the lower bound.
#[derive(Debug, Clone, Serialize)]
pub struct TmLowerBound {
    pub rho: f64,
    pub chi: f64,
    #[serde(skip)]
    pub weights: MobiusWeights,
    pub measure: DiscreteSpectralMeasure,
    pub certificate: KktCertificate,
}

pub fn solve_lower_bound(family: &SubsetFamily, xi: f64) -> Result<TmLowerBound> {
    solve_lower_bound_with(family, xi, &TmLpConfig::default())
}

/// Solves the lower-bound LP for a standardized family.
pub fn solve_lower_bound_with(family: &SubsetFamily, xi: f64, config: &TmLpConfig) -> Result<TmLowerBound> {
    family.validate()?;
    let tm = build_tm_lp_with(family, xi, config)?;
    let sol = lp::solve(&tm.lp)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(Error::Infeasible),
        LpStatus::Unbounded => return Err(Error::Unbounded),
    }
    let d = family.dim();
    let weights = MobiusWeights::from_pairs(d, tm.columns.iter().copied().zip(sol.x.iter().copied()))?;
    let measure = DiscreteSpectralMeasure::tawn_molchanov(d, weights.support())?;
    let certificate = KktCertificate {
        sense: CertificateSense::Lower,
        x: tm.rows.iter().copied().zip(sol.duals.iter().copied()).collect(),
        measure: measure.clone(),
    };
    Ok(TmLowerBound {
        rho: sol.objective,
        chi: chi_from_rho(sol.objective, xi),
        weights,
        measure,
        certificate,
    })
}

/// Lower bound from the LP with the best available upper bound: `U(theta_D)`
/// when the family constrains the full set, and the Fréchet bound otherwise.
///
/// Adding constraints only shrinks the feasible set, so `U(theta_D)` stays
/// valid for any family containing `D`, though it need not be sharp.
pub fn tm_bounds(family: &SubsetFamily, xi: f64, config: &TmLpConfig) -> Result<BoundsResult> {
    let lower = solve_lower_bound_with(family, xi, config)?;
    let d = family.dim();
    let upper = match SubsetId::full(d).ok().and_then(|s| family.get(s)) {
        Some(theta) if d > 1 => upper_bound_u(d, xi, theta)?,
        _ => (d as f64).powf(1.0 / xi),
    };
    Ok(BoundsResult::new(lower.rho, upper, xi, Method::TmLp)?.with_certificate(lower.certificate))
}

/// The vector `x̃_J = Σ_{L ⊆ J} (-1)^{|L|+1} |J^c ∪ L|^{1/xi}` for every
/// non-empty `J`, indexed by mask (entry 0 unused).
///
/// It satisfies `Σ_J max_{j∈J} u_j x̃_J = Σ_j (d+1-j)^{1/xi} (u_(j) - u_(j-1))`
/// for the ascending order statistics of `u`.
pub fn tm_dual_vector(d: usize, xi: f64) -> Result<Vec<f64>> {
    crate::error::check_xi(xi)?;
    if d == 0 || d > 15 {
        return Err(Error::DimensionTooLarge { d, cap: 15 });
    }
    let p = 1.0 / xi;
    let pow: Vec<f64> = (0..=d).map(|n| (n as f64).powf(p)).collect();
    let full = full_mask(d);
    let mut out = vec![0.0; 1usize << d];
    for j in 1..=full {
        let comp = (full & !j).count_ones();
        let mut acc = 0.0;
        let mut l = j;
        loop {
            let sign = if l.count_ones() % 2 == 0 { -1.0 } else { 1.0 };
            acc += sign * pow[(comp + l.count_ones()) as usize];
            if l == 0 {
                break;
            }
            l = (l - 1) & j;
        }
        out[j as usize] = acc;
    }
    Ok(out)
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn single_dvariate_family(d: usize, theta: f64) -> Result<SubsetFamily> {
    SubsetFamily::single_dvariate(d, theta)
}

/// Explicit lower-bound certificate for singletons plus `theta(D) = theta`.
///
/// The optimal measure spreads `λ d` uniformly over sets of size `k` and
/// `(1-λ) d` over sets of size `k+1`, with `k` and `λ` as in
/// [`crate::closed_form::lower_bound_l`]. Needs `d <= 20`.
pub fn dvariate_lower_certificate(d: usize, xi: f64, theta: f64) -> Result<KktCertificate> {
    check_xi_unit(xi)?;
    let family = single_dvariate_family(d, theta)?;
    if d > MAX_ENUM_DIM {
        return Err(Error::DimensionTooLarge { d, cap: MAX_ENUM_DIM });
    }
    let k = lower_bin(d, theta);
    let lam = lower_lambda(d, k, theta);
    let df = d as f64;
    let (kf, k1) = (k as f64, k as f64 + 1.0);
    let p = 1.0 / xi;
    let xj = k1.powf(p) - kf.powf(p);
    let xd = k1 * kf.powf(p) - kf * k1.powf(p);
    let per_k = lam * df / binomial(d, k);
    let per_k1 = (1.0 - lam) * df / binomial(d, k + 1);

    let mut atoms = Vec::new();
    for mask in 1..=full_mask(d) {
        let size = mask.count_ones() as usize;
        let h = if size == k {
            per_k
        } else if size == k + 1 {
            per_k1
        } else {
            continue;
        };
        if h > 0.0 {
            let u = (0..d)
                .map(|j| if mask & (1 << j) != 0 { 1.0 / size as f64 } else { 0.0 })
                .collect();
            atoms.push(Atom { u, h });
        }
    }
    let x = family
        .sets()
        .map(|s| (s, if s.is_singleton() { xj } else { xd }))
        .collect();
    Ok(KktCertificate {
        sense: CertificateSense::Lower,
        x,
        measure: DiscreteSpectralMeasure::new(d, atoms)?,
    })
}

/// Explicit upper-bound certificate for singletons plus `theta(D) = theta`,
/// `1 <= theta < d`.
///
/// The optimal measure has `d` unit atoms, atom `k` putting `theta/d` on
/// asset `k` and spreading the rest evenly. The multipliers are the tangent
/// of the per-atom value `U_1(z) = U(z)/d` at `z = theta`.
pub fn dvariate_upper_certificate(d: usize, xi: f64, theta: f64) -> Result<KktCertificate> {
    check_xi_unit(xi)?;
    let family = single_dvariate_family(d, theta)?;
    let df = d as f64;
    if theta >= df {
        return Err(Error::OutOfRange {
            what: "theta",
            value: theta,
            lo: 1.0,
            hi: df,
        });
    }
    let c = (df - 1.0).powf(1.0 - xi);
    let s = theta.powf(xi) + c * (df - theta).powf(xi);
    let u1 = s.powf(1.0 / xi) / df;
    let du1 = s.powf(1.0 / xi - 1.0) * (theta.powf(xi - 1.0) - c * (df - theta).powf(xi - 1.0)) / df;
    let xj = u1 - theta * du1;
    let xd = df * du1;

    let off = (df - theta) / (df * (df - 1.0));
    let atoms = (0..d)
        .map(|k| {
            let mut u = vec![off; d];
            u[k] = theta / df;
            Atom { u, h: 1.0 }
        })
        .collect();
    let x = family
        .sets()
        .map(|s| (s, if s.is_singleton() { xj } else { xd }))
        .collect();
    Ok(KktCertificate {
        sense: CertificateSense::Upper,
        x,
        measure: DiscreteSpectralMeasure::new(d, atoms)?,
    })
}
