//! Market-plus-sectors model: a completely dependent market factor with
//! share `β` mixed with independent sectors on disjoint blocks.
//!
//! The spectral measure decomposes as
//! `H = β H_mkt + (1-β) Σ_i H_i`, so both `rho` and every extremal
//! coefficient decompose the same way. Each sector then contributes its own
//! single-constraint closed-form bound.

use serde::{Deserialize, Serialize};

use crate::closed_form::{lower_bound_l, upper_bound_u, BoundsResult, Method};
use crate::error::{check_xi_unit, Error, Result};
use crate::measure::{Atom, DiscreteSpectralMeasure};
use crate::subset::{full_mask, SubsetId};
use crate::tm_lp::{dvariate_lower_certificate, dvariate_upper_certificate};

/// Coefficient tolerance for range checks.
const TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Lower,
    Upper,
}

/// Disjoint blocks covering `{1..d}` with market share and sector coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorPartition {
    d: usize,
    blocks: Vec<SubsetId>,
    beta: f64,
    sector_thetas: Vec<f64>,
}

impl SectorPartition {
    pub fn new(d: usize, blocks: Vec<SubsetId>, beta: f64, sector_thetas: Vec<f64>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidInput("partition needs at least one block".into()));
        }
        if blocks.len() != sector_thetas.len() {
            return Err(Error::InvalidInput(format!(
                "{} blocks but {} sector coefficients",
                blocks.len(),
                sector_thetas.len()
            )));
        }
        let mut seen = 0u32;
        for b in &blocks {
            if b.dim() != d {
                return Err(Error::InvalidInput(format!("block {b} has the wrong dimension")));
            }
            if seen & b.mask() != 0 {
                return Err(Error::InvalidInput(format!("block {b} overlaps another block")));
            }
            seen |= b.mask();
        }
        if seen != full_mask(d) {
            return Err(Error::InvalidInput("blocks do not cover every asset".into()));
        }
        check_beta(beta)?;
        for (b, t) in blocks.iter().zip(&sector_thetas) {
            check_sector_theta(*t, b.len())?;
        }
        Ok(SectorPartition {
            d,
            blocks,
            beta,
            sector_thetas,
        })
    }

    /// Blocks given as lists of 1-based indices.
    pub fn from_indices(blocks: &[Vec<usize>], beta: f64, sector_thetas: Vec<f64>) -> Result<Self> {
        let d: usize = blocks.iter().map(Vec::len).sum();
        let ids = blocks
            .iter()
            .map(|b| SubsetId::from_indices(b, d))
            .collect::<Result<Vec<_>>>()?;
        SectorPartition::new(d, ids, beta, sector_thetas)
    }

    /// Builds a partition from portfolio-level coefficients `c_0 = θ(D)` and
    /// `c_i = θ(J_i)` via [`solve_beta`].
    pub fn from_coefficients(d: usize, blocks: Vec<SubsetId>, c0: f64, ci: &[f64]) -> Result<Self> {
        let sizes: Vec<usize> = blocks.iter().map(|b| b.len()).collect();
        let (beta, thetas) = solve_beta(c0, ci, &sizes)?;
        SectorPartition::new(d, blocks, beta, thetas)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn blocks(&self) -> &[SubsetId] {
        &self.blocks
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn sector_thetas(&self) -> &[f64] {
        &self.sector_thetas
    }

    /// Portfolio-level `θ(J_i) = β + (1-β) θ_i`.
    pub fn block_coefficients(&self) -> Vec<f64> {
        self.sector_thetas
            .iter()
            .map(|t| self.beta + (1.0 - self.beta) * t)
            .collect()
    }

    /// Portfolio-level `θ(D) = β + (1-β) Σ_i θ_i`.
    pub fn overall_coefficient(&self) -> f64 {
        self.beta + (1.0 - self.beta) * self.sector_thetas.iter().sum::<f64>()
    }

    /// Measure attaining the composite bound on `side`.
    pub fn measure(&self, xi: f64, side: Side) -> Result<DiscreteSpectralMeasure> {
        composite_measure(self, xi, side)
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0 && beta < 1.0) {
        return Err(Error::OutOfRange {
            what: "beta",
            value: beta,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(())
}

fn check_sector_theta(theta: f64, size: usize) -> Result<()> {
    let hi = size as f64;
    if !(theta >= 1.0 - TOL && theta <= hi + TOL) {
        return Err(Error::OutOfRange {
            what: "sector theta",
            value: theta,
            lo: 1.0,
            hi,
        });
    }
    Ok(())
}

/// `θ_i = (θ(J_i) - β)/(1 - β)` for a block of `size` assets.
pub fn sector_theta_from_portfolio(theta_j: f64, beta: f64, size: usize) -> Result<f64> {
    check_beta(beta)?;
    let t = (theta_j - beta) / (1.0 - beta);
    check_sector_theta(t, size)?;
    Ok(t.clamp(1.0, size as f64))
}

/// Recovers `β = (Σ c_i - c_0)/(k - 1)` and the sector coefficients.
pub fn solve_beta(c0: f64, ci: &[f64], sizes: &[usize]) -> Result<(f64, Vec<f64>)> {
    let k = ci.len();
    if k < 2 {
        return Err(Error::InvalidInput("recovering beta needs at least two sectors".into()));
    }
    if sizes.len() != k {
        return Err(Error::InvalidInput(format!("{k} coefficients but {} block sizes", sizes.len())));
    }
    let beta = (ci.iter().sum::<f64>() - c0) / (k - 1) as f64;
    // round-off from the subtraction
    let beta = if beta < 0.0 && beta > -TOL { 0.0 } else { beta };
    check_beta(beta)?;
    let thetas = ci
        .iter()
        .zip(sizes)
        .map(|(c, s)| sector_theta_from_portfolio(*c, beta, *s))
        .collect::<Result<Vec<_>>>()?;
    Ok((beta, thetas))
}

/// Single-constraint bound for one block; a single asset contributes 1.
fn block_bound(size: usize, xi: f64, theta: f64, side: Side) -> Result<f64> {
    if size == 1 {
        return Ok(1.0);
    }
    let theta = theta.clamp(1.0, size as f64);
    match side {
        Side::Lower => lower_bound_l(size, xi, theta),
        Side::Upper => upper_bound_u(size, xi, theta),
    }
}

/// `β d^{1/ξ} + (1-β) Σ_i B(d_i, ξ, θ_i)` with `B` the lower or upper
/// single-constraint bound.
pub fn composite_bound(partition: &SectorPartition, xi: f64, side: Side) -> Result<f64> {
    check_xi_unit(xi)?;
    let d = partition.dim() as f64;
    let sectors = partition
        .blocks
        .iter()
        .zip(&partition.sector_thetas)
        .map(|(b, t)| block_bound(b.len(), xi, *t, side))
        .sum::<Result<f64>>()?;
    Ok(partition.beta * d.powf(1.0 / xi) + (1.0 - partition.beta) * sectors)
}

/// The pure-market limit `β -> 1`: `d^{1/ξ}`.
pub fn market_limit(d: usize, xi: f64) -> Result<f64> {
    check_xi_unit(xi)?;
    Ok((d as f64).powf(1.0 / xi))
}

pub fn composite_bounds(partition: &SectorPartition, xi: f64) -> Result<BoundsResult> {
    let lo = composite_bound(partition, xi, Side::Lower)?;
    let hi = composite_bound(partition, xi, Side::Upper)?;
    BoundsResult::new(lo, hi, xi, Method::MktSectors)
}

/// Extremal measure of the composite model: the market atom plus each
/// sector's optimal measure padded with zeros outside its block.
pub fn composite_measure(partition: &SectorPartition, xi: f64, side: Side) -> Result<DiscreteSpectralMeasure> {
    check_xi_unit(xi)?;
    let d = partition.dim();
    let beta = partition.beta;
    let mut atoms = Vec::new();
    if beta > 0.0 {
        atoms.push(Atom {
            u: vec![1.0 / d as f64; d],
            h: beta * d as f64,
        });
    }
    for (block, &theta) in partition.blocks.iter().zip(&partition.sector_thetas) {
        let members: Vec<usize> = block.members().collect();
        let size = members.len();
        let local = if size == 1 {
            DiscreteSpectralMeasure::independent(1)?
        } else {
            let theta = theta.clamp(1.0, size as f64);
            match side {
                Side::Lower => dvariate_lower_certificate(size, xi, theta)?.measure,
                Side::Upper if theta >= size as f64 => DiscreteSpectralMeasure::independent(size)?,
                Side::Upper => dvariate_upper_certificate(size, xi, theta)?.measure,
            }
        };
        for a in local.atoms() {
            let mut u = vec![0.0; d];
            for (k, &j) in members.iter().enumerate() {
                u[j] = a.u[k];
            }
            atoms.push(Atom {
                u,
                h: (1.0 - beta) * a.h,
            });
        }
    }
    DiscreteSpectralMeasure::new(d, atoms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::evaluate_discrete_measure;

    fn two_blocks(beta: f64, t: (f64, f64)) -> SectorPartition {
        let b1: Vec<usize> = (1..=10).collect();
        let b2: Vec<usize> = (11..=20).collect();
        SectorPartition::from_indices(&[b1, b2], beta, vec![t.0, t.1]).unwrap()
    }

    #[test]
    fn sector_theta_examples() {
        assert_eq!(sector_theta_from_portfolio(3.0, 0.0, 5).unwrap(), 3.0);
        assert!((sector_theta_from_portfolio(4.5, 0.5, 10).unwrap() - 8.0).abs() < 1e-12);
        let t = sector_theta_from_portfolio(1.0, 1.0 - 1e-9, 4).unwrap();
        assert!((t - 1.0).abs() < 1e-6);
        assert!(sector_theta_from_portfolio(9.0, 0.5, 10).is_err());
    }

    #[test]
    fn solve_beta_examples() {
        let (beta, th) = solve_beta(7.0, &[4.5, 3.0], &[10, 10]).unwrap();
        assert!((beta - 0.5).abs() < 1e-12);
        assert!((th[0] - 8.0).abs() < 1e-12 && (th[1] - 5.0).abs() < 1e-12);
        let (beta, th) = solve_beta(5.0, &[2.0, 3.0], &[3, 4]).unwrap();
        assert_eq!(beta, 0.0);
        assert_eq!(th, vec![2.0, 3.0]);
        assert!(matches!(solve_beta(1.0, &[1.0, 1.0], &[2, 2]), Err(Error::OutOfRange { .. })));
        assert!(solve_beta(1.0, &[1.0], &[2]).is_err());
    }

    #[test]
    fn composite_examples() {
        let xi = 0.25;
        let p = two_blocks(0.5, (8.0, 5.0));
        let lo = composite_bound(&p, xi, Side::Lower).unwrap();
        let expect = 0.5 * 20f64.powf(4.0)
            + 0.5 * (lower_bound_l(10, xi, 8.0).unwrap() + lower_bound_l(10, xi, 5.0).unwrap());
        assert!((lo - expect).abs() < 1e-9 * expect);
        assert!((p.overall_coefficient() - 7.0).abs() < 1e-12);

        // full independence
        let p = two_blocks(0.0, (10.0, 10.0));
        let r = composite_bounds(&p, xi).unwrap();
        assert!((r.rho_lower - 20.0).abs() < 1e-9 && (r.rho_upper - 20.0).abs() < 1e-9);
        assert!((r.chi_lower - 20f64.powf(xi)).abs() < 1e-9);
        assert!((market_limit(20, xi).unwrap().powf(xi) - 20.0).abs() < 1e-9);
    }

    #[test]
    fn composite_measures_attain_bounds() {
        let xi = 0.25;
        let p = two_blocks(0.3, (8.0, 1.1));
        for side in [Side::Lower, Side::Upper] {
            let m = composite_measure(&p, xi, side).unwrap();
            let ev = evaluate_discrete_measure(&m, &vec![1.0; 20], xi, None).unwrap();
            let b = composite_bound(&p, xi, side).unwrap();
            assert!((ev.rho - b).abs() < 1e-9 * b, "{side:?}");
            assert!(m.marginals().iter().all(|v| (v - 1.0).abs() < 1e-12));
            let full = SubsetId::full(20).unwrap();
            assert!((m.theta(full) - p.overall_coefficient()).abs() < 1e-9);
            for (b, c) in p.blocks().iter().zip(p.block_coefficients()) {
                assert!((m.theta(*b) - c).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn partition_validation() {
        assert!(SectorPartition::from_indices(&[vec![1, 2], vec![2, 3]], 0.1, vec![1.5, 1.5]).is_err());
        assert!(SectorPartition::from_indices(&[vec![1, 2], vec![3]], 1.0, vec![1.5, 1.0]).is_err());
        assert!(SectorPartition::from_indices(&[vec![1, 2], vec![3]], 0.2, vec![2.5, 1.0]).is_err());
        assert!(SectorPartition::from_indices(&[vec![1, 2], vec![3]], 0.2, vec![1.5, 1.0]).is_ok());
    }
}
