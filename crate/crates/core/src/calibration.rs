//! Projection of raw extremal-coefficient estimates onto the valid cone.
//!
//! Solves `min |ĉ - Aβ|² + λ|β|²` over `β >= 0`, with `A_{J,K} = 1{J ∩ K ≠ ∅}`,
//! and then standardizes the fitted model so every singleton coefficient is
//! exactly 1.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lp::nnls;
use crate::subset::{
    all_subsets, full_mask, ExtremalCoefficients, MobiusWeights, SubsetFamily, SubsetId,
    MAX_ENUM_DIM,
};

/// Default ridge parameter.
pub const DEFAULT_LAMBDA: f64 = 1e-6;

/// Above this dimension only singletons, the full set and the family's own
/// sets are used as columns.
pub const FULL_COLUMN_DIM: usize = 14;

#[derive(Debug, Clone)]
pub struct Calibration {
    /// Calibrated targets on the input sets.
    pub family: SubsetFamily,
    /// Möbius weights of the standardized fitted model.
    pub weights: MobiusWeights,
    /// `|ĉ - Aβ|_2` before standardization.
    pub fit_residual: f64,
}

/// Projects `raw` onto the cone of valid coefficients and standardizes.
///
/// Standardization rescales asset `j` by its fitted marginal `m_j`, which
/// maps the fitted Tawn–Molchanov model to
/// `theta(J) = Σ_K β_K max_{j ∈ J ∩ K} 1/m_j`. This keeps the output valid
/// and reduces to dividing all targets by `m` when the marginals agree.
pub fn project_to_consistent(raw: &SubsetFamily, lambda: f64) -> Result<Calibration> {
    let d = raw.dim();
    if d > MAX_ENUM_DIM {
        return Err(Error::DimensionTooLarge { d, cap: MAX_ENUM_DIM });
    }
    if !raw.has_all_singletons() {
        return Err(Error::IncompleteInput(
            "calibration needs every singleton in the family".into(),
        ));
    }
    let columns = design_columns(raw)?;
    let rows: Vec<SubsetId> = raw.sets().collect();
    let a = DMatrix::from_fn(rows.len(), columns.len(), |i, j| {
        if rows[i].intersects(columns[j]) {
            1.0
        } else {
            0.0
        }
    });
    let target = raw.targets();
    let sol = nnls(&a, &target, lambda)?;
    let fitted = &a * nalgebra::DVector::from_column_slice(&sol.beta);
    let fit_residual = fitted
        .iter()
        .zip(&target)
        .map(|(f, t)| (f - t).powi(2))
        .sum::<f64>()
        .sqrt();

    let support: Vec<(SubsetId, f64)> = columns
        .iter()
        .copied()
        .zip(sol.beta.iter().copied())
        .filter(|(_, b)| *b > 0.0)
        .collect();
    let mut marg = vec![0.0; d];
    for (k, b) in &support {
        for j in k.members() {
            marg[j] += b;
        }
    }
    if let Some(j) = marg.iter().position(|m| *m <= 0.0) {
        return Err(Error::NumericalFailure(format!(
            "calibrated model puts no mass on asset {}",
            j + 1
        )));
    }
    let inv: Vec<f64> = marg.iter().map(|m| 1.0 / m).collect();
    let standardized = |j_mask: u32| -> f64 {
        support
            .iter()
            .filter(|(k, _)| k.mask() & j_mask != 0)
            .map(|(k, b)| {
                let common = k.mask() & j_mask;
                let top = (0..d)
                    .filter(|i| common & (1 << i) != 0)
                    .map(|i| inv[i])
                    .fold(0.0, f64::max);
                b * top
            })
            .sum()
    };

    let family = raw.map_targets(|s, _| {
        if s.is_singleton() {
            1.0
        } else {
            standardized(s.mask())
        }
    });
    let n = 1usize << d;
    let mut dense = vec![0.0; n];
    for m in 1..=full_mask(d) {
        dense[m as usize] = if m.count_ones() == 1 { 1.0 } else { standardized(m) };
    }
    let complete = ExtremalCoefficients::from_fn(d, |s| dense[s.mask() as usize])?;
    let mut weights = crate::subset::mobius_invert(&complete).or_else(|_| {
        // round-off can leave weights at -1e-16; clip them
        let mut w = crate::subset::mobius_invert_unchecked(&complete)?;
        w.clip_negative();
        Ok::<_, Error>(w)
    })?;
    weights.prune(1e-12 * d as f64);
    Ok(Calibration {
        family,
        weights,
        fit_residual,
    })
}

fn design_columns(raw: &SubsetFamily) -> Result<Vec<SubsetId>> {
    let d = raw.dim();
    if d <= FULL_COLUMN_DIM {
        return all_subsets(d);
    }
    let mut cols: Vec<SubsetId> = (0..d)
        .map(|j| SubsetId::singleton(j, d))
        .collect::<Result<_>>()?;
    cols.push(SubsetId::full(d)?);
    cols.extend(raw.sets().filter(|s| !s.is_singleton()));
    cols.sort();
    cols.dedup();
    Ok(cols)
}
