//! Exact samplers driven by a discrete spectral measure.
//!
//! Draws are generated in chunks of [`CHUNK`] rows. Chunk `c` uses a
//! ChaCha8 stream seeded with `seed` and stream number `c`, so the output
//! depends only on the inputs and never on the number of threads.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::error::{check_xi, Error, Result};
use crate::estimation::{empirical_var, LossPanel};
use crate::measure::DiscreteSpectralMeasure;
use crate::subset::SubsetId;

/// Rows per random stream.
pub const CHUNK: usize = 4096;
/// Truncation point for the Pareto radius.
pub const RADIUS_CAP: f64 = 1e15;

/// `θ(J) = Σ_k h_k max_{j∈J} u_jk`.
pub fn theta_of_measure(measure: &DiscreteSpectralMeasure, set: SubsetId) -> f64 {
    measure.theta(set)
}

fn chunked<F>(n: usize, d: usize, seed: u64, fill: F) -> Vec<f64>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    let mut data = vec![0.0; n * d];
    data.par_chunks_mut(CHUNK * d.max(1))
        .enumerate()
        .for_each(|(c, block)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            for row in block.chunks_mut(d) {
                fill(&mut rng, row);
            }
        });
    data
}

fn non_empty(measure: &DiscreteSpectralMeasure) -> Result<()> {
    if measure.total_mass() <= 0.0 {
        return Err(Error::InvalidInput("measure has no mass".into()));
    }
    Ok(())
}

fn to_panel(data: Vec<f64>, n: usize, d: usize) -> Result<LossPanel> {
    let rows = data.chunks(d).map(<[f64]>::to_vec).collect();
    debug_assert_eq!(data.len(), n * d);
    LossPanel::new(rows, LossPanel::default_labels(d))
}

/// Max-stable vectors `Y_j = max_k h_k u_jk / E_k` with unit Fréchet margins
/// when the measure has unit marginals.
pub fn sample_max_stable(measure: &DiscreteSpectralMeasure, n: usize, seed: u64) -> Result<LossPanel> {
    non_empty(measure)?;
    let d = measure.dim();
    let atoms = measure.atoms();
    let data = chunked(n, d, seed, |rng, row| {
        row.fill(0.0);
        for a in atoms {
            let e: f64 = Exp1.sample(rng);
            let s = a.h / e;
            for (y, u) in row.iter_mut().zip(&a.u) {
                let v = s * u;
                if v > *y {
                    *y = v;
                }
            }
        }
    });
    to_panel(data, n, d)
}

/// Regularly varying losses `X = (R u_K Σh)^ξ` with `R` standard Pareto and
/// atom `K` drawn with probability `h_K/Σh`.
///
/// Every margin then satisfies `P(X_j > x) = m_j x^{-1/ξ}` for
/// `x^{1/ξ} >= Σh`, where `m_j` is the measure's marginal mass.
pub fn sample_rv_portfolio(
    measure: &DiscreteSpectralMeasure,
    xi: f64,
    n: usize,
    seed: u64,
) -> Result<LossPanel> {
    check_xi(xi)?;
    non_empty(measure)?;
    let d = measure.dim();
    let atoms = measure.atoms();
    let total = measure.total_mass();
    let pick = WeightedIndex::new(atoms.iter().map(|a| a.h))
        .map_err(|e| Error::InvalidInput(format!("atom masses: {e}")))?;
    let data = chunked(n, d, seed, |rng, row| {
        let u: f64 = rng.random();
        let r = (1.0 / (1.0 - u)).min(RADIUS_CAP);
        let k = pick.sample(rng);
        for (x, uk) in row.iter_mut().zip(&atoms[k].u) {
            let z = r * uk * total;
            *x = if z > 0.0 { z.powf(xi) } else { 0.0 };
        }
    });
    to_panel(data, n, d)
}

/// Empirical `VaR_q(Σ_j w_j X_j) / VaR_q(X_1)`.
pub fn empirical_var_ratio(panel: &LossPanel, weights: &[f64], q: f64) -> Result<f64> {
    let s = panel.portfolio(weights)?;
    let num = empirical_var(&s, q)?;
    let den = empirical_var(&panel.column(0), q)?;
    if !(den > 0.0) {
        return Err(Error::NumericalFailure("reference VaR is not positive".into()));
    }
    Ok(num / den)
}
