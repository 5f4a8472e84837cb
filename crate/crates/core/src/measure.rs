//! Discrete spectral measures, the `rho_w` functional, and optimality
//! certificates for the moment problems over spectral measures.
//!
//! A spectral measure `H` on the unit simplex determines the extremal
//! coefficients `theta(J) = ∫ max_{j∈J} u_j H(du)` and the extreme-VaR
//! functional `rho_w = ∫ (Σ_j w_j u_j^xi)^{1/xi} H(du)`. Bounds on `rho_w`
//! come from optimizing over all `H` matching a set of coefficients. A
//! [`KktCertificate`] pairs a candidate measure with multipliers `x_J` and is
//! checked by [`verify_kkt`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_form::check_weights;
use crate::error::{check_xi, Error, Result};
use crate::subset::{SubsetFamily, SubsetId};

/// Simplex membership tolerance for atoms.
pub const SIMPLEX_TOL: f64 = 1e-12;
/// Tolerance on scaled KKT residuals.
pub const KKT_TOL: f64 = 1e-9;
/// Default number of low-discrepancy simplex points in [`verify_kkt`].
pub const DEFAULT_KKT_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub u: Vec<f64>,
    pub h: f64,
}

/// A finite measure `Σ_k h_k δ_{u_k}` on the unit `ℓ1` simplex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteSpectralMeasure {
    d: usize,
    atoms: Vec<Atom>,
}

impl DiscreteSpectralMeasure {
    pub fn new(d: usize, atoms: Vec<Atom>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidInput("measure dimension must be positive".into()));
        }
        for (k, a) in atoms.iter().enumerate() {
            if a.u.len() != d {
                return Err(Error::InvalidInput(format!(
                    "atom {k} has {} coordinates, expected {d}",
                    a.u.len()
                )));
            }
            if !(a.h >= 0.0 && a.h.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "atom {k} has invalid mass {}",
                    a.h
                )));
            }
            if a.u.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(Error::InvalidInput(format!(
                    "atom {k} has a negative or non-finite coordinate"
                )));
            }
            let s: f64 = a.u.iter().sum();
            if (s - 1.0).abs() > SIMPLEX_TOL * d as f64 {
                return Err(Error::InvalidInput(format!(
                    "atom {k} sums to {s}, not 1"
                )));
            }
        }
        Ok(DiscreteSpectralMeasure { d, atoms })
    }

    /// Point masses `|K|^{-1} 1_K` with mass `|K| β_K` for each weighted set.
    pub fn tawn_molchanov(d: usize, weights: impl IntoIterator<Item = (SubsetId, f64)>) -> Result<Self> {
        let atoms = weights
            .into_iter()
            .filter(|(_, b)| *b > 0.0)
            .map(|(k, b)| {
                let size = k.len() as f64;
                let mut u = vec![0.0; d];
                for j in k.members() {
                    u[j] = 1.0 / size;
                }
                Atom { u, h: size * b }
            })
            .collect();
        DiscreteSpectralMeasure::new(d, atoms)
    }

    /// Complete dependence: one atom at the barycentre with mass `d`.
    pub fn comonotone(d: usize) -> Result<Self> {
        DiscreteSpectralMeasure::new(
            d,
            vec![Atom {
                u: vec![1.0 / d as f64; d],
                h: d as f64,
            }],
        )
    }

    /// Independence: unit masses at the vertices.
    pub fn independent(d: usize) -> Result<Self> {
        let atoms = (0..d)
            .map(|j| {
                let mut u = vec![0.0; d];
                u[j] = 1.0;
                Atom { u, h: 1.0 }
            })
            .collect();
        DiscreteSpectralMeasure::new(d, atoms)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.h).sum()
    }

    /// `∫ u_j H(du)` per asset; unit marginals mean every entry is 1.
    pub fn marginals(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for a in &self.atoms {
            for (mj, uj) in m.iter_mut().zip(&a.u) {
                *mj += a.h * uj;
            }
        }
        m
    }

    /// `theta(J) = Σ_k h_k max_{j∈J} u_jk`.
    pub fn theta(&self, set: SubsetId) -> f64 {
        self.atoms.iter().map(|a| a.h * set.max_over(&a.u)).sum()
    }
}

impl<'de> Deserialize<'de> for DiscreteSpectralMeasure {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            d: usize,
            atoms: Vec<Atom>,
        }
        let raw = Raw::deserialize(deserializer)?;
        DiscreteSpectralMeasure::new(raw.d, raw.atoms).map_err(serde::de::Error::custom)
    }
}

/// `(Σ_j w_j u_j^xi)^{1/xi}`, the integrand of `rho_w`.
pub fn rho_integrand(u: &[f64], weights: &[f64], xi: f64) -> f64 {
    let s: f64 = u
        .iter()
        .zip(weights)
        .map(|(uj, wj)| if *uj > 0.0 { wj * uj.powf(xi) } else { 0.0 })
        .sum();
    s.powf(1.0 / xi)
}

/// Value of `rho_w` and the constraint residuals of a measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureEvaluation {
    pub rho: f64,
    /// `theta_H(J) - c_J` for each constraint, in family order.
    pub residuals: Vec<(SubsetId, f64)>,
}

impl MeasureEvaluation {
    pub fn max_abs_residual(&self) -> f64 {
        self.residuals.iter().map(|(_, r)| r.abs()).fold(0.0, f64::max)
    }
}

/// Evaluates `rho_w(H, xi)` and, when a family is given, the residuals
/// `Σ_k h_k max_{j∈J} u_jk - c_J`.
pub fn evaluate_discrete_measure(
    measure: &DiscreteSpectralMeasure,
    weights: &[f64],
    xi: f64,
    family: Option<&SubsetFamily>,
) -> Result<MeasureEvaluation> {
    check_xi(xi)?;
    check_weights(weights)?;
    if weights.len() != measure.dim() {
        return Err(Error::InvalidInput(format!(
            "{} weights for a measure of dimension {}",
            weights.len(),
            measure.dim()
        )));
    }
    let rho = measure
        .atoms()
        .iter()
        .map(|a| a.h * rho_integrand(&a.u, weights, xi))
        .sum();
    let residuals = match family {
        None => Vec::new(),
        Some(f) => {
            if f.dim() != measure.dim() {
                return Err(Error::InvalidInput("family and measure dimensions differ".into()));
            }
            f.entries()
                .iter()
                .map(|e| (e.set, measure.theta(e.set) - e.c))
                .collect()
        }
    };
    Ok(MeasureEvaluation { rho, residuals })
}

/// Direction of the inequality `a(u)·x` versus `b(u)` that dual multipliers
/// must satisfy on the whole simplex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateSense {
    /// Minimization: `a(u)·x <= b(u)`.
    Lower,
    /// Maximization: `a(u)·x >= b(u)`.
    Upper,
}

/// Candidate optimality certificate for a balanced moment problem.
///
/// `x` holds one multiplier per constraint set; `measure` is the optimizer.
/// With `a_J(u) = max_{j∈J} u_j` and `b(u) = (Σ_j u_j^xi)^{1/xi}` the measure
/// is optimal when it matches the constraints, `a·x = b` on its atoms, and
/// `a·x` stays on the correct side of `b` everywhere.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktCertificate {
    pub sense: CertificateSense,
    pub x: Vec<(SubsetId, f64)>,
    pub measure: DiscreteSpectralMeasure,
}

impl KktCertificate {
    /// `Σ_J c_J x_J`, the dual objective.
    pub fn dual_value(&self, family: &SubsetFamily) -> f64 {
        self.x
            .iter()
            .map(|(s, v)| v * family.get(*s).unwrap_or(f64::NAN))
            .sum()
    }

    fn ax(&self, u: &[f64]) -> (f64, f64) {
        self.x.iter().fold((0.0, 0.0), |(acc, mag), (s, v)| {
            let t = v * s.max_over(u);
            (acc + t, mag + t.abs())
        })
    }
}

/// Worst scaled residuals of a certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktReport {
    /// `max_J |∫ a_J dH - c_J| / max(1, c_J)`.
    pub dual_feasibility: f64,
    /// `max_k |a(u_k)·x - b(u_k)|` over atoms with positive mass, scaled.
    pub complementary_slackness: f64,
    /// Largest scaled violation of the sign condition over sample points.
    pub primal_feasibility: f64,
    pub samples: usize,
    pub certified: bool,
}

/// Checks the three optimality conditions of a certificate.
///
/// Primal feasibility is checked on `samples` Halton points mapped to the
/// simplex, all vertices, and all points `1_K/|K|` when `d <= 16`.
pub fn verify_kkt(
    family: &SubsetFamily,
    xi: f64,
    cert: &KktCertificate,
    samples: usize,
) -> Result<KktReport> {
    check_xi(xi)?;
    let d = family.dim();
    if cert.measure.dim() != d {
        return Err(Error::InvalidInput("certificate dimension differs from the family".into()));
    }
    if cert.x.len() != family.len() || cert.x.iter().any(|(s, _)| family.get(*s).is_none()) {
        return Err(Error::InvalidInput(
            "certificate multipliers must match the family sets".into(),
        ));
    }
    let ones = vec![1.0; d];

    let dual_feasibility = family
        .entries()
        .iter()
        .map(|e| (cert.measure.theta(e.set) - e.c).abs() / e.c.max(1.0))
        .fold(0.0, f64::max);

    let complementary_slackness = cert
        .measure
        .atoms()
        .iter()
        .filter(|a| a.h > 0.0)
        .map(|a| {
            let b = rho_integrand(&a.u, &ones, xi);
            let (ax, mag) = cert.ax(&a.u);
            (ax - b).abs() / scale(b, mag)
        })
        .fold(0.0, f64::max);

    let violation = |u: &[f64]| -> f64 {
        let b = rho_integrand(u, &ones, xi);
        let (ax, mag) = cert.ax(u);
        let gap = match cert.sense {
            CertificateSense::Lower => ax - b,
            CertificateSense::Upper => b - ax,
        };
        gap.max(0.0) / scale(b, mag)
    };

    let mut worst = (1..=samples)
        .into_par_iter()
        .map(|i| violation(&halton_simplex_point(i, d)))
        .reduce(|| 0.0, f64::max);
    let mut checked = samples;
    for j in 0..d {
        let mut u = vec![0.0; d];
        u[j] = 1.0;
        worst = worst.max(violation(&u));
        checked += 1;
    }
    if d <= 16 {
        let tm = (1u32..(1u32 << d))
            .into_par_iter()
            .map(|mask| {
                let size = mask.count_ones() as f64;
                let u: Vec<f64> = (0..d)
                    .map(|j| if mask & (1 << j) != 0 { 1.0 / size } else { 0.0 })
                    .collect();
                violation(&u)
            })
            .reduce(|| 0.0, f64::max);
        worst = worst.max(tm);
        checked += (1usize << d) - 1;
    }

    Ok(KktReport {
        dual_feasibility,
        complementary_slackness,
        primal_feasibility: worst,
        samples: checked,
        certified: dual_feasibility <= KKT_TOL
            && complementary_slackness <= KKT_TOL
            && worst <= KKT_TOL,
    })
}

fn scale(b: f64, mag: f64) -> f64 {
    b.abs().max(mag).max(1.0)
}

const PRIMES: [u32; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131,
];

fn radical_inverse(mut i: usize, base: u32) -> f64 {
    let b = base as usize;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    r
}

/// The `i`-th Halton point pushed to the simplex through normalized
/// exponential spacings.
pub fn halton_simplex_point(i: usize, d: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..d)
        .map(|k| {
            let v = radical_inverse(i, PRIMES[k % PRIMES.len()]);
            -(1.0 - v).max(1e-300).ln()
        })
        .collect();
    let s: f64 = e.iter().sum();
    if s <= 0.0 {
        return vec![1.0 / d as f64; d];
    }
    e.iter().map(|v| v / s).collect()
}
