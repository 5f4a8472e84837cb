//! Distributionally robust bounds on extreme Value-at-Risk for heavy-tailed
//! portfolios constrained by extremal coefficients.

pub mod calibration;
pub mod closed_form;
pub mod error;
pub mod estimation;
pub mod lp;
pub mod measure;
pub mod mkt_sectors;
pub mod report;
pub mod simulate;
pub mod subset;
pub mod tm_lp;

pub use closed_form::{
    chi_from_rho, dvariate_bounds, frechet_bounds, lower_bound_l, upper_bound_u, var_bound,
    BoundsResult, Method,
};
pub use error::{Error, Result};
pub use measure::{
    evaluate_discrete_measure, verify_kkt, Atom, CertificateSense, DiscreteSpectralMeasure,
    KktCertificate, KktReport,
};
pub use subset::{
    check_consistency, mobius_invert, monotonicity_check, ExtremalCoefficients, MobiusWeights,
    SubsetFamily, SubsetId,
};
pub use tm_lp::{build_tm_lp, solve_lower_bound, tm_bounds, tm_dual_vector, TmLpConfig};
