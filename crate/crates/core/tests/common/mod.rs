#![allow(dead_code)]

use xvar::{SubsetFamily, SubsetId};

/// Tail-index estimate used for the d = 10 industry portfolio.
pub const XI_TABLE: f64 = 0.1981;
/// Common tail index used for return levels.
pub const XI_RETURN: f64 = 0.198;
/// Overall extremal coefficient of the balanced portfolio.
pub const THETA_D: f64 = 3.15;

/// Per-industry GPD scale estimates.
pub const SIGMA: [f64; 10] = [0.77, 1.32, 1.06, 1.05, 1.29, 0.84, 0.92, 0.92, 1.21, 1.25];

/// Bivariate extremal-coefficient estimates (rows need not be symmetric).
pub const PAIRS: [[f64; 10]; 10] = [
    [1.00, 1.46, 1.37, 1.50, 1.48, 1.54, 1.38, 1.44, 1.48, 1.40],
    [1.46, 1.00, 1.30, 1.50, 1.46, 1.58, 1.44, 1.57, 1.46, 1.35],
    [1.36, 1.29, 1.00, 1.43, 1.40, 1.53, 1.36, 1.49, 1.40, 1.26],
    [1.49, 1.50, 1.43, 1.00, 1.60, 1.61, 1.52, 1.60, 1.54, 1.47],
    [1.48, 1.45, 1.40, 1.60, 1.00, 1.55, 1.43, 1.55, 1.47, 1.45],
    [1.53, 1.58, 1.54, 1.61, 1.55, 1.00, 1.55, 1.60, 1.61, 1.52],
    [1.37, 1.44, 1.36, 1.52, 1.43, 1.55, 1.00, 1.48, 1.47, 1.38],
    [1.43, 1.56, 1.49, 1.60, 1.55, 1.60, 1.48, 1.00, 1.60, 1.54],
    [1.47, 1.46, 1.40, 1.55, 1.47, 1.61, 1.47, 1.60, 1.00, 1.44],
    [1.39, 1.35, 1.26, 1.47, 1.45, 1.52, 1.38, 1.54, 1.44, 1.00],
];

/// Singletons plus every pair `{i < j}` taken from the upper triangle.
pub fn bivariate_family() -> SubsetFamily {
    SubsetFamily::bivariate(10, |i, j| PAIRS[i][j]).unwrap()
}

/// The bivariate family with the overall coefficient added.
pub fn bivariate_with_full() -> SubsetFamily {
    bivariate_family()
        .with(SubsetId::full(10).unwrap(), THETA_D)
        .unwrap()
}
