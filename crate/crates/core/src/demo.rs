//! Reference problems used by the command line front end, the benches and
//! the test suites.

use crate::density::{DensityModel, Gaussian};

/// Means of the three-class planar Gaussian problem.
pub const THREE_CLASS_MEANS: [[f64; 2]; 3] = [[0.0, 1.0], [0.0, -1.0], [1.0, 0.0]];

/// Diagonal variances of the three-class planar Gaussian problem.
pub const THREE_CLASS_VARIANCES: [[f64; 2]; 3] = [[0.49, 0.09], [0.16, 0.64], [0.25, 0.01]];

/// Three axis-aligned planar Gaussians with overlapping supports.
pub fn three_gaussians() -> Vec<DensityModel> {
    THREE_CLASS_MEANS
        .iter()
        .zip(THREE_CLASS_VARIANCES.iter())
        .map(|(m, v)| {
            DensityModel::Gaussian(Gaussian::diagonal(m.to_vec(), v).expect("valid parameters"))
        })
        .collect()
}

/// `N(0, 1)` and `N(mean2, 1)` on the real line.
pub fn unit_gaussian_pair(mean2: f64) -> Vec<DensityModel> {
    vec![
        DensityModel::Gaussian(Gaussian::diagonal(vec![0.0], &[1.0]).expect("valid parameters")),
        DensityModel::Gaussian(Gaussian::diagonal(vec![mean2], &[1.0]).expect("valid parameters")),
    ]
}

/// Closed-form prevalence function `P_2 / (P_1 + P_2)` for
/// [`unit_gaussian_pair`]: a logistic curve centred at `mean2 / 2`.
pub fn unit_pair_prevalence(mean2: f64, r: f64) -> f64 {
    // log(P2/P1) = mean2 * r - mean2^2 / 2
    1.0 / (1.0 + (-(mean2 * r - 0.5 * mean2 * mean2)).exp())
}
