//! Crossing measurements for softmax families trained over a prevalence
//! grid: where does `S_1(r, q) = S_2(r, q)` happen as `q` sweeps the edge?

use serde::{Deserialize, Serialize};

use crate::density::{prevalence_function, DensityModel};
use crate::error::{Error, Result};
use crate::training::train::PairwiseFamily;

/// Binary softmax outputs `(S_1, S_2)` for each grid value (the weight on
/// the first class).
pub trait SoftmaxFamily {
    fn grid(&self) -> Vec<f64>;
    fn scores(&self, index: usize, r: &[f64]) -> Result<[f64; 2]>;
}

impl SoftmaxFamily for PairwiseFamily {
    fn grid(&self) -> Vec<f64> {
        PairwiseFamily::grid(self)
    }

    fn scores(&self, index: usize, r: &[f64]) -> Result<[f64; 2]> {
        let m = &self.members[index].model;
        if m.architecture.input() != r.len() {
            return Err(Error::DimensionMismatch {
                expected: m.architecture.input(),
                got: r.len(),
            });
        }
        let y = m.forward(r);
        Ok([y[0], y[1]])
    }
}

/// Posterior probabilities `alpha P_1 / (alpha P_1 + (1 - alpha) P_2)` of two
/// known densities, standing in for a perfectly trained family.
#[derive(Debug, Clone)]
pub struct AnalyticFamily {
    pub densities: [DensityModel; 2],
    pub grid: Vec<f64>,
}

impl SoftmaxFamily for AnalyticFamily {
    fn grid(&self) -> Vec<f64> {
        self.grid.clone()
    }

    fn scores(&self, index: usize, r: &[f64]) -> Result<[f64; 2]> {
        let a = self.grid[index];
        let w1 = a * self.densities[0].try_pdf(r)?;
        let w2 = (1.0 - a) * self.densities[1].try_pdf(r)?;
        let t = w1 + w2;
        if !(t > 0.0) {
            return Err(Error::OffSupportPoint);
        }
        Ok([w1 / t, w2 / t])
    }
}

impl AnalyticFamily {
    /// Closed-form crossing `P_2 / (P_1 + P_2)` at `r`.
    pub fn analytic_crossing(&self, r: &[f64]) -> Option<f64> {
        prevalence_function(&self.densities, 0, 1, r)
    }
}

/// `S_1(r, q_1) q_1' / q_1` against `S_1(r, q_1')` for neighbouring grid
/// values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCheck {
    pub q1: f64,
    pub q1_prime: f64,
    pub scaled: f64,
    pub observed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjectureReport {
    pub point: Vec<f64>,
    /// Neighbouring grid values between which `S_1 - S_2` changes sign.
    pub bracket: (f64, f64),
    /// Linear interpolation of the sign change.
    pub crossing: f64,
    pub analytic: Option<f64>,
    /// `crossing - analytic`.
    pub discrepancy: Option<f64>,
    /// Whether the analytic value lies in the bracket.
    pub analytic_in_bracket: Option<bool>,
    pub scaling: Vec<ScalingCheck>,
    /// Largest `|scaled - observed|` over the scaling checks.
    pub max_scaling_gap: f64,
}

/// Locates the first grid bracket where `S_1 - S_2` changes sign at `r`.
pub fn conjecture_probe(
    family: &dyn SoftmaxFamily,
    r: &[f64],
    analytic: Option<f64>,
) -> Result<ConjectureReport> {
    let grid = family.grid();
    let s: Vec<[f64; 2]> = (0..grid.len())
        .map(|i| family.scores(i, r))
        .collect::<Result<_>>()?;
    let d: Vec<f64> = s.iter().map(|v| v[0] - v[1]).collect();
    let mut found = None;
    for i in 0..grid.len() {
        if d[i] == 0.0 {
            found = Some(((grid[i], grid[i]), grid[i]));
            break;
        }
        if i + 1 < grid.len() && (d[i] < 0.0) != (d[i + 1] < 0.0) && d[i + 1] != 0.0 {
            let t = d[i] / (d[i] - d[i + 1]);
            found = Some((
                (grid[i], grid[i + 1]),
                grid[i] + t * (grid[i + 1] - grid[i]),
            ));
            break;
        }
    }
    let (bracket, crossing) = found.ok_or(Error::NoCrossing)?;
    let scaling: Vec<ScalingCheck> = (0..grid.len().saturating_sub(1))
        .map(|i| ScalingCheck {
            q1: grid[i],
            q1_prime: grid[i + 1],
            scaled: s[i][0] * grid[i + 1] / grid[i],
            observed: s[i + 1][0],
        })
        .collect();
    let max_scaling_gap = scaling
        .iter()
        .map(|c| (c.scaled - c.observed).abs())
        .fold(0.0, f64::max);
    Ok(ConjectureReport {
        point: r.to_vec(),
        bracket,
        crossing,
        analytic,
        discrepancy: analytic.map(|a| crossing - a),
        analytic_in_bracket: analytic.map(|a| bracket.0 <= a && a <= bracket.1),
        scaling,
        max_scaling_gap,
    })
}
