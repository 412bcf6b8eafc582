//! Binary density reconstruction from a density ratio on a compact box.
//!
//! `P_1` is constant on each of `{R = 1}`, `{R < 1}` and `{R > 1}`, with the
//! constant on `{R = 1}` equal to the one on `{R < 1}`; `P_2 = R P_1`.
//! Normalizing both fixes the two remaining constants.

use crate::density::PiecewiseConstant;
use crate::error::{Error, Result};

/// Cells with `|R - 1|` at most this are treated as `R = 1`.
pub const UNIT_RATIO_TOL: f64 = 1e-9;

/// Reconstructed pair plus the level constants of `P_1`.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub p1: PiecewiseConstant,
    pub p2: PiecewiseConstant,
    /// Value of `P_1` on `{R <= 1}` (including the unit region).
    pub alpha_low: f64,
    /// Value of `P_1` on `{R > 1}`.
    pub alpha_high: f64,
    /// Ratio sampled at each cell center.
    pub ratios: Vec<f64>,
}

/// Builds `P_1`, `P_2` on a regular grid over `[lo, hi]` with `shape` cells,
/// sampling `ratio` at cell centers.
pub fn reconstruct_binary_densities(
    ratio: &dyn Fn(&[f64]) -> f64,
    lo: &[f64],
    hi: &[f64],
    shape: &[usize],
) -> Result<Reconstruction> {
    let n: usize = shape.iter().product();
    let probe = PiecewiseConstant::on_grid(lo.to_vec(), hi.to_vec(), shape.to_vec(), vec![0.0; n])?;
    let mut ratios = Vec::with_capacity(n);
    let mut vols = Vec::with_capacity(n);
    for cell in probe.cells() {
        let r = ratio(&cell.center());
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::NonPositive);
        }
        ratios.push(r);
        vols.push(cell.volume());
    }
    // integrals of (R - 1) and measures over {R <= 1} and {R > 1}
    let (mut i_low, mut i_high, mut mu_low, mut mu_high) = (0.0, 0.0, 0.0, 0.0);
    let (mut has_below, mut has_above) = (false, false);
    for (&r, &v) in ratios.iter().zip(&vols) {
        if r > 1.0 + UNIT_RATIO_TOL {
            has_above = true;
            i_high += (r - 1.0) * v;
            mu_high += v;
        } else {
            if r < 1.0 - UNIT_RATIO_TOL {
                has_below = true;
            }
            i_low += (r - 1.0) * v;
            mu_low += v;
        }
    }
    if !has_below || !has_above {
        return Err(Error::DegenerateRegions(
            "ratio must fall below and rise above 1 on the grid",
        ));
    }
    // alpha_low * i_low + alpha_high * i_high = 0
    // alpha_low * mu_low + alpha_high * mu_high = 1
    let t = -i_low / i_high;
    let alpha_low = 1.0 / (mu_low + t * mu_high);
    let alpha_high = t * alpha_low;
    if !(alpha_low > 0.0 && alpha_high > 0.0 && alpha_low.is_finite() && alpha_high.is_finite()) {
        return Err(Error::NonPositive);
    }
    let v1: Vec<f64> = ratios
        .iter()
        .map(|&r| {
            if r > 1.0 + UNIT_RATIO_TOL {
                alpha_high
            } else {
                alpha_low
            }
        })
        .collect();
    let v2: Vec<f64> = v1.iter().zip(&ratios).map(|(p, r)| p * r).collect();
    Ok(Reconstruction {
        p1: PiecewiseConstant::on_grid(lo.to_vec(), hi.to_vec(), shape.to_vec(), v1)?,
        p2: PiecewiseConstant::on_grid(lo.to_vec(), hi.to_vec(), shape.to_vec(), v2)?,
        alpha_low,
        alpha_high,
        ratios,
    })
}
