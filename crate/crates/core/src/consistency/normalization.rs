//! Quadrature check of the normalization identity
//! `int_{G_i} R_{i,j} P_i + int_{G_j \ G_i} P_j = 1`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::density::DensityModel;
use crate::error::{Error, Result};
use crate::par::{chunked_sum, Exec};
use crate::probing::RatioInterval;

pub type PointRatioFn = Arc<dyn Fn(usize, usize, &[f64]) -> f64 + Send + Sync>;
pub type IntervalRatioFn = Arc<dyn Fn(usize, usize, &[f64]) -> RatioInterval + Send + Sync>;

/// Where `R_{i,j}(r)` comes from on the support of `P_i`.
#[derive(Clone)]
pub enum RatioSource {
    /// `P_j / P_i` of the densities themselves.
    Exact,
    Pointwise(PointRatioFn),
    /// Both interval ends are integrated; the residual is the distance of 1
    /// from the resulting range.
    Interval(IntervalRatioFn),
}

/// Axis-aligned integration box with a midpoint grid of `shape` cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub shape: Vec<usize>,
}

impl QuadBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, shape: Vec<usize>) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() != shape.len() || lo.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len().max(shape.len()),
            });
        }
        if shape.iter().any(|&s| s < 2) || lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::BadGrid(
                "quadrature box needs at least 2 cells per axis".into(),
            ));
        }
        Ok(QuadBox { lo, hi, shape })
    }

    fn halved(&self) -> QuadBox {
        QuadBox {
            lo: self.lo.clone(),
            hi: self.hi.clone(),
            shape: self.shape.iter().map(|&s| (s / 2).max(1)).collect(),
        }
    }

    fn cells(&self) -> usize {
        self.shape.iter().product()
    }

    fn center(&self, mut idx: usize, out: &mut [f64]) {
        for a in (0..self.shape.len()).rev() {
            let i = idx % self.shape[a];
            idx /= self.shape[a];
            let h = (self.hi[a] - self.lo[a]) / self.shape[a] as f64;
            out[a] = self.lo[a] + (i as f64 + 0.5) * h;
        }
    }

    fn cell_volume(&self) -> f64 {
        (0..self.shape.len())
            .map(|a| (self.hi[a] - self.lo[a]) / self.shape[a] as f64)
            .product()
    }

    /// Midpoint rule for `f` with a fixed reduction order.
    pub fn integrate(&self, exec: Exec, f: &(dyn Fn(&[f64]) -> f64 + Sync)) -> f64 {
        let d = self.shape.len();
        let vol = self.cell_volume();
        chunked_sum(exec, self.cells(), |c| {
            let mut r = [0.0f64; 8];
            let mut heap;
            let r: &mut [f64] = if d <= 8 {
                &mut r[..d]
            } else {
                heap = vec![0.0; d];
                &mut heap
            };
            self.center(c, r);
            f(r)
        }) * vol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResidual {
    pub i: usize,
    pub j: usize,
    /// Integral value (lower end for interval sources).
    pub integral: f64,
    /// Upper end for interval sources; equal to `integral` otherwise.
    pub integral_hi: f64,
    pub residual: f64,
    /// Richardson estimate from the half-resolution grid.
    pub error_estimate: f64,
}

fn pair_integrals(
    exec: Exec,
    densities: &[DensityModel],
    source: &RatioSource,
    qb: &QuadBox,
    i: usize,
    j: usize,
) -> (f64, f64) {
    let body = |r: &[f64], upper: bool| -> f64 {
        let pi = densities[i].effective_pdf(r);
        if pi > 0.0 {
            let ratio = match source {
                RatioSource::Exact => densities[j].effective_pdf(r) / pi,
                RatioSource::Pointwise(f) => f(i, j, r),
                RatioSource::Interval(f) => {
                    let iv = f(i, j, r);
                    if upper {
                        iv.hi
                    } else {
                        iv.lo
                    }
                }
            };
            ratio * pi
        } else {
            densities[j].effective_pdf(r)
        }
    };
    let lo = qb.integrate(exec, &|r| body(r, false));
    let hi = match source {
        RatioSource::Interval(_) => qb.integrate(exec, &|r| body(r, true)),
        _ => lo,
    };
    (lo, hi)
}

/// Residual `|integral - 1|` for every ordered pair `(i, j)`, `i != j`.
/// Fails when the midpoint-rule error estimate exceeds `tol`.
pub fn normalization_check(
    exec: Exec,
    densities: &[DensityModel],
    source: &RatioSource,
    qb: &QuadBox,
    tol: f64,
) -> Result<Vec<PairResidual>> {
    let k = densities.len();
    let coarse = qb.halved();
    let mut out = Vec::new();
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let (lo, hi) = pair_integrals(exec, densities, source, qb, i, j);
            let (clo, chi) = pair_integrals(exec, densities, source, &coarse, i, j);
            let est = ((lo - clo).abs().max((hi - chi).abs())) / 3.0;
            if !(est <= tol) {
                return Err(Error::QuadratureFailure { estimate: est, tol });
            }
            let residual = if lo <= 1.0 && 1.0 <= hi {
                0.0
            } else {
                (lo - 1.0).abs().min((hi - 1.0).abs())
            };
            out.push(PairResidual {
                i,
                j,
                integral: lo,
                integral_hi: hi,
                residual,
                error_estimate: est,
            });
        }
    }
    Ok(out)
}
