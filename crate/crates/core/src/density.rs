//! Class-conditional densities, density ratios and prevalence functions.
//!
//! All ratio-type quantities are computed from *effective* density values: a
//! density counts as exactly zero at `r` when `r` is outside its declared
//! support or its value falls below [`ZERO_DENSITY`].

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::simplex::Simplex;

/// Density values below this threshold are treated as exact zeros.
pub const ZERO_DENSITY: f64 = 1e-300;

const SYMMETRY_TOL: f64 = 1e-12;

/// Multivariate normal density with a precomputed Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
    // lower-triangular factor, row-major d x d
    chol: Vec<f64>,
    norm: f64,
}

impl Gaussian {
    pub fn new(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::InvalidDensity("gaussian with empty mean".into()));
        }
        if cov.len() != d || cov.iter().any(|row| row.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: cov.len(),
            });
        }
        for i in 0..d {
            for j in 0..i {
                if (cov[i][j] - cov[j][i]).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidDensity(format!(
                        "covariance not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        if mean
            .iter()
            .chain(cov.iter().flatten())
            .any(|x| !x.is_finite())
        {
            return Err(Error::InvalidDensity(
                "non-finite gaussian parameter".into(),
            ));
        }
        let m = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
        let chol = m
            .cholesky()
            .ok_or_else(|| Error::InvalidDensity("covariance is not positive definite".into()))?;
        let l = chol.l();
        let mut flat = vec![0.0; d * d];
        let mut log_det_half = 0.0;
        for i in 0..d {
            for j in 0..=i {
                flat[i * d + j] = l[(i, j)];
            }
            log_det_half += l[(i, i)].ln();
        }
        let log_norm = -0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln() - log_det_half;
        Ok(Gaussian {
            mean,
            cov,
            chol: flat,
            norm: log_norm.exp(),
        })
    }

    /// Axis-aligned Gaussian with the given variances.
    pub fn diagonal(mean: Vec<f64>, variances: &[f64]) -> Result<Self> {
        let d = variances.len();
        let cov = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| if i == j { variances[i] } else { 0.0 })
                    .collect()
            })
            .collect();
        Gaussian::new(mean, cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &[Vec<f64>] {
        &self.cov
    }

    /// Squared Mahalanobis distance via forward substitution.
    fn mahalanobis2(&self, r: &[f64]) -> f64 {
        let d = self.dim();
        let mut z = [0.0f64; 8];
        let mut heap;
        let z: &mut [f64] = if d <= 8 {
            &mut z[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        let mut acc = 0.0;
        for i in 0..d {
            let mut s = r[i] - self.mean[i];
            for j in 0..i {
                s -= self.chol[i * d + j] * z[j];
            }
            z[i] = s / self.chol[i * d + i];
            acc += z[i] * z[i];
        }
        acc
    }

    pub fn pdf(&self, r: &[f64]) -> Result<f64> {
        if r.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: r.len(),
            });
        }
        Ok(self.norm * (-0.5 * self.mahalanobis2(r)).exp())
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let d = self.dim();
        let xi: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        (0..d)
            .map(|i| self.mean[i] + (0..=i).map(|j| self.chol[i * d + j] * xi[j]).sum::<f64>())
            .collect()
    }
}

/// Multivariate normal density value; fails on a dimension mismatch.
pub fn gaussian_pdf(params: &Gaussian, r: &[f64]) -> Result<f64> {
    params.pdf(r)
}

/// Closed axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cell {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Cell {
    pub fn contains(&self, r: &[f64]) -> bool {
        r.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (a, b))| *a <= *x && *x <= *b)
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Layout {
    Cells(Vec<Cell>),
    Grid {
        lo: Vec<f64>,
        hi: Vec<f64>,
        shape: Vec<usize>,
    },
}

/// Density that is constant on axis-aligned cells and zero elsewhere.
///
/// Cells are closed; where cells overlap (shared faces), the first one in
/// storage order wins.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstant {
    dim: usize,
    layout: Layout,
    values: Vec<f64>,
    // cumulative cell masses for sampling
    cumulative: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn from_cells(cells: Vec<Cell>, values: Vec<f64>) -> Result<Self> {
        if cells.is_empty() || cells.len() != values.len() {
            return Err(Error::InvalidDensity(format!(
                "{} cells but {} values",
                cells.len(),
                values.len()
            )));
        }
        let dim = cells[0].lo.len();
        for c in &cells {
            if c.lo.len() != dim || c.hi.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: c.lo.len().max(c.hi.len()),
                });
            }
            if c.lo
                .iter()
                .zip(&c.hi)
                .any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite())
            {
                return Err(Error::InvalidDensity(
                    "cell with empty or unbounded extent".into(),
                ));
            }
        }
        Self::finish(dim, Layout::Cells(cells), values)
    }

    /// Regular tensor grid on the box `[lo, hi]` with `shape[i]` cells along
    /// axis `i`; `values` are in row-major order (last axis fastest).
    pub fn on_grid(
        lo: Vec<f64>,
        hi: Vec<f64>,
        shape: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let dim = lo.len();
        if hi.len() != dim || shape.len() != dim || dim == 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: hi.len().max(shape.len()),
            });
        }
        if shape.contains(&0) || lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidDensity("degenerate grid".into()));
        }
        let n: usize = shape.iter().product();
        if values.len() != n {
            return Err(Error::InvalidDensity(format!(
                "grid has {n} cells but {} values",
                values.len()
            )));
        }
        Self::finish(dim, Layout::Grid { lo, hi, shape }, values)
    }

    fn finish(dim: usize, layout: Layout, values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidDensity(
                "cell values must be finite and nonnegative".into(),
            ));
        }
        let mut out = PiecewiseConstant {
            dim,
            layout,
            values,
            cumulative: Vec::new(),
        };
        let mut acc = 0.0;
        out.cumulative = (0..out.values.len())
            .map(|i| {
                acc += out.values[i] * out.cell(i).volume();
                acc
            })
            .collect();
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Total mass `sum(value * volume)`.
    pub fn mass(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn cell(&self, i: usize) -> Cell {
        match &self.layout {
            Layout::Cells(cells) => cells[i].clone(),
            Layout::Grid { lo, hi, shape } => {
                let mut rem = i;
                let mut idx = vec![0; shape.len()];
                for a in (0..shape.len()).rev() {
                    idx[a] = rem % shape[a];
                    rem /= shape[a];
                }
                let mut c_lo = Vec::with_capacity(shape.len());
                let mut c_hi = Vec::with_capacity(shape.len());
                for a in 0..shape.len() {
                    let h = (hi[a] - lo[a]) / shape[a] as f64;
                    c_lo.push(lo[a] + h * idx[a] as f64);
                    c_hi.push(if idx[a] + 1 == shape[a] {
                        hi[a]
                    } else {
                        lo[a] + h * (idx[a] + 1) as f64
                    });
                }
                Cell { lo: c_lo, hi: c_hi }
            }
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.len()).map(|i| self.cell(i))
    }

    /// Index of the cell containing `r`, if any.
    pub fn locate(&self, r: &[f64]) -> Option<usize> {
        if r.len() != self.dim {
            return None;
        }
        match &self.layout {
            Layout::Cells(cells) => cells.iter().position(|c| c.contains(r)),
            Layout::Grid { lo, hi, shape } => {
                let mut flat = 0;
                for a in 0..shape.len() {
                    if !(lo[a] <= r[a] && r[a] <= hi[a]) {
                        return None;
                    }
                    let t = (r[a] - lo[a]) / (hi[a] - lo[a]) * shape[a] as f64;
                    let i = (t.floor() as usize).min(shape[a] - 1);
                    flat = flat * shape[a] + i;
                }
                Some(flat)
            }
        }
    }

    pub fn pdf(&self, r: &[f64]) -> f64 {
        self.locate(r).map_or(0.0, |i| self.values[i])
    }

    pub fn in_support(&self, r: &[f64]) -> bool {
        self.locate(r).is_some_and(|i| self.values[i] > 0.0)
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        let total = self.mass();
        if !(total > 0.0) {
            return None;
        }
        let u: f64 = rng.random::<f64>() * total;
        let i = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.len() - 1);
        let cell = self.cell(i);
        Some(
            cell.lo
                .iter()
                .zip(&cell.hi)
                .map(|(a, b)| a + (b - a) * rng.random::<f64>())
                .collect(),
        )
    }
}

pub type PdfFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type SupportFn = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;
pub type SamplerFn = Arc<dyn Fn(&mut dyn RngCore) -> Vec<f64> + Send + Sync>;

/// User-supplied density. Without an explicit support predicate the support
/// is `{r : pdf(r) > 0}`.
#[derive(Clone)]
pub struct CallbackDensity {
    pub dim: usize,
    pub pdf: PdfFn,
    pub support: Option<SupportFn>,
    pub sampler: Option<SamplerFn>,
}

impl CallbackDensity {
    pub fn new(dim: usize, pdf: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        CallbackDensity {
            dim,
            pdf: Arc::new(pdf),
            support: None,
            sampler: None,
        }
    }

    pub fn with_support(mut self, f: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        self.support = Some(Arc::new(f));
        self
    }

    pub fn with_sampler(
        mut self,
        f: impl Fn(&mut dyn RngCore) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.sampler = Some(Arc::new(f));
        self
    }
}

impl fmt::Debug for CallbackDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CallbackDensity")
            .field("dim", &self.dim)
            .field("support", &self.support.is_some())
            .field("sampler", &self.sampler.is_some())
            .finish()
    }
}

/// A class-conditional density.
#[derive(Debug, Clone)]
pub enum DensityModel {
    /// Supported on all of the input space.
    Gaussian(Gaussian),
    PiecewiseConstant(PiecewiseConstant),
    Callback(CallbackDensity),
}

impl DensityModel {
    pub fn gaussian(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        Gaussian::new(mean, cov).map(DensityModel::Gaussian)
    }

    pub fn dim(&self) -> usize {
        match self {
            DensityModel::Gaussian(g) => g.dim(),
            DensityModel::PiecewiseConstant(p) => p.dim(),
            DensityModel::Callback(c) => c.dim,
        }
    }

    /// Raw density value. Panics if `r` has the wrong dimension.
    pub fn pdf(&self, r: &[f64]) -> f64 {
        self.try_pdf(r)
            .expect("density evaluated at a point of wrong dimension")
    }

    pub fn try_pdf(&self, r: &[f64]) -> Result<f64> {
        if r.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: r.len(),
            });
        }
        Ok(match self {
            DensityModel::Gaussian(g) => g.norm * (-0.5 * g.mahalanobis2(r)).exp(),
            DensityModel::PiecewiseConstant(p) => p.pdf(r),
            DensityModel::Callback(c) => {
                if self.in_support(r) {
                    (c.pdf)(r)
                } else {
                    0.0
                }
            }
        })
    }

    pub fn in_support(&self, r: &[f64]) -> bool {
        match self {
            DensityModel::Gaussian(_) => true,
            DensityModel::PiecewiseConstant(p) => p.in_support(r),
            DensityModel::Callback(c) => match &c.support {
                Some(s) => s(r),
                None => (c.pdf)(r) > 0.0,
            },
        }
    }

    /// Density value with the zero-detection rule applied.
    pub fn effective_pdf(&self, r: &[f64]) -> f64 {
        if !self.in_support(r) {
            return 0.0;
        }
        let v = self.pdf(r);
        if v < ZERO_DENSITY || !v.is_finite() {
            0.0
        } else {
            v
        }
    }

    /// Draws one point, or `None` when the density has no sampling rule.
    pub fn sample(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        match self {
            DensityModel::Gaussian(g) => Some(g.sample(rng)),
            DensityModel::PiecewiseConstant(p) => p.sample(rng),
            DensityModel::Callback(c) => c.sampler.as_ref().map(|s| s(rng)),
        }
    }

    pub fn is_sampleable(&self) -> bool {
        match self {
            DensityModel::Gaussian(_) => true,
            DensityModel::PiecewiseConstant(p) => p.mass() > 0.0,
            DensityModel::Callback(c) => c.sampler.is_some(),
        }
    }
}

/// Effective values of every density at `r`.
pub fn effective_values(densities: &[DensityModel], r: &[f64]) -> Vec<f64> {
    densities.iter().map(|d| d.effective_pdf(r)).collect()
}

fn check_point(densities: &[DensityModel], r: &[f64]) -> Result<()> {
    for d in densities {
        if d.dim() != r.len() {
            return Err(Error::DimensionMismatch {
                expected: d.dim(),
                got: r.len(),
            });
        }
    }
    Ok(())
}

/// Population density `Q(r; chi) = sum_j chi_j P_j(r)`.
pub fn mixture_density(densities: &[DensityModel], chi: &Simplex, r: &[f64]) -> Result<f64> {
    if densities.len() != chi.len() {
        return Err(Error::DimensionMismatch {
            expected: densities.len(),
            got: chi.len(),
        });
    }
    check_point(densities, r)?;
    Ok(densities
        .iter()
        .zip(chi.weights())
        .map(|(d, &w)| w * d.effective_pdf(r))
        .sum())
}

/// A value on the extended nonnegative line `[0, inf]`, plus the
/// indeterminate form `0/0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedRatio {
    Zero,
    Finite(f64),
    Infinite,
    Indeterminate,
}

impl ExtendedRatio {
    /// Ratio `numerator / denominator` of two effective density values.
    pub fn from_parts(numerator: f64, denominator: f64) -> Self {
        match (numerator > 0.0, denominator > 0.0) {
            (true, true) => ExtendedRatio::from_value(numerator / denominator),
            (true, false) => ExtendedRatio::Infinite,
            (false, true) => ExtendedRatio::Zero,
            (false, false) => ExtendedRatio::Indeterminate,
        }
    }

    /// Classifies a float: `0 -> Zero`, `inf -> Infinite`, `NaN -> Indeterminate`.
    pub fn from_value(x: f64) -> Self {
        if x.is_nan() || x < 0.0 {
            ExtendedRatio::Indeterminate
        } else if x == 0.0 {
            ExtendedRatio::Zero
        } else if x.is_infinite() {
            ExtendedRatio::Infinite
        } else {
            ExtendedRatio::Finite(x)
        }
    }

    pub fn recip(self) -> Self {
        match self {
            ExtendedRatio::Zero => ExtendedRatio::Infinite,
            ExtendedRatio::Infinite => ExtendedRatio::Zero,
            ExtendedRatio::Finite(x) => ExtendedRatio::from_value(1.0 / x),
            ExtendedRatio::Indeterminate => ExtendedRatio::Indeterminate,
        }
    }

    /// Numeric value, `None` for the indeterminate form.
    pub fn value(self) -> Option<f64> {
        match self {
            ExtendedRatio::Zero => Some(0.0),
            ExtendedRatio::Finite(x) => Some(x),
            ExtendedRatio::Infinite => Some(f64::INFINITY),
            ExtendedRatio::Indeterminate => None,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedRatio::Finite(x) => Some(x),
            _ => None,
        }
    }

    pub fn is_determinate(self) -> bool {
        !matches!(self, ExtendedRatio::Indeterminate)
    }

    /// Extended product; `0 * inf` and anything involving `?` are
    /// indeterminate.
    pub fn mul(self, other: Self) -> Self {
        use ExtendedRatio::*;
        match (self, other) {
            (Indeterminate, _) | (_, Indeterminate) => Indeterminate,
            (Zero, Infinite) | (Infinite, Zero) => Indeterminate,
            (Zero, _) | (_, Zero) => Zero,
            (Infinite, _) | (_, Infinite) => Infinite,
            (Finite(a), Finite(b)) => ExtendedRatio::from_value(a * b),
        }
    }
}

// JSON form: finite numbers (0 included) as numbers, infinity as "inf",
// indeterminate as null.
impl Serialize for ExtendedRatio {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtendedRatio::Zero => s.serialize_f64(0.0),
            ExtendedRatio::Finite(x) => s.serialize_f64(*x),
            ExtendedRatio::Infinite => s.serialize_str("inf"),
            ExtendedRatio::Indeterminate => s.serialize_none(),
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedRatio {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        match v {
            serde_json::Value::Null => Ok(ExtendedRatio::Indeterminate),
            serde_json::Value::Number(n) => {
                let x = n
                    .as_f64()
                    .ok_or_else(|| serde::de::Error::custom("bad number"))?;
                if x < 0.0 {
                    return Err(serde::de::Error::custom("negative ratio"));
                }
                Ok(ExtendedRatio::from_value(x))
            }
            serde_json::Value::String(s) if s == "inf" => Ok(ExtendedRatio::Infinite),
            other => Err(serde::de::Error::custom(format!("invalid ratio {other}"))),
        }
    }
}

/// Extended float serialization helpers: `inf` is written as the string
/// `"inf"`.
pub mod extended_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_infinite() && *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*x)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::Number(n) => n
                .as_f64()
                .ok_or_else(|| serde::de::Error::custom("bad number")),
            serde_json::Value::String(s) if s == "inf" => Ok(f64::INFINITY),
            other => Err(serde::de::Error::custom(format!("invalid value {other}"))),
        }
    }
}

/// Density ratio `R_{j,k}(r) = P_k(r) / P_j(r)`, with `R_{j,j} = 1`.
pub fn density_ratio(densities: &[DensityModel], j: usize, k: usize, r: &[f64]) -> ExtendedRatio {
    if j == k {
        return ExtendedRatio::Finite(1.0);
    }
    ExtendedRatio::from_parts(densities[k].effective_pdf(r), densities[j].effective_pdf(r))
}

/// Prevalence function `P_k / (P_k + P_j)`; `None` when both densities
/// vanish (and `j != k`). Equals 1/2 on the diagonal.
pub fn prevalence_function(
    densities: &[DensityModel],
    j: usize,
    k: usize,
    r: &[f64],
) -> Option<f64> {
    if j == k {
        return Some(0.5);
    }
    prevalence_from_values(densities[j].effective_pdf(r), densities[k].effective_pdf(r))
}

/// `pk / (pk + pj)` from effective values.
pub fn prevalence_from_values(pj: f64, pk: f64) -> Option<f64> {
    match (pj > 0.0, pk > 0.0) {
        (true, true) => Some(pk / (pk + pj)),
        (false, true) => Some(1.0),
        (true, false) => Some(0.0),
        (false, false) => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo::three_gaussians;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(a.abs())
    }

    #[test]
    fn gaussian_peak_values() {
        let g = Gaussian::diagonal(vec![0.0, 1.0], &[0.49, 0.09]).unwrap();
        let v = gaussian_pdf(&g, &[0.0, 1.0]).unwrap();
        assert!(close(v, 1.0 / (2.0 * PI * 0.21), 1e-14), "{v}");
        let g3 = Gaussian::diagonal(vec![1.0, 0.0], &[0.25, 0.01]).unwrap();
        let v3 = gaussian_pdf(&g3, &[1.0, 0.0]).unwrap();
        assert!(close(v3, 1.0 / (2.0 * PI * 0.05), 1e-14));
    }

    #[test]
    fn gaussian_decays_along_eigen_axis() {
        let g = Gaussian::new(vec![0.3, -0.2], vec![vec![1.0, 0.4], vec![0.4, 0.5]]).unwrap();
        let mut last = f64::INFINITY;
        for i in 0..50 {
            let t = i as f64 * 0.2;
            let v = g.pdf(&[0.3 + t, -0.2]).unwrap();
            assert!(v > 0.0 || t > 30.0);
            assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn gaussian_matches_closed_form_with_correlation() {
        let cov = vec![vec![1.0, 0.4], vec![0.4, 0.5]];
        let g = Gaussian::new(vec![0.0, 0.0], cov.clone()).unwrap();
        let det: f64 = 1.0 * 0.5 - 0.16;
        let inv = [[0.5 / det, -0.4 / det], [-0.4 / det, 1.0 / det]];
        let r = [0.7, -0.3];
        let q = r[0] * (inv[0][0] * r[0] + inv[0][1] * r[1])
            + r[1] * (inv[1][0] * r[0] + inv[1][1] * r[1]);
        let expected = (-0.5 * q).exp() / (2.0 * PI * det.sqrt());
        assert!(close(g.pdf(&r).unwrap(), expected, 1e-13));
    }

    #[test]
    fn gaussian_rejects_bad_params() {
        assert!(Gaussian::new(vec![0.0, 0.0], vec![vec![1.0, 0.1], vec![0.2, 1.0]]).is_err());
        assert!(Gaussian::new(vec![0.0, 0.0], vec![vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
        let g = Gaussian::diagonal(vec![0.0], &[1.0]).unwrap();
        assert!(matches!(
            g.pdf(&[0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gaussian_integrates_to_one() {
        for g in [
            Gaussian::diagonal(vec![0.5], &[0.3]).unwrap(),
            Gaussian::new(vec![0.0, 1.0], vec![vec![0.49, 0.1], vec![0.1, 0.09]]).unwrap(),
            Gaussian::diagonal(vec![1.0, 0.0], &[0.25, 0.01]).unwrap(),
        ] {
            let d = g.dim();
            let n = 400usize;
            let sd: Vec<f64> = (0..d).map(|i| g.cov()[i][i].sqrt()).collect();
            let h: Vec<f64> = sd.iter().map(|s| 16.0 * s / n as f64).collect();
            let mut total = 0.0;
            let cells = n.pow(d as u32);
            for c in 0..cells {
                let mut rem = c;
                let mut r = vec![0.0; d];
                for a in (0..d).rev() {
                    let i = rem % n;
                    rem /= n;
                    r[a] = g.mean()[a] - 8.0 * sd[a] + (i as f64 + 0.5) * h[a];
                }
                total += g.pdf(&r).unwrap();
            }
            total *= h.iter().product::<f64>();
            assert!((total - 1.0).abs() < 1e-6, "mass {total}");
        }
    }

    #[test]
    fn mixture_examples() {
        let p = DensityModel::gaussian(vec![0.0], vec![vec![1.0]]).unwrap();
        let twins = vec![p.clone(), p.clone()];
        let chi = Simplex::new(vec![0.3, 0.7]).unwrap();
        let v = mixture_density(&twins, &chi, &[0.4]).unwrap();
        assert!(close(v, p.pdf(&[0.4]), 1e-15));

        let q = DensityModel::gaussian(vec![2.0], vec![vec![0.5]]).unwrap();
        let pair = vec![p.clone(), q];
        let v = mixture_density(&pair, &Simplex::vertex(2, 0), &[0.4]).unwrap();
        assert_eq!(v, p.pdf(&[0.4]));

        let three = three_gaussians();
        let r = [0.0, 0.0];
        let v = mixture_density(&three, &Simplex::uniform(3), &r).unwrap();
        // independent scalar evaluation of the three closed forms
        let scalar = |mx: f64, my: f64, vx: f64, vy: f64| {
            (-0.5 * ((r[0] - mx).powi(2) / vx + (r[1] - my).powi(2) / vy)).exp()
                / (2.0 * PI * (vx * vy).sqrt())
        };
        let expected = (scalar(0.0, 1.0, 0.49, 0.09)
            + scalar(0.0, -1.0, 0.16, 0.64)
            + scalar(1.0, 0.0, 0.25, 0.01))
            / 3.0;
        assert!(close(v, expected, 1e-13));

        assert!(mixture_density(&three, &Simplex::uniform(2), &r).is_err());
        assert!(mixture_density(&three, &Simplex::uniform(3), &[0.0]).is_err());
    }

    #[test]
    fn ratio_conventions() {
        let g = DensityModel::gaussian(vec![0.0], vec![vec![1.0]]).unwrap();
        let pc = DensityModel::PiecewiseConstant(
            PiecewiseConstant::on_grid(vec![0.0], vec![1.0], vec![1], vec![0.3]).unwrap(),
        );
        let zero = DensityModel::PiecewiseConstant(
            PiecewiseConstant::on_grid(vec![5.0], vec![6.0], vec![1], vec![1.0]).unwrap(),
        );
        let ds = vec![g.clone(), g, pc, zero];
        assert_eq!(density_ratio(&ds, 0, 1, &[0.3]), ExtendedRatio::Finite(1.0));
        // j = k off-support
        assert_eq!(density_ratio(&ds, 3, 3, &[0.5]), ExtendedRatio::Finite(1.0));
        // P_j = 0 < P_k = 0.3
        assert_eq!(density_ratio(&ds, 3, 2, &[0.5]), ExtendedRatio::Infinite);
        assert_eq!(density_ratio(&ds, 2, 3, &[0.5]), ExtendedRatio::Zero);
        assert_eq!(
            density_ratio(&ds, 3, 2, &[2.0]),
            ExtendedRatio::Indeterminate
        );

        assert_eq!(prevalence_function(&ds, 0, 1, &[0.3]), Some(0.5));
        assert_eq!(prevalence_function(&ds, 3, 3, &[0.5]), Some(0.5));
        assert_eq!(prevalence_function(&ds, 3, 2, &[0.5]), Some(1.0));
        assert_eq!(prevalence_function(&ds, 2, 3, &[0.5]), Some(0.0));
        assert_eq!(prevalence_function(&ds, 2, 3, &[3.0]), None);
    }

    #[test]
    fn prevalence_of_shifted_unit_gaussians() {
        let ds = vec![
            DensityModel::gaussian(vec![0.0], vec![vec![1.0]]).unwrap(),
            DensityModel::gaussian(vec![1.0], vec![vec![1.0]]).unwrap(),
        ];
        assert!((prevalence_function(&ds, 0, 1, &[0.5]).unwrap() - 0.5).abs() < 1e-15);
        for &r in &[-2.0f64, -0.3, 0.9, 2.5] {
            let p1 = (-0.5 * r * r).exp();
            let p2 = (-0.5 * (r - 1.0) * (r - 1.0)).exp();
            let expected = p2 / (p1 + p2);
            assert!(close(
                prevalence_function(&ds, 0, 1, &[r]).unwrap(),
                expected,
                1e-14
            ));
            // logistic form
            let logistic = 1.0 / (1.0 + (0.5 - r).exp());
            assert!(close(expected, logistic, 1e-14));
        }
    }

    #[test]
    fn underflow_counts_as_zero() {
        let g = DensityModel::gaussian(vec![0.0], vec![vec![1e-4]]).unwrap();
        assert_eq!(g.effective_pdf(&[10.0]), 0.0);
        assert!(g.effective_pdf(&[0.0]) > 0.0);
    }

    #[test]
    fn piecewise_lookup_and_mass() {
        let p = PiecewiseConstant::on_grid(
            vec![0.0, 0.0],
            vec![2.0, 1.0],
            vec![2, 1],
            vec![0.25, 0.75],
        )
        .unwrap();
        assert!((p.mass() - 1.0).abs() < 1e-15);
        assert_eq!(p.pdf(&[0.5, 0.5]), 0.25);
        assert_eq!(p.pdf(&[1.5, 0.5]), 0.75);
        assert_eq!(p.pdf(&[2.0, 1.0]), 0.75);
        assert_eq!(p.pdf(&[2.5, 0.5]), 0.0);
        let cells: Vec<Cell> = p.cells().collect();
        let q = PiecewiseConstant::from_cells(cells, p.values().to_vec()).unwrap();
        for x in [[0.1, 0.2], [1.9, 0.9], [3.0, 0.0]] {
            assert_eq!(p.pdf(&x), q.pdf(&x));
        }
    }

    #[test]
    fn extended_ratio_json() {
        let xs = vec![
            ExtendedRatio::Zero,
            ExtendedRatio::Finite(2.5),
            ExtendedRatio::Infinite,
            ExtendedRatio::Indeterminate,
        ];
        let s = serde_json::to_string(&xs).unwrap();
        assert_eq!(s, r#"[0.0,2.5,"inf",null]"#);
        let back: Vec<ExtendedRatio> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, xs);
    }

    proptest::proptest! {
        #[test]
        fn ratio_reciprocity_and_prevalence_complement(
            mx in -1.0f64..1.0, vx in 0.1f64..2.0, x in -3.0f64..3.0
        ) {
            let ds = vec![
                DensityModel::gaussian(vec![0.0], vec![vec![1.0]]).unwrap(),
                DensityModel::gaussian(vec![mx], vec![vec![vx]]).unwrap(),
            ];
            let a = density_ratio(&ds, 0, 1, &[x]).finite().unwrap();
            let b = density_ratio(&ds, 1, 0, &[x]).finite().unwrap();
            proptest::prop_assert!((a * b - 1.0).abs() < 1e-12);
            let q = prevalence_function(&ds, 0, 1, &[x]).unwrap();
            let p = prevalence_function(&ds, 1, 0, &[x]).unwrap();
            proptest::prop_assert!((q + p - 1.0).abs() < 1e-15);
        }

        #[test]
        fn uniform_mixture_is_mean(x in -2.0f64..2.0, y in -2.0f64..2.0) {
            let ds = three_gaussians();
            let r = [x, y];
            let v = mixture_density(&ds, &Simplex::uniform(3), &r).unwrap();
            let mean = ds.iter().map(|d| d.effective_pdf(&r)).sum::<f64>() / 3.0;
            proptest::prop_assert!((v - mean).abs() <= 1e-14 * mean.max(f64::MIN_POSITIVE));
        }
    }
}
