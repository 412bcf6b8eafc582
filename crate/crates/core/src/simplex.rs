//! Points of the probability simplex.
//!
//! A [`Simplex`] stands for any prevalence-like vector: the test prevalence of
//! a population, the affine prevalence fed to a classifier, or a softmax
//! output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weights below this are rejected as negative rather than clamped.
pub const NEGATIVE_TOL: f64 = 1e-12;
/// Allowed deviation of the raw weight sum from one.
pub const SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Simplex(Vec<f64>);

impl Simplex {
    /// Validates, clamps to `[0, 1]` and renormalizes.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::BadSum { sum: 0.0 });
        }
        if let Some((index, &value)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(**w >= -NEGATIVE_TOL))
        {
            return Err(Error::NegativeWeight { index, value });
        }
        let sum: f64 = weights.iter().sum();
        if !((sum - 1.0).abs() <= SUM_TOL) {
            return Err(Error::BadSum { sum });
        }
        let mut w: Vec<f64> = weights.into_iter().map(|x| x.clamp(0.0, 1.0)).collect();
        let s: f64 = w.iter().sum();
        for x in &mut w {
            *x /= s;
        }
        Ok(Simplex(w))
    }

    pub fn uniform(k: usize) -> Self {
        assert!(k > 0, "empty simplex");
        Simplex(vec![1.0 / k as f64; k])
    }

    /// The simplex vertex `e_j`.
    pub fn vertex(k: usize, j: usize) -> Self {
        assert!(j < k, "vertex index out of range");
        let mut w = vec![0.0; k];
        w[j] = 1.0;
        Simplex(w)
    }

    /// Binary prevalence `(q1, 1 - q1)`.
    pub fn binary(q1: f64) -> Result<Self> {
        Simplex::new(vec![q1, 1.0 - q1])
    }

    /// Builds a vector placing `alpha` at `j`, `1 - alpha` at `k` and zeros
    /// elsewhere, without renormalization round-off.
    pub(crate) fn edge(k_classes: usize, j: usize, k: usize, alpha: f64) -> Self {
        let mut w = vec![0.0; k_classes];
        w[j] = alpha;
        w[k] = 1.0 - alpha;
        Simplex(w)
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True iff every weight is strictly positive.
    pub fn is_interior(&self) -> bool {
        self.0.iter().all(|&w| w > 0.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for Simplex {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl<'de> Deserialize<'de> for Simplex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = Vec::<f64>::deserialize(d)?;
        Simplex::new(w).map_err(serde::de::Error::custom)
    }
}
