//! Labeled training sets grouped by class.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::LabeledSample;
use crate::simplex::Simplex;

/// Samples grouped by (0-based) class; every class is nonempty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingDataset {
    classes: Vec<Vec<Vec<f64>>>,
    dim: usize,
}

impl TrainingDataset {
    pub fn new(classes: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if let Some(k) = classes.iter().position(|c| c.is_empty()) {
            return Err(Error::EmptyClass(k));
        }
        if classes.len() < 2 {
            return Err(Error::EmptyClass(classes.len()));
        }
        let dim = classes[0][0].len();
        for c in &classes {
            for p in c {
                if p.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: p.len(),
                    });
                }
            }
        }
        Ok(TrainingDataset { classes, dim })
    }

    /// Groups labeled samples into `k` classes.
    pub fn from_samples(k: usize, samples: &[LabeledSample]) -> Result<Self> {
        let mut classes = vec![Vec::new(); k];
        for s in samples {
            if s.label >= k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: s.label + 1,
                });
            }
            classes[s.label].push(s.point.clone());
        }
        Self::new(classes)
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class(&self, k: usize) -> &[Vec<f64>] {
        &self.classes[k]
    }

    pub fn classes(&self) -> &[Vec<Vec<f64>>] {
        &self.classes
    }

    /// `s_k`.
    pub fn counts(&self) -> Vec<usize> {
        self.classes.iter().map(Vec::len).collect()
    }

    /// `N`.
    pub fn total(&self) -> usize {
        self.classes.iter().map(Vec::len).sum()
    }

    /// `s_k / N`.
    pub fn training_prevalence(&self) -> Simplex {
        let n = self.total() as f64;
        Simplex::new(self.classes.iter().map(|c| c.len() as f64 / n).collect())
            .expect("counts give a valid simplex")
    }

    /// Classes `j` and `k` relabeled as 0 and 1.
    pub fn pair(&self, j: usize, k: usize) -> Result<Self> {
        if j == k || j >= self.num_classes() || k >= self.num_classes() {
            return Err(Error::BadPair(j, k));
        }
        Self::new(vec![self.classes[j].clone(), self.classes[k].clone()])
    }

    /// `(point, class, weight q_k / s_k)` in class order.
    pub(crate) fn weighted(&self, q: &Simplex) -> Vec<(&[f64], usize, f64)> {
        let mut out = Vec::with_capacity(self.total());
        for (k, c) in self.classes.iter().enumerate() {
            let w = q[k] / c.len() as f64;
            for p in c {
                out.push((p.as_slice(), k, w));
            }
        }
        out
    }
}
