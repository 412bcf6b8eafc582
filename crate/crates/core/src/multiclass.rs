//! Multiclass Bayes classifiers assembled from pairwise prevalence
//! functions, with extensions onto points where a pair has no support.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::consistency::feasible::feasible_set;
use crate::consistency::identity::RatioMatrix;
use crate::density::{prevalence_function, DensityModel, ExtendedRatio};
use crate::error::{Error, Result};
use crate::oracle::{class_score, decide, multiclass_bayes_decision, TieRule};
use crate::par::{map_slice, Exec};
use crate::probing::{probe_point_refined, MonotoneClassifier, PrevalenceGrid};
use crate::simplex::Simplex;

/// `q_{j,k}(r)`, or `None` where neither class has support.
pub type PrevalenceFn = Arc<dyn Fn(usize, usize, &[f64]) -> Option<f64> + Send + Sync>;
/// Value assigned to `q_{j,k}(r)` off the joint support; must lie in `[0, 1]`.
pub type ExtensionFn = Arc<dyn Fn(usize, usize, &[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum PrevalenceSource {
    /// Closed-form prevalence functions of known densities.
    Exact(Vec<DensityModel>),
    /// Any evaluable family, with `q_{k,j} = 1 - q_{j,k}` implied for `j > k`.
    Function { classes: usize, f: PrevalenceFn },
    /// Probe a classifier at each point and commit to the feasible witness.
    Probed {
        classifier: Arc<dyn MonotoneClassifier>,
        grid: PrevalenceGrid,
        iters: usize,
        tol: f64,
    },
}

/// Pairwise prevalence functions for every unordered pair of classes.
#[derive(Clone)]
pub struct PairwisePrevalenceTable {
    source: PrevalenceSource,
    extension: ExtensionFn,
}

/// Table values at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct PrevalenceValues {
    /// `q[j][k]`, with `q[j][j] = 1/2` and `q[k][j] = 1 - q[j][k]`.
    pub q: Vec<Vec<f64>>,
    /// Entries that came from the extension rather than the source.
    pub extended: Vec<Vec<bool>>,
    /// Probed tables only: the label is the same over the whole feasible box.
    pub label_robust: Option<bool>,
}

impl PrevalenceValues {
    /// `R_{j,k} = q_{j,k} / q_{k,j}` with zero and infinite entries kept
    /// symbolic.
    pub fn ratios(&self) -> RatioMatrix {
        let k = self.q.len();
        let mut m = RatioMatrix::identity(k);
        for j in 0..k {
            for l in 0..k {
                if j != l {
                    m.set(j, l, ExtendedRatio::from_parts(self.q[j][l], self.q[l][j]));
                }
            }
        }
        m
    }

    /// Every pair is an extension: no class has support at the point.
    pub fn all_extended(&self) -> bool {
        let k = self.q.len();
        k > 1 && (0..k).all(|j| (0..k).all(|l| j == l || self.extended[j][l]))
    }
}

fn half_extension() -> ExtensionFn {
    Arc::new(|_, _, _| 0.5)
}

impl PairwisePrevalenceTable {
    /// Exact table with extension value 1/2.
    pub fn exact(densities: Vec<DensityModel>) -> Self {
        PairwisePrevalenceTable {
            source: PrevalenceSource::Exact(densities),
            extension: half_extension(),
        }
    }

    pub fn from_fn(
        classes: usize,
        f: impl Fn(usize, usize, &[f64]) -> Option<f64> + Send + Sync + 'static,
    ) -> Self {
        PairwisePrevalenceTable {
            source: PrevalenceSource::Function {
                classes,
                f: Arc::new(f),
            },
            extension: half_extension(),
        }
    }

    pub fn probed(
        classifier: Arc<dyn MonotoneClassifier>,
        grid: PrevalenceGrid,
        iters: usize,
        tol: f64,
    ) -> Self {
        PairwisePrevalenceTable {
            source: PrevalenceSource::Probed {
                classifier,
                grid,
                iters,
                tol,
            },
            extension: half_extension(),
        }
    }

    pub fn with_extension(
        mut self,
        f: impl Fn(usize, usize, &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.extension = Arc::new(f);
        self
    }

    pub fn source(&self) -> &PrevalenceSource {
        &self.source
    }

    pub fn num_classes(&self) -> usize {
        match &self.source {
            PrevalenceSource::Exact(d) => d.len(),
            PrevalenceSource::Function { classes, .. } => *classes,
            PrevalenceSource::Probed { classifier, .. } => classifier.num_classes(),
        }
    }

    /// Whether points may be evaluated concurrently.
    pub fn is_concurrent(&self) -> bool {
        match &self.source {
            PrevalenceSource::Probed { classifier, .. } => classifier.is_concurrent(),
            _ => true,
        }
    }

    fn extend(&self, j: usize, k: usize, r: &[f64]) -> f64 {
        (self.extension)(j, k, r).clamp(0.0, 1.0)
    }

    /// Evaluates all pairs at `r`. `chi` is needed only by probed tables,
    /// whose witness comes from the feasible-set audit.
    pub fn evaluate(&self, r: &[f64], chi: &Simplex) -> Result<PrevalenceValues> {
        let k = self.num_classes();
        let mut q = vec![vec![0.5; k]; k];
        let mut extended = vec![vec![false; k]; k];
        let mut label_robust = None;
        match &self.source {
            PrevalenceSource::Exact(ds) => {
                for j in 0..k {
                    for l in 0..k {
                        if j == l {
                            continue;
                        }
                        match prevalence_function(ds, j, l, r) {
                            Some(v) => q[j][l] = v,
                            None => {
                                extended[j][l] = true;
                                q[j][l] = if j < l {
                                    self.extend(j, l, r)
                                } else {
                                    1.0 - self.extend(l, j, r)
                                };
                            }
                        }
                    }
                }
            }
            PrevalenceSource::Function { f, .. } => {
                for j in 0..k {
                    for l in j + 1..k {
                        let v = match f(j, l, r) {
                            Some(v) if (0.0..=1.0).contains(&v) => v,
                            Some(v) => {
                                return Err(Error::InvalidDensity(format!(
                                    "prevalence value {v} outside [0, 1]"
                                )))
                            }
                            None => {
                                extended[j][l] = true;
                                extended[l][j] = true;
                                self.extend(j, l, r)
                            }
                        };
                        q[j][l] = v;
                        q[l][j] = 1.0 - v;
                    }
                }
            }
            PrevalenceSource::Probed {
                classifier,
                grid,
                iters,
                tol,
            } => {
                let probe = probe_point_refined(classifier.as_ref(), r, grid, *iters)?;
                let fs = feasible_set(&probe.matrix, chi, *tol)?;
                let Some(w) = fs.witness else {
                    return Err(Error::InconsistentPoint);
                };
                label_robust = fs.label_robust;
                for j in 0..k {
                    for l in 0..k {
                        if j == l {
                            continue;
                        }
                        q[j][l] = match w.get(j, l) {
                            ExtendedRatio::Zero => 0.0,
                            ExtendedRatio::Infinite => 1.0,
                            ExtendedRatio::Finite(x) => x / (1.0 + x),
                            ExtendedRatio::Indeterminate => {
                                extended[j][l] = true;
                                if j < l {
                                    self.extend(j, l, r)
                                } else {
                                    1.0 - self.extend(l, j, r)
                                }
                            }
                        };
                    }
                }
            }
        }
        Ok(PrevalenceValues {
            q,
            extended,
            label_robust,
        })
    }
}

fn check_chi(table: &PairwisePrevalenceTable, chi: &Simplex) -> Result<()> {
    if chi.len() != table.num_classes() {
        return Err(Error::DimensionMismatch {
            expected: table.num_classes(),
            got: chi.len(),
        });
    }
    if !chi.is_interior() {
        return Err(Error::InteriorRequired);
    }
    Ok(())
}

fn scores_from(values: &PrevalenceValues, chi: &Simplex) -> Vec<f64> {
    let m = values.ratios();
    (0..chi.len()).map(|j| class_score(&m, chi, j)).collect()
}

/// Per-class scores `chi_j / sum_k chi_k R_{j,k}(r)`.
pub fn score_vector(table: &PairwisePrevalenceTable, chi: &Simplex, r: &[f64]) -> Result<Vec<f64>> {
    check_chi(table, chi)?;
    Ok(scores_from(&table.evaluate(r, chi)?, chi))
}

/// Label and scores produced by the pairwise construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructedLabel {
    pub label: usize,
    pub scores: Vec<f64>,
    pub boundary: bool,
    /// No class has support; the label is the tie rule's choice.
    pub off_support: bool,
    pub label_robust: Option<bool>,
}

/// `argmax_j` of the score vector, with ties resolved by `tie`.
pub fn construct_label(
    table: &PairwisePrevalenceTable,
    chi: &Simplex,
    r: &[f64],
    tie: &TieRule,
) -> Result<ConstructedLabel> {
    check_chi(table, chi)?;
    let values = table.evaluate(r, chi)?;
    let scores = scores_from(&values, chi);
    let (label, boundary, off_support) = if values.all_extended() {
        let all: Vec<usize> = (0..chi.len()).collect();
        (tie.resolve(r, &all), true, true)
    } else {
        let d = decide(&scores, chi, r, tie);
        (d.label, d.boundary, d.off_support)
    };
    Ok(ConstructedLabel {
        label,
        scores,
        boundary,
        off_support,
        label_robust: values.label_robust,
    })
}

/// The construction as a classifier of `(r, q)`. Prevalences on the simplex
/// boundary restrict the construction to the classes with `q_j > 0`.
#[derive(Clone)]
pub struct PairwiseComposite {
    pub table: PairwisePrevalenceTable,
    pub tie: TieRule,
}

impl MonotoneClassifier for PairwiseComposite {
    fn num_classes(&self) -> usize {
        self.table.num_classes()
    }

    fn classify(&self, r: &[f64], q: &Simplex) -> Result<usize> {
        let k = self.table.num_classes();
        if q.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: q.len(),
            });
        }
        if q.is_interior() {
            return construct_label(&self.table, q, r, &self.tie).map(|c| c.label);
        }
        let active: Vec<usize> = (0..k).filter(|&j| q[j] > 0.0).collect();
        if active.len() == 1 {
            return Ok(active[0]);
        }
        let values = self.table.evaluate(r, &Simplex::uniform(k))?;
        let sub = PrevalenceValues {
            q: active
                .iter()
                .map(|&a| active.iter().map(|&b| values.q[a][b]).collect())
                .collect(),
            extended: active
                .iter()
                .map(|&a| active.iter().map(|&b| values.extended[a][b]).collect())
                .collect(),
            label_robust: None,
        };
        let total: f64 = active.iter().map(|&j| q[j]).sum();
        let chi = Simplex::new(active.iter().map(|&j| q[j] / total).collect())?;
        let tied = |scores: &[f64]| -> Vec<usize> {
            if sub.all_extended() {
                return active.clone();
            }
            let max = scores.iter().copied().fold(0.0f64, f64::max);
            active
                .iter()
                .zip(scores)
                .filter(|(_, &s)| s == max)
                .map(|(&c, _)| c)
                .collect()
        };
        let scores = scores_from(&sub, &chi);
        Ok(self.tie.resolve(r, &tied(&scores)))
    }

    fn is_concurrent(&self) -> bool {
        self.table.is_concurrent()
    }
}

/// Relative gap between the two largest oracle products below which a
/// disagreement counts as a boundary tie.
pub const TIE_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub index: usize,
    pub point: Vec<f64>,
    pub constructed: usize,
    pub oracle: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub points: usize,
    pub matches: usize,
    pub tie_mismatches: Vec<Mismatch>,
    pub true_mismatches: Vec<Mismatch>,
    /// Points where the table could not be evaluated.
    pub failures: Vec<usize>,
}

fn near_tie(densities: &[DensityModel], chi: &Simplex, r: &[f64]) -> bool {
    let mut p: Vec<f64> = densities
        .iter()
        .zip(chi.weights())
        .map(|(d, &c)| c * d.effective_pdf(r))
        .collect();
    p.sort_by(|a, b| b.total_cmp(a));
    p.len() > 1 && (p[0] - p[1]).abs() <= TIE_REL_TOL * p[0].abs()
}

/// Compares the construction against the density oracle at every point.
pub fn equivalence_audit(
    exec: Exec,
    table: &PairwisePrevalenceTable,
    densities: &[DensityModel],
    chi: &Simplex,
    points: &[Vec<f64>],
    tie: &TieRule,
) -> Result<EquivalenceReport> {
    check_chi(table, chi)?;
    let exec = exec.restrict(table.is_concurrent());
    let outcomes = map_slice(exec, points, |r| {
        let constructed = construct_label(table, chi, r, tie).ok()?.label;
        let oracle = multiclass_bayes_decision(densities, chi, r, tie).label;
        Some((constructed, oracle))
    });
    let mut report = EquivalenceReport {
        points: points.len(),
        ..Default::default()
    };
    for (index, (out, r)) in outcomes.into_iter().zip(points).enumerate() {
        match out {
            None => report.failures.push(index),
            Some((c, o)) if c == o => report.matches += 1,
            Some((constructed, oracle)) => {
                let m = Mismatch {
                    index,
                    point: r.clone(),
                    constructed,
                    oracle,
                };
                if near_tie(densities, chi, r) {
                    report.tie_mismatches.push(m);
                } else {
                    report.true_mismatches.push(m);
                }
            }
        }
    }
    Ok(report)
}
