//! Strong Bayes classifiers built from known densities, and pointwise
//! uncertainty quantities.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::consistency::identity::{ratio_identity_check, RatioMatrix};
use crate::density::{DensityModel, ExtendedRatio};
use crate::error::{Error, Result};
use crate::probing::MonotoneClassifier;
use crate::simplex::Simplex;

pub type TieFn = Arc<dyn Fn(&[f64], &[usize]) -> usize + Send + Sync>;

/// How a point on a boundary set is assigned.
#[derive(Clone, Default)]
pub enum TieRule {
    #[default]
    LowestIndex,
    HighestIndex,
    /// Called with the point and the tied classes (ascending). A return value
    /// outside the tied set falls back to the lowest tied class.
    Fixed(TieFn),
}

impl fmt::Debug for TieRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TieRule::LowestIndex => f.write_str("LowestIndex"),
            TieRule::HighestIndex => f.write_str("HighestIndex"),
            TieRule::Fixed(_) => f.write_str("Fixed(..)"),
        }
    }
}

impl TieRule {
    /// Picks one of `tied` (nonempty, ascending).
    pub fn resolve(&self, r: &[f64], tied: &[usize]) -> usize {
        match self {
            TieRule::LowestIndex => tied[0],
            TieRule::HighestIndex => tied[tied.len() - 1],
            TieRule::Fixed(f) => {
                let c = f(r, tied);
                if tied.contains(&c) {
                    c
                } else {
                    tied[0]
                }
            }
        }
    }
}

/// A label together with how it was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub label: usize,
    /// More than one class attained the maximum.
    pub boundary: bool,
    /// Every weighted density vanished; the label is a tie-rule placeholder.
    pub off_support: bool,
}

/// Resolves `argmax_j weights_j` with exact comparisons. When every weight is
/// zero the candidates are the classes with positive prevalence.
pub(crate) fn decide(weights: &[f64], q: &Simplex, r: &[f64], tie: &TieRule) -> Decision {
    let max = weights.iter().copied().fold(0.0f64, f64::max);
    let off_support = max <= 0.0;
    let tied: Vec<usize> = if off_support {
        (0..weights.len()).filter(|&j| q[j] > 0.0).collect()
    } else {
        (0..weights.len()).filter(|&j| weights[j] == max).collect()
    };
    Decision {
        label: tie.resolve(r, &tied),
        boundary: tied.len() > 1,
        off_support,
    }
}

/// `argmax_j q_j P_j(r)` with the tie rule applied on boundary sets.
pub fn multiclass_bayes_decision(
    densities: &[DensityModel],
    q: &Simplex,
    r: &[f64],
    tie: &TieRule,
) -> Decision {
    let weights: Vec<f64> = densities
        .iter()
        .zip(q.weights())
        .map(|(d, &w)| if w > 0.0 { w * d.effective_pdf(r) } else { 0.0 })
        .collect();
    decide(&weights, q, r, tie)
}

pub fn multiclass_bayes_classify(
    densities: &[DensityModel],
    q: &Simplex,
    r: &[f64],
    tie: &TieRule,
) -> usize {
    multiclass_bayes_decision(densities, q, r, tie).label
}

/// Binary Bayes decision between `p1` (label 0) and `p2` (label 1).
pub fn binary_bayes_classify(
    p1: &DensityModel,
    p2: &DensityModel,
    q: &Simplex,
    r: &[f64],
    tie: &TieRule,
) -> Decision {
    let weights = [q[0] * p1.effective_pdf(r), q[1] * p2.effective_pdf(r)];
    decide(&weights, q, r, tie)
}

/// Strong Bayes classifier for known class densities.
#[derive(Debug, Clone)]
pub struct OracleClassifier {
    densities: Vec<DensityModel>,
    tie: TieRule,
}

impl OracleClassifier {
    pub fn new(densities: Vec<DensityModel>, tie: TieRule) -> Self {
        OracleClassifier { densities, tie }
    }

    pub fn densities(&self) -> &[DensityModel] {
        &self.densities
    }

    pub fn tie_rule(&self) -> &TieRule {
        &self.tie
    }

    pub fn decision(&self, r: &[f64], q: &Simplex) -> Decision {
        multiclass_bayes_decision(&self.densities, q, r, &self.tie)
    }
}

impl MonotoneClassifier for OracleClassifier {
    fn num_classes(&self) -> usize {
        self.densities.len()
    }

    fn classify(&self, r: &[f64], q: &Simplex) -> Result<usize> {
        if q.len() != self.densities.len() {
            return Err(Error::DimensionMismatch {
                expected: self.densities.len(),
                got: q.len(),
            });
        }
        if let Some(d) = self.densities.first() {
            if d.dim() != r.len() {
                return Err(Error::DimensionMismatch {
                    expected: d.dim(),
                    got: r.len(),
                });
            }
        }
        Ok(self.decision(r, q).label)
    }
}

/// Pointwise inherent uncertainty `1 - max_C chi_C P_C(r) / Q(r; chi)`.
pub fn inherent_uncertainty(densities: &[DensityModel], chi: &Simplex, r: &[f64]) -> Result<f64> {
    if densities.len() != chi.len() {
        return Err(Error::DimensionMismatch {
            expected: densities.len(),
            got: chi.len(),
        });
    }
    let products: Vec<f64> = densities
        .iter()
        .zip(chi.weights())
        .map(|(d, &w)| w * d.effective_pdf(r))
        .collect();
    let q: f64 = products.iter().sum();
    if !(q > 0.0) {
        return Err(Error::OffSupportPoint);
    }
    let max = products.iter().copied().fold(0.0, f64::max);
    Ok(1.0 - max / q)
}

/// Ratio `R_{j,k} = q_{j,k} / q_{k,j}` from a prevalence-function matrix.
/// Using the reverse entry instead of `1 - q_{j,k}` keeps precision in the
/// tails.
pub fn ratios_from_prevalence(prevalence: &[Vec<f64>]) -> RatioMatrix {
    let k = prevalence.len();
    let mut m = RatioMatrix::identity(k);
    for j in 0..k {
        for l in 0..k {
            if j != l {
                m.set(
                    j,
                    l,
                    ExtendedRatio::from_parts(prevalence[j][l], prevalence[l][j]),
                );
            }
        }
    }
    m
}

/// Relative tolerance used to validate prevalence tables before computing
/// accuracies from them.
pub const ACCURACY_IDENTITY_TOL: f64 = 1e-9;

/// Pointwise accuracy `Z(r; chi)` of assigning `assigned`, computed from
/// prevalence-function values alone. Classes whose ratio row contains an
/// infinite entry lie off-support and score 0.
pub fn pointwise_accuracy(prevalence: &[Vec<f64>], chi: &Simplex, assigned: usize) -> Result<f64> {
    if !chi.is_interior() {
        return Err(Error::InteriorRequired);
    }
    let k = chi.len();
    if prevalence.len() != k || prevalence.iter().any(|row| row.len() != k) || assigned >= k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: prevalence.len(),
        });
    }
    if prevalence
        .iter()
        .flatten()
        .any(|v| !(0.0..=1.0).contains(v))
    {
        return Err(Error::InconsistentRatios(
            "prevalence values outside [0, 1]".into(),
        ));
    }
    let m = ratios_from_prevalence(prevalence);
    let report = ratio_identity_check(&m, ACCURACY_IDENTITY_TOL);
    if !report.passed {
        return Err(Error::InconsistentRatios(format!(
            "identity residual {:.3e}",
            report.max_residual
        )));
    }
    Ok(class_score(&m, chi, assigned))
}

/// `chi_j / sum_k chi_k R_{j,k}` with an infinite term short-circuiting to 0.
pub(crate) fn class_score(m: &RatioMatrix, chi: &Simplex, j: usize) -> f64 {
    let mut denom = 0.0;
    for l in 0..chi.len() {
        match m.get(j, l) {
            ExtendedRatio::Infinite => return 0.0,
            ExtendedRatio::Finite(x) => denom += chi[l] * x,
            ExtendedRatio::Zero | ExtendedRatio::Indeterminate => {}
        }
    }
    chi[j] / denom
}

/// Perturbations of the prevalence and class densities entering the
/// empirical uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyBudget {
    pub eps_chi: Vec<f64>,
    pub eps_dist: Vec<f64>,
    pub eps_num: f64,
}

impl UncertaintyBudget {
    pub fn zero(k: usize) -> Self {
        UncertaintyBudget {
            eps_chi: vec![0.0; k],
            eps_dist: vec![0.0; k],
            eps_num: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetUncertainty {
    pub raw: f64,
    /// `raw` clamped to `[0, 1]`.
    pub clamped: f64,
    /// Set when clamping changed the value.
    pub clamped_flag: bool,
}

/// Empirical uncertainty with perturbed prevalences and densities.
/// Perturbed factors are clamped at zero; each class uses its own
/// perturbations in both numerator and denominator.
pub fn budget_uncertainty(
    densities: &[DensityModel],
    chi: &Simplex,
    r: &[f64],
    budget: &UncertaintyBudget,
) -> Result<BudgetUncertainty> {
    let k = densities.len();
    if chi.len() != k || budget.eps_chi.len() != k || budget.eps_dist.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: chi.len(),
        });
    }
    let terms: Vec<f64> = (0..k)
        .map(|c| {
            let prev = (chi[c] + budget.eps_chi[c]).max(0.0);
            let dens = (densities[c].effective_pdf(r) + budget.eps_dist[c]).max(0.0);
            prev * dens
        })
        .collect();
    let total: f64 = terms.iter().sum();
    if !(total > 0.0) {
        return Err(Error::OffSupportPoint);
    }
    let max = terms.iter().copied().fold(0.0, f64::max);
    let raw = 1.0 - max / total + budget.eps_num;
    let clamped = raw.clamp(0.0, 1.0);
    Ok(BudgetUncertainty {
        raw,
        clamped,
        clamped_flag: clamped != raw,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo::three_gaussians;
    use crate::density::{prevalence_function, PiecewiseConstant};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn flat(lo: f64, hi: f64) -> DensityModel {
        DensityModel::PiecewiseConstant(
            PiecewiseConstant::on_grid(vec![lo], vec![hi], vec![1], vec![1.0 / (hi - lo)]).unwrap(),
        )
    }

    #[test]
    fn binary_examples() {
        let p = DensityModel::gaussian(vec![0.0], vec![vec![1.0]]).unwrap();
        let q = Simplex::new(vec![0.6, 0.4]).unwrap();
        let d = binary_bayes_classify(&p, &p, &q, &[0.3], &TieRule::LowestIndex);
        assert_eq!((d.label, d.boundary), (0, false));
        let d = binary_bayes_classify(&p, &p, &Simplex::uniform(2), &[0.3], &TieRule::LowestIndex);
        assert_eq!((d.label, d.boundary), (0, true));
        let d = binary_bayes_classify(&p, &p, &Simplex::uniform(2), &[0.3], &TieRule::HighestIndex);
        assert_eq!(d.label, 1);
        let a = flat(0.0, 1.0);
        let b = flat(2.0, 3.0);
        let d = binary_bayes_classify(&a, &b, &Simplex::uniform(2), &[5.0], &TieRule::LowestIndex);
        assert!(d.off_support && d.boundary);
    }

    #[test]
    fn fixed_tie_rule() {
        let p = DensityModel::gaussian(vec![0.0], vec![vec![1.0]]).unwrap();
        let rule = TieRule::Fixed(Arc::new(
            |r: &[f64], tied: &[usize]| {
                if r[0] > 0.0 {
                    tied[tied.len() - 1]
                } else {
                    99
                }
            },
        ));
        let ds = vec![p.clone(), p];
        assert_eq!(
            multiclass_bayes_classify(&ds, &Simplex::uniform(2), &[1.0], &rule),
            1
        );
        assert_eq!(
            multiclass_bayes_classify(&ds, &Simplex::uniform(2), &[-1.0], &rule),
            0
        );
    }

    #[test]
    fn step_function_in_q() {
        // two-Gaussian pair in the plane, label decreases from class 1 to 0 as q_0 grows
        let ds = [
            DensityModel::gaussian(vec![0.0, 1.0], vec![vec![0.49, 0.0], vec![0.0, 0.09]]).unwrap(),
            DensityModel::gaussian(vec![0.0, -1.0], vec![vec![0.16, 0.0], vec![0.0, 0.64]])
                .unwrap(),
        ];
        let r = [0.3, 0.4];
        let mut last = 1;
        let mut switches = 0;
        for q0 in [1e-3, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9, 0.95, 0.999] {
            let d = binary_bayes_classify(
                &ds[0],
                &ds[1],
                &Simplex::binary(q0).unwrap(),
                &r,
                &TieRule::LowestIndex,
            );
            assert!(d.label <= last);
            if d.label != last {
                switches += 1;
            }
            last = d.label;
        }
        assert!(switches <= 1);
    }

    #[test]
    fn multiclass_examples() {
        let ds = three_gaussians();
        assert_eq!(
            multiclass_bayes_classify(
                &ds,
                &Simplex::vertex(3, 0),
                &[0.0, 0.0],
                &TieRule::default()
            ),
            0
        );
        // near each mean the class with that mean wins
        for (j, m) in crate::demo::THREE_CLASS_MEANS.iter().enumerate() {
            assert_eq!(
                multiclass_bayes_classify(&ds, &Simplex::uniform(3), m, &TieRule::default()),
                j
            );
        }
        let only = vec![flat(0.0, 1.0), flat(5.0, 6.0), flat(7.0, 8.0)];
        for q in [[0.2, 0.3, 0.5], [0.9, 0.05, 0.05], [0.01, 0.49, 0.5]] {
            let q = Simplex::new(q.to_vec()).unwrap();
            assert_eq!(
                multiclass_bayes_classify(&only, &q, &[0.5], &TieRule::HighestIndex),
                0
            );
        }
    }

    #[test]
    fn uncertainty_examples() {
        let p = DensityModel::gaussian(vec![0.0], vec![vec![1.0]]).unwrap();
        let ds = vec![p.clone(), p];
        assert_eq!(
            inherent_uncertainty(&ds, &Simplex::uniform(2), &[0.2]).unwrap(),
            0.5
        );
        let ds2 = vec![flat(0.0, 1.0), flat(2.0, 3.0)];
        assert_eq!(
            inherent_uncertainty(&ds2, &Simplex::uniform(2), &[0.5]).unwrap(),
            0.0
        );
        assert!(matches!(
            inherent_uncertainty(&ds2, &Simplex::uniform(2), &[1.5]),
            Err(Error::OffSupportPoint)
        ));
        let g = three_gaussians();
        let r = [0.0, 0.0];
        let vals: Vec<f64> = g.iter().map(|d| d.pdf(&r)).collect();
        let expected = 1.0 - vals.iter().copied().fold(0.0, f64::max) / vals.iter().sum::<f64>();
        let u = inherent_uncertainty(&g, &Simplex::uniform(3), &r).unwrap();
        assert!((u - expected).abs() < 1e-15);
    }

    fn prevalence_table(ds: &[DensityModel], r: &[f64]) -> Vec<Vec<f64>> {
        (0..ds.len())
            .map(|j| {
                (0..ds.len())
                    .map(|k| prevalence_function(ds, j, k, r).unwrap())
                    .collect()
            })
            .collect()
    }

    #[test]
    fn accuracy_examples() {
        let half = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        assert_eq!(
            pointwise_accuracy(&half, &Simplex::uniform(2), 0).unwrap(),
            0.5
        );
        let certain = vec![vec![0.5, 0.0], vec![1.0, 0.5]];
        assert_eq!(
            pointwise_accuracy(&certain, &Simplex::new(vec![0.3, 0.7]).unwrap(), 0).unwrap(),
            1.0
        );
        assert_eq!(
            pointwise_accuracy(&certain, &Simplex::new(vec![0.3, 0.7]).unwrap(), 1).unwrap(),
            0.0
        );
        assert!(matches!(
            pointwise_accuracy(&half, &Simplex::vertex(2, 0), 0),
            Err(Error::InteriorRequired)
        ));
        // inconsistent three-class table
        let eps: f64 = 0.01;
        let q = |x: f64| x / (1.0 + x);
        let bad = vec![
            vec![0.5, q(eps), q(1.0)],
            vec![1.0 - q(eps), 0.5, q(eps)],
            vec![1.0 - q(1.0), 1.0 - q(eps), 0.5],
        ];
        assert!(matches!(
            pointwise_accuracy(&bad, &Simplex::uniform(3), 0),
            Err(Error::InconsistentRatios(_))
        ));
    }

    #[test]
    fn accuracy_matches_inherent_uncertainty() {
        let ds = three_gaussians();
        let chi = Simplex::new(vec![0.2, 0.5, 0.3]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let r = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let label = multiclass_bayes_classify(&ds, &chi, &r, &TieRule::default());
            let z = pointwise_accuracy(&prevalence_table(&ds, &r), &chi, label).unwrap();
            let u = inherent_uncertainty(&ds, &chi, &r).unwrap();
            assert!(
                (z - (1.0 - u)).abs() <= 1e-10 * (1.0 - u),
                "{z} vs {}",
                1.0 - u
            );
        }
    }

    #[test]
    fn budget_examples() {
        let ds = three_gaussians();
        let chi = Simplex::uniform(3);
        let r = [0.1, 0.2];
        let u = inherent_uncertainty(&ds, &chi, &r).unwrap();
        let b = budget_uncertainty(&ds, &chi, &r, &UncertaintyBudget::zero(3)).unwrap();
        assert_eq!(b.raw, u);
        let mut budget = UncertaintyBudget::zero(3);
        budget.eps_num = 0.01;
        let b = budget_uncertainty(&ds, &chi, &r, &budget).unwrap();
        assert!((b.raw - (u + 0.01)).abs() < 1e-15);
        budget.eps_num = 2.0;
        let b = budget_uncertainty(&ds, &chi, &r, &budget).unwrap();
        assert!(b.clamped == 1.0 && b.clamped_flag);
    }

    proptest! {
        #[test]
        fn budget_matches_recomposition(
            x in -2.0f64..2.0, y in -2.0f64..2.0,
            ec in proptest::collection::vec(-0.05f64..0.05, 3),
            ed in proptest::collection::vec(-0.05f64..0.05, 3),
            en in 0.0f64..0.05,
        ) {
            let ds = three_gaussians();
            let chi = Simplex::new(vec![0.3, 0.3, 0.4]).unwrap();
            let r = [x, y];
            let budget = UncertaintyBudget { eps_chi: ec.clone(), eps_dist: ed.clone(), eps_num: en };
            // recompose from a perturbed mixture evaluated class by class
            let perturbed: Vec<f64> = (0..3)
                .map(|c| f64::max(chi[c] + ec[c], 0.0) * f64::max(ds[c].pdf(&r) + ed[c], 0.0))
                .collect();
            let total: f64 = perturbed.iter().sum();
            prop_assume!(total > 0.0);
            let best = perturbed.iter().copied().fold(0.0, f64::max);
            let expected = 1.0 - best / total + en;
            let got = budget_uncertainty(&ds, &chi, &r, &budget).unwrap();
            prop_assert!((got.raw - expected).abs() < 1e-14);
        }

        #[test]
        fn uncertainty_range(x in -2.0f64..2.0, y in -2.0f64..2.0, a in 0.05f64..0.9) {
            let ds = three_gaussians();
            let chi = Simplex::new(vec![a, (1.0 - a) / 2.0, (1.0 - a) / 2.0]).unwrap();
            let u = inherent_uncertainty(&ds, &chi, &[x, y]).unwrap();
            prop_assert!((0.0..=1.0 - 1.0 / 3.0 + 1e-15).contains(&u));
        }

        #[test]
        fn never_picks_zero_product(x in -1.0f64..4.0) {
            let ds = vec![flat(0.0, 1.0), flat(0.5, 2.0), flat(1.5, 3.0)];
            let chi = Simplex::new(vec![0.2, 0.3, 0.5]).unwrap();
            let d = multiclass_bayes_decision(&ds, &chi, &[x], &TieRule::HighestIndex);
            if !d.off_support {
                prop_assert!(ds[d.label].effective_pdf(&[x]) > 0.0);
            }
        }
    }
}
