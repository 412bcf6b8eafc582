//! Class-switch probing: sweeping the affine prevalence along simplex edges
//! to recover prevalence functions and density-ratio intervals from any
//! monotone classifier.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::density::extended_f64;
use crate::error::{Error, Result};
use crate::par::{map_slice, Exec};
use crate::simplex::Simplex;

/// A classifier `(r, q) -> label` whose pairwise restrictions are expected
/// (but not assumed) to switch class at most once.
pub trait MonotoneClassifier: Send + Sync {
    fn num_classes(&self) -> usize;

    /// 0-based label for point `r` at affine prevalence `q`.
    fn classify(&self, r: &[f64], q: &Simplex) -> Result<usize>;

    /// Labels for one point at several prevalences.
    fn classify_batch(&self, r: &[f64], qs: &[Simplex]) -> Result<Vec<usize>> {
        qs.iter().map(|q| self.classify(r, q)).collect()
    }

    /// Whether distinct points may be classified from several threads at once.
    fn is_concurrent(&self) -> bool {
        true
    }
}

impl<T: MonotoneClassifier + ?Sized> MonotoneClassifier for Arc<T> {
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }
    fn classify(&self, r: &[f64], q: &Simplex) -> Result<usize> {
        (**self).classify(r, q)
    }
    fn classify_batch(&self, r: &[f64], qs: &[Simplex]) -> Result<Vec<usize>> {
        (**self).classify_batch(r, qs)
    }
    fn is_concurrent(&self) -> bool {
        (**self).is_concurrent()
    }
}

impl<T: MonotoneClassifier + ?Sized> MonotoneClassifier for Box<T> {
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }
    fn classify(&self, r: &[f64], q: &Simplex) -> Result<usize> {
        (**self).classify(r, q)
    }
    fn classify_batch(&self, r: &[f64], qs: &[Simplex]) -> Result<Vec<usize>> {
        (**self).classify_batch(r, qs)
    }
    fn is_concurrent(&self) -> bool {
        (**self).is_concurrent()
    }
}

/// Strictly increasing values of the edge parameter in `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PrevalenceGrid(Vec<f64>);

impl PrevalenceGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::BadGrid("empty grid".into()));
        }
        if values.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
            return Err(Error::BadGrid("grid values must lie in (0, 1)".into()));
        }
        if values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::BadGrid("grid must be strictly increasing".into()));
        }
        Ok(PrevalenceGrid(values))
    }

    /// `n` equally spaced interior values `i / (n + 1)`.
    pub fn uniform(n: usize) -> Result<Self> {
        Self::new((1..=n).map(|i| i as f64 / (n + 1) as f64).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.0[0]
    }

    pub fn max(&self) -> f64 {
        self.0[self.0.len() - 1]
    }
}

impl Default for PrevalenceGrid {
    /// `0.01, 0.02, ..., 0.99`.
    fn default() -> Self {
        PrevalenceGrid::uniform(99).expect("valid grid")
    }
}

impl<'de> Deserialize<'de> for PrevalenceGrid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        PrevalenceGrid::new(Vec::<f64>::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// The `k_classes`-vector with `alpha1` at slot `j`, `1 - alpha1` at slot
/// `k` and zeros elsewhere.
pub fn embed_pairwise(k_classes: usize, alpha1: f64, j: usize, k: usize) -> Result<Simplex> {
    if j == k || j >= k_classes || k >= k_classes {
        return Err(Error::BadPair(j, k));
    }
    if !(0.0..=1.0).contains(&alpha1) {
        return Err(Error::BadGrid(format!(
            "edge parameter {alpha1} outside [0, 1]"
        )));
    }
    Ok(Simplex::edge(k_classes, j, k, alpha1))
}

/// Where the switch of a pairwise restriction was located.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    InteriorSwitch,
    /// Label `j` on the whole grid: the switch lies below the grid minimum.
    AlwaysJ,
    /// Label `k` on the whole grid: the switch lies above the grid maximum.
    AlwaysK,
}

/// Location of the class switch of the restriction to edge `(j, k)`, in
/// units of the weight on class `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchBracket {
    pub pair: (usize, usize),
    pub q_low: f64,
    pub q_high: f64,
    /// Edge parameters at which extra (or wrong-direction) switches occurred.
    pub violations: Vec<f64>,
    pub regime: Regime,
    /// Number of grid points labeled with a class outside the pair.
    #[serde(default)]
    pub foreign: usize,
}

impl SwitchBracket {
    pub fn width(&self) -> f64 {
        self.q_high - self.q_low
    }

    pub fn is_monotone(&self) -> bool {
        self.violations.is_empty()
    }

    /// Interval for `R_{j,k} = q / (1 - q)`.
    pub fn ratio_interval(&self) -> RatioInterval {
        RatioInterval {
            lo: odds(self.q_low),
            hi: odds(self.q_high),
        }
    }
}

/// `q / (1 - q)` with `odds(1) = inf`.
pub fn odds(q: f64) -> f64 {
    if q >= 1.0 {
        f64::INFINITY
    } else {
        q / (1.0 - q)
    }
}

/// Labels along the edge are classified as the `j` side or not.
fn bracket_from_labels(pair: (usize, usize), grid: &[f64], labels: &[usize]) -> SwitchBracket {
    let (j, k) = pair;
    let is_j: Vec<bool> = labels.iter().map(|&l| l == j).collect();
    let foreign = labels.iter().filter(|&&l| l != j && l != k).count();
    let transitions: Vec<usize> = (0..is_j.len().saturating_sub(1))
        .filter(|&i| is_j[i] != is_j[i + 1])
        .collect();
    let n = grid.len();
    match (transitions.first(), transitions.last()) {
        (None, _) | (_, None) => {
            if is_j[0] {
                SwitchBracket {
                    pair,
                    q_low: 0.0,
                    q_high: grid[0],
                    violations: Vec::new(),
                    regime: Regime::AlwaysJ,
                    foreign,
                }
            } else {
                SwitchBracket {
                    pair,
                    q_low: grid[n - 1],
                    q_high: 1.0,
                    violations: Vec::new(),
                    regime: Regime::AlwaysK,
                    foreign,
                }
            }
        }
        (Some(&first), Some(&last)) => {
            let mut violations: Vec<f64> = transitions[1..].iter().map(|&i| grid[i + 1]).collect();
            if is_j[first] {
                violations.insert(0, grid[first + 1]);
            }
            SwitchBracket {
                pair,
                q_low: grid[first],
                q_high: grid[last + 1],
                violations,
                regime: Regime::InteriorSwitch,
                foreign,
            }
        }
    }
}

fn check_pair(clf: &dyn MonotoneClassifier, pair: (usize, usize)) -> Result<()> {
    let k = clf.num_classes();
    if pair.0 == pair.1 || pair.0 >= k || pair.1 >= k {
        return Err(Error::BadPair(pair.0, pair.1));
    }
    Ok(())
}

/// Sweeps the edge `(j, k)` over `grid`: exactly `grid.len()` evaluations.
pub fn probe_pair(
    clf: &dyn MonotoneClassifier,
    r: &[f64],
    pair: (usize, usize),
    grid: &PrevalenceGrid,
) -> Result<SwitchBracket> {
    check_pair(clf, pair)?;
    let kc = clf.num_classes();
    let qs: Vec<Simplex> = grid
        .values()
        .iter()
        .map(|&a| Simplex::edge(kc, pair.0, pair.1, a))
        .collect();
    let labels = clf.classify_batch(r, &qs)?;
    Ok(bracket_from_labels(pair, grid.values(), &labels))
}

/// Bisection on a monotone interior bracket.
pub fn refine_bracket(
    clf: &dyn MonotoneClassifier,
    r: &[f64],
    bracket: &SwitchBracket,
    max_iters: usize,
) -> Result<SwitchBracket> {
    if !bracket.violations.is_empty() {
        return Err(Error::NotRefinable("bracket has monotonicity violations"));
    }
    if bracket.regime != Regime::InteriorSwitch {
        return Err(Error::NotRefinable("bracket has no interior switch"));
    }
    check_pair(clf, bracket.pair)?;
    let (j, k) = bracket.pair;
    let kc = clf.num_classes();
    let mut out = bracket.clone();
    for _ in 0..max_iters {
        let mid = 0.5 * (out.q_low + out.q_high);
        if !(mid > out.q_low && mid < out.q_high) {
            break;
        }
        if clf.classify(r, &Simplex::edge(kc, j, k, mid))? == j {
            out.q_high = mid;
        } else {
            out.q_low = mid;
        }
    }
    Ok(out)
}

/// An interval `[lo, hi]` on the extended line `[0, inf]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioInterval {
    #[serde(with = "extended_f64")]
    pub lo: f64,
    #[serde(with = "extended_f64")]
    pub hi: f64,
}

impl RatioInterval {
    pub fn point(x: f64) -> Self {
        RatioInterval { lo: x, hi: x }
    }

    pub fn new(lo: f64, hi: f64) -> Self {
        RatioInterval { lo, hi }
    }

    /// Interval of reciprocals, with `1/0 = inf` and `1/inf = 0`.
    pub fn recip(self) -> Self {
        RatioInterval {
            lo: 1.0 / self.hi,
            hi: 1.0 / self.lo,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Probed density-ratio intervals for every ordered pair at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioIntervalMatrix {
    pub entries: Vec<Vec<RatioInterval>>,
    /// Monotonicity violations per entry (symmetric).
    pub violations: Vec<Vec<usize>>,
}

impl RatioIntervalMatrix {
    /// Unit diagonal and fully unknown off-diagonal entries.
    pub fn unknown(k: usize) -> Self {
        let entries = (0..k)
            .map(|a| {
                (0..k)
                    .map(|b| {
                        if a == b {
                            RatioInterval::point(1.0)
                        } else {
                            RatioInterval::new(0.0, f64::INFINITY)
                        }
                    })
                    .collect()
            })
            .collect();
        RatioIntervalMatrix {
            entries,
            violations: vec![vec![0; k]; k],
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, j: usize, k: usize) -> RatioInterval {
        self.entries[j][k]
    }

    /// Sets `(j, k)` and its reciprocal `(k, j)`.
    pub fn set_pair(&mut self, j: usize, k: usize, iv: RatioInterval, violations: usize) {
        self.entries[j][k] = iv;
        self.entries[k][j] = iv.recip();
        self.violations[j][k] = violations;
        self.violations[k][j] = violations;
    }

    pub fn from_brackets(k: usize, brackets: &[SwitchBracket]) -> Self {
        let mut m = Self::unknown(k);
        for b in brackets {
            m.set_pair(b.pair.0, b.pair.1, b.ratio_interval(), b.violations.len());
        }
        m
    }

    /// Diagonal is `[1, 1]` and
    /// each `(k, j)` is the reciprocal of `(j, k)` up to rounding.
    pub fn is_reciprocal(&self) -> bool {
        let k = self.len();
        (0..k).all(|a| {
            self.entries[a][a] == RatioInterval::point(1.0)
                && (0..k).all(|b| {
                    let e = self.entries[a][b];
                    let r = self.entries[b][a];
                    recip_close(e.lo, r.hi) && recip_close(e.hi, r.lo)
                })
        })
    }

    pub fn total_violations(&self) -> usize {
        let k = self.len();
        (0..k)
            .flat_map(|a| (a + 1..k).map(move |b| (a, b)))
            .map(|(a, b)| self.violations[a][b])
            .sum()
    }
}

fn recip_close(x: f64, y: f64) -> bool {
    let inv = 1.0 / y;
    x == inv
        || (x.is_finite() && inv.is_finite() && (x - inv).abs() <= 1e-12 * x.abs().max(inv.abs()))
}

/// Unordered pairs `(j, k)` with `j < k`.
pub fn unique_pairs(k: usize) -> Vec<(usize, usize)> {
    (0..k)
        .flat_map(|j| (j + 1..k).map(move |l| (j, l)))
        .collect()
}

/// Result of probing one point along every edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointProbe {
    pub brackets: Vec<SwitchBracket>,
    pub matrix: RatioIntervalMatrix,
}

impl PointProbe {
    pub fn violations(&self) -> usize {
        self.brackets.iter().map(|b| b.violations.len()).sum()
    }
}

/// Probes every unique pair at `r`, issuing the whole sweep as one batch.
pub fn probe_point(
    clf: &dyn MonotoneClassifier,
    r: &[f64],
    grid: &PrevalenceGrid,
) -> Result<PointProbe> {
    let kc = clf.num_classes();
    let pairs = unique_pairs(kc);
    let n = grid.len();
    let qs: Vec<Simplex> = pairs
        .iter()
        .flat_map(|&(j, k)| {
            grid.values()
                .iter()
                .map(move |&a| Simplex::edge(kc, j, k, a))
        })
        .collect();
    let labels = clf.classify_batch(r, &qs)?;
    if labels.len() != qs.len() {
        return Err(Error::Protocol(format!(
            "expected {} labels, got {}",
            qs.len(),
            labels.len()
        )));
    }
    let brackets: Vec<SwitchBracket> = pairs
        .iter()
        .enumerate()
        .map(|(p, &pair)| bracket_from_labels(pair, grid.values(), &labels[p * n..(p + 1) * n]))
        .collect();
    let matrix = RatioIntervalMatrix::from_brackets(kc, &brackets);
    Ok(PointProbe { brackets, matrix })
}

/// Interval matrix for every unique pair at `r`.
pub fn probe_all_pairs(
    clf: &dyn MonotoneClassifier,
    r: &[f64],
    grid: &PrevalenceGrid,
) -> Result<RatioIntervalMatrix> {
    probe_point(clf, r, grid).map(|p| p.matrix)
}

/// Like [`probe_point`], then bisects every monotone interior bracket.
pub fn probe_point_refined(
    clf: &dyn MonotoneClassifier,
    r: &[f64],
    grid: &PrevalenceGrid,
    iters: usize,
) -> Result<PointProbe> {
    let mut probe = probe_point(clf, r, grid)?;
    for b in probe.brackets.iter_mut() {
        if b.regime == Regime::InteriorSwitch && b.violations.is_empty() {
            *b = refine_bracket(clf, r, b, iters)?;
        }
    }
    probe.matrix = RatioIntervalMatrix::from_brackets(clf.num_classes(), &probe.brackets);
    Ok(probe)
}

/// Probes many points, in parallel when the classifier allows it.
pub fn probe_points(
    exec: Exec,
    clf: &dyn MonotoneClassifier,
    points: &[Vec<f64>],
    grid: &PrevalenceGrid,
) -> Vec<Result<PointProbe>> {
    let exec = exec.restrict(clf.is_concurrent());
    map_slice(exec, points, |r| probe_point(clf, r, grid))
}
