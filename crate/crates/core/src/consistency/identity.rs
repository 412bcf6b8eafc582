//! Point-valued density-ratio matrices: multiplicative identity, standard
//! form, support partition, law of total probability and factorization.

use serde::{Deserialize, Serialize};

use crate::density::{density_ratio, DensityModel, ExtendedRatio};
use crate::error::{Error, Result};
use crate::simplex::Simplex;

/// Default relative tolerance for identity checks.
pub const IDENTITY_TOL: f64 = 1e-9;

/// `K x K` matrix of ratios `R_{j,k}` with a unit diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RatioMatrix(Vec<Vec<ExtendedRatio>>);

impl RatioMatrix {
    pub fn identity(k: usize) -> Self {
        RatioMatrix(
            (0..k)
                .map(|a| {
                    (0..k)
                        .map(|b| {
                            if a == b {
                                ExtendedRatio::Finite(1.0)
                            } else {
                                ExtendedRatio::Indeterminate
                            }
                        })
                        .collect()
                })
                .collect(),
        )
    }

    /// Rows of entries; the diagonal is forced to 1.
    pub fn from_rows(rows: Vec<Vec<ExtendedRatio>>) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: rows.iter().map(Vec::len).find(|&l| l != k).unwrap_or(k),
            });
        }
        let mut m = RatioMatrix(rows);
        for a in 0..k {
            m.0[a][a] = ExtendedRatio::Finite(1.0);
        }
        Ok(m)
    }

    /// Rows of plain floats: `0`, `inf` and `NaN` map to zero, infinite and
    /// indeterminate entries.
    pub fn from_values(rows: &[Vec<f64>]) -> Result<Self> {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| ExtendedRatio::from_value(x)).collect())
                .collect(),
        )
    }

    /// Exact ratios `P_k(r) / P_j(r)` of known densities.
    pub fn from_densities(densities: &[DensityModel], r: &[f64]) -> Self {
        let k = densities.len();
        RatioMatrix(
            (0..k)
                .map(|a| (0..k).map(|b| density_ratio(densities, a, b, r)).collect())
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, j: usize, k: usize) -> ExtendedRatio {
        self.0[j][k]
    }

    pub fn set(&mut self, j: usize, k: usize, v: ExtendedRatio) {
        self.0[j][k] = v;
    }

    pub fn rows(&self) -> &[Vec<ExtendedRatio>] {
        &self.0
    }

    /// Relabeled matrix whose entry `(a, b)` is `self[perm[a]][perm[b]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        RatioMatrix(
            perm.iter()
                .map(|&a| perm.iter().map(|&b| self.0[a][b]).collect())
                .collect(),
        )
    }

    /// Number of off-diagonal indeterminate entries.
    pub fn indeterminate_count(&self) -> usize {
        let k = self.len();
        (0..k)
            .flat_map(|a| (0..k).map(move |b| (a, b)))
            .filter(|&(a, b)| a != b && !self.0[a][b].is_determinate())
            .count()
    }
}

/// Classes with positive density (`W`) and vanishing density (`V`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    #[serde(rename = "W")]
    pub w: Vec<usize>,
    #[serde(rename = "V")]
    pub v: Vec<usize>,
}

impl Partition {
    /// Structural split: a class whose row contains an infinite ratio is
    /// placed in `V`.
    pub fn structural(m: &RatioMatrix) -> Self {
        let k = m.len();
        let (v, w): (Vec<usize>, Vec<usize>) =
            (0..k).partition(|&a| (0..k).any(|b| b != a && m.get(a, b) == ExtendedRatio::Infinite));
        Partition { w, v }
    }
}

/// Outcome of [`ratio_identity_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub passed: bool,
    /// Largest `|R_{j,k} R_{k,m} - R_{j,m}| / R_{j,m}` over checked triples.
    pub max_residual: f64,
    /// Triples whose residual exceeded the tolerance.
    pub failing: Vec<[usize; 3]>,
    /// Whether the zero/infinite entries follow the support pattern.
    pub pattern_ok: bool,
    pub indeterminate: usize,
    pub partition: Partition,
}

fn pattern_holds(m: &RatioMatrix, p: &Partition) -> bool {
    if p.w.is_empty() {
        return false;
    }
    for &i in &p.w {
        for &j in &p.w {
            if !matches!(m.get(i, j), ExtendedRatio::Finite(_)) {
                return false;
            }
        }
        for &j in &p.v {
            if m.get(i, j) != ExtendedRatio::Zero || m.get(j, i) != ExtendedRatio::Infinite {
                return false;
            }
        }
    }
    true
}

/// Checks reciprocity, the multiplicative identity on the positive-density
/// block, and the zero/infinite pattern between blocks. Indeterminate
/// entries are never used in a residual.
pub fn ratio_identity_check(m: &RatioMatrix, tol: f64) -> IdentityReport {
    let k = m.len();
    let partition = Partition::structural(m);
    let pattern_ok = pattern_holds(m, &partition);
    let idx: Vec<usize> = if pattern_ok {
        partition.w.clone()
    } else {
        (0..k).collect()
    };
    let mut max_residual: f64 = 0.0;
    let mut failing = Vec::new();
    for &a in &idx {
        for &b in &idx {
            for &c in &idx {
                let (ExtendedRatio::Finite(x), ExtendedRatio::Finite(y), ExtendedRatio::Finite(z)) =
                    (m.get(a, b), m.get(b, c), m.get(a, c))
                else {
                    continue;
                };
                let res = (x * y - z).abs() / z;
                if !(res <= tol) {
                    failing.push([a, b, c]);
                }
                max_residual = max_residual.max(if res.is_nan() { f64::INFINITY } else { res });
            }
        }
    }
    IdentityReport {
        passed: pattern_ok && failing.is_empty(),
        max_residual,
        failing,
        pattern_ok,
        indeterminate: m.indeterminate_count(),
        partition,
    }
}

/// A relabeling into block form `[[A, inf], [0, B]]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StandardForm {
    /// Position `a` of the relabeled matrix holds original class `perm[a]`.
    pub perm: Vec<usize>,
    /// Original indices of the `A` block (vanishing densities).
    pub a: Vec<usize>,
    /// Original indices of the `B` block (positive densities).
    pub b: Vec<usize>,
}

/// Direct block predicate: the first `a_len` labels form `A`, the rest `B`.
pub fn is_block_standard(m: &RatioMatrix, a_len: usize, tol: f64) -> bool {
    let k = m.len();
    if a_len >= k {
        return false;
    }
    for i in 0..a_len {
        for j in a_len..k {
            if m.get(i, j) != ExtendedRatio::Infinite || m.get(j, i) != ExtendedRatio::Zero {
                return false;
            }
        }
    }
    let b: Vec<usize> = (a_len..k).collect();
    for &i in &b {
        for &j in &b {
            if !matches!(m.get(i, j), ExtendedRatio::Finite(_)) {
                return false;
            }
            for &l in &b {
                let (x, y, z) = (m.get(i, j), m.get(j, l), m.get(i, l));
                if let (
                    ExtendedRatio::Finite(x),
                    ExtendedRatio::Finite(y),
                    ExtendedRatio::Finite(z),
                ) = (x, y, z)
                {
                    if !((x * y - z).abs() <= tol * z) {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Finds the relabeling that puts `m` in standard form.
pub fn standard_form(m: &RatioMatrix, tol: f64) -> Result<StandardForm> {
    let report = ratio_identity_check(m, tol);
    if !report.passed {
        let why = if report.pattern_ok {
            format!("identity residual {:.3e}", report.max_residual)
        } else {
            "zero/infinite entries do not follow a support pattern".to_string()
        };
        return Err(Error::NotStandardizable(why));
    }
    let Partition { w, v } = report.partition;
    let perm: Vec<usize> = v.iter().chain(w.iter()).copied().collect();
    debug_assert!(is_block_standard(&m.permuted(&perm), v.len(), tol));
    Ok(StandardForm { perm, a: v, b: w })
}

/// `W` and `V` of a standardizable matrix.
pub fn partition_wv(m: &RatioMatrix, tol: f64) -> Result<Partition> {
    let sf = standard_form(m, tol)?;
    Ok(Partition { w: sf.b, v: sf.a })
}

/// `|sum_{j in W} chi_j / sum_{k in W} chi_k R_{j,k} - 1|` using the
/// structural partition, so inconsistent matrices yield a residual rather
/// than an error.
pub fn total_probability_check(m: &RatioMatrix, chi: &Simplex) -> Result<f64> {
    if !chi.is_interior() {
        return Err(Error::InteriorRequired);
    }
    if chi.len() != m.len() {
        return Err(Error::DimensionMismatch {
            expected: m.len(),
            got: chi.len(),
        });
    }
    let p = Partition::structural(m);
    let mut total = 0.0;
    for &j in &p.w {
        let denom: f64 =
            p.w.iter()
                .map(|&k| match m.get(j, k) {
                    ExtendedRatio::Finite(x) => chi[k] * x,
                    _ => 0.0,
                })
                .sum();
        total += chi[j] / denom;
    }
    Ok((total - 1.0).abs())
}

/// Positive values `P_j` on `W`, zero on `V`, with `R_{j,k} = P_k / P_j`,
/// scaled so the largest is 1.
pub fn factor_ratios(m: &RatioMatrix, tol: f64) -> Result<Vec<f64>> {
    let report = ratio_identity_check(m, tol);
    if !report.passed {
        return Err(Error::Inconsistent(format!(
            "identity residual {:.3e}, pattern {}",
            report.max_residual,
            if report.pattern_ok { "ok" } else { "broken" }
        )));
    }
    let w = &report.partition.w;
    let anchor = w[0];
    let mut p = vec![0.0; m.len()];
    for &k in w {
        p[k] = m.get(anchor, k).finite().expect("finite on W");
    }
    let max = p.iter().copied().fold(0.0, f64::max);
    for x in p.iter_mut() {
        *x /= max;
    }
    Ok(p)
}
