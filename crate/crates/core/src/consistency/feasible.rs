//! Feasibility of self-consistent ratio assignments inside probed interval
//! bounds, and uncertainty summaries over the feasible region.
//!
//! On a candidate positive-density set `W`, an assignment is a vector of log
//! densities `x` with `log lo_{a,b} <= x_b - x_a <= log hi_{a,b}`; this is a
//! difference-constraint system, solved by shortest paths.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::identity::{Partition, RatioMatrix};
use crate::density::ExtendedRatio;
use crate::error::{Error, Result};
use crate::probing::{RatioInterval, RatioIntervalMatrix};
use crate::simplex::Simplex;

/// Log-ratio magnitude used in place of one-sided (`0` or `inf`) bounds when
/// enumerating vertices.
pub const LOG_CAP: f64 = 50.0;

/// Upper limit on the number of hyperplane subsets examined per point.
pub const MAX_VERTEX_CANDIDATES: usize = 200_000;

/// Interval of `R_{j,k}` on a pair inside `W`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairBox {
    pub j: usize,
    pub k: usize,
    pub interval: RatioInterval,
}

/// One vertex of the feasible region with the uncertainty it implies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexEvaluation {
    /// Densities implied by the vertex, zero on `V`, largest equal to 1.
    pub densities: Vec<f64>,
    pub u: f64,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleSet {
    pub feasible: bool,
    pub partition: Option<Partition>,
    pub pair_boxes: Vec<PairBox>,
    pub witness: Option<RatioMatrix>,
    pub vertices: Vec<VertexEvaluation>,
    /// Mean of vertex uncertainties.
    pub summary_u: Option<f64>,
    /// Smallest and largest vertex uncertainty.
    pub u_interval: Option<(f64, f64)>,
    /// Every vertex yields the same Bayes label.
    pub label_robust: Option<bool>,
    /// Vertex enumeration was skipped because the region has too many
    /// candidate vertices; the summary then uses the witness alone.
    pub vertex_limit_exceeded: bool,
}

impl FeasibleSet {
    fn infeasible() -> Self {
        FeasibleSet {
            feasible: false,
            partition: None,
            pair_boxes: Vec::new(),
            witness: None,
            vertices: Vec::new(),
            summary_u: None,
            u_interval: None,
            label_robust: None,
            vertex_limit_exceeded: false,
        }
    }

    /// Accuracy `1 - summary_u` of the Bayes label.
    pub fn summary_z(&self) -> Option<f64> {
        self.summary_u.map(|u| 1.0 - u)
    }
}

/// One constraint `x[b] - x[a] <= c`.
#[derive(Debug, Clone, Copy)]
struct Edge {
    a: usize,
    b: usize,
    c: f64,
}

fn widened_log_bounds(iv: RatioInterval, tol: f64) -> (f64, f64) {
    let lo = if iv.lo > 0.0 {
        iv.lo.ln() + (1.0 - tol).ln()
    } else {
        f64::NEG_INFINITY
    };
    let hi = if iv.hi.is_finite() {
        iv.hi.ln() + (1.0 + tol).ln()
    } else {
        f64::INFINITY
    };
    (lo, hi)
}

fn constraints(im: &RatioIntervalMatrix, w: &[usize], tol: f64) -> Vec<Edge> {
    let mut edges = Vec::new();
    for (ia, &a) in w.iter().enumerate() {
        for (ib, &b) in w.iter().enumerate().skip(ia + 1) {
            let (lo, hi) = widened_log_bounds(im.get(a, b), tol);
            if hi.is_finite() {
                edges.push(Edge {
                    a: ia,
                    b: ib,
                    c: hi,
                });
            }
            if lo.is_finite() {
                edges.push(Edge {
                    a: ib,
                    b: ia,
                    c: -lo,
                });
            }
        }
    }
    edges
}

/// Bellman-Ford from a virtual source joined to every node with weight 0.
/// Returns the largest solution with `x <= 0`, or `None` on a negative cycle.
fn solve_difference(n: usize, edges: &[Edge]) -> Option<Vec<f64>> {
    let mut d = vec![0.0; n];
    for _ in 0..=n {
        let mut changed = false;
        for e in edges {
            let cand = d[e.a] + e.c;
            if cand < d[e.b] {
                d[e.b] = cand;
                changed = true;
            }
        }
        if !changed {
            return Some(d);
        }
    }
    None
}

/// Exact interval-product test for three classes:
/// `[l12 l23, h12 h23]` meets `[l13, h13]` (all bounds widened by `tol`).
pub fn interval_product_test(
    r12: RatioInterval,
    r23: RatioInterval,
    r13: RatioInterval,
    tol: f64,
) -> bool {
    let (lo, hi) = (1.0 - tol, 1.0 + tol);
    let p_lo = r12.lo * r23.lo * lo * lo;
    let p_hi = mul_ext(r12.hi, r23.hi) * hi * hi;
    p_lo <= r13.hi * hi && r13.lo * lo <= p_hi
}

fn mul_ext(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

/// Whether `W` is admissible: every `W x V` entry must allow a zero ratio and
/// every `W x W` entry a finite positive one.
fn admissible(im: &RatioIntervalMatrix, w: &[usize], v: &[usize]) -> bool {
    !w.is_empty()
        && w.iter().all(|&i| v.iter().all(|&j| im.get(i, j).lo == 0.0))
        && w.iter().all(|&i| {
            w.iter().all(|&j| {
                let iv = im.get(i, j);
                iv.hi > 0.0 && iv.lo < f64::INFINITY
            })
        })
}

/// Log-density solution on `W`, if any.
fn feasible_on(im: &RatioIntervalMatrix, w: &[usize], tol: f64) -> Option<Vec<f64>> {
    let edges = constraints(im, w, tol);
    let upper = solve_difference(w.len(), &edges)?;
    let reversed: Vec<Edge> = edges
        .iter()
        .map(|e| Edge {
            a: e.b,
            b: e.a,
            c: e.c,
        })
        .collect();
    // the smallest solution with x >= 0 is the negated shortest-path solution
    // of the reversed system
    let lower = solve_difference(w.len(), &reversed)?;
    Some(
        upper
            .iter()
            .zip(&lower)
            .map(|(u, l)| 0.5 * (u - l))
            .collect(),
    )
}

fn subsets_by_size(k: usize) -> Vec<Vec<usize>> {
    let mut all: Vec<Vec<usize>> = (1u64..(1u64 << k))
        .map(|mask| (0..k).filter(|&i| mask & (1 << i) != 0).collect())
        .collect();
    all.sort_by(|a: &Vec<usize>, b: &Vec<usize>| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    all
}

/// Decides whether a self-consistent assignment exists within the
/// intervals and, when it does, summarizes the uncertainty over the vertices
/// of the feasible region.
///
/// Candidate positive-density sets are tried from largest to smallest; for
/// three classes with all densities positive the interval-product test
/// decides.
pub fn feasible_set(im: &RatioIntervalMatrix, chi: &Simplex, tol: f64) -> Result<FeasibleSet> {
    if !chi.is_interior() {
        return Err(Error::InteriorRequired);
    }
    let k = im.len();
    if chi.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: chi.len(),
        });
    }
    if k > 20 {
        return Err(Error::DimensionMismatch {
            expected: 20,
            got: k,
        });
    }
    for w in subsets_by_size(k) {
        let v: Vec<usize> = (0..k).filter(|i| !w.contains(i)).collect();
        if !admissible(im, &w, &v) {
            continue;
        }
        let solution = feasible_on(im, &w, tol);
        if k == 3 && w.len() == 3 {
            let product = interval_product_test(im.get(0, 1), im.get(1, 2), im.get(0, 2), tol);
            debug_assert_eq!(
                product,
                solution.is_some(),
                "difference system and product test disagree"
            );
            if !product {
                continue;
            }
        }
        let Some(x) = solution else { continue };
        return Ok(summarize(im, chi, w, v, &x, tol));
    }
    Ok(FeasibleSet::infeasible())
}

fn densities_from_logs(k: usize, w: &[usize], x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p = vec![0.0; k];
    for (i, &c) in w.iter().enumerate() {
        p[c] = (x[i] - max).exp();
    }
    p
}

fn witness_matrix(k: usize, w: &[usize], v: &[usize], x: &[f64]) -> RatioMatrix {
    let mut m = RatioMatrix::identity(k);
    for (ia, &a) in w.iter().enumerate() {
        for (ib, &b) in w.iter().enumerate() {
            if a != b {
                m.set(a, b, ExtendedRatio::from_value((x[ib] - x[ia]).exp()));
            }
        }
        for &c in v {
            m.set(a, c, ExtendedRatio::Zero);
            m.set(c, a, ExtendedRatio::Infinite);
        }
    }
    m
}

fn evaluate(chi: &Simplex, densities: Vec<f64>) -> VertexEvaluation {
    let terms: Vec<f64> = densities
        .iter()
        .zip(chi.weights())
        .map(|(p, c)| p * c)
        .collect();
    let total: f64 = terms.iter().sum();
    let (label, best) =
        terms.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, &t)| if t > acc.1 { (i, t) } else { acc },
        );
    VertexEvaluation {
        densities,
        u: 1.0 - best / total,
        label,
    }
}

fn binomial(n: usize, r: usize) -> usize {
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    acc as usize
}

/// Vertices of `{x : x[anchor] = 0, lo <= x_b - x_a <= hi}` with one-sided
/// bounds capped at the log cap.
fn enumerate_vertices(im: &RatioIntervalMatrix, w: &[usize], tol: f64) -> Option<Vec<Vec<f64>>> {
    let n = w.len();
    if n == 1 {
        return Some(vec![vec![0.0]]);
    }
    let mut cap = LOG_CAP;
    let mut bounds = Vec::new();
    for ia in 0..n {
        for ib in ia + 1..n {
            let (lo, hi) = widened_log_bounds(im.get(w[ia], w[ib]), tol);
            for b in [lo, hi] {
                if b.is_finite() {
                    cap = cap.max(b.abs() + 1.0);
                }
            }
            bounds.push((ia, ib, lo, hi));
        }
    }
    // rows: (a, b, value) meaning x_b - x_a = value
    let mut planes = Vec::new();
    let mut checks = Vec::new();
    for &(a, b, lo, hi) in &bounds {
        let lo = if lo.is_finite() { lo } else { -cap };
        let hi = if hi.is_finite() { hi } else { cap };
        planes.push((a, b, lo));
        planes.push((a, b, hi));
        checks.push((a, b, lo, hi));
    }
    let d = n - 1;
    if binomial(planes.len(), d) > MAX_VERTEX_CANDIDATES {
        return None;
    }
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut idx: Vec<usize> = (0..d).collect();
    loop {
        // variables x_1..x_{n-1}, x_0 = 0
        let mut a_mat = DMatrix::<f64>::zeros(d, d);
        let mut rhs = DVector::<f64>::zeros(d);
        for (row, &p) in idx.iter().enumerate() {
            let (a, b, val) = planes[p];
            if b > 0 {
                a_mat[(row, b - 1)] += 1.0;
            }
            if a > 0 {
                a_mat[(row, a - 1)] -= 1.0;
            }
            rhs[row] = val;
        }
        if let Some(sol) = a_mat.lu().solve(&rhs) {
            let mut x = vec![0.0; n];
            for i in 0..d {
                x[i + 1] = sol[i];
            }
            let slack = 1e-9 * cap;
            let inside = x.iter().all(|v| v.is_finite())
                && checks.iter().all(|&(a, b, lo, hi)| {
                    let diff = x[b] - x[a];
                    diff >= lo - slack && diff <= hi + slack
                });
            if inside
                && !out
                    .iter()
                    .any(|y| y.iter().zip(&x).all(|(p, q)| (p - q).abs() <= slack))
            {
                out.push(x);
            }
        }
        // next combination in lexicographic order
        let np = planes.len();
        let mut i = d;
        let pivot = loop {
            if i == 0 {
                break None;
            }
            i -= 1;
            if idx[i] < np - d + i {
                break Some(i);
            }
        };
        let Some(i) = pivot else { return Some(out) };
        idx[i] += 1;
        for j in i + 1..d {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn summarize(
    im: &RatioIntervalMatrix,
    chi: &Simplex,
    w: Vec<usize>,
    v: Vec<usize>,
    x: &[f64],
    tol: f64,
) -> FeasibleSet {
    let k = im.len();
    let pair_boxes = w
        .iter()
        .enumerate()
        .flat_map(|(ia, &a)| w[ia + 1..].iter().map(move |&b| (a, b)))
        .map(|(j, l)| PairBox {
            j,
            k: l,
            interval: im.get(j, l),
        })
        .collect();
    let witness = witness_matrix(k, &w, &v, x);
    let (vertices, exceeded) = match enumerate_vertices(im, &w, tol) {
        Some(vs) => (
            vs.into_iter()
                .map(|x| evaluate(chi, densities_from_logs(k, &w, &x)))
                .collect(),
            false,
        ),
        None => (Vec::new(), true),
    };
    let evals: Vec<VertexEvaluation> = if vertices.is_empty() {
        vec![evaluate(chi, densities_from_logs(k, &w, x))]
    } else {
        vertices
    };
    let n = evals.len() as f64;
    let mean = evals.iter().map(|e| e.u).sum::<f64>() / n;
    let lo = evals.iter().map(|e| e.u).fold(f64::INFINITY, f64::min);
    let hi = evals.iter().map(|e| e.u).fold(f64::NEG_INFINITY, f64::max);
    let robust = evals.iter().all(|e| e.label == evals[0].label);
    FeasibleSet {
        feasible: true,
        partition: Some(Partition { w, v }),
        pair_boxes,
        witness: Some(witness),
        vertices: if exceeded { Vec::new() } else { evals },
        summary_u: Some(mean),
        u_interval: Some((lo, hi)),
        label_robust: Some(robust),
        vertex_limit_exceeded: exceeded,
    }
}
