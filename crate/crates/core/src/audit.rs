//! Dataset-level consistency audits: one feasibility record per probed point
//! and a roll-up of consistent points binned by the summary accuracy `Z`.

use serde::{Deserialize, Serialize};

use crate::consistency::{feasible_set, RatioMatrix};
use crate::error::{Error, Result};
use crate::par::{map_slice, Exec};
use crate::probing::{PointProbe, RatioIntervalMatrix};
use crate::simplex::Simplex;

/// Default bin edges for `Z`.
pub const DEFAULT_Z_EDGES: [f64; 6] = [0.5, 0.6, 0.7, 0.8, 0.9, 0.98];

/// Probed intervals at one point, as stored in interval files. Labels are
/// 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalRecord {
    pub r: Vec<f64>,
    pub matrix: RatioIntervalMatrix,
    pub violations: usize,
    /// True class of the point, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
}

impl IntervalRecord {
    pub fn from_probe(r: Vec<f64>, probe: &PointProbe, label: Option<usize>) -> Self {
        IntervalRecord {
            r,
            violations: probe.violations(),
            matrix: probe.matrix.clone(),
            label,
        }
    }
}

/// `W` and `V` with 1-based class numbers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionRecord {
    #[serde(rename = "W")]
    pub w: Vec<usize>,
    #[serde(rename = "V")]
    pub v: Vec<usize>,
}

/// Audit result for one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub r: Vec<f64>,
    pub partition: Option<PartitionRecord>,
    pub feasible: bool,
    pub witness: Option<RatioMatrix>,
    pub u_mean: Option<f64>,
    pub u_interval: Option<(f64, f64)>,
    pub violations: usize,
    /// Bayes label (1-based) of the witness at the test prevalence.
    pub predicted: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
}

impl PointRecord {
    pub fn z(&self) -> Option<f64> {
        self.u_mean.map(|u| 1.0 - u)
    }

    /// `Z` range `[1 - u_max, 1 - u_min]` over the feasible vertices.
    pub fn z_interval(&self) -> Option<(f64, f64)> {
        self.u_interval.map(|(lo, hi)| (1.0 - hi, 1.0 - lo))
    }

    pub fn correct(&self) -> Option<bool> {
        Some(self.predicted? == self.label?)
    }
}

/// Bayes label of a self-consistent matrix at prevalence `chi`.
pub fn witness_label(m: &RatioMatrix, chi: &Simplex) -> usize {
    let k = m.len();
    let anchor = (0..k)
        .find(|&a| (0..k).all(|b| m.get(a, b).finite().is_some()))
        .unwrap_or(0);
    let mut best = (0, f64::NEG_INFINITY);
    for b in 0..k {
        let v = m.get(anchor, b).finite().unwrap_or(0.0) * chi[b];
        if v > best.1 {
            best = (b, v);
        }
    }
    best.0
}

/// Runs [`feasible_set`] on one interval record.
pub fn audit_point(rec: &IntervalRecord, chi: &Simplex, tol: f64) -> Result<PointRecord> {
    if rec.matrix.len() != chi.len() {
        return Err(Error::DimensionMismatch {
            expected: chi.len(),
            got: rec.matrix.len(),
        });
    }
    let fs = feasible_set(&rec.matrix, chi, tol)?;
    let one_based = |s: &[usize]| s.iter().map(|i| i + 1).collect::<Vec<_>>();
    Ok(PointRecord {
        r: rec.r.clone(),
        partition: fs.partition.as_ref().map(|p| PartitionRecord {
            w: one_based(&p.w),
            v: one_based(&p.v),
        }),
        feasible: fs.feasible,
        predicted: fs.witness.as_ref().map(|m| witness_label(m, chi) + 1),
        witness: fs.witness,
        u_mean: fs.summary_u,
        u_interval: fs.u_interval,
        violations: rec.violations,
        label: rec.label,
    })
}

/// Counts for one `Z` bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// Points whose `Z` range crosses a bin edge.
    pub straddles: usize,
    pub labeled: usize,
    pub correct: usize,
    pub accuracy: Option<f64>,
}

impl ZBin {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Consistent points outside every bin.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Remainder {
    pub count: usize,
    pub below: usize,
    pub above: usize,
    pub labeled: usize,
    pub correct: usize,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollUp {
    pub total: usize,
    pub consistent: usize,
    pub inconsistent: usize,
    pub bins: Vec<ZBin>,
    pub remainder: Remainder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub records: Vec<PointRecord>,
    pub summary: RollUp,
}

fn check_edges(edges: &[f64]) -> Result<()> {
    if edges.len() < 2
        || edges.windows(2).any(|w| !(w[0] < w[1]))
        || edges.iter().any(|e| !e.is_finite())
    {
        return Err(Error::InvalidParameter(format!(
            "bin edges must increase strictly: {edges:?}"
        )));
    }
    Ok(())
}

fn accuracy(labeled: usize, correct: usize) -> Option<f64> {
    (labeled > 0).then(|| correct as f64 / labeled as f64)
}

/// Bins consistent records by `Z = 1 - u_mean` into `[e_i, e_{i+1})`.
pub fn roll_up(records: &[PointRecord], edges: &[f64]) -> Result<RollUp> {
    check_edges(edges)?;
    let mut bins: Vec<ZBin> = edges
        .windows(2)
        .map(|w| ZBin {
            lo: w[0],
            hi: w[1],
            count: 0,
            straddles: 0,
            labeled: 0,
            correct: 0,
            accuracy: None,
        })
        .collect();
    let mut rem = Remainder::default();
    let mut consistent = 0;
    for rec in records.iter().filter(|r| r.feasible) {
        consistent += 1;
        let Some(z) = rec.z() else { continue };
        let correct = rec.correct();
        match bins.iter_mut().find(|b| b.lo <= z && z < b.hi) {
            Some(b) => {
                b.count += 1;
                if let Some((zl, zh)) = rec.z_interval() {
                    if zl < b.lo || zh >= b.hi {
                        b.straddles += 1;
                    }
                }
                if let Some(c) = correct {
                    b.labeled += 1;
                    b.correct += c as usize;
                }
            }
            None => {
                rem.count += 1;
                if z < edges[0] {
                    rem.below += 1;
                } else {
                    rem.above += 1;
                }
                if let Some(c) = correct {
                    rem.labeled += 1;
                    rem.correct += c as usize;
                }
            }
        }
    }
    for b in &mut bins {
        b.accuracy = accuracy(b.labeled, b.correct);
    }
    rem.accuracy = accuracy(rem.labeled, rem.correct);
    Ok(RollUp {
        total: records.len(),
        consistent,
        inconsistent: records.len() - consistent,
        bins,
        remainder: rem,
    })
}

/// Audits every record and rolls the results up.
pub fn audit(
    exec: Exec,
    records: &[IntervalRecord],
    chi: &Simplex,
    tol: f64,
    edges: &[f64],
) -> Result<AuditReport> {
    if !chi.is_interior() {
        return Err(Error::InteriorRequired);
    }
    check_edges(edges)?;
    let out: Result<Vec<PointRecord>> = map_slice(exec, records, |r| audit_point(r, chi, tol))
        .into_iter()
        .collect();
    let records = out?;
    let summary = roll_up(&records, edges)?;
    Ok(AuditReport { records, summary })
}
