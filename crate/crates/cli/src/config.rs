//! Per-command JSON configs. Unknown keys are rejected; relative paths are
//! resolved against the config file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;

use levelset_core::audit::DEFAULT_Z_EDGES;
use levelset_core::demo::three_gaussians;
use levelset_core::density::DensityModel;
use levelset_core::density_file::DensityFile;
use levelset_core::oracle::TieRule;
use levelset_core::probing::PrevalenceGrid;
use levelset_core::training::{HomotopySchedule, ScorerKind};
use levelset_core::Simplex;

use crate::error::{CliError, CliResult};

/// Reads and parses a config; any failure is a config error.
pub fn load<T: DeserializeOwned>(path: &Path) -> CliResult<(T, PathBuf)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let cfg = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((cfg, base))
}

pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum DensitySource {
    Path(PathBuf),
    Inline(DensityFile),
}

impl DensitySource {
    pub fn build(&self, base: &Path) -> CliResult<Vec<DensityModel>> {
        let file = match self {
            DensitySource::Path(p) => {
                let p = resolve(base, p);
                DensityFile::load(&p)
                    .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?
            }
            DensitySource::Inline(f) => f.clone(),
        };
        file.build().map_err(|e| CliError::Data(e.to_string()))
    }
}

pub fn densities_or_default(
    src: &Option<DensitySource>,
    base: &Path,
) -> CliResult<Vec<DensityModel>> {
    match src {
        Some(s) => s.build(base),
        None => Ok(three_gaussians()),
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieChoice {
    #[default]
    Lowest,
    Highest,
}

impl TieChoice {
    pub fn rule(self) -> TieRule {
        match self {
            TieChoice::Lowest => TieRule::LowestIndex,
            TieChoice::Highest => TieRule::HighestIndex,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRange {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

/// A prevalence grid, either listed or as `lo..=hi` in steps.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Values(Vec<f64>),
    Range(GridRange),
}

impl GridSpec {
    pub fn build(&self) -> CliResult<PrevalenceGrid> {
        let values = match self {
            GridSpec::Values(v) => v.clone(),
            GridSpec::Range(GridRange { lo, hi, step }) => {
                if !(*step > 0.0) || !(lo <= hi) {
                    return Err(CliError::Config(format!(
                        "bad grid range {lo}..{hi} step {step}"
                    )));
                }
                let n = ((hi - lo) / step + 1e-9).floor() as usize;
                let (a, b) = (lo / step, 1.0 / step);
                (0..=n).map(|i| (a + i as f64) / b).collect()
            }
        };
        PrevalenceGrid::new(values).map_err(|e| CliError::Config(e.to_string()))
    }
}

pub fn grid_or_default(g: &Option<GridSpec>) -> CliResult<PrevalenceGrid> {
    match g {
        Some(g) => g.build(),
        None => Ok(PrevalenceGrid::default()),
    }
}

pub fn chi(weights: &[f64]) -> CliResult<Simplex> {
    let s = Simplex::new(weights.to_vec()).map_err(|e| CliError::Config(format!("chi: {e}")))?;
    if !s.is_interior() {
        return Err(CliError::Config(
            "chi must lie in the interior of the simplex".into(),
        ));
    }
    Ok(s)
}

/// 1-based pair list to 0-based pairs, checked against `k` classes.
pub fn pairs(list: &[[usize; 2]], k: usize) -> CliResult<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for &[a, b] in list {
        if a == 0 || b == 0 || a == b || a > k || b > k {
            return Err(CliError::Config(format!(
                "invalid pair [{a}, {b}] for {k} classes"
            )));
        }
        if out
            .iter()
            .any(|&(x, y)| (x, y) == (a - 1, b - 1) || (x, y) == (b - 1, a - 1))
        {
            return Err(CliError::Config(format!("duplicate pair [{a}, {b}]")));
        }
        out.push((a - 1, b - 1));
    }
    Ok(out)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Raster {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub shape: Vec<usize>,
}

impl Raster {
    pub fn validate(&self, dim: usize) -> CliResult<()> {
        if self.lo.len() != dim || self.hi.len() != dim || self.shape.len() != dim {
            return Err(CliError::Config(format!("raster must have {dim} axes")));
        }
        if self.shape.iter().any(|&n| n < 2) || self.lo.iter().zip(&self.hi).any(|(l, h)| !(l < h))
        {
            return Err(CliError::Config(
                "raster needs lo < hi and at least 2 nodes per axis".into(),
            ));
        }
        Ok(())
    }

    /// Node coordinates, last axis fastest.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let total: usize = self.shape.iter().product();
        (0..total)
            .map(|mut idx| {
                let mut p = vec![0.0; self.shape.len()];
                for a in (0..self.shape.len()).rev() {
                    let n = self.shape[a];
                    let i = idx % n;
                    idx /= n;
                    p[a] = self.lo[a] + (self.hi[a] - self.lo[a]) * i as f64 / (n - 1) as f64;
                }
                p
            })
            .collect()
    }
}

fn default_raster() -> Raster {
    Raster {
        lo: vec![-2.5, -2.5],
        hi: vec![2.5, 2.5],
        shape: vec![101, 101],
    }
}

fn default_audit_raster() -> Raster {
    Raster {
        lo: vec![-2.5, -2.5],
        hi: vec![2.5, 2.5],
        shape: vec![100, 100],
    }
}

fn default_demo_pairs() -> Vec<[usize; 2]> {
    vec![[1, 2], [3, 2], [1, 3]]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoConfig {
    #[serde(default)]
    pub densities: Option<DensitySource>,
    #[serde(default)]
    pub chi: Option<Vec<f64>>,
    #[serde(default = "default_raster")]
    pub raster: Raster,
    #[serde(default = "default_demo_pairs")]
    pub pairs: Vec<[usize; 2]>,
    #[serde(default = "default_audit_raster")]
    pub audit_raster: Raster,
    #[serde(default)]
    pub tie: TieChoice,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ClassifierSource {
    Oracle {
        #[serde(default)]
        densities: Option<DensitySource>,
        #[serde(default)]
        tie: TieChoice,
    },
    Checkpoint {
        paths: Vec<PathBuf>,
    },
    Subprocess {
        program: String,
        #[serde(default)]
        args: Vec<String>,
        classes: usize,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub classifier: ClassifierSource,
    pub points: PathBuf,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub refine_iters: usize,
}

fn default_tol() -> f64 {
    1e-9
}

fn default_bins() -> Vec<f64> {
    DEFAULT_Z_EDGES.to_vec()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    /// Named interval files, e.g. `train` and `test`.
    pub sets: BTreeMap<String, PathBuf>,
    pub chi: Vec<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_bins")]
    pub bins: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainProbe {
    pub points: PathBuf,
    /// Also probe the training points, audited as set `train`.
    #[serde(default)]
    pub include_training: bool,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub refine_iters: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainAudit {
    pub chi: Vec<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_bins")]
    pub bins: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub dataset: PathBuf,
    #[serde(default)]
    pub classes: Option<usize>,
    /// Defaults to every pair.
    #[serde(default)]
    pub pairs: Option<Vec<[usize; 2]>>,
    pub grid: GridSpec,
    pub scorer: ScorerKind,
    #[serde(default)]
    pub schedule: HomotopySchedule,
    pub seed: u64,
    #[serde(default)]
    pub probe: Option<ChainProbe>,
    #[serde(default)]
    pub audit: Option<ChainAudit>,
    /// Points at which to measure softmax crossings of binary families.
    #[serde(default)]
    pub crossings: Option<Vec<Vec<f64>>>,
}

pub fn validate_schedule(s: &HomotopySchedule) -> CliResult<HomotopySchedule> {
    HomotopySchedule::new(s.stages.clone()).map_err(|e| CliError::Config(format!("schedule: {e}")))
}
