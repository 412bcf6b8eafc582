//! Warm-started training of pairwise scorer families over a prevalence grid.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::probing::{MonotoneClassifier, PrevalenceGrid};
use crate::sampling::stream_rng;
use crate::simplex::Simplex;
use crate::training::data::TrainingDataset;
use crate::training::loss::{objective_and_grad, Term};
use crate::training::model::{Architecture, ScorerModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomotopyStage {
    pub sigma: f64,
    pub learning_rate: f64,
    pub epochs: usize,
}

/// Ordered smoothing stages. The first stage initializes the network; the
/// remaining ones are swept at every grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomotopySchedule {
    pub stages: Vec<HomotopyStage>,
}

impl Default for HomotopySchedule {
    /// `sigma` in {1, 2, 4}, step size 0.01, 15 epochs each.
    fn default() -> Self {
        Self::uniform(&[1.0, 2.0, 4.0], 0.01, 15).expect("valid default")
    }
}

impl HomotopySchedule {
    pub fn new(stages: Vec<HomotopyStage>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::InvalidParameter("schedule has no stages".into()));
        }
        for s in &stages {
            if !(s.sigma > 0.0 && s.sigma.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "sigma must be positive, got {}",
                    s.sigma
                )));
            }
            if !(s.learning_rate > 0.0 && s.learning_rate.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "learning rate must be positive, got {}",
                    s.learning_rate
                )));
            }
        }
        Ok(HomotopySchedule { stages })
    }

    pub fn uniform(sigmas: &[f64], learning_rate: f64, epochs: usize) -> Result<Self> {
        Self::new(
            sigmas
                .iter()
                .map(|&sigma| HomotopyStage {
                    sigma,
                    learning_rate,
                    epochs,
                })
                .collect(),
        )
    }

    /// The same stages with `sigma` visited from largest to smallest.
    pub fn decreasing(&self) -> Self {
        let mut stages = self.stages.clone();
        stages.sort_by(|a, b| b.sigma.total_cmp(&a.sigma));
        HomotopySchedule { stages }
    }

    /// Whether `sigma` grows along the schedule.
    pub fn is_increasing(&self) -> bool {
        self.stages.windows(2).any(|w| w[1].sigma > w[0].sigma)
    }

    fn sweep(&self) -> &[HomotopyStage] {
        if self.stages.len() > 1 {
            &self.stages[1..]
        } else {
            &self.stages
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ScorerKind {
    Linear,
    Hidden { width: usize },
}

impl ScorerKind {
    pub fn architecture(self, input: usize, classes: usize) -> Architecture {
        match self {
            ScorerKind::Linear => Architecture::Linear { input, classes },
            ScorerKind::Hidden { width } => Architecture::Hidden {
                input,
                hidden: width,
                classes,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSettings {
    pub scorer: ScorerKind,
    #[serde(default)]
    pub schedule: HomotopySchedule,
    pub seed: u64,
}

/// One grid member: a binary scorer trained at weight `alpha` on the first
/// class of the pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub alpha: f64,
    pub sigma_history: Vec<f64>,
    pub model: ScorerModel,
}

/// Scorers for one class pair, indexed by the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseFamily {
    pub classes: usize,
    pub pair: (usize, usize),
    pub seed: u64,
    pub members: Vec<TrainedModel>,
}

fn descend(
    exec: Exec,
    model: &mut ScorerModel,
    data: &TrainingDataset,
    terms: &[Term],
    lr: f64,
    epochs: usize,
) -> Result<()> {
    for _ in 0..epochs {
        let (_, grad) = objective_and_grad(exec, model, data, terms)?;
        for (p, g) in model.params.iter_mut().zip(grad) {
            *p -= lr * g;
        }
    }
    Ok(())
}

/// Trains one binary scorer per grid value for classes `pair` of `data`.
///
/// The network is initialized once with the homotopy loss at the first grid
/// value and first stage plus cross-entropy at the training prevalence; every
/// grid value then sweeps the remaining stages starting from the previous
/// grid value's solution.
pub fn train_pairwise_family(
    exec: Exec,
    data: &TrainingDataset,
    pair: (usize, usize),
    grid: &PrevalenceGrid,
    settings: &TrainSettings,
) -> Result<PairwiseFamily> {
    let sub = data.pair(pair.0, pair.1)?;
    let arch = settings.scorer.architecture(sub.dim(), 2);
    let mut rng = stream_rng(settings.seed, 0);
    let mut model = ScorerModel::random(arch, &mut rng)?;
    let first = settings.schedule.stages[0];
    let init = [
        Term::Homotopy {
            q: Simplex::binary(grid.values()[0])?,
            sigma: first.sigma,
        },
        Term::CrossEntropy {
            q: sub.training_prevalence(),
        },
    ];
    descend(
        exec,
        &mut model,
        &sub,
        &init,
        first.learning_rate,
        first.epochs,
    )?;
    let mut members = Vec::with_capacity(grid.len());
    for (i, &alpha) in grid.values().iter().enumerate() {
        let q = Simplex::binary(alpha)?;
        let mut history = if i == 0 {
            vec![first.sigma]
        } else {
            Vec::new()
        };
        for stage in settings.schedule.sweep() {
            let terms = [Term::Homotopy {
                q: q.clone(),
                sigma: stage.sigma,
            }];
            descend(
                exec,
                &mut model,
                &sub,
                &terms,
                stage.learning_rate,
                stage.epochs,
            )?;
            history.push(stage.sigma);
        }
        members.push(TrainedModel {
            alpha,
            sigma_history: history,
            model: model.clone(),
        });
    }
    Ok(PairwiseFamily {
        classes: data.num_classes(),
        pair,
        seed: settings.seed,
        members,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossEntropySettings {
    pub scorer: ScorerKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

/// Warm-started family minimizing prevalence-weighted cross-entropy at each
/// grid value.
pub fn train_cross_entropy_family(
    exec: Exec,
    data: &TrainingDataset,
    pair: (usize, usize),
    grid: &PrevalenceGrid,
    settings: &CrossEntropySettings,
) -> Result<PairwiseFamily> {
    let seed = settings.seed;
    let sub = data.pair(pair.0, pair.1)?;
    let mut model = ScorerModel::random(
        settings.scorer.architecture(sub.dim(), 2),
        &mut stream_rng(seed, 0),
    )?;
    let mut members = Vec::with_capacity(grid.len());
    for &alpha in grid.values() {
        let terms = [Term::CrossEntropy {
            q: Simplex::binary(alpha)?,
        }];
        descend(
            exec,
            &mut model,
            &sub,
            &terms,
            settings.learning_rate,
            settings.epochs,
        )?;
        members.push(TrainedModel {
            alpha,
            sigma_history: Vec::new(),
            model: model.clone(),
        });
    }
    Ok(PairwiseFamily {
        classes: data.num_classes(),
        pair,
        seed,
        members,
    })
}

impl PairwiseFamily {
    pub fn grid(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.alpha).collect()
    }

    /// Member whose grid value is closest to `alpha` (lower one on ties).
    pub fn nearest(&self, alpha: f64) -> &TrainedModel {
        let i = self.members.partition_point(|m| m.alpha < alpha);
        if i == 0 {
            return &self.members[0];
        }
        if i == self.members.len() {
            return &self.members[i - 1];
        }
        let (a, b) = (&self.members[i - 1], &self.members[i]);
        if alpha - a.alpha <= b.alpha - alpha {
            a
        } else {
            b
        }
    }

    pub fn to_checkpoint(&self) -> FamilyCheckpoint {
        let pair = [self.pair.0 + 1, self.pair.1 + 1];
        FamilyCheckpoint {
            classes: self.classes,
            pair,
            seed: self.seed,
            models: self
                .members
                .iter()
                .map(|m| ModelCheckpoint {
                    architecture: m.model.architecture,
                    params: m.model.params.clone(),
                    provenance: Provenance {
                        pair,
                        q: m.alpha,
                        sigma_history: m.sigma_history.clone(),
                        seed: self.seed,
                    },
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(c: &FamilyCheckpoint) -> Result<Self> {
        let (j, k) = (c.pair[0], c.pair[1]);
        if j == 0 || k == 0 || j == k || j > c.classes || k > c.classes {
            return Err(Error::BadPair(j, k));
        }
        if c.models.is_empty() {
            return Err(Error::BadGrid("checkpoint holds no models".into()));
        }
        let members = c
            .models
            .iter()
            .map(|m| {
                Ok(TrainedModel {
                    alpha: m.provenance.q,
                    sigma_history: m.provenance.sigma_history.clone(),
                    model: ScorerModel::new(m.architecture, m.params.clone())?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        PrevalenceGrid::new(members.iter().map(|m| m.alpha).collect())?;
        Ok(PairwiseFamily {
            classes: c.classes,
            pair: (j - 1, k - 1),
            seed: c.seed,
            members,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_checkpoint())?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c: FamilyCheckpoint = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::from_checkpoint(&c)
    }
}

/// Classifies by the member nearest to the edge coordinate of `q`, which
/// must put all weight on the family's pair.
impl MonotoneClassifier for PairwiseFamily {
    fn num_classes(&self) -> usize {
        self.classes
    }

    fn classify(&self, r: &[f64], q: &Simplex) -> Result<usize> {
        let (j, k) = self.pair;
        if q.len() != self.classes {
            return Err(Error::DimensionMismatch {
                expected: self.classes,
                got: q.len(),
            });
        }
        if (0..q.len()).any(|c| c != j && c != k && q[c] > 0.0) {
            return Err(Error::UnsupportedPrevalence(format!(
                "family for pair ({}, {}) only accepts prevalences on that edge",
                j + 1,
                k + 1
            )));
        }
        let alpha = q[j] / (q[j] + q[k]);
        if alpha >= 1.0 {
            return Ok(j);
        }
        if alpha <= 0.0 {
            return Ok(k);
        }
        let m = self.nearest(alpha);
        if m.model.architecture.input() != r.len() {
            return Err(Error::DimensionMismatch {
                expected: m.model.architecture.input(),
                got: r.len(),
            });
        }
        Ok(if m.model.predict(r) == 0 { j } else { k })
    }
}

/// Several pairwise families over the same classes, each answering on its
/// own edge.
#[derive(Debug, Clone)]
pub struct FamilySet {
    classes: usize,
    families: Vec<PairwiseFamily>,
}

impl FamilySet {
    pub fn new(families: Vec<PairwiseFamily>) -> Result<Self> {
        let Some(first) = families.first() else {
            return Err(Error::InvalidParameter("no families".into()));
        };
        let classes = first.classes;
        let mut seen = Vec::new();
        for f in &families {
            if f.classes != classes {
                return Err(Error::DimensionMismatch {
                    expected: classes,
                    got: f.classes,
                });
            }
            let key = (f.pair.0.min(f.pair.1), f.pair.0.max(f.pair.1));
            if seen.contains(&key) {
                return Err(Error::BadPair(f.pair.0 + 1, f.pair.1 + 1));
            }
            seen.push(key);
        }
        Ok(FamilySet { classes, families })
    }

    pub fn families(&self) -> &[PairwiseFamily] {
        &self.families
    }

    fn family_for(&self, a: usize, b: usize) -> Option<&PairwiseFamily> {
        self.families
            .iter()
            .find(|f| f.pair == (a, b) || f.pair == (b, a))
    }
}

impl MonotoneClassifier for FamilySet {
    fn num_classes(&self) -> usize {
        self.classes
    }

    fn classify(&self, r: &[f64], q: &Simplex) -> Result<usize> {
        if q.len() != self.classes {
            return Err(Error::DimensionMismatch {
                expected: self.classes,
                got: q.len(),
            });
        }
        let support: Vec<usize> = (0..q.len()).filter(|&c| q[c] > 0.0).collect();
        match support[..] {
            [c] => Ok(c),
            [a, b] => match self.family_for(a, b) {
                Some(f) => f.classify(r, q),
                None => Err(Error::UnsupportedPrevalence(format!(
                    "no trained family for pair ({}, {})",
                    a + 1,
                    b + 1
                ))),
            },
            _ => Err(Error::UnsupportedPrevalence(
                "family sets only accept prevalences on simplex edges".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    /// 1-based class pair.
    pub pair: [usize; 2],
    /// Weight on the first class of the pair.
    pub q: f64,
    pub sigma_history: Vec<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelCheckpoint {
    pub architecture: Architecture,
    pub params: Vec<f64>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyCheckpoint {
    pub classes: usize,
    pub pair: [usize; 2],
    pub seed: u64,
    pub models: Vec<ModelCheckpoint>,
}
