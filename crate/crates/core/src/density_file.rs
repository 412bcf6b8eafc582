//! JSON density files:
//! `{"classes": [{"kind": "gaussian", "mean": [..], "cov": [[..]]},
//!               {"kind": "piecewise", "cells": [{"lo": [..], "hi": [..]}], "values": [..]}]}`

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::density::{Cell, DensityModel, Gaussian, PiecewiseConstant};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ClassDensity {
    Gaussian { mean: Vec<f64>, cov: Vec<Vec<f64>> },
    Piecewise { cells: Vec<Cell>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityFile {
    pub classes: Vec<ClassDensity>,
}

impl DensityFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn build(&self) -> Result<Vec<DensityModel>> {
        if self.classes.is_empty() {
            return Err(Error::InvalidDensity("no classes".into()));
        }
        let models = self
            .classes
            .iter()
            .map(|c| match c {
                ClassDensity::Gaussian { mean, cov } => {
                    Gaussian::new(mean.clone(), cov.clone()).map(DensityModel::Gaussian)
                }
                ClassDensity::Piecewise { cells, values } => {
                    PiecewiseConstant::from_cells(cells.clone(), values.clone())
                        .map(DensityModel::PiecewiseConstant)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let d = models[0].dim();
        if let Some(m) = models.iter().find(|m| m.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: m.dim(),
            });
        }
        Ok(models)
    }

    /// Serializable description of `models`; callback densities have none.
    pub fn describe(models: &[DensityModel]) -> Result<Self> {
        let classes = models
            .iter()
            .map(|m| match m {
                DensityModel::Gaussian(g) => Ok(ClassDensity::Gaussian {
                    mean: g.mean().to_vec(),
                    cov: g.cov().to_vec(),
                }),
                DensityModel::PiecewiseConstant(p) => Ok(ClassDensity::Piecewise {
                    cells: p.cells().collect(),
                    values: p.values().to_vec(),
                }),
                DensityModel::Callback(_) => Err(Error::InvalidDensity(
                    "callback densities cannot be serialized".into(),
                )),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DensityFile { classes })
    }
}
