//! Small differentiable scorers with a softmax output.

use rand::RngCore;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported hidden width.
pub const MAX_HIDDEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Architecture {
    /// Logits `W r + b`.
    Linear { input: usize, classes: usize },
    /// Logits `W2 tanh(W1 r + b1) + b2`.
    Hidden {
        input: usize,
        hidden: usize,
        classes: usize,
    },
}

impl Architecture {
    pub fn input(&self) -> usize {
        match *self {
            Architecture::Linear { input, .. } | Architecture::Hidden { input, .. } => input,
        }
    }

    pub fn classes(&self) -> usize {
        match *self {
            Architecture::Linear { classes, .. } | Architecture::Hidden { classes, .. } => classes,
        }
    }

    pub fn num_params(&self) -> usize {
        match *self {
            Architecture::Linear { input, classes } => classes * (input + 1),
            Architecture::Hidden {
                input,
                hidden,
                classes,
            } => hidden * (input + 1) + classes * (hidden + 1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Architecture::Linear { input, classes } => input > 0 && classes >= 2,
            Architecture::Hidden {
                input,
                hidden,
                classes,
            } => input > 0 && classes >= 2 && (1..=MAX_HIDDEN).contains(&hidden),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidDensity(format!(
                "unsupported architecture {self:?}"
            )))
        }
    }
}

/// Architecture plus flat parameter vector. Layout: weights row-major by
/// output unit, then biases, layer by layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerModel {
    pub architecture: Architecture,
    pub params: Vec<f64>,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct Activations {
    pub hidden: Vec<f64>,
    pub output: Vec<f64>,
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut v = logits.to_vec();
    softmax_in_place(&mut v);
    v
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        s += *v;
    }
    for v in z.iter_mut() {
        *v /= s;
    }
}

impl ScorerModel {
    pub fn new(architecture: Architecture, params: Vec<f64>) -> Result<Self> {
        architecture.validate()?;
        if params.len() != architecture.num_params() {
            return Err(Error::DimensionMismatch {
                expected: architecture.num_params(),
                got: params.len(),
            });
        }
        Ok(ScorerModel {
            architecture,
            params,
        })
    }

    pub fn zeros(architecture: Architecture) -> Result<Self> {
        Self::new(architecture, vec![0.0; architecture.num_params()])
    }

    /// Weights drawn from `N(0, 1/fan_in)`, biases zero.
    pub fn random(architecture: Architecture, rng: &mut dyn RngCore) -> Result<Self> {
        architecture.validate()?;
        let mut params = vec![0.0; architecture.num_params()];
        let mut fill = |slice: &mut [f64], fan_in: usize| {
            let n = Normal::new(0.0, (1.0 / fan_in as f64).sqrt()).expect("positive scale");
            for p in slice {
                *p = n.sample(rng);
            }
        };
        match architecture {
            Architecture::Linear { input, classes } => fill(&mut params[..classes * input], input),
            Architecture::Hidden {
                input,
                hidden,
                classes,
            } => {
                let w1 = hidden * input;
                let w2_start = w1 + hidden;
                fill(&mut params[..w1], input);
                fill(&mut params[w2_start..w2_start + classes * hidden], hidden);
            }
        }
        Self::new(architecture, params)
    }

    pub fn num_classes(&self) -> usize {
        self.architecture.classes()
    }

    pub fn forward_with(&self, r: &[f64]) -> Activations {
        let mut act = Activations::default();
        self.forward_into(r, &mut act);
        act
    }

    /// Forward pass reusing the buffers in `act`.
    pub fn forward_into(&self, r: &[f64], act: &mut Activations) {
        let p = &self.params;
        act.output.clear();
        act.hidden.clear();
        match self.architecture {
            Architecture::Linear { input, classes } => {
                let b = classes * input;
                act.output.extend(
                    (0..classes).map(|c| {
                        p[b + c] + (0..input).map(|i| p[c * input + i] * r[i]).sum::<f64>()
                    }),
                );
            }
            Architecture::Hidden {
                input,
                hidden,
                classes,
            } => {
                let b1 = hidden * input;
                let w2 = b1 + hidden;
                let b2 = w2 + classes * hidden;
                act.hidden.extend((0..hidden).map(|u| {
                    (p[b1 + u] + (0..input).map(|i| p[u * input + i] * r[i]).sum::<f64>()).tanh()
                }));
                let h = &act.hidden;
                act.output.extend((0..classes).map(|c| {
                    p[b2 + c]
                        + (0..hidden)
                            .map(|u| p[w2 + c * hidden + u] * h[u])
                            .sum::<f64>()
                }));
            }
        }
        softmax_in_place(&mut act.output);
    }

    /// Softmax output at `r`.
    pub fn forward(&self, r: &[f64]) -> Vec<f64> {
        self.forward_with(r).output
    }

    /// Index of the largest output (lowest index on ties).
    pub fn predict(&self, r: &[f64]) -> usize {
        let y = self.forward(r);
        let mut best = 0;
        for (c, &v) in y.iter().enumerate() {
            if v > y[best] {
                best = c;
            }
        }
        best
    }

    /// Adds `d(loss)/d(params)` to `grad`, given `dy = d(loss)/d(output)`.
    pub fn backward(&self, r: &[f64], act: &Activations, dy: &[f64], grad: &mut [f64]) {
        let y = &act.output;
        let dot: f64 = dy.iter().zip(y).map(|(a, b)| a * b).sum();
        let dz = |c: usize| y[c] * (dy[c] - dot);
        let p = &self.params;
        match self.architecture {
            Architecture::Linear { input, classes } => {
                let b = classes * input;
                for c in 0..classes {
                    let d = dz(c);
                    for i in 0..input {
                        grad[c * input + i] += d * r[i];
                    }
                    grad[b + c] += d;
                }
            }
            Architecture::Hidden {
                input,
                hidden,
                classes,
            } => {
                let b1 = hidden * input;
                let w2 = b1 + hidden;
                let b2 = w2 + classes * hidden;
                let h = &act.hidden;
                for c in 0..classes {
                    let d = dz(c);
                    for u in 0..hidden {
                        grad[w2 + c * hidden + u] += d * h[u];
                    }
                    grad[b2 + c] += d;
                }
                for u in 0..hidden {
                    let dh: f64 = (0..classes).map(|c| dz(c) * p[w2 + c * hidden + u]).sum();
                    let da = dh * (1.0 - h[u] * h[u]);
                    for i in 0..input {
                        grad[u * input + i] += da * r[i];
                    }
                    grad[b1 + u] += da;
                }
            }
        }
    }
}
