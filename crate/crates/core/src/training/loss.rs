//! Prevalence-weighted losses: empirical 0-1, its tanh homotopy, and
//! cross-entropy.

use crate::error::{Error, Result};
use crate::par::{map_range, Exec, CHUNK};
use crate::probing::MonotoneClassifier;
use crate::simplex::Simplex;
use crate::training::data::TrainingDataset;
use crate::training::model::{Activations, ScorerModel};

/// Floor applied to softmax outputs before taking logarithms.
pub const SOFTMAX_FLOOR: f64 = 1e-12;

/// `h(x) = (1 - tanh(x / sigma)) / 2`.
pub fn h(x: f64, sigma: f64) -> f64 {
    0.5 * (1.0 - (x / sigma).tanh())
}

/// `g(x) = (tanh((x - 1/2) / sigma) + 1) / 2`.
pub fn g(x: f64, sigma: f64) -> f64 {
    0.5 * (((x - 0.5) / sigma).tanh() + 1.0)
}

fn dh(x: f64, sigma: f64) -> f64 {
    let t = (x / sigma).tanh();
    -0.5 * (1.0 - t * t) / sigma
}

fn dg(x: f64, sigma: f64) -> f64 {
    let t = ((x - 0.5) / sigma).tanh();
    0.5 * (1.0 - t * t) / sigma
}

/// `g(sum_m g(h(y_k - y_m)))` over all `m`, including `m = k`.
pub fn per_sample_term(y: &[f64], k: usize, sigma: f64) -> f64 {
    let s: f64 = y.iter().map(|&ym| g(h(y[k] - ym, sigma), sigma)).sum();
    g(s, sigma)
}

/// Term value and its gradient with respect to `y`.
pub fn per_sample_term_grad(y: &[f64], k: usize, sigma: f64) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; y.len()];
    let v = accumulate_term_grad(y, k, sigma, 1.0, &mut grad);
    (v, grad)
}

/// Adds `weight * d(term)/dy` to `dy` and returns the term value.
fn accumulate_term_grad(y: &[f64], k: usize, sigma: f64, weight: f64, dy: &mut [f64]) -> f64 {
    let s: f64 = y.iter().map(|&ym| g(h(y[k] - ym, sigma), sigma)).sum();
    let outer = weight * dg(s, sigma);
    for (m, &ym) in y.iter().enumerate() {
        if m == k {
            continue;
        }
        let c = outer * dg(h(y[k] - ym, sigma), sigma) * dh(y[k] - ym, sigma);
        dy[k] += c;
        dy[m] -= c;
    }
    g(s, sigma)
}

fn check(model: Option<&ScorerModel>, data: &TrainingDataset, q: &Simplex) -> Result<()> {
    if q.len() != data.num_classes() {
        return Err(Error::DimensionMismatch {
            expected: data.num_classes(),
            got: q.len(),
        });
    }
    if let Some(m) = model {
        if m.num_classes() != data.num_classes() {
            return Err(Error::DimensionMismatch {
                expected: data.num_classes(),
                got: m.num_classes(),
            });
        }
        if m.architecture.input() != data.dim() {
            return Err(Error::DimensionMismatch {
                expected: data.dim(),
                got: m.architecture.input(),
            });
        }
    }
    Ok(())
}

/// `sum_k (q_k / s_k) sum_j [predict(w_{j,k}) != k]`.
pub fn empirical_01_loss(
    data: &TrainingDataset,
    q: &Simplex,
    predict: impl Fn(&[f64]) -> Result<usize>,
) -> Result<f64> {
    check(None, data, q)?;
    let mut total = 0.0;
    for (k, class) in data.classes().iter().enumerate() {
        let mut wrong = 0usize;
        for p in class {
            if predict(p)? != k {
                wrong += 1;
            }
        }
        total += q[k] * wrong as f64 / class.len() as f64;
    }
    Ok(total)
}

/// 0-1 loss of `clf` evaluated at affine prevalence `q`.
pub fn classifier_01_loss(
    clf: &dyn MonotoneClassifier,
    data: &TrainingDataset,
    q: &Simplex,
) -> Result<f64> {
    empirical_01_loss(data, q, |r| clf.classify(r, q))
}

/// 0-1 loss of the scorer's argmax.
pub fn model_01_loss(model: &ScorerModel, data: &TrainingDataset, q: &Simplex) -> Result<f64> {
    check(Some(model), data, q)?;
    empirical_01_loss(data, q, |r| Ok(model.predict(r)))
}

/// One summand of a training objective.
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Homotopy { q: Simplex, sigma: f64 },
    CrossEntropy { q: Simplex },
}

/// Value and parameter gradient of a sum of terms, reduced in a fixed order.
pub fn objective_and_grad(
    exec: Exec,
    model: &ScorerModel,
    data: &TrainingDataset,
    terms: &[Term],
) -> Result<(f64, Vec<f64>)> {
    let weighted: Vec<Vec<(&[f64], usize, f64)>> = terms
        .iter()
        .map(|t| {
            let q = match t {
                Term::Homotopy { q, sigma } => {
                    if !(*sigma > 0.0) {
                        return Err(Error::InvalidParameter(format!(
                            "sigma must be positive, got {sigma}"
                        )));
                    }
                    q
                }
                Term::CrossEntropy { q } => q,
            };
            check(Some(model), data, q)?;
            Ok(data.weighted(q))
        })
        .collect::<Result<_>>()?;
    let samples = &weighted[0];
    let np = model.params.len();
    let n = samples.len();
    let partials = map_range(exec, n.div_ceil(CHUNK), |c| {
        let mut acc = vec![0.0; np + 1];
        let mut act = Activations::default();
        let mut dy = vec![0.0; model.num_classes()];
        for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
            let (r, k, _) = samples[i];
            model.forward_into(r, &mut act);
            dy.iter_mut().for_each(|d| *d = 0.0);
            let mut value = 0.0;
            for (t, w) in terms.iter().zip(&weighted) {
                let wi = w[i].2;
                if wi == 0.0 {
                    continue;
                }
                match t {
                    Term::Homotopy { sigma, .. } => {
                        value += wi * accumulate_term_grad(&act.output, k, *sigma, wi, &mut dy);
                    }
                    Term::CrossEntropy { .. } => {
                        let yk = act.output[k];
                        value += wi * -yk.max(SOFTMAX_FLOOR).ln();
                        if yk > SOFTMAX_FLOOR {
                            dy[k] -= wi / yk;
                        }
                    }
                }
            }
            model.backward(r, &act, &dy, &mut acc[..np]);
            acc[np] += value;
        }
        acc
    });
    let mut grad = vec![0.0; np + 1];
    for p in partials {
        for (t, v) in grad.iter_mut().zip(p) {
            *t += v;
        }
    }
    let value = grad[np];
    grad.truncate(np);
    Ok((value, grad))
}

/// Homotopy objective `sum_k (q_k / s_k) sum_j term(y_{j,k}, k)`.
pub fn homotopy_loss(
    model: &ScorerModel,
    data: &TrainingDataset,
    q: &Simplex,
    sigma: f64,
) -> Result<f64> {
    loss_only(
        model,
        data,
        &Term::Homotopy {
            q: q.clone(),
            sigma,
        },
    )
}

/// Exact gradient of [`homotopy_loss`] with respect to the parameters.
pub fn loss_gradient(
    exec: Exec,
    model: &ScorerModel,
    data: &TrainingDataset,
    q: &Simplex,
    sigma: f64,
) -> Result<Vec<f64>> {
    objective_and_grad(
        exec,
        model,
        data,
        &[Term::Homotopy {
            q: q.clone(),
            sigma,
        }],
    )
    .map(|(_, g)| g)
}

/// `sum_k (q_k / s_k) sum_j -ln y_{j,k,k}`, outputs floored at 1e-12.
pub fn prevalence_weighted_cross_entropy(
    model: &ScorerModel,
    data: &TrainingDataset,
    q: &Simplex,
) -> Result<f64> {
    loss_only(model, data, &Term::CrossEntropy { q: q.clone() })
}

fn loss_only(model: &ScorerModel, data: &TrainingDataset, term: &Term) -> Result<f64> {
    let q = match term {
        Term::Homotopy { q, sigma } => {
            if !(*sigma > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "sigma must be positive, got {sigma}"
                )));
            }
            q
        }
        Term::CrossEntropy { q } => q,
    };
    check(Some(model), data, q)?;
    let mut total = 0.0;
    for (k, class) in data.classes().iter().enumerate() {
        let w = q[k] / class.len() as f64;
        let s: f64 = class
            .iter()
            .map(|p| {
                let y = model.forward(p);
                match term {
                    Term::Homotopy { sigma, .. } => per_sample_term(&y, k, *sigma),
                    Term::CrossEntropy { .. } => -y[k].max(SOFTMAX_FLOOR).ln(),
                }
            })
            .sum();
        total += w * s;
    }
    Ok(total)
}
