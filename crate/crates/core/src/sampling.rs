//! Seeded synthetic populations.
//!
//! Samples are produced in fixed-size blocks; block `b` draws from a ChaCha
//! stream keyed by `(seed, b)`, so the output does not depend on how blocks
//! are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::density::DensityModel;
use crate::error::{Error, Result};
use crate::par::{map_range, Exec};
use crate::simplex::Simplex;

const BLOCK: usize = 1024;

/// A measurement together with its true class (0-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub point: Vec<f64>,
    pub label: usize,
}

/// Generator for stream `stream` of the run keyed by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws `n` labeled samples: labels i.i.d. from `chi`, points from the
/// labeled class density.
pub fn sample_population(
    densities: &[DensityModel],
    chi: &Simplex,
    n: usize,
    seed: u64,
) -> Result<Vec<LabeledSample>> {
    sample_population_with(Exec::default(), densities, chi, n, seed)
}

pub fn sample_population_with(
    exec: Exec,
    densities: &[DensityModel],
    chi: &Simplex,
    n: usize,
    seed: u64,
) -> Result<Vec<LabeledSample>> {
    if densities.len() != chi.len() {
        return Err(Error::DimensionMismatch {
            expected: densities.len(),
            got: chi.len(),
        });
    }
    for (j, d) in densities.iter().enumerate() {
        if chi[j] > 0.0 && !d.is_sampleable() {
            return Err(Error::Unsampleable(j));
        }
    }
    let mut cumulative = Vec::with_capacity(chi.len());
    let mut acc = 0.0;
    for &w in chi.weights() {
        acc += w;
        cumulative.push(acc);
    }
    let last_positive = chi.weights().iter().rposition(|&w| w > 0.0).unwrap_or(0);

    let blocks = n.div_ceil(BLOCK);
    let parts = map_range(exec, blocks, |b| {
        let mut rng = stream_rng(seed, b as u64);
        let len = BLOCK.min(n - b * BLOCK);
        (0..len)
            .map(|_| {
                let u: f64 = rng.random();
                let label = cumulative
                    .iter()
                    .position(|&c| u < c)
                    .unwrap_or(last_positive)
                    .min(last_positive);
                let point = densities[label]
                    .sample(&mut rng)
                    .expect("sampleability checked");
                LabeledSample { point, label }
            })
            .collect::<Vec<_>>()
    });
    Ok(parts.into_iter().flatten().collect())
}
