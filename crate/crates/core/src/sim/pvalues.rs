//! p-values of true and deviant exponential samples.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::stats::{exp_sample, ks_test_exponential, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    /// Independent `Expon(1)` draws.
    True,
    /// Exponential draws whose mean follows a random walk started at 1.
    Deviant,
}

/// Smallest mean the deviant walk may reach.
const MEAN_FLOOR: f64 = 1e-6;

/// KS p-value against `Expon(1)` of `n` samples of `kind`; `walk_sd` is the
/// step size of the deviant mean.
pub fn pvalue_sample(kind: SampleKind, n: usize, walk_sd: f64, seed: u64, trial: u64) -> Result<f64> {
    if n == 0 {
        return Err(domain("need at least one sample"));
    }
    let mut rng = RngStream::for_trial(seed, trial, 0);
    let mut walk = RngStream::for_trial(seed, trial, 1);
    let mut mean = 1.0f64;
    let mut xs = Vec::with_capacity(n);
    for _ in 0..n {
        xs.push(exp_sample(mean, &mut rng)?);
        if kind == SampleKind::Deviant {
            mean = (mean + walk_sd * walk.normal()).max(MEAN_FLOOR);
        }
    }
    Ok(ks_test_exponential(&xs)?.p_value.unwrap_or(0.0))
}
