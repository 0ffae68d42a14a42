//! Numerical foundation: the unit exponential, the one-sample
//! Kolmogorov–Smirnov statistic against it, and seeded random streams.

mod ks;
mod rng;

pub use ks::{
    critical_delta, kolmogorov_sf, ks_pvalue, ks_statistic, ks_test_exponential, smirnov_upper_tail, KsOutcome,
    EXACT_MAX_N,
};
pub use rng::RngStream;

use crate::error::{domain, Result};

/// Quantile of `Expon(mean)`: the `q` with `P(X < q) = p`.
pub fn exp_quantile(p: f64, mean: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p) {
        return Err(domain(format!("quantile probability {p} outside [0, 1)")));
    }
    if !(mean > 0.0) || !mean.is_finite() {
        return Err(domain(format!("exponential mean must be positive, got {mean}")));
    }
    Ok(-mean * (-p).ln_1p())
}

/// CDF of `Expon(mean)` at `x`; zero for negative `x`.
pub fn exp_cdf(x: f64, mean: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -(-x / mean).exp_m1()
    }
}

/// Inverse-transform draw from `Expon(mean)`.
pub fn exp_sample(mean: f64, rng: &mut RngStream) -> Result<f64> {
    if !(mean > 0.0) || !mean.is_finite() {
        return Err(domain(format!("exponential mean must be positive, got {mean}")));
    }
    let u = rng.uniform();
    Ok(-mean * (-u).ln_1p())
}
