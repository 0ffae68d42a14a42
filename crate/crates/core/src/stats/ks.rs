//! One-sample Kolmogorov–Smirnov test against the unit exponential.
//!
//! The null distribution of `D_n` is evaluated exactly for `n <= 140` and by
//! the limiting Kolmogorov distribution above that. Thresholds used by the
//! validity test reach `1e-12`, so both branches are written to keep
//! relative accuracy deep in the upper tail:
//!
//! - exact bulk: Marsaglia–Tsang–Wang matrix power for `P(D_n < d)`;
//! - exact tail: `2 P(D_n^+ >= d)` via the Birnbaum–Tingey sum, which is an
//!   identity for `d >= 1/2` and agrees to within `P(D_n^+ >= d)` relative
//!   error below that, without the cancellation of `1 - P(D_n < d)`;
//! - large `n`: the Kolmogorov series, which is conservative against the
//!   exact finite-`n` tail.

use serde::{Deserialize, Serialize};

use super::exp_cdf;
use crate::error::{domain, Result};

/// Largest sample size handled by the exact null distribution.
pub const EXACT_MAX_N: usize = 140;

/// Below this two-sided tail mass the exact branch switches from
/// `1 - CDF` to the one-sided tail sum.
const TAIL_SWITCH: f64 = 1e-5;

/// Result of a KS evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsOutcome {
    /// `sup_x |S_n(x) - F(x)|`.
    pub delta: f64,
    pub n: usize,
    /// `P(D_n >= delta)` under the null, once computed.
    pub p_value: Option<f64>,
}

/// KS distance between the empirical CDF of `samples` and `Expon(1)`.
///
/// Duplicates are legal; both one-sided gaps are evaluated at every sorted
/// sample.
pub fn ks_statistic(samples: &[f64]) -> Result<KsOutcome> {
    if samples.is_empty() {
        return Err(domain("KS statistic of an empty sample"));
    }
    if let Some(bad) = samples.iter().find(|x| !(**x >= 0.0)) {
        return Err(domain(format!("KS sample value {bad} is not a nonnegative real")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let delta = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = exp_cdf(x, 1.0);
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0f64, f64::max);
    Ok(KsOutcome {
        delta,
        n: sorted.len(),
        p_value: None,
    })
}

/// KS statistic and p-value for `samples` against `Expon(1)`.
pub fn ks_test_exponential(samples: &[f64]) -> Result<KsOutcome> {
    let mut out = ks_statistic(samples)?;
    out.p_value = Some(ks_pvalue(out.delta, out.n)?);
    Ok(out)
}

/// `P(D_n >= delta)` for a sample of `n` from a continuous null.
///
/// Never returns exactly zero: results are floored at `f64::MIN_POSITIVE`.
pub fn ks_pvalue(delta: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(domain("KS p-value needs n >= 1"));
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(domain(format!("KS statistic {delta} outside [0, 1]")));
    }
    if delta == 0.0 {
        return Ok(1.0);
    }
    let p = if n <= EXACT_MAX_N {
        exact_sf(n, delta)
    } else {
        kolmogorov_sf((n as f64).sqrt() * delta)
    };
    Ok(p.clamp(f64::MIN_POSITIVE, 1.0))
}

/// Smallest `delta` whose p-value at sample size `n` is `<= tau`.
///
/// `ks_pvalue(d, n) > tau` holds exactly when `d < critical_delta(n, tau)`,
/// up to the bisection resolution of about `1e-16`.
pub fn critical_delta(n: usize, tau: f64) -> Result<f64> {
    if n == 0 {
        return Err(domain("critical value needs n >= 1"));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(domain(format!("test threshold {tau} outside (0, 1)")));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ks_pvalue(mid, n)? > tau {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Upper tail of the limiting Kolmogorov distribution, `P(K >= lambda)`.
///
/// When every term underflows this is the first term `2 exp(-2 lambda^2)`,
/// itself zero; callers clamp.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi theta form converges fast for small lambda.
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let w = (2.0 * std::f64::consts::PI).sqrt() / lambda;
        let s: f64 = (1..=8)
            .map(|j| {
                let k = (2 * j - 1) as f64;
                (-k * k * pi2 / (8.0 * lambda * lambda)).exp()
            })
            .sum();
        (1.0 - w * s).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        let mut sign = 1.0;
        for k in 1..=100 {
            let k = k as f64;
            let term = (-2.0 * k * k * lambda * lambda).exp();
            if term == 0.0 {
                break;
            }
            sum += sign * term;
            sign = -sign;
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

/// Exact one-sided tail `P(D_n^+ >= d)` (Birnbaum–Tingey).
pub fn smirnov_upper_tail(n: usize, d: f64) -> f64 {
    if d <= 0.0 {
        return 1.0;
    }
    if d >= 1.0 {
        return 0.0;
    }
    let nf = n as f64;
    let ln_fact = ln_factorials(n);
    let jmax = ((nf * (1.0 - d)).floor() as usize).min(n);
    let logs: Vec<f64> = (0..=jmax)
        .filter_map(|j| {
            let jf = j as f64;
            let a = 1.0 - d - jf / nf;
            if a <= 0.0 {
                return None;
            }
            let ln_choose = ln_fact[n] - ln_fact[j] - ln_fact[n - j];
            Some(ln_choose + (nf - jf) * a.ln() + (jf - 1.0) * (d + jf / nf).ln())
        })
        .collect();
    if logs.is_empty() {
        return 0.0;
    }
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logs.iter().map(|l| (l - top).exp()).sum();
    (d.ln() + top + sum.ln()).exp().min(1.0)
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

fn exact_sf(n: usize, d: f64) -> f64 {
    let nf = n as f64;
    // D_n >= 1/(2n) almost surely.
    if d <= 0.5 / nf {
        return 1.0;
    }
    if d >= 1.0 {
        return 0.0;
    }
    let two_sided_tail = 2.0 * smirnov_upper_tail(n, d);
    if d >= 0.5 || two_sided_tail < TAIL_SWITCH {
        return two_sided_tail.min(1.0);
    }
    (1.0 - mtw_cdf(n, d)).clamp(TAIL_SWITCH, 1.0)
}

/// `P(D_n < d)` by the Marsaglia–Tsang–Wang matrix method.
fn mtw_cdf(n: usize, d: f64) -> f64 {
    let nd = n as f64 * d;
    let k = nd.floor() as usize + 1;
    let m = 2 * k - 1;
    let h = k as f64 - nd;

    let mut hm = vec![0.0f64; m * m];
    for i in 0..m {
        for j in 0..m {
            if i + 1 >= j {
                hm[i * m + j] = 1.0;
            }
        }
    }
    for i in 0..m {
        hm[i * m] -= h.powi(i as i32 + 1);
        hm[(m - 1) * m + i] -= h.powi((m - i) as i32);
    }
    if 2.0 * h - 1.0 > 0.0 {
        hm[(m - 1) * m] += (2.0 * h - 1.0).powi(m as i32);
    }
    for i in 0..m {
        for j in 0..m {
            if i + 1 > j {
                let span = i + 1 - j;
                let mut f = 1.0;
                for g in 1..=span {
                    f *= g as f64;
                }
                hm[i * m + j] /= f;
            }
        }
    }

    let (q, mut exp10) = mat_pow(&hm, 0, m, n);
    let mut s = q[(k - 1) * m + k - 1];
    for i in 1..=n {
        s = s * i as f64 / n as f64;
        if s < 1e-140 {
            s *= 1e140;
            exp10 -= 140;
        }
    }
    s * 10f64.powi(exp10)
}

fn mat_mul(a: &[f64], b: &[f64], m: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * m];
    for i in 0..m {
        for l in 0..m {
            let ail = a[i * m + l];
            if ail == 0.0 {
                continue;
            }
            let row_b = &b[l * m..(l + 1) * m];
            let row_c = &mut c[i * m..(i + 1) * m];
            for (cj, bj) in row_c.iter_mut().zip(row_b) {
                *cj += ail * bj;
            }
        }
    }
    c
}

/// `a^n` with a running power-of-ten exponent to avoid overflow.
fn mat_pow(a: &[f64], ea: i32, m: usize, n: usize) -> (Vec<f64>, i32) {
    if n == 1 {
        return (a.to_vec(), ea);
    }
    let (v, ev) = mat_pow(a, ea, m, n / 2);
    let b = mat_mul(&v, &v, m);
    let eb = 2 * ev;
    let (mut out, mut e) = if n.is_multiple_of(2) {
        (b, eb)
    } else {
        (mat_mul(a, &b, m), ea + eb)
    };
    if out[(m / 2) * m + m / 2] > 1e140 {
        for x in out.iter_mut() {
            *x *= 1e-140;
        }
        e += 140;
    }
    (out, e)
}
