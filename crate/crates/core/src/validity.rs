//! Commitment validity: the X-statistic, the binary KS test and the
//! combined short/long window test `Valid`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::stats::{critical_delta, exp_cdf, ks_pvalue, ks_statistic, KsOutcome};

/// One of a miner's inter-block intervals together with what was reported
/// for it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportedInterval {
    /// Seconds since the miner's previous block.
    pub inter_arrival: f64,
    /// Reported hash rate, hashes per second.
    pub reported_rate: f64,
    /// Time-weighted network difficulty over the interval, in hashes.
    pub avg_difficulty: f64,
}

impl ReportedInterval {
    pub fn new(inter_arrival: f64, reported_rate: f64, avg_difficulty: f64) -> Result<Self> {
        let iv = Self {
            inter_arrival,
            reported_rate,
            avg_difficulty,
        };
        iv.check()?;
        Ok(iv)
    }

    fn check(&self) -> Result<()> {
        if !(self.inter_arrival > 0.0) || !self.inter_arrival.is_finite() {
            return Err(domain(format!("inter-arrival {} must be positive", self.inter_arrival)));
        }
        if !(self.reported_rate >= 0.0) || !self.reported_rate.is_finite() {
            return Err(domain(format!(
                "reported rate {} must be nonnegative",
                self.reported_rate
            )));
        }
        if !(self.avg_difficulty > 0.0) || !self.avg_difficulty.is_finite() {
            return Err(domain(format!(
                "average difficulty {} must be positive",
                self.avg_difficulty
            )));
        }
        Ok(())
    }

    /// `T r / D̂`, unit exponential when the report is honest.
    pub fn x(&self) -> f64 {
        self.inter_arrival * self.reported_rate / self.avg_difficulty
    }
}

/// Window sizes and thresholds of `Valid`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityParams {
    pub n_s: usize,
    pub n_l: usize,
    pub tau_s: f64,
    pub tau_l: f64,
}

impl ValidityParams {
    pub fn new(n_s: usize, n_l: usize, tau_s: f64, tau_l: f64) -> Result<Self> {
        let p = Self { n_s, n_l, tau_s, tau_l };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        if self.n_s == 0 || self.n_s >= self.n_l {
            return Err(Error::Config(format!(
                "window sizes must satisfy 1 <= n_s < n_l, got n_s={} n_l={}",
                self.n_s, self.n_l
            )));
        }
        for (name, tau) in [("tau_s", self.tau_s), ("tau_l", self.tau_l)] {
            if !(tau > 0.0 && tau < 1.0) {
                return Err(Error::Config(format!("{name}={tau} outside (0, 1)")));
            }
        }
        Ok(())
    }
}

/// Committed fraction and parameters of each tabulated row, ascending.
pub const PARAM_TABLE: [(f64, ValidityParams); 4] = [
    (
        0.01,
        ValidityParams {
            n_s: 2,
            n_l: 100,
            tau_s: 1e-7,
            tau_l: 1e-7,
        },
    ),
    (
        0.10,
        ValidityParams {
            n_s: 20,
            n_l: 1000,
            tau_s: 1e-10,
            tau_l: 1e-10,
        },
    ),
    (
        0.25,
        ValidityParams {
            n_s: 50,
            n_l: 2500,
            tau_s: 1e-12,
            tau_l: 1e-12,
        },
    ),
    (
        0.50,
        ValidityParams {
            n_s: 100,
            n_l: 5000,
            tau_s: 1e-12,
            tau_l: 1e-12,
        },
    ),
];

/// Smallest supported committed fraction of network hash rate.
pub const MIN_FRACTION: f64 = 0.005;

/// Parameters for a miner committing `fraction` of the network hash rate:
/// the tabulated row at or below `fraction`, or the first row below 1%.
pub fn params_for(fraction: f64) -> Result<ValidityParams> {
    if !(fraction >= MIN_FRACTION) {
        return Err(Error::UnsupportedHashRate(fraction));
    }
    let row = PARAM_TABLE
        .iter()
        .rev()
        .find(|(q, _)| fraction >= *q)
        .unwrap_or(&PARAM_TABLE[0]);
    Ok(row.1)
}

/// X-statistic of every interval, in order.
pub fn transform(intervals: &[ReportedInterval]) -> Result<Vec<f64>> {
    if intervals.is_empty() {
        return Err(domain("no intervals to transform"));
    }
    intervals.iter().map(|iv| iv.check().map(|_| iv.x())).collect()
}

fn tail(intervals: &[ReportedInterval], n: usize) -> Result<&[ReportedInterval]> {
    if n == 0 {
        return Err(domain("window size must be positive"));
    }
    if intervals.len() < n {
        return Err(Error::InsufficientData {
            needed: n,
            available: intervals.len(),
        });
    }
    Ok(&intervals[intervals.len() - n..])
}

/// KS outcome, with p-value, over the most recent `n` intervals.
pub fn ks_window(intervals: &[ReportedInterval], n: usize) -> Result<KsOutcome> {
    let xs = transform(tail(intervals, n)?)?;
    let mut out = ks_statistic(&xs)?;
    out.p_value = Some(ks_pvalue(out.delta, out.n)?);
    Ok(out)
}

/// Passes iff the p-value over the most recent `n` intervals exceeds `tau`.
pub fn ks_test(intervals: &[ReportedInterval], n: usize, tau: f64) -> Result<bool> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(domain(format!("threshold {tau} outside (0, 1)")));
    }
    Ok(ks_window(intervals, n)?.p_value.unwrap_or(0.0) > tau)
}

/// Both windows' outcomes for the most recent intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub short: KsOutcome,
    pub long: KsOutcome,
    pub passed: bool,
}

/// `Valid` with the per-window statistics kept.
pub fn evaluate(intervals: &[ReportedInterval], params: &ValidityParams) -> Result<ValidityReport> {
    params.check()?;
    // Check the long window first so a short history reports n_l as needed.
    let long = ks_window(intervals, params.n_l)?;
    let short = ks_window(intervals, params.n_s)?;
    let passed = short.p_value.unwrap_or(0.0) > params.tau_s && long.p_value.unwrap_or(0.0) > params.tau_l;
    Ok(ValidityReport { short, long, passed })
}

/// `KS(n_s, tau_s) AND KS(n_l, tau_l)` over the most recent intervals.
pub fn valid(intervals: &[ReportedInterval], params: &ValidityParams) -> Result<bool> {
    Ok(evaluate(intervals, params)?.passed)
}

/// Piecewise-constant network difficulty over time.
///
/// Each entry starts a segment that lasts until the next entry.
#[derive(Debug, Clone, Default)]
pub struct DifficultyTimeline {
    starts: Vec<f64>,
    values: Vec<f64>,
    /// Integral of difficulty from the first start to each start.
    cumulative: Vec<f64>,
}

impl DifficultyTimeline {
    pub fn new() -> Self {
        Self::default()
    }

    /// Difficulty becomes `difficulty` from time `start` on.
    pub fn push(&mut self, start: f64, difficulty: f64) -> Result<()> {
        if !(difficulty > 0.0) || !difficulty.is_finite() {
            return Err(domain(format!("difficulty {difficulty} must be positive")));
        }
        match self.starts.last() {
            Some(&last) if !(start >= last) => {
                return Err(domain(format!("segment start {start} precedes {last}")));
            }
            Some(&last) => {
                let prev = *self.values.last().unwrap_or(&0.0);
                let acc = *self.cumulative.last().unwrap_or(&0.0);
                self.cumulative.push(acc + prev * (start - last));
            }
            None => self.cumulative.push(0.0),
        }
        self.starts.push(start);
        self.values.push(difficulty);
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    /// Difficulty in force at `t`.
    pub fn at(&self, t: f64) -> Option<f64> {
        let i = self.starts.partition_point(|&s| s <= t);
        (i > 0).then(|| self.values[i - 1])
    }

    fn integral_to(&self, t: f64) -> f64 {
        let i = self.starts.partition_point(|&s| s <= t);
        if i == 0 {
            return 0.0;
        }
        self.cumulative[i - 1] + self.values[i - 1] * (t - self.starts[i - 1])
    }

    /// Time-weighted mean difficulty over `[t0, t1]`.
    pub fn average(&self, t0: f64, t1: f64) -> Result<f64> {
        let first = *self.starts.first().ok_or_else(|| domain("empty difficulty timeline"))?;
        if t0 < first {
            return Err(domain(format!("interval start {t0} precedes timeline start {first}")));
        }
        if !(t1 > t0) {
            return Err(domain(format!("empty interval [{t0}, {t1}]")));
        }
        Ok((self.integral_to(t1) - self.integral_to(t0)) / (t1 - t0))
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    /// `max over present leaves of (rank - n u)`.
    a: f64,
    /// `max over present leaves of (n u - (rank - 1))`.
    b: f64,
    cnt: u32,
}

const EMPTY: Node = Node {
    a: f64::NEG_INFINITY,
    b: f64::NEG_INFINITY,
    cnt: 0,
};

fn combine(l: Node, r: Node) -> Node {
    let c = f64::from(l.cnt);
    Node {
        a: l.a.max(r.a + c),
        b: l.b.max(r.b - c),
        cnt: l.cnt + r.cnt,
    }
}

/// KS statistic of a dynamic multiset of `u = F(x)` values, over a fixed
/// universe of slots ordered by value.
struct KsTree {
    n: f64,
    size: usize,
    nodes: Vec<Node>,
}

impl KsTree {
    fn new(universe: usize, n: usize) -> Self {
        let size = universe.next_power_of_two().max(1);
        Self {
            n: n as f64,
            size,
            nodes: vec![EMPTY; 2 * size],
        }
    }

    fn set(&mut self, slot: usize, u: Option<f64>) {
        let mut i = slot + self.size;
        self.nodes[i] = match u {
            Some(u) => Node {
                a: 1.0 - self.n * u,
                b: self.n * u,
                cnt: 1,
            },
            None => EMPTY,
        };
        while i > 1 {
            i /= 2;
            self.nodes[i] = combine(self.nodes[2 * i], self.nodes[2 * i + 1]);
        }
    }

    fn delta(&self) -> f64 {
        let root = self.nodes[1];
        (root.a.max(root.b) / self.n).clamp(0.0, 1.0)
    }
}

/// Outcome of `Valid` on the window ending at interval `end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowOutcome {
    /// Index (0-based) of the last interval in the window.
    pub end: usize,
    pub delta_short: f64,
    pub delta_long: f64,
    pub passed: bool,
}

/// Evaluates `Valid` on every sliding window of a long X series in
/// `O(log N)` per window.
#[derive(Debug, Clone, Copy)]
pub struct SlidingValidator {
    params: ValidityParams,
    crit_s: f64,
    crit_l: f64,
}

/// Distance from a critical value inside which the p-value is recomputed.
const CRIT_GUARD: f64 = 1e-9;

impl SlidingValidator {
    pub fn new(params: ValidityParams) -> Result<Self> {
        params.check()?;
        Ok(Self {
            params,
            crit_s: critical_delta(params.n_s, params.tau_s)?,
            crit_l: critical_delta(params.n_l, params.tau_l)?,
        })
    }

    pub fn params(&self) -> &ValidityParams {
        &self.params
    }

    /// Smallest failing KS statistic of the short and long windows.
    pub fn critical_deltas(&self) -> (f64, f64) {
        (self.crit_s, self.crit_l)
    }

    fn passes(delta: f64, n: usize, tau: f64, crit: f64) -> Result<bool> {
        if (delta - crit).abs() < CRIT_GUARD {
            return Ok(ks_pvalue(delta, n)? > tau);
        }
        Ok(delta < crit)
    }

    /// `Valid` on each window `xs[end + 1 - n_l ..= end]`, for every `end`
    /// from `n_l - 1` on.
    pub fn run(&self, xs: &[f64]) -> Result<Vec<WindowOutcome>> {
        let ValidityParams { n_s, n_l, tau_s, tau_l } = self.params;
        if let Some(bad) = xs.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
            return Err(domain(format!("X value {bad} is not a nonnegative real")));
        }
        let n = xs.len();
        let u: Vec<f64> = xs.iter().map(|&x| exp_cdf(x, 1.0)).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| u[i].total_cmp(&u[j]).then(i.cmp(&j)));
        let mut slot = vec![0usize; n];
        for (rank, &i) in order.iter().enumerate() {
            slot[i] = rank;
        }

        let mut short = KsTree::new(n, n_s);
        let mut long = KsTree::new(n, n_l);
        let mut out = Vec::with_capacity(n.saturating_sub(n_l - 1));
        for i in 0..n {
            short.set(slot[i], Some(u[i]));
            long.set(slot[i], Some(u[i]));
            if i >= n_s {
                short.set(slot[i - n_s], None);
            }
            if i >= n_l {
                long.set(slot[i - n_l], None);
            }
            if i + 1 >= n_l {
                let delta_short = short.delta();
                let delta_long = long.delta();
                let passed = Self::passes(delta_short, n_s, tau_s, self.crit_s)?
                    && Self::passes(delta_long, n_l, tau_l, self.crit_l)?;
                out.push(WindowOutcome {
                    end: i,
                    delta_short,
                    delta_long,
                    passed,
                });
            }
        }
        Ok(out)
    }
}
