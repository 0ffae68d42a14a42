//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Stochastic criteria run at desk scale (200 trials); set `BMSIM_FULL=1`
//! for the full 1000. Positional arguments filter criteria by name.

use std::panic::{catch_unwind, AssertUnwindSafe};

use bmsim::config::{Behavior, ExperimentConfig};
use bmsim::experiments::{self as ex, Fig2Row};
use bonded_mining::daa::{bch_difficulty, clamp_timespan, DifficultyState, CW_WINDOW};
use bonded_mining::protocol::{
    abandonment_threshold, reconcile_amount, BondState, BondedNetwork, Coins, NetworkParams, ProtocolEvent,
};
use bonded_mining::stats::RngStream;
use bonded_mining::validity::ValidityParams;
use bonded_mining::{Error, DAY};

/// Outcome of one criterion: pass flag plus detail lines.
struct Verdict {
    pass: bool,
    details: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Self {
            pass: true,
            details: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: String) {
        self.pass &= ok;
        self.details
            .push(format!("{} {what}", if ok { "ok  " } else { "MISS" }));
    }
}

fn desk_config() -> (ExperimentConfig, usize) {
    let cfg = ExperimentConfig::default();
    let full = std::env::var("BMSIM_FULL").is_ok_and(|v| v == "1");
    let trials = cfg.trial_count(None, full);
    (cfg, trials)
}

fn refund_unit_suite() -> Verdict {
    let mut v = Verdict::new();
    let b = Coins::from_coins(10.0).unwrap();
    let c = 100.0;
    for (ratio, expected) in [(0.0, 0.0), (0.5, 0.5), (1.0, 1.0), (1.5, 0.5), (2.5, 0.0)] {
        let got = reconcile_amount(ratio * c, c, b).unwrap();
        let want = Coins((b.0 as f64 * expected) as u64);
        v.check(got == want, format!("r/c={ratio}: refund {got} coins, expected {want}"));
    }
    v
}

fn pvalue_calibration() -> Verdict {
    let mut v = Verdict::new();
    let cfg = ExperimentConfig::default();
    let n = cfg.pvalues.trials;
    let rows = ex::fig2(&cfg, n).unwrap();
    let of = |kind: &str| -> Vec<f64> {
        rows.iter()
            .filter(|r: &&Fig2Row| r.kind == kind)
            .map(|r| r.p_value)
            .collect()
    };
    let truth = of("true");
    let deviant = of("deviant");
    for x in [0.05, 0.25, 0.5, 0.75] {
        let ecdf = truth.iter().filter(|p| **p <= x).count() as f64 / n as f64;
        let band = 3.0 * (x * (1.0 - x) / n as f64).sqrt();
        v.check(
            (ecdf - x).abs() <= band,
            format!("true samples: ECDF({x}) = {ecdf:.4}, allowed {x} +/- {band:.4}"),
        );
    }
    let low = deviant.iter().filter(|p| **p < 1e-3).count() as f64 / n as f64;
    v.check(
        low >= 0.20,
        format!("deviant samples with p < 1e-3: {low:.3}, need >= 0.20"),
    );
    v
}

fn abandonment_quantile() -> Verdict {
    let mut v = Verdict::new();
    let net = NetworkParams::default();
    let hours = abandonment_threshold(0.10, 1.0, &net).unwrap() / 3600.0;
    v.check(
        (19.0..=20.0).contains(&hours),
        format!("10% miner, T=600 s, p=0.99999: threshold {hours:.3} h, need [19, 20]"),
    );
    v
}

fn bootstrap_detection_rates() -> Verdict {
    let mut v = Verdict::new();
    let (cfg, trials) = desk_config();
    let rows = ex::table2(&cfg, trials).unwrap();
    let row = |q: f64| rows.iter().find(|r| r.hash_fraction == q).unwrap();
    let mut band = |label: &str, got: f64, lo: f64, hi: f64| {
        v.check(
            (lo..=hi).contains(&got),
            format!("{label}: {got:.3}, need [{lo:.3}, {hi:.3}] ({trials} trials)"),
        );
    };
    band("50% short-range", row(0.50).short_range_detection_rate, 0.99, 1.0);
    band("25% short-range", row(0.25).short_range_detection_rate, 0.737, 0.937);
    band("10% long-range", row(0.10).long_range_detection_rate, 0.533, 0.773);
    band("1% long-range", row(0.01).long_range_detection_rate, 0.171, 0.371);
    band("1% short-range", row(0.01).short_range_detection_rate, 0.0, 0.10);
    for r in &rows {
        v.details.push(format!(
            "     {:>4}: completed trials short {} long {}",
            r.hash_fraction, r.short_range_completed_trials, r.long_range_completed_trials
        ));
    }
    v
}

fn type_i_error() -> Verdict {
    let mut v = Verdict::new();
    let (cfg, trials) = desk_config();
    for row in &cfg.detection.params {
        let d = cfg
            .detection
            .config(row, Behavior::Honest, cfg.seed, trials, cfg.network.target_s)
            .unwrap();
        let s = ex::run_trials(d).unwrap();
        let failed: usize = s.iter().map(|t| t.failed_windows).sum();
        let windows: usize = s.iter().map(|t| t.windows).sum();
        v.check(
            failed == 0,
            format!(
                "{}% honest, {trials} trials x 1 year: {failed} failed windows of {windows}",
                row.fraction * 100.0
            ),
        );
    }
    v
}

fn long_range_month_anchor() -> Verdict {
    let mut v = Verdict::new();
    let (mut cfg, trials) = desk_config();
    cfg.detection.duration_s = 30.0 * DAY;
    let row = *cfg.detection.params.iter().find(|r| r.fraction == 0.01).unwrap();
    let series = ex::detection_series(&cfg, &row, Behavior::LongRange, trials).unwrap();
    let p = series
        .iter()
        .find(|r| r.time_s == 30.0 * DAY)
        .unwrap()
        .detection_probability;
    v.check(
        (0.35..=0.65).contains(&p),
        format!("1% long-range at bootstrap + 30 days: {p:.3}, need [0.35, 0.65] ({trials} trials)"),
    );
    v
}

fn bch_daa_properties() -> Verdict {
    let mut v = Verdict::new();
    let t = 600.0;
    for (start, rate) in [(600_000.0, 1000.0), (600_000.0, 3000.0), (600_000.0, 250.0)] {
        let mut s = DifficultyState::warm(start, t).unwrap();
        let mut e = s.difficulty / rate;
        for _ in 0..1000 {
            s.on_block(e).unwrap();
            e = s.difficulty / rate;
        }
        v.check(
            (e - t).abs() <= 1e-3 * t,
            format!("start D={start}, constant rate {rate}: expected time after 1000 blocks {e:.4} s"),
        );
    }
    let mut rng = RngStream::new(2024, 0);
    let mut inside = true;
    let (mut low, mut high) = (0, 0);
    for _ in 0..10_000 {
        let scale = 10f64.powf(1.5 + 2.0 * rng.uniform());
        let window: Vec<(f64, f64)> = (0..CW_WINDOW)
            .map(|_| (1e3 + 1e6 * rng.uniform(), 2.0 * scale * rng.uniform()))
            .collect();
        let span: f64 = window.iter().map(|w| w.1).sum();
        let m = clamp_timespan(span, t);
        let work: f64 = window.iter().map(|w| w.0).sum();
        let d = bch_difficulty(&window, t).unwrap();
        low += usize::from(span < 72.0 * t);
        high += usize::from(span > 288.0 * t);
        inside &= (72.0 * t..=288.0 * t).contains(&m) && (d - t * work / m).abs() <= 1e-9 * d;
    }
    v.check(
        inside && low > 0 && high > 0,
        format!("10000 random windows ({low} below 72T, {high} above 288T): 72T <= M' <= 288T"),
    );
    v
}

fn rule_comparison() -> Verdict {
    let mut v = Verdict::new();
    let cfg = ExperimentConfig::default();
    let (bch, bm) = ex::fig4(&cfg).unwrap();
    let (b, m) = (&bch.summary, &bm.summary);
    v.check(
        b.min_time_s <= 300.0,
        format!("BCH minimum expected time {:.1} s, need <= 300", b.min_time_s),
    );
    v.check(
        b.max_time_s >= 1400.0,
        format!("BCH maximum expected time {:.1} s, need >= 1400", b.max_time_s),
    );
    v.check(
        m.max_abs_deviation_s < b.max_abs_deviation_s,
        format!(
            "max |E - 600|: BM {:.1} s < BCH {:.1} s",
            m.max_abs_deviation_s, b.max_abs_deviation_s
        ),
    );
    v.check(
        m.deviation_integral_s2 < b.deviation_integral_s2,
        format!(
            "deviation-time integral: BM {:.4e} < BCH {:.4e} s^2",
            m.deviation_integral_s2, b.deviation_integral_s2
        ),
    );
    v
}

fn cost_tolerance_ordering() -> Verdict {
    let mut v = Verdict::new();
    let mut cfg = ExperimentConfig::default();
    cfg.expected.kappas = vec![0.1, 0.25, 1.0];
    let series = ex::fig5(&cfg).unwrap();
    let s: Vec<_> = series.iter().map(|s| &s.summary).collect();
    let (k01, k025, k1, bch) = (s[0], s[1], s[2], s[3]);
    v.check(
        k01.max_abs_deviation_s < k025.max_abs_deviation_s && k025.max_abs_deviation_s < k1.max_abs_deviation_s,
        format!(
            "max deviation: kappa 0.1 {:.1} < 0.25 {:.1} < 1.0 {:.1} s",
            k01.max_abs_deviation_s, k025.max_abs_deviation_s, k1.max_abs_deviation_s
        ),
    );
    v.check(
        k1.follows_preference,
        "kappa 1.0 actual rate equals preference at every block".into(),
    );
    v.check(
        k1.max_abs_deviation_s < bch.max_abs_deviation_s,
        format!(
            "kappa 1.0 max deviation {:.1} s < BCH {:.1} s",
            k1.max_abs_deviation_s, bch.max_abs_deviation_s
        ),
    );
    v
}

fn protocol_soundness() -> Verdict {
    let mut v = Verdict::new();
    let legal = |from: BondState, to: BondState| {
        use BondState::*;
        matches!(
            (from, to),
            (Bootstrapping, FullyBonded)
                | (FullyBonded, Bootstrapping)
                | (Bootstrapping | FullyBonded, Abandoned)
                | (Abandoned | FullyBonded, Divested)
                | (Divested, Bootstrapping)
        )
    };
    let small = ValidityParams::new(1, 4, 1e-4, 1e-4).unwrap();
    let large = ValidityParams::new(2, 8, 1e-4, 1e-4).unwrap();
    for seq in 0..4u64 {
        let mut rng = RngStream::new(7, seq);
        let mut net = BondedNetwork::new(NetworkParams::default()).unwrap();
        let (mut gap_ok, mut edges_ok, mut fifo_ok) = (true, true, true);
        let mut states = std::collections::HashMap::new();
        let mut last = std::collections::HashMap::new();
        let mut seen = 0;
        for _ in 0..10_000 {
            let miner = (rng.uniform() * 6.0) as u32;
            let now = net.now();
            let c = net.account(miner).map(|a| a.commitment()).unwrap_or(1.0);
            let r = match (rng.uniform() * 16.0) as u32 {
                0 => net.bond(miner, 1.0 + 99.0 * rng.uniform(), small, now),
                1 => net.divest(miner, now).map(|_| ()),
                2 => net.tick(now + 1.0 + 2e5 * rng.uniform()),
                3 => net.set_params(miner, if rng.uniform() < 0.5 { small } else { large }),
                _ => net.mine(
                    miner,
                    now + 1.0 + 3000.0 * rng.uniform(),
                    2.5 * rng.uniform() * c,
                    (0.2 + 2.8 * rng.uniform()) * c.max(1e-3),
                ),
            };
            match r {
                Ok(()) | Err(Error::ProtocolViolation(_)) => {}
                Err(e) => panic!("unexpected error {e}"),
            }
            gap_ok &= net.conservation_gap() == 0;
            for e in &net.events()[seen..] {
                match e {
                    ProtocolEvent::Bond { miner, .. } => {
                        states.entry(*miner).or_insert(BondState::Bootstrapping);
                    }
                    ProtocolEvent::Transition { miner, from, to } => {
                        edges_ok &= legal(*from, *to) && states.get(miner) == Some(from);
                        states.insert(*miner, *to);
                    }
                    ProtocolEvent::Reconcile {
                        miner, deposit_height, ..
                    } => {
                        fifo_ok &= last.insert(*miner, *deposit_height).unwrap_or(0) < *deposit_height;
                    }
                    _ => {}
                }
            }
            seen = net.events().len();
        }
        let count = |f: fn(&ProtocolEvent) -> bool| net.events().iter().filter(|e| f(e)).count();
        let reconciles = count(|e| matches!(e, ProtocolEvent::Reconcile { .. }));
        let slashes = count(|e| matches!(e, ProtocolEvent::Slash { .. }));
        let transitions = count(|e| matches!(e, ProtocolEvent::Transition { .. }));
        v.check(
            gap_ok && edges_ok && fifo_ok && reconciles > 0 && slashes > 0,
            format!(
                "sequence {seq}: 10^4 events, conservation {gap_ok}, legal transitions {edges_ok} ({transitions}), \
                 FIFO {fifo_ok} ({reconciles} reconciliations, {slashes} slashes)"
            ),
        );
    }
    v
}

type Criterion = (&'static str, fn() -> Verdict);

const CRITERIA: [Criterion; 10] = [
    ("refund_unit_suite", refund_unit_suite),
    ("pvalue_calibration", pvalue_calibration),
    ("abandonment_quantile", abandonment_quantile),
    ("bootstrap_detection_rates", bootstrap_detection_rates),
    ("type_i_error", type_i_error),
    ("long_range_month_anchor", long_range_month_anchor),
    ("bch_daa_properties", bch_daa_properties),
    ("rule_comparison", rule_comparison),
    ("cost_tolerance_ordering", cost_tolerance_ordering),
    ("protocol_soundness", protocol_soundness),
];

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if std::env::args().any(|a| a == "--list") {
        for (name, _) in CRITERIA {
            println!("{name}: test");
        }
        return;
    }
    let mut failed = 0;
    let mut ran = 0;
    for (name, f) in CRITERIA {
        if !filters.is_empty() && !filters.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        ran += 1;
        let started = std::time::Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Verdict {
            pass: false,
            details: vec!["MISS panicked".into()],
        });
        let secs = started.elapsed().as_secs_f64();
        println!("{} {name} ({secs:.1} s)", if verdict.pass { "PASS" } else { "FAIL" });
        for d in &verdict.details {
            println!("    {d}");
        }
        failed += usize::from(!verdict.pass);
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
