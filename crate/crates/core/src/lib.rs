//! Bonded Mining.
//!
//! Miners post bond against a hash-rate commitment, the network derives its
//! difficulty directly from the sum of commitments, and a pair of
//! Kolmogorov–Smirnov tests over each miner's own inter-block times decides
//! whether the reported hash rates were truthful.
//!
//! Module map:
//!
//! - [`stats`]: exponential utilities, the one-sample KS statistic and its
//!   p-value, seeded random streams.
//! - [`validity`]: the X-statistic transform, the `KS` and `Valid` tests and
//!   the window/threshold table.
//! - [`protocol`]: bond accounts, reconciliation, abandonment and the
//!   commitment constraints.
//! - [`daa`]: the commitment-driven difficulty rule and the cw-144 baseline.
//! - [`sim`]: attack-detection trials and the expected-block-time simulation.

// NaN must fail range checks, so `!(x > 0.0)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod daa;
pub mod error;
pub mod protocol;
pub mod sim;
pub mod stats;
pub mod validity;

pub use error::{Error, Result};

/// Seconds in one day.
pub const DAY: f64 = 86_400.0;
/// Seconds in one week.
pub const WEEK: f64 = 7.0 * DAY;
/// Seconds in a 365-day year.
pub const YEAR: f64 = 365.0 * DAY;
