//! Statistics computed from sampled paths, each with a Monte Carlo
//! confidence interval and a verdict.
//!
//! Confidence intervals are two-sided 99% normal intervals unless a function
//! says otherwise. Reductions over paths run in parallel but are summed in
//! index order, so every number here is independent of the thread count.

mod coupling;
mod distance;
mod inequality;
mod lattice;
mod lipschitz;
mod markov;
mod support;

pub use coupling::{
    almost_continuity_rate, almost_continuity_scan, simultaneous_jump_rate, CouplingEvent, CouplingEventLog,
    CrossingDirection, CrossingKind,
};
pub use distance::{
    energy_statistic, energy_test, fdd_two_sample, ks_distance, marginal_rows, EnergyTest, DEFAULT_PERMUTATIONS,
};
pub use inequality::{
    crossing_inequality_check, crossing_inequality_check_weighted, InequalityParams, InequalityReport,
};
pub use lattice::{lattice_jumps, LatticeJumps};
pub use lipschitz::{conditional_lipschitz_estimate, LipschitzConfig, LipschitzEstimate};
pub use markov::{markov_probe, markov_probe_stratified, MarkovProbe, StratifiedProbe};
pub use support::{largest_gap, support_connectedness, SupportConfig};

use serde::Serialize;

/// Two-sided 99% standard normal quantile.
pub const Z99: f64 = 2.575_829_303_548_900_4;

/// A statistic with its interval and verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticReport {
    pub statistic_name: String,
    pub value: f64,
    pub ci_halfwidth: f64,
    pub threshold: f64,
    pub pass: bool,
    pub sample_size: usize,
}

impl DiagnosticReport {
    /// Passes when `value + ci_halfwidth < threshold`.
    pub fn below(name: impl Into<String>, value: f64, ci_halfwidth: f64, threshold: f64, sample_size: usize) -> Self {
        Self {
            statistic_name: name.into(),
            value,
            ci_halfwidth,
            threshold,
            pass: value + ci_halfwidth < threshold,
            sample_size,
        }
    }

    /// Passes when `value - ci_halfwidth > threshold`.
    pub fn above(name: impl Into<String>, value: f64, ci_halfwidth: f64, threshold: f64, sample_size: usize) -> Self {
        Self {
            statistic_name: name.into(),
            value,
            ci_halfwidth,
            threshold,
            pass: value - ci_halfwidth > threshold,
            sample_size,
        }
    }
}

/// Normal-approximation 99% half-width of a binomial proportion.
pub fn binomial_halfwidth(hits: usize, n: usize) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    let p = hits as f64 / n as f64;
    Z99 * (p * (1.0 - p) / n as f64).sqrt()
}

fn mean_and_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}
