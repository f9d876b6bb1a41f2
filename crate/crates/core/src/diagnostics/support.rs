//! Gaps in the histogram of a one-time marginal.

use serde::Serialize;

use super::DiagnosticReport;
use crate::error::{invalid, Error, Result};
use crate::grid::PathEnsemble;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupportConfig {
    /// Mass cut from each tail before binning. A finite sample from an
    /// unbounded support thins out in the tails and would show spurious gaps
    /// there; the interior is what connectedness is about.
    pub trim: f64,
}

impl Default for SupportConfig {
    fn default() -> Self {
        Self { trim: 0.001 }
    }
}

/// Longest run of empty bins strictly between occupied bins, in bins.
pub fn largest_gap(sample: &[f64], resolution: f64, trim: f64) -> Result<usize> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(resolution > 0.0) || !resolution.is_finite() {
        return Err(invalid("resolution must be positive"));
    }
    if !(0.0..0.5).contains(&trim) {
        return Err(invalid("trim must lie in [0, 1/2)"));
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(invalid("sample must be finite"));
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let cut = (trim * xs.len() as f64).floor() as usize;
    let kept = &xs[cut..xs.len() - cut];
    let mut gap = 0usize;
    let mut prev = (kept[0] / resolution).floor();
    for &x in &kept[1..] {
        let bin = (x / resolution).floor();
        if bin > prev + 1.0 {
            gap = gap.max((bin - prev - 1.0) as usize);
        }
        prev = bin;
    }
    Ok(gap)
}

/// Passes when the trimmed marginal at `t` has no interior gap longer than
/// one bin of width `resolution`.
pub fn support_connectedness(
    ens: &PathEnsemble,
    t: f64,
    resolution: f64,
    cfg: &SupportConfig,
) -> Result<DiagnosticReport> {
    let xs = ens.marginal(t)?;
    let gap = largest_gap(&xs, resolution, cfg.trim)?;
    Ok(DiagnosticReport {
        statistic_name: "largest_support_gap_bins".into(),
        value: gap as f64,
        ci_halfwidth: 0.0,
        threshold: 1.0,
        pass: gap <= 1,
        sample_size: xs.len(),
    })
}
