//! Binned estimate of the Lipschitz constant of `x -> E[g(X_t) | X_s = x]`
//! for the exponentially rescaled process `e^{-K u} X_u`.

use serde::Serialize;

use super::DiagnosticReport;
use crate::error::{invalid, Error, Result};
use crate::grid::PathEnsemble;
use crate::parallel::map_indexed;
use crate::seed::{PathRng, Seed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzConfig {
    /// Bins with fewer samples are ignored.
    pub min_occupancy: usize,
    pub bootstrap_reps: usize,
    /// Seed of the bootstrap resampling.
    pub seed: Seed,
}

impl Default for LipschitzConfig {
    fn default() -> Self {
        Self {
            min_occupancy: 50,
            bootstrap_reps: 200,
            seed: Seed(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzEstimate {
    /// Largest absolute slope between adjacent qualifying bins.
    pub l_hat: f64,
    /// Half the width of the central 99% bootstrap interval of `l_hat`.
    pub ci_halfwidth: f64,
    pub qualifying_bins: usize,
    pub report: DiagnosticReport,
}

/// `g` should be bounded with `|g'| <= 1`; the estimate is then compared
/// against 1. The bias of a piecewise-constant regression of a 1-Lipschitz
/// function is covered by adding `bin_width` to the threshold.
#[allow(clippy::too_many_arguments)]
pub fn conditional_lipschitz_estimate(
    ens: &PathEnsemble,
    s: f64,
    t: f64,
    g: impl Fn(f64) -> f64,
    bin_width: f64,
    k: f64,
    cfg: &LipschitzConfig,
) -> Result<LipschitzEstimate> {
    if !(s < t) {
        return Err(invalid(format!("need s < t, got {s}, {t}")));
    }
    if !(bin_width > 0.0) || !bin_width.is_finite() {
        return Err(invalid("bin width must be positive"));
    }
    if !k.is_finite() {
        return Err(invalid("K must be finite"));
    }
    if cfg.min_occupancy == 0 {
        return Err(invalid("minimum occupancy must be positive"));
    }
    let xs = ens.marginal(s)?;
    let xt = ens.marginal(t)?;
    let (scale_s, scale_t) = ((-k * s).exp(), (-k * t).exp());

    let keys: Vec<i64> = xs.iter().map(|x| (x * scale_s / bin_width).floor() as i64).collect();
    let lo = *keys.iter().min().expect("ensembles are nonempty");
    let hi = *keys.iter().max().expect("ensembles are nonempty");
    let n_bins = usize::try_from(hi - lo + 1).map_err(|_| invalid("bin range overflow"))?;
    if n_bins > 10_000_000 {
        return Err(invalid("too many bins for the sample range"));
    }
    let bins: Vec<usize> = keys.iter().map(|&k| (k - lo) as usize).collect();
    let targets: Vec<f64> = xt.iter().map(|x| g(x * scale_t)).collect();
    if targets.iter().any(|v| !v.is_finite()) {
        return Err(invalid("g must be finite on the sample"));
    }

    let slope = |counts: &[usize], sums: &[f64]| -> (Option<f64>, usize) {
        let qualifying = counts.iter().filter(|&&c| c >= cfg.min_occupancy).count();
        let mut best: Option<f64> = None;
        for b in 0..n_bins.saturating_sub(1) {
            if counts[b] >= cfg.min_occupancy && counts[b + 1] >= cfg.min_occupancy {
                let f0 = sums[b] / counts[b] as f64;
                let f1 = sums[b + 1] / counts[b + 1] as f64;
                let sl = (f1 - f0).abs() / bin_width;
                best = Some(best.map_or(sl, |m: f64| m.max(sl)));
            }
        }
        (best, qualifying)
    };
    let tally = |pick: &mut dyn FnMut() -> usize| {
        let mut counts = vec![0usize; n_bins];
        let mut sums = vec![0.0f64; n_bins];
        for _ in 0..bins.len() {
            let i = pick();
            counts[bins[i]] += 1;
            sums[bins[i]] += targets[i];
        }
        (counts, sums)
    };

    let mut next = 0usize;
    let (counts, sums) = tally(&mut || {
        next += 1;
        next - 1
    });
    let (l_hat, qualifying) = slope(&counts, &sums);
    let l_hat = match l_hat {
        Some(l) if qualifying >= 2 => l,
        _ => {
            return Err(Error::InsufficientData(format!(
                "need two adjacent bins with at least {} samples",
                cfg.min_occupancy
            )))
        }
    };

    let n = bins.len();
    let mut boot: Vec<f64> = map_indexed(cfg.bootstrap_reps, |r| {
        let mut rng = PathRng::new(cfg.seed.child(r as u64));
        let (c, s) = tally(&mut || rng.index_below(n));
        slope(&c, &s).0.unwrap_or(0.0)
    });
    boot.sort_by(f64::total_cmp);
    let ci = if boot.is_empty() {
        0.0
    } else {
        0.5 * (quantile(&boot, 0.995) - quantile(&boot, 0.005))
    };
    let threshold = 1.0 + bin_width;
    Ok(LipschitzEstimate {
        l_hat,
        ci_halfwidth: ci,
        qualifying_bins: qualifying,
        report: DiagnosticReport {
            statistic_name: "lipschitz_constant".into(),
            value: l_hat,
            ci_halfwidth: ci,
            threshold,
            pass: l_hat <= threshold + ci,
            sample_size: n,
        },
    })
}

/// Nearest-rank quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}
