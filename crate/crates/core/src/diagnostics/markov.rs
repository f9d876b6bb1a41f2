//! A probe for hidden state in the two-dimensional example.
//!
//! On the event `Y_{t2} = 0` (after at least one jump) the current level
//! says nothing about the amplitude `V`, but the size of past jumps does. If
//! `Y` were Markov, the future increment `|Y_{t3} - Y_{t2}|` could not depend
//! on the past once `Y_{t2}` is fixed. The probe splits the stratum at the
//! median of the largest past jump and compares mean future increments.

use serde::Serialize;

use super::{mean_and_var, DiagnosticReport};
use crate::error::{invalid, Error, Result};
use crate::examples::Example2DSample;

/// `|Y_{t2}|` at or below this counts as zero.
pub const ZERO_LEVEL: f64 = 1e-9;
/// Past jumps at or below this are not jumps.
pub const JUMP_FLOOR: f64 = 1e-9;
/// Smallest half-stratum the probe will compare.
pub const MIN_HALF: usize = 10;
/// Detection needs the difference to exceed this many standard errors.
pub const DETECTION_SE: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkovProbe {
    pub stratum_size: usize,
    pub low_mean: f64,
    pub high_mean: f64,
    pub difference: f64,
    pub standard_error: f64,
    pub detected: bool,
    pub report: DiagnosticReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratifiedProbe {
    pub strata: Vec<Option<MarkovProbe>>,
    pub detections: usize,
    pub report: DiagnosticReport,
}

struct Features {
    past_jump: f64,
    level: f64,
    future: f64,
}

fn features(samples: &[&Example2DSample], t1: f64, t2: f64, t3: f64) -> Result<Vec<Features>> {
    if !(t1 < t2 && t2 < t3) || t1 < 0.0 {
        return Err(invalid(format!("need 0 <= t1 < t2 < t3, got {t1}, {t2}, {t3}")));
    }
    let first = samples.first().ok_or(Error::EmptySample)?;
    let grid = *first.y_path.grid();
    if t3 > grid.t_end() {
        return Err(Error::Horizon {
            t: t3,
            horizon: grid.t_end(),
        });
    }
    let k2 = grid.index_at(t2)?;
    let k3 = grid.index_at(t3)?;
    samples
        .iter()
        .map(|s| {
            if *s.y_path.grid() != grid {
                return Err(Error::GridMismatch);
            }
            let y = s.y_path.values();
            let past_jump = y[..=k2].windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
            Ok(Features {
                past_jump,
                level: y[k2],
                future: (y[k3] - y[k2]).abs(),
            })
        })
        .collect()
}

fn probe(features: &[Features]) -> Result<MarkovProbe> {
    let mut stratum: Vec<(usize, f64, f64)> = features
        .iter()
        .enumerate()
        .filter(|(_, f)| f.level.abs() <= ZERO_LEVEL && f.past_jump > JUMP_FLOOR)
        .map(|(i, f)| (i, f.past_jump, f.future))
        .collect();
    let half = stratum.len() / 2;
    if half < MIN_HALF {
        return Err(Error::InsufficientData(format!(
            "{} samples sit at zero after a jump; need {}",
            stratum.len(),
            2 * MIN_HALF
        )));
    }
    stratum.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let low: Vec<f64> = stratum[..half].iter().map(|r| r.2).collect();
    let high: Vec<f64> = stratum[stratum.len() - half..].iter().map(|r| r.2).collect();
    let (ml, vl) = mean_and_var(&low);
    let (mh, vh) = mean_and_var(&high);
    let diff = mh - ml;
    let se = (vl / low.len() as f64 + vh / high.len() as f64).sqrt();
    let report = DiagnosticReport::above(
        "markov_probe_mean_difference",
        diff,
        DETECTION_SE * se,
        0.0,
        stratum.len(),
    );
    Ok(MarkovProbe {
        stratum_size: stratum.len(),
        low_mean: ml,
        high_mean: mh,
        difference: diff,
        standard_error: se,
        detected: report.pass,
        report,
    })
}

/// Passes when non-Markov behaviour is detected. `t1` only fixes the
/// ordering of the three times; the past window is `[0, t2]`.
pub fn markov_probe(samples: &[Example2DSample], t1: f64, t2: f64, t3: f64) -> Result<MarkovProbe> {
    let refs: Vec<&Example2DSample> = samples.iter().collect();
    probe(&features(&refs, t1, t2, t3)?)
}

/// The probe run separately inside `n_strata` equal-count strata of the
/// amplitude `V`. Conditionally on `V` the process is Markov, so no stratum
/// should detect anything; the report passes when none does. Strata too
/// small for the probe are recorded as `None`.
pub fn markov_probe_stratified(
    samples: &[Example2DSample],
    t1: f64,
    t2: f64,
    t3: f64,
    n_strata: usize,
) -> Result<StratifiedProbe> {
    if n_strata == 0 {
        return Err(invalid("need at least one stratum"));
    }
    let mut order: Vec<(usize, f64)> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            s.v_value
                .map(|v| (i, v))
                .ok_or_else(|| invalid("stratifying needs the amplitude V of every sample"))
        })
        .collect::<Result<_>>()?;
    order.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let n = order.len();
    let mut strata = Vec::with_capacity(n_strata);
    let mut tested = 0usize;
    for q in 0..n_strata {
        let (lo, hi) = (q * n / n_strata, (q + 1) * n / n_strata);
        let members: Vec<&Example2DSample> = order[lo..hi].iter().map(|&(i, _)| &samples[i]).collect();
        if members.is_empty() {
            strata.push(None);
            continue;
        }
        match probe(&features(&members, t1, t2, t3)?) {
            Ok(p) => {
                tested += p.stratum_size;
                strata.push(Some(p));
            }
            Err(Error::InsufficientData(_)) => strata.push(None),
            Err(e) => return Err(e),
        }
    }
    let detections = strata.iter().flatten().filter(|p| p.detected).count();
    let report = DiagnosticReport {
        statistic_name: "markov_probe_stratified_detections".into(),
        value: detections as f64,
        ci_halfwidth: 0.0,
        threshold: 0.0,
        pass: detections == 0,
        sample_size: tested,
    };
    Ok(StratifiedProbe {
        strata,
        detections,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::{counterexample_2d_limit, counterexample_2d_limit_given};
    use crate::grid::make_uniform_grid;
    use crate::seed::{derive_path_seed, Seed};

    #[test]
    fn unit_amplitude_is_not_detected() {
        let g = make_uniform_grid(2.0, 200).unwrap();
        let samples: Vec<_> = (0..20_000)
            .map(|i| counterexample_2d_limit_given(&g, derive_path_seed(Seed(1), i), 1.0, 0.0).unwrap())
            .collect();
        let p = markov_probe(&samples, 0.5, 1.0, 2.0).unwrap();
        assert!(!p.detected, "{p:?}");
    }

    #[test]
    fn random_amplitude_is_detected() {
        let g = make_uniform_grid(2.0, 200).unwrap();
        let samples: Vec<_> = (0..20_000)
            .map(|i| counterexample_2d_limit(&g, derive_path_seed(Seed(2), i)).unwrap())
            .collect();
        let p = markov_probe(&samples, 0.5, 1.0, 2.0).unwrap();
        assert!(p.detected, "{p:?}");
        assert!(p.high_mean > p.low_mean);
    }

    #[test]
    fn time_order_and_data_size_are_checked() {
        let g = make_uniform_grid(2.0, 20).unwrap();
        let samples: Vec<_> = (0..30)
            .map(|i| counterexample_2d_limit(&g, derive_path_seed(Seed(3), i)).unwrap())
            .collect();
        assert!(markov_probe(&samples, 1.0, 0.5, 2.0).is_err());
        assert!(matches!(
            markov_probe(&samples, 0.5, 1.0, 3.0),
            Err(Error::Horizon { .. })
        ));
        assert!(matches!(
            markov_probe(&samples, 0.5, 1.0, 2.0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn stratifying_needs_amplitudes() {
        let g = make_uniform_grid(2.0, 20).unwrap();
        let mut s = counterexample_2d_limit(&g, Seed(4)).unwrap();
        s.v_value = None;
        assert!(markov_probe_stratified(&[s], 0.5, 1.0, 2.0, 4).is_err());
    }
}
