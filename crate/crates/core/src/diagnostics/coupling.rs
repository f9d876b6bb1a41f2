//! Crossings of two paths, and simultaneous jumps.
//!
//! With `d = Y - Z` on the grid, every sign change of `d` between a strictly
//! negative node and a strictly positive node (or the reverse) is a crossing.
//! Its endpoints are the last node of the run before the change and the
//! first node of the run after it; zeros in between are kept inside the
//! crossing. The crossing touched when `|d| <= delta` somewhere on the closed
//! index range, endpoints included.

use serde::Serialize;

use super::{binomial_halfwidth, DiagnosticReport};
use crate::error::{invalid, Error, Result};
use crate::grid::Path;
use crate::parallel::try_map_indexed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingKind {
    CrossedWithTouch,
    CrossedWithoutTouch,
}

/// `YOverZ`: `Y < Z` at `s_index` and `Y > Z` at `t_index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingDirection {
    YOverZ,
    ZOverY,
}

impl CrossingDirection {
    pub fn swapped(self) -> Self {
        match self {
            Self::YOverZ => Self::ZOverY,
            Self::ZOverY => Self::YOverZ,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CouplingEvent {
    pub s_index: usize,
    pub t_index: usize,
    pub kind: CrossingKind,
    pub direction: CrossingDirection,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingEventLog {
    pub events: Vec<CouplingEvent>,
    pub delta: f64,
    pub pair_count: usize,
}

impl CouplingEventLog {
    /// Whether `Y` crossed `Z` from below without touching.
    pub fn has_violation(&self) -> bool {
        self.events
            .iter()
            .any(|e| e.kind == CrossingKind::CrossedWithoutTouch && e.direction == CrossingDirection::YOverZ)
    }
}

pub fn almost_continuity_scan(y: &Path, z: &Path, delta: f64) -> Result<CouplingEventLog> {
    if y.grid() != z.grid() {
        return Err(Error::GridMismatch);
    }
    if !(delta > 0.0) {
        return Err(invalid(format!("touch tolerance must be positive, got {delta}")));
    }
    let d: Vec<f64> = y.values().iter().zip(z.values()).map(|(a, b)| a - b).collect();
    let mut events = Vec::new();
    // Last nonzero node seen, and the smallest |d| since it (inclusive).
    let mut last: Option<usize> = None;
    let mut min_abs = f64::INFINITY;
    for (k, &dk) in d.iter().enumerate() {
        min_abs = min_abs.min(dk.abs());
        if dk == 0.0 {
            continue;
        }
        if let Some(j) = last {
            if (d[j] < 0.0) != (dk < 0.0) {
                events.push(CouplingEvent {
                    s_index: j,
                    t_index: k,
                    kind: if min_abs > delta {
                        CrossingKind::CrossedWithoutTouch
                    } else {
                        CrossingKind::CrossedWithTouch
                    },
                    direction: if dk > 0.0 {
                        CrossingDirection::YOverZ
                    } else {
                        CrossingDirection::ZOverY
                    },
                });
            }
        }
        last = Some(k);
        min_abs = dk.abs();
    }
    Ok(CouplingEventLog {
        events,
        delta,
        pair_count: 1,
    })
}

/// Fraction of pairs in which `Y` crosses `Z` from below without touching,
/// the event forbidden by almost-continuity. By exchangeability of the pair
/// the reverse direction has the same law and is not added in.
///
/// The report passes when the rate plus its 99% half-width is below
/// `threshold`.
pub fn almost_continuity_rate<G>(gen: G, n_pairs: usize, delta: f64, threshold: f64) -> Result<DiagnosticReport>
where
    G: Fn(usize) -> Result<(Path, Path)> + Sync + Send,
{
    if n_pairs == 0 {
        return Err(invalid("need at least one pair"));
    }
    let hits = try_map_indexed(n_pairs, |i| {
        let (y, z) = gen(i)?;
        Ok(almost_continuity_scan(&y, &z, delta)?.has_violation())
    })?;
    let count = hits.iter().filter(|&&h| h).count();
    Ok(DiagnosticReport::below(
        "almost_continuity_violation_rate",
        count as f64 / n_pairs as f64,
        binomial_halfwidth(count, n_pairs),
        threshold,
        n_pairs,
    ))
}

fn has_simultaneous_jump(y: &Path, z: &Path, jump_threshold: f64) -> bool {
    let (y, z) = (y.values(), z.values());
    (1..y.len()).any(|k| (y[k] - y[k - 1]).abs() > jump_threshold && (z[k] - z[k - 1]).abs() > jump_threshold)
}

/// Fraction of pairs with a grid step where both paths jump by more than
/// `jump_threshold`. Passes when the rate plus its half-width is below
/// `rate_threshold`.
pub fn simultaneous_jump_rate<G>(
    gen: G,
    n_pairs: usize,
    jump_threshold: f64,
    rate_threshold: f64,
) -> Result<DiagnosticReport>
where
    G: Fn(usize) -> Result<(Path, Path)> + Sync + Send,
{
    if n_pairs == 0 {
        return Err(invalid("need at least one pair"));
    }
    if !(jump_threshold > 0.0) {
        return Err(invalid("jump threshold must be positive"));
    }
    let hits = try_map_indexed(n_pairs, |i| {
        let (y, z) = gen(i)?;
        if y.grid() != z.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(has_simultaneous_jump(&y, &z, jump_threshold))
    })?;
    let count = hits.iter().filter(|&&h| h).count();
    Ok(DiagnosticReport::below(
        "simultaneous_jump_rate",
        count as f64 / n_pairs as f64,
        binomial_halfwidth(count, n_pairs),
        rate_threshold,
        n_pairs,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_uniform_grid;
    use proptest::prelude::*;

    fn pair(d: &[f64]) -> (Path, Path) {
        let g = make_uniform_grid(1.0, d.len() - 1).unwrap();
        (Path::new(g, d.to_vec()).unwrap(), Path::constant(g, 0.0))
    }

    #[test]
    fn no_sign_change_no_events() {
        let g = make_uniform_grid(1.0, 10).unwrap();
        let log = almost_continuity_scan(&Path::constant(g, 0.0), &Path::constant(g, 1.0), 0.01).unwrap();
        assert!(log.events.is_empty());
    }

    #[test]
    fn dip_inside_tolerance_is_a_touch() {
        let (y, z) = pair(&[-1.0, -0.001, 1.0]);
        let log = almost_continuity_scan(&y, &z, 0.01).unwrap();
        assert_eq!(log.events.len(), 1);
        assert_eq!(log.events[0].kind, CrossingKind::CrossedWithTouch);
        assert_eq!(log.events[0].direction, CrossingDirection::YOverZ);
    }

    #[test]
    fn jump_past_zero_is_a_clean_crossing() {
        let (y, z) = pair(&[-1.0, 1.0]);
        let log = almost_continuity_scan(&y, &z, 0.01).unwrap();
        assert_eq!(
            log.events,
            vec![CouplingEvent {
                s_index: 0,
                t_index: 1,
                kind: CrossingKind::CrossedWithoutTouch,
                direction: CrossingDirection::YOverZ
            }]
        );
        assert!(log.has_violation());
    }

    #[test]
    fn exact_zero_in_between_is_a_touch() {
        let (y, z) = pair(&[-1.0, 0.0, 0.0, 1.0, -1.0]);
        let log = almost_continuity_scan(&y, &z, 0.01).unwrap();
        assert_eq!(log.events.len(), 2);
        assert_eq!((log.events[0].s_index, log.events[0].t_index), (0, 3));
        assert_eq!(log.events[0].kind, CrossingKind::CrossedWithTouch);
        assert_eq!(log.events[1].kind, CrossingKind::CrossedWithoutTouch);
        assert_eq!(log.events[1].direction, CrossingDirection::ZOverY);
        assert!(!log.has_violation());
    }

    #[test]
    fn rejects_mismatch_and_bad_delta() {
        let g1 = make_uniform_grid(1.0, 2).unwrap();
        let g2 = make_uniform_grid(1.0, 3).unwrap();
        assert_eq!(
            almost_continuity_scan(&Path::constant(g1, 0.0), &Path::constant(g2, 0.0), 0.1).unwrap_err(),
            Error::GridMismatch
        );
        assert!(almost_continuity_scan(&Path::constant(g1, 0.0), &Path::constant(g1, 0.0), 0.0).is_err());
    }

    #[test]
    fn value_shifted_copy_jumps_together() {
        let g = make_uniform_grid(1.0, 4).unwrap();
        let y = Path::new(g, vec![0.0, 0.0, 1.0, 1.0, 0.0]).unwrap();
        let z = y.map(|v| v + 3.0).unwrap();
        let r = simultaneous_jump_rate(|_| Ok((y.clone(), z.clone())), 10, 0.5, 0.01).unwrap();
        assert_eq!(r.value, 1.0);
        assert!(!r.pass);
    }

    proptest! {
        #[test]
        fn swapping_the_pair_mirrors_the_log(d in prop::collection::vec(-3.0f64..3.0, 2..60), delta in 0.01f64..1.0) {
            let (y, z) = pair(&d);
            let fwd = almost_continuity_scan(&y, &z, delta).unwrap();
            let back = almost_continuity_scan(&z, &y, delta).unwrap();
            prop_assert_eq!(fwd.events.len(), back.events.len());
            for (a, b) in fwd.events.iter().zip(&back.events) {
                prop_assert_eq!((a.s_index, a.t_index, a.kind), (b.s_index, b.t_index, b.kind));
                prop_assert_eq!(a.direction, b.direction.swapped());
                prop_assert!(a.s_index < a.t_index);
            }
        }
    }
}
