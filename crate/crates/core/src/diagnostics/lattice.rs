//! Jumps between integer levels of a path that lives near the integers.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::grid::Path;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeJumps {
    /// Times at which the integer label changed.
    pub jump_times: Vec<f64>,
    /// Unit jumps counted (a label change by `k` counts `|k|`).
    pub jumps: usize,
    /// Observation time.
    pub exposure: f64,
}

/// Tracks the nearest integer with hysteresis: the label switches to `k`
/// only once the path comes within `band` of `k`, so wandering between
/// lattice points is not counted as a jump.
pub fn lattice_jumps(path: &Path, band: f64) -> Result<LatticeJumps> {
    if !(band > 0.0 && band < 0.5) {
        return Err(invalid(format!("band must lie in (0, 1/2), got {band}")));
    }
    let values = path.values();
    let mut label = values[0].round();
    let mut jump_times = Vec::new();
    let mut jumps = 0usize;
    for (k, &x) in values.iter().enumerate().skip(1) {
        let near = x.round();
        if near != label && (x - near).abs() < band {
            jumps += (near - label).abs() as usize;
            jump_times.push(path.grid().node(k));
            label = near;
        }
    }
    Ok(LatticeJumps {
        jump_times,
        jumps,
        exposure: path.grid().t_end(),
    })
}
