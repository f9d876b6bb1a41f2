//! The example sequences and their limits.
//!
//! * Reflecting Brownian motion: `dX^n = sigma_n(X^n) dW` with
//!   `sigma_n(x) = max(1, -nx)`, solved by time change with
//!   `phi = sigma_n^-2`. The limit clock is the occupation time of `[0, inf)`.
//! * Symmetric Poisson: `sigma_n` from [`sigma_poisson`]; the limit is a
//!   symmetric Poisson process of rate 1 (unit jumps, either sign).
//! * A two-dimensional pair `(Y, Z) = (f(nU) X^n, U)` with `f` the sawtooth,
//!   whose limit `(V X, U)` has `V ~ Uniform[0, 1/2]` independent of the rest.
//! * A planted process that violates almost-continuity, for calibration.
//!
//! Pre-limit constructions use the streaming time change with an
//! activity-distance hint, so the long excursions where the clock barely
//! moves are crossed in a few large Brownian steps.

use std::ops::ControlFlow;

use crate::error::{invalid, Result};
use crate::grid::{Path, PathEnsemble, TimeGrid};
use crate::parallel::try_map_indexed;
use crate::seed::{derive_path_seed, PathRng, Seed};
use crate::timechange::{
    poisson_clock_rate, run_clock, sample_brownian, sawtooth, time_change_streaming, time_change_streaming_observed,
    ClockSpec, TimeChangeConfig,
};

/// `sigma_n(x) = max(1, -n x)`.
pub fn sigma_reflecting(n: u32, x: f64) -> f64 {
    (-(n as f64) * x).max(1.0)
}

/// Clock of the pre-limit reflecting example, `phi = sigma_n^-2`.
pub fn reflecting_clock(n: u32) -> Result<ClockSpec<f64>> {
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    let inv_n = 1.0 / n as f64;
    Ok(ClockSpec::new(format!("reflecting_n{n}"), move |x: f64| {
        let s = sigma_reflecting(n, x);
        1.0 / (s * s)
    })
    .with_activity_distance(move |x: f64| (-x - inv_n).max(0.0)))
}

/// Clock of the pre-limit Poisson example, `phi = sigma_poisson(n, .)^-2`.
pub fn poisson_clock(n: u32) -> Result<ClockSpec<f64>> {
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    Ok(
        ClockSpec::new(format!("poisson_n{n}"), move |x: f64| poisson_clock_rate(n, x))
            .with_activity_distance(sawtooth),
    )
}

pub fn refl_bm_prelimit(n: u32, out_grid: &TimeGrid, seed: Seed) -> Result<Path> {
    refl_bm_prelimit_with(n, out_grid, seed, &TimeChangeConfig::default())
}

pub fn refl_bm_prelimit_with(n: u32, out_grid: &TimeGrid, seed: Seed, cfg: &TimeChangeConfig) -> Result<Path> {
    started_at_zero(&reflecting_clock(n)?, out_grid, seed, cfg)
}

/// Time change with `X_0 = 0` imposed. On a grid the first node where the
/// clock is positive is one Brownian step in, while in continuous time
/// `T_0 = 0` for these clocks (`phi(0) > 0`).
fn started_at_zero(clock: &ClockSpec<f64>, out_grid: &TimeGrid, seed: Seed, cfg: &TimeChangeConfig) -> Result<Path> {
    let mut values = time_change_streaming(clock, out_grid, seed, cfg)?.path.into_values();
    values[0] = 0.0;
    Path::new(*out_grid, values)
}

pub fn refl_bm_limit(out_grid: &TimeGrid, seed: Seed) -> Result<Path> {
    refl_bm_limit_with(out_grid, seed, &TimeChangeConfig::default())
}

pub fn refl_bm_limit_with(out_grid: &TimeGrid, seed: Seed, cfg: &TimeChangeConfig) -> Result<Path> {
    started_at_zero(&ClockSpec::positive_occupation(), out_grid, seed, cfg)
}

/// Pre-limit reflecting path with the running minimum of the continuous
/// trajectory over `[0, t_end]`. The clock is strictly increasing, so this is
/// the minimum of `B` up to the time the clock passes `t_end`; grid nodes
/// alone miss the deep excursions, where the clock barely moves.
pub fn refl_bm_prelimit_min(n: u32, out_grid: &TimeGrid, seed: Seed, cfg: &TimeChangeConfig) -> Result<(Path, f64)> {
    visited_min(&reflecting_clock(n)?, out_grid, seed, cfg)
}

/// Limit path with the running minimum over the Brownian positions the clock
/// is running at.
pub fn refl_bm_limit_min(out_grid: &TimeGrid, seed: Seed, cfg: &TimeChangeConfig) -> Result<(Path, f64)> {
    visited_min(&ClockSpec::positive_occupation(), out_grid, seed, cfg)
}

/// Minimum of `B` after every Brownian step that advanced the clock from a
/// value at most `t_end`, with `X_0 = 0` imposed as in [`started_at_zero`].
fn visited_min(clock: &ClockSpec<f64>, out_grid: &TimeGrid, seed: Seed, cfg: &TimeChangeConfig) -> Result<(Path, f64)> {
    let horizon = out_grid.t_end();
    let mut prev = 0.0f64;
    let mut low = 0.0f64;
    let tc = time_change_streaming_observed(clock, out_grid, seed, cfg, |a, b| {
        if a > prev && prev <= horizon {
            low = low.min(b);
        }
        prev = a;
    })?;
    let mut values = tc.path.into_values();
    values[0] = 0.0;
    Ok((Path::new(*out_grid, values)?, low))
}

/// `|B|` on the grid: the reflecting Brownian motion law, sampled directly.
pub fn abs_brownian(out_grid: &TimeGrid, seed: Seed) -> Path {
    sample_brownian(out_grid, seed)
        .map(f64::abs)
        .expect("absolute values of a finite path are finite")
}

pub fn poisson_prelimit(n: u32, out_grid: &TimeGrid, seed: Seed) -> Result<Path> {
    poisson_prelimit_with(n, out_grid, seed, &TimeChangeConfig::default())
}

/// Without an explicit Brownian step the step is capped at `1 / (32 n)`, so
/// that `sqrt(h)` stays below a quarter of the width `1 / sqrt(2n)` of the
/// bumps of `phi` around the integers.
pub fn poisson_prelimit_with(n: u32, out_grid: &TimeGrid, seed: Seed, cfg: &TimeChangeConfig) -> Result<Path> {
    let clock = poisson_clock(n)?;
    let mut cfg = *cfg;
    if cfg.b_step.is_none() {
        cfg.b_step = Some(poisson_step(n, out_grid));
    }
    started_at_zero(&clock, out_grid, seed, &cfg)
}

/// Pre-limit Poisson path together with its jump clock times: the values of
/// the clock `A` at which `B` reaches an integer next to the last one
/// reached. Starting from an integer, the clock gains one unit on average
/// before `B` hits a neighbour, for every `n`.
pub fn poisson_prelimit_jumps(
    n: u32,
    out_grid: &TimeGrid,
    seed: Seed,
    cfg: &TimeChangeConfig,
) -> Result<(Path, Vec<f64>)> {
    let clock = poisson_clock(n)?;
    let mut cfg = *cfg;
    if cfg.b_step.is_none() {
        cfg.b_step = Some(poisson_step(n, out_grid));
    }
    let horizon = out_grid.t_end();
    let mut hits = LevelHits::default();
    let tc = time_change_streaming_observed(&clock, out_grid, seed, &cfg, |a, b| {
        if a <= horizon {
            hits.observe(a, b);
        }
    })?;
    let mut values = tc.path.into_values();
    values[0] = 0.0;
    Ok((Path::new(*out_grid, values)?, hits.times))
}

/// The first `count` inter-jump clock times of the pre-limit Poisson
/// example, simulated until the last of them is complete. Without an
/// explicit Brownian step the step is `1 / (32 n)`.
pub fn poisson_prelimit_gaps(n: u32, count: usize, seed: Seed, cfg: &TimeChangeConfig) -> Result<Vec<f64>> {
    let clock = poisson_clock(n)?;
    let mut cfg = *cfg;
    if cfg.b_step.is_none() {
        cfg.b_step = Some(1.0 / (32.0 * n as f64));
    }
    let mut hits = LevelHits::default();
    // Budget for a clock of 64 units per gap; the clock gains one unit per
    // gap on average.
    run_clock(&clock, 64.0 * count.max(1) as f64, seed, &cfg, |a, b| {
        hits.observe(a, b);
        if hits.times.len() >= count {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    let mut prev = 0.0;
    Ok(hits.times[..count]
        .iter()
        .map(|&t| {
            let gap = t - prev;
            prev = t;
            gap
        })
        .collect())
}

/// Clock values at which `B` reaches an integer next to the last one
/// reached, one entry per unit moved.
#[derive(Default)]
struct LevelHits {
    level: f64,
    times: Vec<f64>,
}

impl LevelHits {
    fn observe(&mut self, a: f64, b: f64) {
        if (b - self.level).abs() >= 1.0 {
            let next = if b > self.level { b.floor() } else { b.ceil() };
            for _ in 0..(next - self.level).abs() as usize {
                self.times.push(a);
            }
            self.level = next;
        }
    }
}

/// Default Brownian step of [`poisson_prelimit`].
pub fn poisson_step(n: u32, out_grid: &TimeGrid) -> f64 {
    out_grid.step().min(1.0 / (32.0 * n.max(1) as f64))
}

/// Event times in `(0, horizon]` and their `+1`/`-1` marks.
pub fn symmetric_poisson_events(rate: f64, horizon: f64, rng: &mut PathRng) -> Vec<(f64, f64)> {
    let mut events = Vec::new();
    let mut t = rng.exponential(rate);
    while t <= horizon {
        events.push((t, rng.sign()));
        t += rng.exponential(rate);
    }
    events
}

/// Exact symmetric Poisson process rendered cadlag on `out_grid`.
pub fn symmetric_poisson(rate: f64, out_grid: &TimeGrid, seed: Seed) -> Result<Path> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(invalid(format!("rate must be positive, got {rate}")));
    }
    let mut rng = PathRng::new(seed);
    let events = symmetric_poisson_events(rate, out_grid.t_end(), &mut rng);
    Ok(render_jumps(out_grid, &events))
}

/// Step function starting at zero with the given `(time, jump)` list.
pub fn render_jumps(out_grid: &TimeGrid, events: &[(f64, f64)]) -> Path {
    let mut values = Vec::with_capacity(out_grid.len());
    let mut x = 0.0;
    let mut e = 0;
    for t in out_grid.nodes() {
        while e < events.len() && events[e].0 <= t {
            x += events[e].1;
            e += 1;
        }
        values.push(x);
    }
    Path::new(*out_grid, values).expect("jump sums are finite")
}

/// One draw of the two-dimensional example. `Z` is constant in time and
/// equal to `u_value`.
#[derive(Debug, Clone, PartialEq)]
pub struct Example2DSample {
    pub y_path: Path,
    pub u_value: f64,
    /// Amplitude `V` of the limit construction; `None` for the pre-limit one.
    pub v_value: Option<f64>,
    /// Factor multiplying the underlying one-dimensional path: `f(nU)` or `V`.
    pub amplitude: f64,
}

impl Example2DSample {
    pub fn z_path(&self) -> Path {
        Path::constant(*self.y_path.grid(), self.u_value)
    }
}

fn scaled(path: &Path, c: f64) -> Path {
    path.map(|x| c * x).expect("scaled path stays finite")
}

pub fn counterexample_2d_prelimit(n: u32, out_grid: &TimeGrid, seed: Seed) -> Result<Example2DSample> {
    counterexample_2d_prelimit_with(n, out_grid, seed, &TimeChangeConfig::default())
}

pub fn counterexample_2d_prelimit_with(
    n: u32,
    out_grid: &TimeGrid,
    seed: Seed,
    cfg: &TimeChangeConfig,
) -> Result<Example2DSample> {
    let u = PathRng::new(seed).standard_normal();
    let amplitude = sawtooth(n as f64 * u);
    let x = poisson_prelimit_with(n, out_grid, seed.child(0), cfg)?;
    Ok(Example2DSample {
        y_path: scaled(&x, amplitude),
        u_value: u,
        v_value: None,
        amplitude,
    })
}

pub fn counterexample_2d_limit(out_grid: &TimeGrid, seed: Seed) -> Result<Example2DSample> {
    let mut rng = PathRng::new(seed);
    let u = rng.standard_normal();
    let v = 0.5 * rng.uniform();
    counterexample_2d_limit_given(out_grid, seed, v, u)
}

/// Limit construction with `V` and `U` fixed; `X` is drawn from `seed`.
pub fn counterexample_2d_limit_given(out_grid: &TimeGrid, seed: Seed, v: f64, u: f64) -> Result<Example2DSample> {
    let x = symmetric_poisson(1.0, out_grid, seed.child(0))?;
    Ok(Example2DSample {
        y_path: scaled(&x, v),
        u_value: u,
        v_value: Some(v),
        amplitude: v,
    })
}

/// `X_t = U` before time 1 and `U + D` from time 1 on, with `U ~ Uniform(0,1)`
/// and `D = +2` or `-2`.
pub fn planted_nonac_process(out_grid: &TimeGrid, seed: Seed) -> Result<Path> {
    if !(out_grid.t_end() > 1.0) {
        return Err(invalid("planted process needs a horizon beyond 1"));
    }
    let mut rng = PathRng::new(seed);
    let u = rng.uniform_open();
    let d = 2.0 * rng.sign();
    let values = out_grid.nodes().map(|t| if t >= 1.0 { u + d } else { u }).collect();
    Path::new(*out_grid, values)
}

/// Deterministic two-branch ensemble violating the crossing inequality:
/// even paths sit below `a` at `s` and inside `(d, e)` at `t`, odd paths sit
/// above `a` at `s` and inside `(b, c)` at `t`. Both right-hand events are
/// empty, both left-hand events have probability one half.
#[allow(clippy::too_many_arguments)]
pub fn inequality_violator(
    out_grid: &TimeGrid,
    n_paths: usize,
    s: f64,
    a: f64,
    (b, c): (f64, f64),
    (d, e): (f64, f64),
) -> Result<PathEnsemble> {
    if n_paths < 2 {
        return Err(invalid("violator needs at least two paths"));
    }
    let lo = a - 1.0;
    let hi = a + 1.0;
    let mid_bc = 0.5 * (b + c);
    let mid_de = 0.5 * (d + e);
    let paths = (0..n_paths)
        .map(|i| {
            let (before, after) = if i % 2 == 0 { (lo, mid_de) } else { (hi, mid_bc) };
            let values = out_grid.nodes().map(|t| if t <= s { before } else { after }).collect();
            Path::new(*out_grid, values)
        })
        .collect::<Result<Vec<_>>>()?;
    PathEnsemble::new(*out_grid, paths, Seed(0), "inequality_violator")
}

/// Ensemble whose path `i` is `f(derive_path_seed(master, i))`.
pub fn ensemble_from<F>(out_grid: &TimeGrid, n_paths: usize, master: Seed, tag: &str, f: F) -> Result<PathEnsemble>
where
    F: Fn(Seed) -> Result<Path> + Sync + Send,
{
    if n_paths == 0 {
        return Err(invalid("need at least one path"));
    }
    let paths = try_map_indexed(n_paths, |i| f(derive_path_seed(master, i as u64)))?;
    PathEnsemble::new(*out_grid, paths, master, tag)
}
