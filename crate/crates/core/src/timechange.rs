//! Time-changed Brownian motion.
//!
//! A Brownian path `B` drives a clock `A_t = int_0^t phi(B_s) ds`; its right
//! inverse `T_t = inf { u : A_u > t }` turns `B` into `X_t = B_{T_t}`.
//!
//! Two routes compute `X`:
//!
//! * the grid route ([`sample_brownian`], [`additive_functional`],
//!   [`right_inverse`], [`time_changed_path`], wrapped by
//!   [`time_change_on_grid`]) stores `B` and `A` on a uniform grid;
//! * the streaming route ([`time_change_streaming`]) advances `B` and `A`
//!   together and records `X` as output levels are crossed, without storing
//!   `B`. When the clock carries a distance-to-activity hint it lengthens
//!   Brownian steps where `phi` is negligible (long excursions away from the
//!   set where the clock runs). Without a hint it reproduces the grid route
//!   bit for bit.

use std::fmt;
use std::ops::ControlFlow;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::grid::{Path, TimeGrid};
use crate::scalar::Real;
use crate::seed::{PathRng, Seed};

pub fn sample_brownian<T: Real>(grid: &TimeGrid<T>, seed: Seed) -> Path<T> {
    let sqrt_h = grid.step().sqrt();
    let mut rng = PathRng::new(seed);
    let mut values = Vec::with_capacity(grid.len());
    let mut b = T::zero();
    values.push(b);
    for _ in 0..grid.steps() {
        b += sqrt_h * T::of(rng.standard_normal());
        values.push(b);
    }
    Path::new(*grid, values).expect("brownian increments are finite")
}

type Field1<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// Integrand `phi >= 0` of an additive functional clock.
#[derive(Clone)]
pub struct ClockSpec<T = f64> {
    label: String,
    integrand: Field1<T>,
    activity_distance: Option<Field1<T>>,
}

impl<T: Real> ClockSpec<T> {
    pub fn new(label: impl Into<String>, integrand: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            integrand: Arc::new(integrand),
            activity_distance: None,
        }
    }

    /// Attach `d(x)`: the distance from `x` to the region where `phi` is not
    /// negligible. The streaming sampler keeps each Brownian step below
    /// `geometry * d(x)^2`, so it never jumps over that region.
    pub fn with_activity_distance(mut self, d: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        self.activity_distance = Some(Arc::new(d));
        self
    }

    /// `phi = 1`: `A_t = t`.
    pub fn identity() -> Self {
        Self::new("identity", |_| T::one())
    }

    /// `phi = 1{x >= 0}`: occupation time of the half line.
    pub fn positive_occupation() -> Self {
        Self::new(
            "positive_occupation",
            |x: T| {
                if x >= T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            },
        )
        .with_activity_distance(|x: T| (-x).max(T::zero()))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn rate(&self, x: T) -> T {
        (self.integrand)(x)
    }

    #[inline]
    pub fn activity_distance(&self, x: T) -> Option<T> {
        self.activity_distance.as_ref().map(|d| d(x))
    }

    pub fn has_activity_distance(&self) -> bool {
        self.activity_distance.is_some()
    }
}

impl<T: Real> fmt::Debug for ClockSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClockSpec")
            .field("label", &self.label)
            .field("activity_distance", &self.activity_distance.is_some())
            .finish_non_exhaustive()
    }
}

fn negative_rate(x: f64, phi: f64) -> Error {
    Error::InvariantViolation(format!("clock integrand is {phi} < 0 at x = {x}"))
}

/// Nondecreasing clock values on the Brownian time grid, starting at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Clock<T = f64> {
    grid: TimeGrid<T>,
    values: Vec<T>,
}

impl<T: Real> Clock<T> {
    pub fn new(grid: TimeGrid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid("clock length does not match its grid"));
        }
        if values[0] != T::zero() {
            return Err(Error::InvariantViolation("clock must start at zero".into()));
        }
        if values.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(Error::InvariantViolation("clock must be nondecreasing".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn max(&self) -> T {
        *self.values.last().expect("clock is never empty")
    }

    /// Index of the first node with `A > t`, if any.
    pub fn first_index_above(&self, t: T) -> Option<usize> {
        let k = self.values.partition_point(|&a| a <= t);
        (k < self.values.len()).then_some(k)
    }
}

/// Left-endpoint Riemann sum `A_{k+1} = A_k + phi(B_k) h`.
pub fn additive_functional<T: Real>(b: &Path<T>, clock: &ClockSpec<T>) -> Result<Clock<T>> {
    let h = b.grid().step();
    let mut values = Vec::with_capacity(b.values().len());
    let mut a = T::zero();
    values.push(a);
    for &x in &b.values()[..b.values().len() - 1] {
        let phi = clock.rate(x);
        if !(phi >= T::zero()) {
            return Err(negative_rate(x.as_f64(), phi.as_f64()));
        }
        a += phi * h;
        values.push(a);
    }
    Clock::new(*b.grid(), values)
}

/// `inf { t_k : A_{t_k} > t }` on the grid; `None` stands for `+infinity`
/// (the clock never exceeds `t`).
pub fn right_inverse<T: Real>(a: &Clock<T>, t: T) -> Option<T> {
    a.first_index_above(t).map(|k| a.grid().node(k))
}

/// `X_{s_j} = B_{T_{s_j}}` at every node of `out_grid`.
pub fn time_changed_path<T: Real>(b: &Path<T>, a: &Clock<T>, out_grid: &TimeGrid<T>) -> Result<Path<T>> {
    if b.grid() != a.grid() {
        return Err(Error::GridMismatch);
    }
    let exhausted = || Error::ClockExhausted {
        target: out_grid.t_end().as_f64(),
        reached: a.max().as_f64(),
        path: None,
    };
    if !(a.max() > out_grid.t_end()) {
        return Err(exhausted());
    }
    let clock = a.values();
    let mut k = 0;
    let mut values = Vec::with_capacity(out_grid.len());
    for s in out_grid.nodes() {
        while k < clock.len() && clock[k] <= s {
            k += 1;
        }
        if k == clock.len() {
            return Err(exhausted());
        }
        values.push(b.values()[k]);
    }
    Path::new(*out_grid, values)
}

/// Initial Brownian horizon, as a multiple of the output horizon.
pub const HORIZON_MULTIPLIER: usize = 4;
/// Largest horizon multiple tried before giving up.
pub const HORIZON_CAP: usize = 64;

/// Grid route with horizon management: `B` is sampled with the output step on
/// `4x` the output horizon, doubled until the clock passes `out_grid.t_end`,
/// and abandoned with a clock-exhausted error past `64x`.
pub fn time_change_on_grid<T: Real>(clock: &ClockSpec<T>, out_grid: &TimeGrid<T>, seed: Seed) -> Result<Path<T>> {
    let mut factor = HORIZON_MULTIPLIER;
    loop {
        let b = sample_brownian(&out_grid.extended(factor)?, seed);
        let a = additive_functional(&b, clock)?;
        if a.max() > out_grid.t_end() {
            return time_changed_path(&b, &a, out_grid);
        }
        if factor >= HORIZON_CAP {
            return Err(Error::ClockExhausted {
                target: out_grid.t_end().as_f64(),
                reached: a.max().as_f64(),
                path: None,
            });
        }
        factor *= 2;
    }
}

/// Knobs of the streaming sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeChangeConfig {
    /// Base Brownian step; `None` uses the output grid step.
    pub b_step: Option<f64>,
    /// Brownian steps stay below `geometry * d(x)^2` away from the active set.
    pub geometry: f64,
    /// Brownian steps allowed, in units of `t_end / b_step`.
    pub budget_factor: usize,
}

impl Default for TimeChangeConfig {
    fn default() -> Self {
        Self {
            b_step: None,
            geometry: 1.0 / 36.0,
            budget_factor: HORIZON_CAP,
        }
    }
}

impl TimeChangeConfig {
    pub fn with_b_step(b_step: f64) -> Self {
        Self {
            b_step: Some(b_step),
            ..Self::default()
        }
    }
}

/// Output of the streaming sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeChanged<T = f64> {
    pub path: Path<T>,
    /// Brownian time consumed.
    pub b_time: f64,
    /// Brownian steps taken.
    pub b_steps: usize,
}

/// Streaming time change.
///
/// Each Brownian step has length `h` (the base step) unless the clock has an
/// activity-distance hint `d` and `d(B) > 0`, in which case it is
/// `max(h, min(h / phi(B), geometry * d(B)^2))`: the clock advances by at most
/// about one base step and `B` cannot cross the active set in a single move.
/// Brownian increments are exact Gaussians for whatever step is used.
pub fn time_change_streaming<T: Real>(
    clock: &ClockSpec<T>,
    out_grid: &TimeGrid<T>,
    seed: Seed,
    config: &TimeChangeConfig,
) -> Result<TimeChanged<T>> {
    time_change_streaming_observed(clock, out_grid, seed, config, |_, _| {})
}

/// [`time_change_streaming`], calling `observe(a, b)` with the clock and the
/// Brownian position after every Brownian step.
pub fn time_change_streaming_observed<T: Real>(
    clock: &ClockSpec<T>,
    out_grid: &TimeGrid<T>,
    seed: Seed,
    config: &TimeChangeConfig,
    mut observe: impl FnMut(T, T),
) -> Result<TimeChanged<T>> {
    let h = match config.b_step {
        Some(h) => h,
        None => out_grid.step().as_f64(),
    };
    let mut values = Vec::with_capacity(out_grid.len());
    let mut next = 0usize;
    let mut next_level = out_grid.node(0);
    let last = out_grid.steps();
    let run = drive(clock, h, out_grid.t_end(), seed, config, |a, b| {
        observe(a, b);
        while a > next_level {
            values.push(b);
            if next == last {
                return ControlFlow::Break(());
            }
            next += 1;
            next_level = out_grid.node(next);
        }
        ControlFlow::Continue(())
    })?;
    Ok(TimeChanged {
        path: Path::new(*out_grid, values)?,
        b_time: run.b_time,
        b_steps: run.b_steps,
    })
}

/// Brownian time and steps consumed by [`run_clock`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockRun {
    pub b_time: f64,
    pub b_steps: usize,
}

/// The Brownian stepping of the streaming route with no output grid:
/// `observe(a, b)` sees the clock and `B` after every step and stops the run
/// by breaking. The run fails with a clock-exhausted error if the step
/// budget for a clock horizon of `max_clock` is spent first. `config.b_step`
/// must be set.
pub fn run_clock<T: Real>(
    clock: &ClockSpec<T>,
    max_clock: T,
    seed: Seed,
    config: &TimeChangeConfig,
    observe: impl FnMut(T, T) -> ControlFlow<()>,
) -> Result<ClockRun> {
    let h = config
        .b_step
        .ok_or_else(|| invalid("run_clock needs an explicit brownian step"))?;
    drive(clock, h, max_clock, seed, config, observe)
}

fn drive<T: Real>(
    clock: &ClockSpec<T>,
    h: f64,
    horizon: T,
    seed: Seed,
    config: &TimeChangeConfig,
    mut observe: impl FnMut(T, T) -> ControlFlow<()>,
) -> Result<ClockRun> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid(format!("brownian step must be positive, got {h}")));
    }
    let h = T::of(h);
    let sqrt_h = h.sqrt();
    let geometry = T::of(config.geometry);
    let base_steps = (horizon / h).ceil().to_usize().unwrap_or(usize::MAX);
    let budget = base_steps.saturating_mul(config.budget_factor.max(1));

    let mut rng = PathRng::new(seed);
    let mut a = T::zero();
    let mut b = T::zero();
    let mut b_time = 0.0f64;

    for step_index in 0..budget {
        let phi = clock.rate(b);
        if !(phi >= T::zero()) {
            return Err(negative_rate(b.as_f64(), phi.as_f64()));
        }
        let mut dt = h;
        if let Some(d) = clock.activity_distance(b) {
            if d > T::zero() {
                let cap = if phi > T::zero() { h / phi } else { T::infinity() };
                dt = h.max(cap.min(geometry * d * d));
            }
        }
        let xi = T::of(rng.standard_normal());
        a += phi * dt;
        if dt == h {
            b += sqrt_h * xi;
        } else {
            b += dt.sqrt() * xi;
        }
        b_time += dt.as_f64();
        if observe(a, b).is_break() {
            return Ok(ClockRun {
                b_time,
                b_steps: step_index + 1,
            });
        }
    }
    Err(Error::ClockExhausted {
        target: horizon.as_f64(),
        reached: a.as_f64(),
        path: None,
    })
}

/// `f(x) = min { |x - k| : k integer }`.
#[inline]
pub fn sawtooth(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// `sum_k exp(-n (x + k)^2)`, truncated to `|x + k| <= 8 / sqrt(n)` plus the
/// two integers nearest to `-x`.
fn gaussian_lattice_sum(n: u32, x: f64) -> f64 {
    let n = n as f64;
    let f = x - x.floor();
    let radius = 8.0 / n.sqrt();
    let lo = ((f - radius).ceil() as i64).min(0);
    let hi = ((f + radius).floor() as i64).max(1);
    (lo..=hi)
        .map(|j| {
            let u = f - j as f64;
            (-n * u * u).exp()
        })
        .sum()
}

/// `sigma_n(x) = (pi/n)^(1/4) (sum_k exp(-n (x + k)^2))^(-1/2)`, a smooth
/// periodic diffusion coefficient whose `sigma_n^-2` tends to a comb of unit
/// masses on the integers.
pub fn sigma_poisson(n: u32, x: f64) -> f64 {
    assert!(n >= 1, "n must be positive");
    (std::f64::consts::PI / n as f64).powf(0.25) / gaussian_lattice_sum(n, x).sqrt()
}

/// `sigma_n(x)^-2 = sqrt(n/pi) sum_k exp(-n (x + k)^2)`, computed directly.
pub fn poisson_clock_rate(n: u32, x: f64) -> f64 {
    assert!(n >= 1, "n must be positive");
    (n as f64 / std::f64::consts::PI).sqrt() * gaussian_lattice_sum(n, x)
}
