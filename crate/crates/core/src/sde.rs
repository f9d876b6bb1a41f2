//! Euler-Maruyama integration of `dX = sigma(t, X) dW + b(t, X) dt` and the
//! one-sided Lipschitz check on the drift.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::grid::{Path, PathEnsemble, TimeGrid};
use crate::parallel::try_map_indexed;
use crate::scalar::Real;
use crate::seed::{derive_path_seed, PathRng, Seed};

/// |X| above this aborts a path.
pub const BLOWUP_THRESHOLD: f64 = 1e12;

pub type ScalarField<T> = Arc<dyn Fn(T, T) -> T + Send + Sync>;

/// Coefficients of a one-dimensional SDE plus the constant `K` of the drift
/// bound `b(t, y) - b(t, x) <= K (y - x)`.
#[derive(Clone)]
pub struct DiffusionSpec<T = f64> {
    label: String,
    sigma: ScalarField<T>,
    drift: ScalarField<T>,
    lipschitz_k: T,
}

impl<T: Real> DiffusionSpec<T> {
    pub fn new(
        label: impl Into<String>,
        sigma: impl Fn(T, T) -> T + Send + Sync + 'static,
        drift: impl Fn(T, T) -> T + Send + Sync + 'static,
        lipschitz_k: T,
    ) -> Result<Self> {
        if !lipschitz_k.is_finite() {
            return Err(invalid("lipschitz constant must be finite"));
        }
        Ok(Self {
            label: label.into(),
            sigma: Arc::new(sigma),
            drift: Arc::new(drift),
            lipschitz_k,
        })
    }

    /// Standard Brownian motion started wherever the caller puts it.
    pub fn brownian() -> Self {
        Self::new("brownian", |_, _| T::one(), |_, _| T::zero(), T::zero()).expect("finite constant")
    }

    /// `dX = sigma dW + kappa (theta - X) dt`; the drift is decreasing so `K = 0`.
    pub fn ornstein_uhlenbeck(kappa: T, theta: T, sigma: T) -> Result<Self> {
        if kappa < T::zero() {
            return Err(invalid("mean reversion speed must be non-negative"));
        }
        Self::new(
            format!("ornstein_uhlenbeck(kappa={kappa},theta={theta},sigma={sigma})"),
            move |_, _| sigma,
            move |_, x| kappa * (theta - x),
            T::zero(),
        )
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn sigma(&self, t: T, x: T) -> T {
        (self.sigma)(t, x)
    }

    #[inline]
    pub fn drift(&self, t: T, x: T) -> T {
        (self.drift)(t, x)
    }

    pub fn lipschitz_k(&self) -> T {
        self.lipschitz_k
    }

    pub fn with_lipschitz_k(mut self, k: T) -> Result<Self> {
        if !k.is_finite() {
            return Err(invalid("lipschitz constant must be finite"));
        }
        self.lipschitz_k = k;
        Ok(self)
    }
}

impl<T: Real> fmt::Debug for DiffusionSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionSpec")
            .field("label", &self.label)
            .field("lipschitz_k", &self.lipschitz_k)
            .finish_non_exhaustive()
    }
}

/// Explicit Euler-Maruyama with left-endpoint coefficients.
pub fn euler_maruyama<T: Real>(spec: &DiffusionSpec<T>, grid: &TimeGrid<T>, x0: T, seed: Seed) -> Result<Path<T>> {
    if !x0.is_finite() {
        return Err(invalid("initial value must be finite"));
    }
    let h = grid.step();
    let sqrt_h = h.sqrt();
    let limit = T::of(BLOWUP_THRESHOLD);
    let mut rng = PathRng::new(seed);
    let mut values = Vec::with_capacity(grid.len());
    let mut x = x0;
    values.push(x);
    for k in 0..grid.steps() {
        let t = grid.node(k);
        let xi = T::of(rng.standard_normal());
        x = x + spec.drift(t, x) * h + spec.sigma(t, x) * sqrt_h * xi;
        if !x.is_finite() || x.abs() > limit {
            return Err(Error::NumericalBlowup {
                step: k + 1,
                path: None,
            });
        }
        values.push(x);
    }
    Path::new(*grid, values)
}

pub fn simulate_ensemble<T: Real>(
    spec: &DiffusionSpec<T>,
    grid: &TimeGrid<T>,
    x0: T,
    n_paths: usize,
    master: Seed,
) -> Result<PathEnsemble<T>> {
    if n_paths == 0 {
        return Err(invalid("ensemble needs at least one path"));
    }
    let paths = try_map_indexed(n_paths, |i| {
        euler_maruyama(spec, grid, x0, derive_path_seed(master, i as u64))
    })?;
    PathEnsemble::new(*grid, paths, master, format!("euler_maruyama:{}", spec.label()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftCheckReport {
    pub tested_pairs: u64,
    /// `max (b(t,y) - b(t,x)) - K (y - x)` over the lattice; positive means violated.
    pub worst_violation: f64,
    pub pass: bool,
}

/// Scans `b(t, y) - b(t, x) <= K (y - x)` over every ordered lattice pair `x < y`
/// in `[x_lo, x_hi]` (`grid_points` equispaced values) at each sampled time.
///
/// Uses `c(x) = b(t, x) - K x`: the worst pair ending at `y` pairs it with the
/// smallest `c` to its left, so each time slice costs O(grid_points).
pub fn check_one_sided_lipschitz<T: Real>(
    spec: &DiffusionSpec<T>,
    t_samples: &[T],
    x_lo: T,
    x_hi: T,
    grid_points: usize,
) -> Result<DriftCheckReport> {
    if !(x_lo < x_hi) {
        return Err(invalid("need x_lo < x_hi"));
    }
    if grid_points < 2 {
        return Err(invalid("need at least two lattice points"));
    }
    if t_samples.is_empty() {
        return Err(invalid("need at least one time sample"));
    }
    let k = spec.lipschitz_k().as_f64();
    let span = (x_hi - x_lo).as_f64();
    let lo = x_lo.as_f64();
    let last = (grid_points - 1) as f64;
    let mut worst = f64::NEG_INFINITY;
    for &t in t_samples {
        let mut min_c = f64::INFINITY;
        for i in 0..grid_points {
            let x = if i == grid_points - 1 {
                x_hi.as_f64()
            } else {
                lo + span * (i as f64) / last
            };
            let c = spec.drift(t, T::of(x)).as_f64() - k * x;
            if i > 0 {
                worst = worst.max(c - min_c);
            }
            min_c = min_c.min(c);
        }
    }
    let pairs_per_t = (grid_points as u64) * (grid_points as u64 - 1) / 2;
    Ok(DriftCheckReport {
        tested_pairs: pairs_per_t * t_samples.len() as u64,
        worst_violation: worst,
        pass: worst <= 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_uniform_grid;

    fn constant_spec(sigma: f64, drift: f64) -> DiffusionSpec {
        DiffusionSpec::new("const", move |_, _| sigma, move |_, _| drift, 0.0).unwrap()
    }

    #[test]
    fn degenerate_coefficients_give_constant_path() {
        let g = make_uniform_grid(1.0, 100).unwrap();
        let p = euler_maruyama(&constant_spec(0.0, 0.0), &g, 2.0, Seed(1)).unwrap();
        assert!(p.values().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn unit_drift_reaches_x0_plus_one() {
        let g = make_uniform_grid(1.0, 4).unwrap();
        let p = euler_maruyama(&constant_spec(0.0, 1.0), &g, 3.0, Seed(1)).unwrap();
        assert_eq!(*p.values().last().unwrap(), 4.0);
    }

    #[test]
    fn halving_the_step_halves_the_ode_error() {
        // dx = x dt, x(0) = 1: Euler gives (1 + h)^M against e.
        let spec = DiffusionSpec::new("growth", |_, _| 0.0, |_, x: f64| x, 1.0).unwrap();
        let err = |m: usize| {
            let g = make_uniform_grid(1.0, m).unwrap();
            let p = euler_maruyama(&spec, &g, 1.0, Seed(0)).unwrap();
            (std::f64::consts::E - p.values()[m]).abs()
        };
        let ratio = err(200) / err(400);
        assert!((ratio - 2.0).abs() < 0.02, "ratio {ratio}");
    }

    #[test]
    fn blowup_names_the_step() {
        let spec = DiffusionSpec::new("explode", |_, _| 0.0, |_, x: f64| x * x, 0.0).unwrap();
        let g = make_uniform_grid(10.0, 100).unwrap();
        match euler_maruyama(&spec, &g, 1.0, Seed(0)) {
            Err(Error::NumericalBlowup { step, path: None }) => assert!(step > 1 && step <= 100),
            other => panic!("expected blowup, got {other:?}"),
        }
    }

    #[test]
    fn brownian_terminal_moments() {
        let g = make_uniform_grid(1.0, 4).unwrap();
        let spec = DiffusionSpec::<f64>::brownian();
        let n = 100_000;
        let ens = simulate_ensemble(&spec, &g, 0.5, n, Seed(11)).unwrap();
        let xs = ens.marginal(1.0).unwrap();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 0.5).abs() < 3.0 * (var / n as f64).sqrt());
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn martingale_mean_stays_within_four_standard_errors() {
        let spec = DiffusionSpec::new("bounded", |_, x: f64| 0.5 + 0.4 * x.sin(), |_, _| 0.0, 0.0).unwrap();
        let g = make_uniform_grid(1.0, 20).unwrap();
        let n = 20_000;
        let ens = simulate_ensemble(&spec, &g, 0.0, n, Seed(5)).unwrap();
        for t in g.nodes().skip(1) {
            let xs = ens.marginal(t).unwrap();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!(mean.abs() <= 4.0 * (var / n as f64).sqrt(), "t={t} mean={mean}");
        }
    }

    #[test]
    fn single_path_ensemble_matches_direct_call() {
        let g = make_uniform_grid(1.0, 50).unwrap();
        let spec = DiffusionSpec::<f64>::brownian();
        let ens = simulate_ensemble(&spec, &g, 0.0, 1, Seed(77)).unwrap();
        let direct = euler_maruyama(&spec, &g, 0.0, derive_path_seed(Seed(77), 0)).unwrap();
        assert_eq!(ens.paths()[0], direct);
        assert_eq!(ens.generator_tag(), "euler_maruyama:brownian");
    }

    #[test]
    fn ensemble_error_reports_path_index() {
        // Blows up only for paths whose first increment is large and positive.
        let spec = DiffusionSpec::new(
            "fragile",
            |_, _| 1.0,
            |_, x: f64| if x > 2.0 { f64::INFINITY } else { 0.0 },
            0.0,
        )
        .unwrap();
        let g = make_uniform_grid(4.0, 4).unwrap();
        let err = simulate_ensemble(&spec, &g, 0.0, 200, Seed(1)).unwrap_err();
        assert!(matches!(err, Error::NumericalBlowup { path: Some(_), .. }));
    }

    #[test]
    fn f32_and_f64_agree_to_single_precision() {
        let g64 = make_uniform_grid(1.0f64, 100).unwrap();
        let g32 = make_uniform_grid(1.0f32, 100).unwrap();
        let p64 = euler_maruyama(&DiffusionSpec::<f64>::brownian(), &g64, 0.0, Seed(4)).unwrap();
        let p32 = euler_maruyama(&DiffusionSpec::<f32>::brownian(), &g32, 0.0, Seed(4)).unwrap();
        for (a, b) in p64.values().iter().zip(p32.values()) {
            assert!((a - *b as f64).abs() < 1e-4);
        }
    }

    #[test]
    fn decreasing_drift_passes_with_zero_k() {
        let spec = DiffusionSpec::new("mr", |_, _| 1.0, |_, x: f64| -x, 0.0).unwrap();
        let r = check_one_sided_lipschitz(&spec, &[0.0, 1.0], -3.0, 3.0, 101).unwrap();
        assert!(r.pass);
        assert!(r.worst_violation <= 0.0);
        assert_eq!(r.tested_pairs, 2 * 101 * 100 / 2);
    }

    #[test]
    fn steep_drift_fails() {
        let spec = DiffusionSpec::new("steep", |_, _| 1.0, |_, x: f64| 2.0 * x, 1.0).unwrap();
        let r = check_one_sided_lipschitz(&spec, &[0.0], -1.0, 1.0, 11).unwrap();
        assert!(!r.pass);
        assert!(r.worst_violation > 0.0);
        // Worst pair is the full interval: 2*2 - 1*2.
        assert!((r.worst_violation - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sine_drift_passes_with_k_one_on_dense_scans() {
        // |sin'| <= 1: a dense scan of slopes confirms no secant exceeds 1.
        let max_secant = {
            let xs: Vec<f64> = (0..2001).map(|i| -10.0 + 20.0 * i as f64 / 2000.0).collect();
            let mut m = f64::NEG_INFINITY;
            for i in 0..xs.len() {
                for j in (i + 1)..xs.len() {
                    m = m.max((xs[j].sin() - xs[i].sin()) / (xs[j] - xs[i]));
                }
            }
            m
        };
        assert!(max_secant <= 1.0);
        let spec = DiffusionSpec::new("sin", |_, _| 1.0, |_, x: f64| x.sin(), 1.0).unwrap();
        for &points in &[2, 17, 1000, 20_001] {
            let r = check_one_sided_lipschitz(&spec, &[0.0, 3.0], -10.0, 10.0, points).unwrap();
            assert!(r.pass, "points {points}: {}", r.worst_violation);
        }
    }

    #[test]
    fn lattice_scan_agrees_with_brute_force_pairs() {
        let drift = |t: f64, x: f64| (3.0 * x).sin() + 0.3 * x * x - t * x;
        let spec = DiffusionSpec::new("wiggly", |_, _| 1.0, drift, 0.7).unwrap();
        let ts = [0.0, 0.5, 2.0];
        let r = check_one_sided_lipschitz(&spec, &ts, -2.0, 2.0, 301).unwrap();
        let mut brute = f64::NEG_INFINITY;
        for &t in &ts {
            let xs: Vec<f64> = (0..301).map(|i| -2.0 + 4.0 * i as f64 / 300.0).collect();
            for i in 0..xs.len() {
                for j in (i + 1)..xs.len() {
                    brute = brute.max(drift(t, xs[j]) - drift(t, xs[i]) - 0.7 * (xs[j] - xs[i]));
                }
            }
        }
        assert!((r.worst_violation - brute).abs() < 1e-12);
    }

    #[test]
    fn invalid_lattice_arguments() {
        let spec = DiffusionSpec::<f64>::brownian();
        assert!(check_one_sided_lipschitz(&spec, &[0.0], 1.0, 1.0, 10).is_err());
        assert!(check_one_sided_lipschitz(&spec, &[0.0], 0.0, 1.0, 1).is_err());
    }
}
