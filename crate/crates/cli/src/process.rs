//! Named processes and how to sample them.
//!
//! Large ensembles are only kept on an observation grid holding the times a
//! statistic needs. Time-changed and event-driven processes are sampled
//! there directly with the Brownian step of the run grid, which gives the
//! same values at shared nodes as a run-grid sample; Euler schemes are run
//! on the run grid and subsampled.

use acdlab::examples::{
    abs_brownian, planted_nonac_process, poisson_prelimit_with, poisson_step, refl_bm_limit_with,
    refl_bm_prelimit_with, symmetric_poisson,
};
use acdlab::sde::euler_maruyama;
use acdlab::timechange::TimeChangeConfig;
use acdlab::{derive_path_seed, make_uniform_grid, DiffusionSpec, Path, PathEnsemble, Seed, TimeGrid};

use crate::config::{config_err, ConfigError, RunConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum Process {
    Brownian {
        x0: f64,
        sigma: f64,
    },
    Ou {
        x0: f64,
        kappa: f64,
        theta: f64,
        sigma: f64,
    },
    ReflBm {
        n: u32,
    },
    ReflBmLimit,
    AbsBm,
    Poisson {
        n: u32,
    },
    SymPoisson {
        rate: f64,
    },
    Planted,
}

pub const PROCESS_NAMES: [&str; 8] = [
    "brownian",
    "ou",
    "refl-bm",
    "refl-bm-limit",
    "abs-bm",
    "poisson",
    "sym-poisson",
    "planted",
];

fn parse_n(raw: &str) -> Result<u32, ConfigError> {
    match raw.parse::<u32>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(config_err(format!("n must be a positive integer, got `{raw}`"))),
    }
}

impl Process {
    /// `name` or `name:arg`, where `arg` is `n` for the pre-limit sequences
    /// and the rate for `sym-poisson`; otherwise `--n` / `--rate` apply.
    pub fn parse(spec: &str, cfg: &RunConfig) -> Result<Self, ConfigError> {
        let (name, arg) = match spec.split_once(':') {
            Some((name, arg)) => (name, Some(arg)),
            None => (spec, None),
        };
        let n = || -> Result<u32, ConfigError> {
            match arg {
                Some(a) => parse_n(a),
                None => parse_n(&cfg.raw("n").ok_or_else(|| config_err(format!("{name} needs --n")))?),
            }
        };
        let p = match name {
            "brownian" => Process::Brownian {
                x0: cfg.f64("x0")?,
                sigma: cfg.f64("sigma")?,
            },
            "ou" => Process::Ou {
                x0: cfg.f64("x0")?,
                kappa: cfg.f64("kappa")?,
                theta: cfg.f64("theta")?,
                sigma: cfg.f64("sigma")?,
            },
            "refl-bm" => Process::ReflBm { n: n()? },
            "poisson" => Process::Poisson { n: n()? },
            "sym-poisson" => {
                let rate = match arg {
                    Some(a) => a.parse().map_err(|_| config_err(format!("bad rate `{a}`")))?,
                    None => cfg.f64("rate")?,
                };
                if !(rate > 0.0) {
                    return Err(config_err("rate must be positive"));
                }
                Process::SymPoisson { rate }
            }
            "refl-bm-limit" | "abs-bm" | "planted" if arg.is_some() => {
                return Err(config_err(format!("{name} takes no argument")))
            }
            "refl-bm-limit" => Process::ReflBmLimit,
            "abs-bm" => Process::AbsBm,
            "planted" => Process::Planted,
            other => {
                return Err(config_err(format!(
                    "unknown process `{other}`; expected one of {}",
                    PROCESS_NAMES.join(", ")
                )))
            }
        };
        if let Process::Brownian { sigma, .. } | Process::Ou { sigma, .. } = p {
            if !(sigma > 0.0) {
                return Err(config_err("sigma must be positive"));
            }
        }
        Ok(p)
    }

    pub fn label(&self) -> String {
        match self {
            Process::Brownian { x0, sigma } => format!("brownian(x0={x0},sigma={sigma})"),
            Process::Ou {
                x0,
                kappa,
                theta,
                sigma,
            } => format!("ou(x0={x0},kappa={kappa},theta={theta},sigma={sigma})"),
            Process::ReflBm { n } => format!("refl-bm(n={n})"),
            Process::ReflBmLimit => "refl-bm-limit".into(),
            Process::AbsBm => "abs-bm".into(),
            Process::Poisson { n } => format!("poisson(n={n})"),
            Process::SymPoisson { rate } => format!("sym-poisson(rate={rate})"),
            Process::Planted => "planted".into(),
        }
    }

    pub fn diffusion(&self) -> Option<DiffusionSpec> {
        match *self {
            Process::Brownian { sigma, .. } => {
                Some(DiffusionSpec::new(self.label(), move |_, _| sigma, |_, _| 0.0, 0.0).expect("finite constant"))
            }
            Process::Ou {
                kappa, theta, sigma, ..
            } => DiffusionSpec::ornstein_uhlenbeck(kappa, theta, sigma).ok(),
            _ => None,
        }
    }

    fn x0(&self) -> f64 {
        match *self {
            Process::Brownian { x0, .. } | Process::Ou { x0, .. } => x0,
            _ => 0.0,
        }
    }

    /// Brownian step for time changes run against `run`.
    pub fn b_step(&self, run: &TimeGrid, b_step: Option<f64>) -> f64 {
        match (self, b_step) {
            (_, Some(h)) => h,
            (Process::Poisson { n }, None) => poisson_step(*n, run),
            _ => run.step(),
        }
    }

    /// One path on `grid` at full resolution.
    pub fn sample(&self, grid: &TimeGrid, b_step: Option<f64>, seed: Seed) -> acdlab::Result<Path> {
        let tc = TimeChangeConfig::with_b_step(self.b_step(grid, b_step));
        match self {
            Process::Brownian { .. } | Process::Ou { .. } => {
                euler_maruyama(&self.diffusion().expect("diffusion process"), grid, self.x0(), seed)
            }
            Process::ReflBm { n } => refl_bm_prelimit_with(*n, grid, seed, &tc),
            Process::ReflBmLimit => refl_bm_limit_with(grid, seed, &tc),
            Process::AbsBm => Ok(abs_brownian(grid, seed)),
            Process::Poisson { n } => poisson_prelimit_with(*n, grid, seed, &tc),
            Process::SymPoisson { rate } => symmetric_poisson(*rate, grid, seed),
            Process::Planted => planted_nonac_process(grid, seed),
        }
    }

    /// One path on `obs`, simulated at the resolution of `run`.
    pub fn sample_observed(
        &self,
        run: &TimeGrid,
        obs: &TimeGrid,
        b_step: Option<f64>,
        seed: Seed,
    ) -> acdlab::Result<Path> {
        match self {
            Process::Brownian { .. } | Process::Ou { .. } | Process::AbsBm => {
                let full = self.sample(run, b_step, seed)?;
                let stride = run.steps() / obs.steps();
                let values = (0..obs.len()).map(|j| full.values()[j * stride]).collect();
                Path::new(*obs, values)
            }
            Process::ReflBm { .. } | Process::ReflBmLimit | Process::Poisson { .. } => {
                let h = self.b_step(run, b_step);
                self.sample(obs, Some(h), seed)
            }
            Process::SymPoisson { .. } | Process::Planted => self.sample(obs, b_step, seed),
        }
    }

    /// `n_paths` observed paths, path `i` drawn from `derive_path_seed(master, i)`.
    pub fn ensemble(
        &self,
        run: &TimeGrid,
        obs: &TimeGrid,
        b_step: Option<f64>,
        n_paths: usize,
        master: Seed,
    ) -> acdlab::Result<PathEnsemble> {
        acdlab::examples::ensemble_from(obs, n_paths, master, &self.label(), |seed| {
            self.sample_observed(run, obs, b_step, seed)
        })
    }
}

/// Coarsest uniform grid whose nodes are nodes of `run` and include `times`.
pub fn observation_grid(run: &TimeGrid, times: &[f64]) -> Result<TimeGrid, ConfigError> {
    let steps = run.steps() as u64;
    let mut g = steps;
    for &t in times {
        if !(0.0..=run.t_end()).contains(&t) {
            return Err(config_err(format!("time {t} outside [0, {}]", run.t_end())));
        }
        let k = (t / run.t_end() * steps as f64).round();
        if (k * run.step() - t).abs() > 1e-9 * run.t_end().max(1.0) {
            return Err(config_err(format!("time {t} is not a node of the run grid")));
        }
        g = gcd(g, k as u64);
    }
    let obs_steps = steps / g.max(1);
    make_uniform_grid(run.t_end(), obs_steps.max(1) as usize).map_err(|e| config_err(e.to_string()))
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Seed of auxiliary stream `k` of a run. Path seeds use small indices
/// under the run's master seed, so streams count down from the top.
pub fn stream(master: Seed, k: u64) -> Seed {
    derive_path_seed(master, u64::MAX - k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_grid(steps: usize) -> TimeGrid {
        make_uniform_grid(1.0, steps).unwrap()
    }

    #[test]
    fn observation_grid_is_coarsest() {
        let g = observation_grid(&run_grid(1000), &[0.25, 0.5, 1.0]).unwrap();
        assert_eq!(g.steps(), 4);
        assert_eq!(observation_grid(&run_grid(1000), &[1.0]).unwrap().steps(), 1);
        assert_eq!(observation_grid(&run_grid(1000), &[0.3]).unwrap().steps(), 10);
        assert!(observation_grid(&run_grid(3), &[0.5]).is_err());
        assert!(observation_grid(&run_grid(10), &[1.5]).is_err());
    }

    #[test]
    fn observed_time_change_matches_the_full_path() {
        let run = run_grid(200);
        let obs = observation_grid(&run, &[0.5, 1.0]).unwrap();
        for p in [
            Process::ReflBm { n: 8 },
            Process::ReflBmLimit,
            Process::Poisson { n: 16 },
        ] {
            for i in 0..5 {
                let seed = derive_path_seed(Seed(3), i);
                let full = p.sample(&run, None, seed).unwrap();
                let coarse = p.sample_observed(&run, &obs, None, seed).unwrap();
                assert_eq!(
                    coarse.values(),
                    &[full.values()[0], full.values()[100], full.values()[200]],
                    "{p:?}"
                );
            }
        }
    }

    #[test]
    fn observed_euler_is_subsampled() {
        let run = run_grid(100);
        let obs = observation_grid(&run, &[0.5]).unwrap();
        let p = Process::Ou {
            x0: 0.3,
            kappa: 1.0,
            theta: 0.0,
            sigma: 1.0,
        };
        let full = p.sample(&run, None, Seed(5)).unwrap();
        let coarse = p.sample_observed(&run, &obs, None, Seed(5)).unwrap();
        assert_eq!(coarse.values(), &[0.3, full.values()[50], full.values()[100]]);
    }

    #[test]
    fn streams_do_not_collide_with_paths() {
        let m = Seed(42);
        let paths: Vec<Seed> = (0..1000).map(|i| derive_path_seed(m, i)).collect();
        for k in 0..8 {
            assert!(!paths.contains(&stream(m, k)));
        }
    }
}
