//! One function per command. Each returns verdict records, supporting
//! details and, when asked, the first few paths for the CSV dump.

use acdlab::diagnostics::{
    almost_continuity_rate, binomial_halfwidth, conditional_lipschitz_estimate, crossing_inequality_check,
    fdd_two_sample, ks_distance, markov_probe, markov_probe_stratified, simultaneous_jump_rate, support_connectedness,
    DiagnosticReport, InequalityParams, InequalityReport, LipschitzConfig, SupportConfig, Z99,
};
use acdlab::examples::{
    counterexample_2d_limit, counterexample_2d_prelimit_with, inequality_violator, poisson_prelimit_gaps,
    poisson_prelimit_jumps, poisson_step, refl_bm_limit_min, refl_bm_prelimit_min, symmetric_poisson, Example2DSample,
};
use acdlab::parallel::try_map_indexed;
use acdlab::sde::check_one_sided_lipschitz;
use acdlab::timechange::{sawtooth, TimeChangeConfig};
use acdlab::{derive_path_seed, make_uniform_grid, Path, PathEnsemble, Seed, TimeGrid};
use serde_json::{json, Map, Value};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erf;
use thiserror::Error;

use crate::config::{config_err, Command, ConfigError, RunConfig};
use crate::process::{observation_grid, stream, Process};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] acdlab::Error),
}

type Res<T> = Result<T, PipelineError>;

#[derive(Debug, Default)]
pub struct Outcome {
    pub records: Vec<DiagnosticReport>,
    pub details: Map<String, Value>,
    pub dumped: Option<Vec<Path>>,
}

/// 99% quantile of the Kolmogorov distribution; `KS_99 / sqrt(n)` is the
/// asymptotic one-sample critical value.
pub const KS_99: f64 = 1.627_6;
/// Highest acceptable `P(min < level)` for the reflecting limit.
pub const LIMIT_MIN_RATE: f64 = 0.01;
/// Tolerance of the mean inter-jump time around 1.
pub const INTER_JUMP_TOLERANCE: f64 = 0.05;
/// Largest acceptable fraction of pre-limit Poisson values off the lattice.
pub const OFF_LATTICE_RATE: f64 = 0.05;
/// Distance from the lattice that counts as off it.
pub const OFF_LATTICE_DISTANCE: f64 = 0.1;
/// Tolerance of the mean jump count of the two-dimensional limit on [0, 1].
pub const JUMP_COUNT_TOLERANCE: f64 = 0.02;
/// Smallest fraction of sweep tuples that must satisfy the inequality.
pub const SWEEP_FRACTION: f64 = 0.99;

/// Sweep of the crossing inequality: `(s, t)`, `a`, `(b, c)`, `(d, e)`.
pub const SWEEP_TIMES: [(f64, f64); 2] = [(0.25, 0.5), (0.5, 1.0)];
pub const SWEEP_A: [f64; 3] = [0.2, 0.4, 0.7];
pub const SWEEP_BC: [(f64, f64); 3] = [(0.0, 0.2), (0.1, 0.3), (0.2, 0.5)];
pub const SWEEP_DE: [(f64, f64); 3] = [(0.5, 0.8), (0.6, 1.0), (0.8, 1.5)];

pub fn execute(cfg: &RunConfig, dump: Option<usize>) -> Res<Outcome> {
    let run = make_uniform_grid(cfg.t_end, cfg.steps).map_err(|e| config_err(e.to_string()))?;
    let ctx = Ctx {
        cfg,
        run,
        master: Seed(cfg.seed),
        dump: dump.map(|d| d.min(cfg.n_paths)),
    };
    match cfg.command {
        Command::Simulate => simulate(&ctx),
        Command::Example => match cfg.example.as_deref().unwrap_or_default() {
            "refl-bm" => example_refl_bm(&ctx),
            "refl-bm-limit" => example_refl_bm_limit(&ctx),
            "poisson" => example_poisson(&ctx),
            "sym-poisson" => example_sym_poisson(&ctx),
            "planted" => example_planted(&ctx),
            "cx2d" => example_cx2d(&ctx),
            "cx2d-limit" => example_cx2d_limit(&ctx),
            other => Err(config_err(format!("unknown example `{other}`")).into()),
        },
        Command::AcCheck => ac_check(&ctx),
        Command::IneqCheck => ineq_check(&ctx),
        Command::FddTest => fdd_test(&ctx),
        Command::LipCheck => lip_check(&ctx),
        Command::SupportCheck => support_check(&ctx),
        Command::MarkovProbe => markov(&ctx),
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    run: TimeGrid,
    master: Seed,
    dump: Option<usize>,
}

impl Ctx<'_> {
    fn n(&self) -> usize {
        self.cfg.n_paths
    }

    fn seed(&self, i: usize) -> Seed {
        derive_path_seed(self.master, i as u64)
    }

    fn process(&self, key: &str) -> Res<Process> {
        let spec = self
            .cfg
            .raw(key)
            .ok_or_else(|| config_err(format!("--{key} is required")))?;
        Ok(Process::parse(&spec, self.cfg)?)
    }

    fn n_param(&self, default: u32) -> Res<u32> {
        let n = self.cfg.opt_count("n")?.unwrap_or(default as usize);
        Ok(u32::try_from(n).map_err(|_| config_err("--n is too large"))?)
    }

    /// First paths of `process` on the run grid, if a dump was requested.
    fn dump_process(&self, process: &Process, b_step: Option<f64>) -> Res<Option<Vec<Path>>> {
        self.dump_with(|i| process.sample(&self.run, b_step, self.seed(i)))
    }

    fn dump_with(&self, f: impl Fn(usize) -> acdlab::Result<Path> + Sync + Send) -> Res<Option<Vec<Path>>> {
        match self.dump {
            Some(k) => Ok(Some(try_map_indexed(k, f)?)),
            None => Ok(None),
        }
    }

    fn need_horizon(&self, t: f64) -> Res<()> {
        if self.run.t_end() < t {
            return Err(config_err(format!("needs --t-end of at least {t}")).into());
        }
        Ok(())
    }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (v / n).sqrt())
}

/// Passes when `estimate` is within its 99% interval of `reference`. The
/// record holds the signed error.
fn consistency(name: &str, estimate: f64, se: f64, reference: f64, n: usize) -> DiagnosticReport {
    let err = estimate - reference;
    DiagnosticReport {
        statistic_name: name.into(),
        value: err,
        ci_halfwidth: Z99 * se,
        threshold: 0.0,
        pass: err.abs() <= Z99 * se,
        sample_size: n,
    }
}

fn ks_record(name: &str, ks: f64, threshold: f64, n: usize) -> DiagnosticReport {
    DiagnosticReport::below(name, ks, 0.0, threshold, n)
}

fn ks_critical(n: usize) -> f64 {
    KS_99 / (n as f64).sqrt()
}

/// CDF of `|N(0, t)|`.
fn half_normal_cdf(x: f64, t: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        erf(x / (2.0 * t).sqrt())
    }
}

/// `P(X_t = 0) = e^{-rt} I_0(rt)` for the symmetric Poisson process of rate `r`.
fn symmetric_poisson_zero(rt: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > 1e-17 * sum {
        term *= (rt / 2.0) * (rt / 2.0) / (k * k);
        sum += term;
        k += 1.0;
    }
    (-rt).exp() * sum
}

fn simulate(ctx: &Ctx) -> Res<Outcome> {
    let cfg = ctx.cfg;
    let name = cfg.raw("process").unwrap_or_default();
    if name != "brownian" && name != "ou" {
        return Err(config_err(format!("simulate runs brownian or ou, not `{name}`")).into());
    }
    let process = Process::parse(&name, cfg)?;
    let spec = process
        .diffusion()
        .ok_or_else(|| config_err("kappa must be non-negative"))?;
    let (x0, sigma) = (cfg.f64("x0")?, cfg.f64("sigma")?);
    let (kappa, theta) = if name == "ou" {
        (cfg.f64("kappa")?, cfg.f64("theta")?)
    } else {
        (0.0, 0.0)
    };
    let t = ctx.run.t_end();
    let last = ctx.run.steps();
    let xs = try_map_indexed(ctx.n(), |i| {
        Ok(process.sample(&ctx.run, None, ctx.seed(i))?.values()[last])
    })?;

    let (mean, var) = if kappa > 0.0 {
        let decay = (-kappa * t).exp();
        (
            theta + (x0 - theta) * decay,
            sigma * sigma * (1.0 - decay * decay) / (2.0 * kappa),
        )
    } else {
        (x0, sigma * sigma * t)
    };
    let law = Normal::new(mean, var.sqrt()).map_err(|e| config_err(e.to_string()))?;
    let ks = ks_distance(&xs, |x| law.cdf(x))?;
    let threshold = cfg.opt_f64("ks-threshold")?.unwrap_or(ks_critical(ctx.n()));

    let span = 10.0 * sigma * t.sqrt().max(1.0) + (x0 - theta).abs();
    let drift = check_one_sided_lipschitz(
        &spec,
        &[0.0, 0.5 * t, t],
        x0.min(theta) - span,
        x0.max(theta) + span,
        201,
    )?;
    let (m, _) = mean_se(&xs);
    let mut out = Outcome {
        records: vec![
            DiagnosticReport {
                statistic_name: "one_sided_lipschitz_drift".into(),
                value: drift.worst_violation,
                ci_halfwidth: 0.0,
                threshold: 0.0,
                pass: drift.pass,
                sample_size: drift.tested_pairs as usize,
            },
            ks_record("ks_terminal_vs_exact_law", ks, threshold, ctx.n()),
        ],
        ..Outcome::default()
    };
    out.details.insert("process".into(), json!(process.label()));
    out.details.insert("terminal_mean".into(), json!(m));
    out.details.insert("exact_mean".into(), json!(mean));
    out.details.insert("exact_variance".into(), json!(var));
    out.dumped = ctx.dump_process(&process, None)?;
    Ok(out)
}

fn example_refl_bm(ctx: &Ctx) -> Res<Outcome> {
    let cfg = ctx.cfg;
    let n = ctx.n_param(64)?;
    let t = ctx.run.t_end();
    let obs = observation_grid(&ctx.run, &[t])?;
    let b_step = cfg.opt_f64("b-step")?;
    let tc = TimeChangeConfig::with_b_step(b_step.unwrap_or(ctx.run.step()));
    let draw = |n: u32| -> Res<(Vec<f64>, Vec<f64>)> {
        let rows = try_map_indexed(ctx.n(), |i| {
            let (p, low) = refl_bm_prelimit_min(n, &obs, ctx.seed(i), &tc)?;
            Ok((p.values()[1], low))
        })?;
        Ok(rows.into_iter().unzip())
    };
    let ks_of = |xs: &[f64]| ks_distance(xs, |x| half_normal_cdf(x, t));

    let (xs, mins) = draw(n)?;
    let ks = ks_of(&xs)?;
    let (min_mean, min_se) = mean_se(&mins);
    let mut out = Outcome::default();
    out.records.push(ks_record(
        "ks_vs_half_normal",
        ks,
        cfg.opt_f64("ks-threshold")?.unwrap_or(0.05),
        ctx.n(),
    ));
    out.records.push(DiagnosticReport::below(
        "running_min_mean",
        min_mean,
        4.0 * min_se,
        cfg.f64("min-mean")?,
        ctx.n(),
    ));

    if cfg.params.contains_key("n-sweep") {
        let mut ns: Vec<u32> = cfg
            .list("n-sweep")?
            .into_iter()
            .map(|v| {
                if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                    Ok(v as u32)
                } else {
                    Err(config_err(format!("--n-sweep: bad n {v}")))
                }
            })
            .collect::<Result<_, _>>()?;
        ns.sort_unstable();
        ns.dedup();
        let mut by_n = Map::new();
        let mut values = Vec::with_capacity(ns.len());
        for &m in &ns {
            let k = if m == n { ks } else { ks_of(&draw(m)?.0)? };
            by_n.insert(m.to_string(), json!(k));
            values.push(k);
        }
        let increases = values.windows(2).filter(|w| w[1] >= w[0]).count();
        out.records.push(DiagnosticReport {
            statistic_name: "ks_increases_along_n_sweep".into(),
            value: increases as f64,
            ci_halfwidth: 0.0,
            threshold: 0.0,
            pass: increases == 0,
            sample_size: ctx.n(),
        });
        out.details.insert("ks_by_n".into(), Value::Object(by_n));
    }
    out.details.insert("n".into(), json!(n));
    out.details.insert("brownian_step".into(), json!(tc.b_step));
    out.details.insert("running_min_standard_error".into(), json!(min_se));
    out.dumped = ctx.dump_process(&Process::ReflBm { n }, b_step)?;
    Ok(out)
}

fn example_refl_bm_limit(ctx: &Ctx) -> Res<Outcome> {
    let cfg = ctx.cfg;
    let t = ctx.run.t_end();
    let obs = observation_grid(&ctx.run, &[t])?;
    let b_step = cfg.opt_f64("b-step")?;
    let tc = TimeChangeConfig::with_b_step(b_step.unwrap_or(ctx.run.step()));
    let rows = try_map_indexed(ctx.n(), |i| {
        let (p, low) = refl_bm_limit_min(&obs, ctx.seed(i), &tc)?;
        Ok((p.values()[1], low))
    })?;
    let (xs, mins): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    let level = cfg.f64("min-level")?;
    let below = mins.iter().filter(|&&m| m < level).count();
    let mut out = Outcome::default();
    out.records.push(ks_record(
        "ks_vs_half_normal",
        ks_distance(&xs, |x| half_normal_cdf(x, t))?,
        cfg.opt_f64("ks-threshold")?.unwrap_or(0.05),
        ctx.n(),
    ));
    out.records.push(DiagnosticReport::below(
        "running_min_below_level_rate",
        below as f64 / ctx.n() as f64,
        binomial_halfwidth(below, ctx.n()),
        LIMIT_MIN_RATE,
        ctx.n(),
    ));
    out.details.insert("brownian_step".into(), json!(tc.b_step));
    out.details.insert("running_min_mean".into(), json!(mean_se(&mins).0));
    out.dumped = ctx.dump_process(&Process::ReflBmLimit, b_step)?;
    Ok(out)
}

fn example_poisson(ctx: &Ctx) -> Res<Outcome> {
    let cfg = ctx.cfg;
    let n = ctx.n_param(256)?;
    let t = ctx.run.t_end();
    let times = cfg.list("times")?;
    let mut needed = times.clone();
    needed.push(t);
    let obs = observation_grid(&ctx.run, &needed)?;
    let b_step = cfg.opt_f64("b-step")?;
    let tc = TimeChangeConfig::with_b_step(b_step.unwrap_or(poisson_step(n, &ctx.run)));
    let rows = try_map_indexed(ctx.n(), |i| poisson_prelimit_jumps(n, &obs, ctx.seed(i), &tc))?;
    let last = obs.steps();

    let off = rows
        .iter()
        .filter(|(p, _)| sawtooth(p.values()[last]) > OFF_LATTICE_DISTANCE)
        .count();
    let jumps: usize = rows.iter().map(|(_, j)| j.len()).sum();
    // Gaps are not exponential before the limit, so exposure over jump count
    // on a short horizon is biased. Use complete gaps from the same paths.
    let m = cfg.count("jump-gaps")?;
    if m == 0 {
        return Err(config_err("jump-gaps must be positive").into());
    }
    let gaps = try_map_indexed(ctx.n(), |i| poisson_prelimit_gaps(n, m, ctx.seed(i), &tc))?;
    let gaps: Vec<f64> = gaps.into_iter().flatten().collect();
    let (mean_gap, gap_se) = mean_se(&gaps);

    let prelimit = PathEnsemble::new(obs, rows.into_iter().map(|(p, _)| p).collect(), ctx.master, "poisson")?;
    let reference = acdlab::examples::ensemble_from(&obs, ctx.n(), stream(ctx.master, 1), "sym-poisson", |s| {
        symmetric_poisson(1.0, &obs, s)
    })?;
    let mut fdd = fdd_two_sample(
        &prelimit,
        &reference,
        &times,
        cfg.count("permutations")?,
        stream(ctx.master, 2),
    )?;
    fdd.statistic_name = "fdd_vs_symmetric_poisson_p_value".into();

    let mut out = Outcome::default();
    out.records.push(DiagnosticReport::below(
        "off_lattice_rate",
        off as f64 / ctx.n() as f64,
        binomial_halfwidth(off, ctx.n()),
        OFF_LATTICE_RATE,
        ctx.n(),
    ));
    out.records.push(DiagnosticReport::below(
        "inter_jump_time_mean_error",
        (mean_gap - 1.0).abs(),
        Z99 * gap_se,
        INTER_JUMP_TOLERANCE,
        gaps.len(),
    ));
    out.records.push(fdd);
    out.details.insert("n".into(), json!(n));
    out.details.insert("brownian_step".into(), json!(tc.b_step));
    out.details.insert("inter_jump_time_mean".into(), json!(mean_gap));
    out.details.insert("jumps".into(), json!(jumps));
    out.dumped = ctx.dump_process(&Process::Poisson { n }, b_step)?;
    Ok(out)
}

fn example_sym_poisson(ctx: &Ctx) -> Res<Outcome> {
    let rate = ctx.cfg.f64("rate")?;
    let process = Process::SymPoisson { rate };
    if !(rate > 0.0) {
        return Err(config_err("rate must be positive").into());
    }
    let t = ctx.run.t_end();
    let obs = observation_grid(&ctx.run, &[t])?;
    let xs = try_map_indexed(ctx.n(), |i| Ok(symmetric_poisson(rate, &obs, ctx.seed(i))?.values()[1]))?;
    let n = ctx.n();
    let p0 = symmetric_poisson_zero(rate * t);
    let zeros = xs.iter().filter(|&&x| x == 0.0).count();
    let p_hat = zeros as f64 / n as f64;
    let (m, _) = mean_se(&xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    let (var, var_se) = mean_se(&sq);

    let mut out = Outcome::default();
    out.records.push(consistency(
        "atom_at_zero_error",
        p_hat,
        (p0 * (1.0 - p0) / n as f64).sqrt(),
        p0,
        n,
    ));
    out.records
        .push(consistency("variance_error", var, var_se, rate * t, n));
    out.details.insert("atom_at_zero_exact".into(), json!(p0));
    out.dumped = ctx.dump_process(&process, None)?;
    Ok(out)
}

fn example_planted(ctx: &Ctx) -> Res<Outcome> {
    if !(ctx.run.t_end() > 1.0) {
        return Err(config_err("planted needs --t-end beyond 1").into());
    }
    let obs = observation_grid(&ctx.run, &[0.5])?;
    let k = obs.index_at(0.5)?;
    let xs = try_map_indexed(ctx.n(), |i| {
        Ok(Process::Planted.sample(&obs, None, ctx.seed(i))?.values()[k])
    })?;
    let ks = ks_distance(&xs, |x| x.clamp(0.0, 1.0))?;
    let mut out = Outcome::default();
    out.records
        .push(ks_record("marginal_ks_vs_uniform", ks, ks_critical(ctx.n()), ctx.n()));
    out.dumped = ctx.dump_process(&Process::Planted, None)?;
    Ok(out)
}

fn amplitude_ks(amplitudes: &[f64]) -> acdlab::Result<f64> {
    ks_distance(amplitudes, |x| (2.0 * x).clamp(0.0, 1.0))
}

fn example_cx2d(ctx: &Ctx) -> Res<Outcome> {
    let n = ctx.n_param(1000)?;
    let t = ctx.run.t_end();
    let obs = observation_grid(&ctx.run, &[t])?;
    let b_step = ctx.cfg.opt_f64("b-step")?;
    let tc = TimeChangeConfig::with_b_step(b_step.unwrap_or(poisson_step(n, &ctx.run)));
    let amps = try_map_indexed(ctx.n(), |i| {
        Ok(counterexample_2d_prelimit_with(n, &obs, ctx.seed(i), &tc)?.amplitude)
    })?;
    let mut out = Outcome::default();
    out.records.push(ks_record(
        "amplitude_ks_vs_uniform_half",
        amplitude_ks(&amps)?,
        ks_critical(ctx.n()),
        ctx.n(),
    ));
    out.details.insert("n".into(), json!(n));
    out.dumped = ctx.dump_with(|i| Ok(counterexample_2d_prelimit_with(n, &ctx.run, ctx.seed(i), &tc)?.y_path))?;
    Ok(out)
}

/// Grid steps where the path moves.
fn jump_count(values: &[f64]) -> usize {
    values.windows(2).filter(|w| w[1] != w[0]).count()
}

fn example_cx2d_limit(ctx: &Ctx) -> Res<Outcome> {
    ctx.need_horizon(1.0)?;
    let k1 = ctx.run.index_at(1.0)?;
    let rows = try_map_indexed(ctx.n(), |i| {
        let s = counterexample_2d_limit(&ctx.run, ctx.seed(i))?;
        Ok((jump_count(&s.y_path.values()[..=k1]) as f64, s.amplitude))
    })?;
    let (counts, amps): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    let (m, se) = mean_se(&counts);
    let mut out = Outcome::default();
    out.records.push(DiagnosticReport::below(
        "jump_count_mean_error",
        (m - 1.0).abs(),
        Z99 * se,
        JUMP_COUNT_TOLERANCE,
        ctx.n(),
    ));
    out.records.push(ks_record(
        "amplitude_ks_vs_uniform_half",
        amplitude_ks(&amps)?,
        ks_critical(ctx.n()),
        ctx.n(),
    ));
    out.details.insert("jump_count_mean".into(), json!(m));
    out.dumped = ctx.dump_with(|i| Ok(counterexample_2d_limit(&ctx.run, ctx.seed(i))?.y_path))?;
    Ok(out)
}

fn ac_check(ctx: &Ctx) -> Res<Outcome> {
    let cfg = ctx.cfg;
    let process = ctx.process("process")?;
    if process == Process::Planted && !(ctx.run.t_end() > 1.0) {
        return Err(config_err("planted needs --t-end beyond 1").into());
    }
    let b_step = cfg.opt_f64("b-step")?;
    let pairs = cfg.count("pairs")?;
    let delta = cfg.f64("delta")?;
    let threshold = cfg.f64("threshold")?;
    let gen = |i: usize| -> acdlab::Result<(Path, Path)> {
        Ok((
            process.sample(&ctx.run, b_step, ctx.seed(2 * i))?,
            process.sample(&ctx.run, b_step, ctx.seed(2 * i + 1))?,
        ))
    };
    let mut out = Outcome::default();
    out.records.push(almost_continuity_rate(gen, pairs, delta, threshold)?);
    if let Some(jump) = cfg.opt_f64("jump-threshold")? {
        out.records.push(simultaneous_jump_rate(gen, pairs, jump, threshold)?);
    }
    out.details.insert("process".into(), json!(process.label()));
    out.dumped = ctx.dump_process(&process, b_step)?;
    Ok(out)
}

fn inequality_json(r: &InequalityReport) -> Value {
    json!({
        "params": r.params,
        "lhs": r.lhs_estimate,
        "rhs": r.rhs_estimate,
        "lhs_ci": r.lhs_ci,
        "rhs_ci": r.rhs_ci,
        "satisfied_within_ci": r.satisfied_within_ci,
    })
}

pub fn sweep_tuples() -> Vec<InequalityParams> {
    let mut out = Vec::new();
    for &(s, t) in &SWEEP_TIMES {
        for &a in &SWEEP_A {
            for &(b, c) in &SWEEP_BC {
                for &(d, e) in &SWEEP_DE {
                    out.push(InequalityParams { s, t, a, b, c, d, e });
                }
            }
        }
    }
    out
}

fn ineq_check(ctx: &Ctx) -> Res<Outcome> {
    let cfg = ctx.cfg;
    let sweep = cfg.flag("sweep")?;
    let name = cfg.raw("process").unwrap_or_default();
    let b_step = cfg.opt_f64("b-step")?;
    let mut out = Outcome::default();

    if sweep {
        if name == "violator" {
            return Err(config_err("the violator is built for a single tuple").into());
        }
        ctx.need_horizon(1.0)?;
        let process = ctx.process("process")?;
        let obs = observation_grid(&ctx.run, &[0.25, 0.5, 1.0])?;
        let ens = process.ensemble(&ctx.run, &obs, b_step, ctx.n(), ctx.master)?;
        let reports = sweep_tuples()
            .into_iter()
            .map(|p| crossing_inequality_check(&ens, p))
            .collect::<acdlab::Result<Vec<_>>>()?;
        let ok = reports.iter().filter(|r| r.satisfied_within_ci).count();
        let frac = ok as f64 / reports.len() as f64;
        out.records.push(DiagnosticReport {
            statistic_name: "crossing_inequality_sweep_satisfied_fraction".into(),
            value: frac,
            ci_halfwidth: 0.0,
            threshold: SWEEP_FRACTION,
            pass: frac >= SWEEP_FRACTION,
            sample_size: ctx.n(),
        });
        out.details.insert(
            "tuples".into(),
            Value::Array(reports.iter().map(inequality_json).collect()),
        );
        out.details.insert("process".into(), json!(process.label()));
        out.dumped = ctx.dump_process(&process, b_step)?;
        return Ok(out);
    }

    let p = InequalityParams {
        s: cfg.f64("s")?,
        t: cfg.f64("t")?,
        a: cfg.f64("a")?,
        b: cfg.f64("b")?,
        c: cfg.f64("c")?,
        d: cfg.f64("d")?,
        e: cfg.f64("e")?,
    };
    if !(p.s < p.t) || !(p.b < p.c && p.c <= p.d && p.d < p.e) {
        return Err(config_err("need s < t and b < c <= d < e").into());
    }
    let obs = observation_grid(&ctx.run, &[p.s, p.t])?;
    let ens = if name == "violator" {
        let ens = inequality_violator(&obs, ctx.n(), p.s, p.a, (p.b, p.c), (p.d, p.e))?;
        if let Some(k) = ctx.dump {
            out.dumped = Some(ens.paths()[..k].to_vec());
        }
        ens
    } else {
        let process = ctx.process("process")?;
        out.dumped = ctx.dump_process(&process, b_step)?;
        process.ensemble(&ctx.run, &obs, b_step, ctx.n(), ctx.master)?
    };
    let r = crossing_inequality_check(&ens, p)?;
    out.records.push(DiagnosticReport {
        statistic_name: "crossing_inequality_excess".into(),
        value: r.lhs_estimate - r.rhs_estimate,
        ci_halfwidth: r.lhs_ci + r.rhs_ci,
        threshold: 0.0,
        pass: r.satisfied_within_ci,
        sample_size: r.sample_size,
    });
    out.details.insert("tuple".into(), inequality_json(&r));
    Ok(out)
}

fn fdd_test(ctx: &Ctx) -> Res<Outcome> {
    let cfg = ctx.cfg;
    let a = ctx.process("process-a")?;
    let b = ctx.process("process-b")?;
    let times = cfg.list("times")?;
    let b_step = cfg.opt_f64("b-step")?;
    let obs = observation_grid(&ctx.run, &times)?;
    let ens_a = a.ensemble(&ctx.run, &obs, b_step, ctx.n(), ctx.master)?;
    let ens_b = b.ensemble(&ctx.run, &obs, b_step, ctx.n(), stream(ctx.master, 1))?;
    let mut out = Outcome::default();
    out.records.push(fdd_two_sample(
        &ens_a,
        &ens_b,
        &times,
        cfg.count("permutations")?,
        stream(ctx.master, 2),
    )?);
    out.details.insert("process_a".into(), json!(a.label()));
    out.details.insert("process_b".into(), json!(b.label()));
    out.dumped = ctx.dump_process(&a, b_step)?;
    Ok(out)
}

fn lip_check(ctx: &Ctx) -> Res<Outcome> {
    let cfg = ctx.cfg;
    let process = ctx.process("process")?;
    let (s, t) = (cfg.f64("s")?, cfg.f64("t")?);
    let k = cfg.f64("k")?;
    let b_step = cfg.opt_f64("b-step")?;
    let obs = observation_grid(&ctx.run, &[s, t])?;
    let ens = process.ensemble(&ctx.run, &obs, b_step, ctx.n(), ctx.master)?;
    let lc = LipschitzConfig {
        min_occupancy: cfg.count("min-occupancy")?,
        bootstrap_reps: cfg.count("bootstrap")?,
        seed: stream(ctx.master, 2),
    };
    let est = conditional_lipschitz_estimate(&ens, s, t, |x| x.clamp(-1.0, 1.0), cfg.f64("bin-width")?, k, &lc)?;
    let mut out = Outcome::default();
    if let Some(spec) = process.diffusion() {
        let spec = spec.with_lipschitz_k(k)?;
        let drift = check_one_sided_lipschitz(&spec, &[0.0, s, t], -10.0, 10.0, 201)?;
        out.records.push(DiagnosticReport {
            statistic_name: "one_sided_lipschitz_drift".into(),
            value: drift.worst_violation,
            ci_halfwidth: 0.0,
            threshold: 0.0,
            pass: drift.pass,
            sample_size: drift.tested_pairs as usize,
        });
    }
    out.records.push(est.report.clone());
    out.details.insert("process".into(), json!(process.label()));
    out.details.insert("l_hat".into(), json!(est.l_hat));
    out.details.insert("qualifying_bins".into(), json!(est.qualifying_bins));
    out.dumped = ctx.dump_process(&process, b_step)?;
    Ok(out)
}

fn support_check(ctx: &Ctx) -> Res<Outcome> {
    let cfg = ctx.cfg;
    let process = ctx.process("process")?;
    let time = cfg.opt_f64("time")?.unwrap_or(ctx.run.t_end());
    let b_step = cfg.opt_f64("b-step")?;
    let obs = observation_grid(&ctx.run, &[time])?;
    let ens = process.ensemble(&ctx.run, &obs, b_step, ctx.n(), ctx.master)?;
    let sc = SupportConfig { trim: cfg.f64("trim")? };
    let mut out = Outcome::default();
    out.records
        .push(support_connectedness(&ens, time, cfg.f64("resolution")?, &sc)?);
    out.details.insert("process".into(), json!(process.label()));
    out.dumped = ctx.dump_process(&process, b_step)?;
    Ok(out)
}

fn markov(ctx: &Ctx) -> Res<Outcome> {
    let cfg = ctx.cfg;
    let (t1, t2, t3) = (cfg.f64("t1")?, cfg.f64("t2")?, cfg.f64("t3")?);
    let spec = cfg.raw("process").unwrap_or_default();
    let samples: Vec<Example2DSample> = match spec.split_once(':').map_or(spec.as_str(), |(name, _)| name) {
        "cx2d-limit" => try_map_indexed(ctx.n(), |i| counterexample_2d_limit(&ctx.run, ctx.seed(i)))?,
        "cx2d" => {
            let n = match spec.split_once(':') {
                Some((_, n)) => n.parse().map_err(|_| config_err(format!("bad n in `{spec}`")))?,
                None => ctx.n_param(1000)?,
            };
            let tc = TimeChangeConfig::with_b_step(cfg.opt_f64("b-step")?.unwrap_or(poisson_step(n, &ctx.run)));
            try_map_indexed(ctx.n(), |i| {
                counterexample_2d_prelimit_with(n, &ctx.run, ctx.seed(i), &tc)
            })?
        }
        other => return Err(config_err(format!("markov-probe runs cx2d-limit or cx2d, not `{other}`")).into()),
    };
    let probe = markov_probe(&samples, t1, t2, t3)?;
    let mut out = Outcome::default();
    out.records.push(probe.report.clone());
    out.details.insert("stratum_size".into(), json!(probe.stratum_size));
    out.details.insert("low_mean".into(), json!(probe.low_mean));
    out.details.insert("high_mean".into(), json!(probe.high_mean));
    out.details.insert("standard_error".into(), json!(probe.standard_error));
    if samples.iter().all(|s| s.v_value.is_some()) {
        let strat = markov_probe_stratified(&samples, t1, t2, t3, cfg.count("strata")?)?;
        out.records.push(strat.report.clone());
        let z: Vec<Value> = strat
            .strata
            .iter()
            .map(|p| match p {
                Some(p) => json!(p.difference / p.standard_error),
                None => Value::Null,
            })
            .collect();
        out.details.insert("stratum_z_scores".into(), Value::Array(z));
    }
    if let Some(k) = ctx.dump {
        out.dumped = Some(samples[..k].iter().map(|s| s.y_path.clone()).collect());
    }
    Ok(out)
}
