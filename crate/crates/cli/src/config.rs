//! Run configuration: command table, config files and validation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid configuration: {0}")]
pub struct ConfigError(pub String);

pub(crate) fn config_err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Example,
    AcCheck,
    IneqCheck,
    FddTest,
    LipCheck,
    SupportCheck,
    MarkovProbe,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Simulate,
        Command::Example,
        Command::AcCheck,
        Command::IneqCheck,
        Command::FddTest,
        Command::LipCheck,
        Command::SupportCheck,
        Command::MarkovProbe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Example => "example",
            Command::AcCheck => "ac-check",
            Command::IneqCheck => "ineq-check",
            Command::FddTest => "fdd-test",
            Command::LipCheck => "lip-check",
            Command::SupportCheck => "support-check",
            Command::MarkovProbe => "markov-probe",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    pub fn about(self) -> &'static str {
        match self {
            Command::Simulate => "Euler-Maruyama ensemble of a diffusion, checked against its exact law",
            Command::Example => "Simulate one of the example constructions and check its limit law",
            Command::AcCheck => "Rate of crossings without touching between independent copies",
            Command::IneqCheck => "Two-time crossing inequality, for one tuple or the standard sweep",
            Command::FddTest => "Energy permutation test between the fdds of two processes",
            Command::LipCheck => "Binned Lipschitz estimate of x -> E[g(X_t) | X_s = x]",
            Command::SupportCheck => "Gaps in the support of a one-time marginal",
            Command::MarkovProbe => "Hidden-state probe on the two-dimensional example",
        }
    }

    /// Command-specific keys with their defaults; `None` means optional.
    pub fn keys(self) -> &'static [(&'static str, Option<&'static str>)] {
        match self {
            Command::Simulate => &[
                ("process", Some("brownian")),
                ("x0", Some("0")),
                ("sigma", Some("1")),
                ("kappa", Some("1")),
                ("theta", Some("0")),
                ("ks-threshold", None),
            ],
            Command::Example => &[
                ("n", None),
                ("n-sweep", None),
                ("rate", Some("1")),
                ("b-step", None),
                ("ks-threshold", None),
                ("min-mean", Some("-0.2")),
                ("min-level", Some("-0.05")),
                ("times", Some("0.5,1")),
                ("permutations", Some("199")),
                ("jump-gaps", Some("5")),
            ],
            Command::AcCheck => &[
                ("process", Some("planted")),
                ("n", None),
                ("rate", Some("1")),
                ("b-step", None),
                ("x0", Some("0")),
                ("sigma", Some("1")),
                ("kappa", Some("1")),
                ("theta", Some("0")),
                ("pairs", Some("10000")),
                ("delta", Some("0.01")),
                ("threshold", Some("0.01")),
                ("jump-threshold", None),
            ],
            Command::IneqCheck => &[
                ("process", Some("refl-bm-limit")),
                ("n", None),
                ("rate", Some("1")),
                ("b-step", None),
                ("x0", Some("0")),
                ("sigma", Some("1")),
                ("kappa", Some("1")),
                ("theta", Some("0")),
                ("sweep", Some("false")),
                ("s", Some("0.5")),
                ("t", Some("1")),
                ("a", Some("0.5")),
                ("b", Some("0.1")),
                ("c", Some("0.3")),
                ("d", Some("0.6")),
                ("e", Some("1")),
            ],
            Command::FddTest => &[
                ("process-a", Some("refl-bm-limit")),
                ("process-b", Some("abs-bm")),
                ("n", None),
                ("rate", Some("1")),
                ("b-step", None),
                ("x0", Some("0")),
                ("sigma", Some("1")),
                ("kappa", Some("1")),
                ("theta", Some("0")),
                ("times", Some("0.5,1")),
                ("permutations", Some("199")),
            ],
            Command::LipCheck => &[
                ("process", Some("brownian")),
                ("n", None),
                ("rate", Some("1")),
                ("b-step", None),
                ("x0", Some("0")),
                ("sigma", Some("1")),
                ("kappa", Some("1")),
                ("theta", Some("0")),
                ("s", Some("0.5")),
                ("t", Some("1")),
                ("bin-width", Some("0.1")),
                ("k", Some("0")),
                ("bootstrap", Some("200")),
                ("min-occupancy", Some("50")),
            ],
            Command::SupportCheck => &[
                ("process", Some("refl-bm-limit")),
                ("n", None),
                ("rate", Some("1")),
                ("b-step", None),
                ("x0", Some("0")),
                ("sigma", Some("1")),
                ("kappa", Some("1")),
                ("theta", Some("0")),
                ("time", None),
                ("resolution", Some("0.05")),
                ("trim", Some("0.001")),
            ],
            Command::MarkovProbe => &[
                ("process", Some("cx2d-limit")),
                ("n", None),
                ("b-step", None),
                ("t1", Some("0.5")),
                ("t2", Some("1")),
                ("t3", Some("2")),
                ("strata", Some("200")),
            ],
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Keys shared by every command. `threads`, `out`, `dump` and `dump-paths`
/// steer execution and are not part of the echoed experiment.
pub const COMMON_KEYS: [&str; 8] = [
    "seed",
    "paths",
    "t-end",
    "steps",
    "threads",
    "out",
    "dump",
    "dump-paths",
];

pub const EXAMPLES: [&str; 7] = [
    "refl-bm",
    "refl-bm-limit",
    "poisson",
    "sym-poisson",
    "planted",
    "cx2d",
    "cx2d-limit",
];

/// A parameter value: integers stay integers in the JSON echo.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Scalar {
    Int(i64),
    Real(f64),
    Text(String),
}

impl Scalar {
    pub fn parse(raw: &str) -> Self {
        let raw = raw.trim();
        if let Ok(i) = raw.parse::<i64>() {
            Scalar::Int(i)
        } else if let Ok(x) = raw.parse::<f64>() {
            Scalar::Real(x)
        } else {
            Scalar::Text(raw.to_string())
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Int(i) => write!(f, "{i}"),
            Scalar::Real(x) => write!(f, "{x}"),
            Scalar::Text(s) => f.write_str(s),
        }
    }
}

/// Everything that determines the report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub example: Option<String>,
    pub seed: u64,
    pub n_paths: usize,
    pub t_end: f64,
    pub steps: usize,
    pub params: BTreeMap<String, Scalar>,
}

/// Execution settings that must not change the report.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExecOptions {
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub dump: Option<PathBuf>,
    pub dump_paths: usize,
}

/// Flat `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| config_err(format!("line {}: expected `key = value`", no + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(config_err(format!("line {}: empty key", no + 1)));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

/// Keys each example reads, out of the `example` table.
pub fn example_keys(name: &str) -> &'static [&'static str] {
    match name {
        "refl-bm" => &["n", "n-sweep", "b-step", "ks-threshold", "min-mean"],
        "refl-bm-limit" => &["b-step", "ks-threshold", "min-level"],
        "poisson" => &["n", "b-step", "times", "permutations", "jump-gaps"],
        "sym-poisson" => &["rate"],
        "cx2d" => &["n", "b-step"],
        _ => &[],
    }
}

fn is_known(command: Command, example: Option<&str>, key: &str) -> bool {
    if COMMON_KEYS.contains(&key) {
        return true;
    }
    match example {
        Some(name) => example_keys(name).contains(&key),
        None => command.keys().iter().any(|(k, _)| *k == key),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T, ConfigError> {
    raw.trim()
        .parse()
        .map_err(|_| config_err(format!("--{key}: cannot parse `{raw}`")))
}

fn positive_count(key: &str, raw: &str) -> Result<usize, ConfigError> {
    let v: usize = parse_num(key, raw)?;
    if v == 0 {
        return Err(config_err(format!("--{key} must be positive")));
    }
    Ok(v)
}

/// Processes that need a horizon beyond 1 get 2 by default.
fn default_t_end(command: Command, example: Option<&str>, values: &BTreeMap<String, String>) -> &'static str {
    let default_process = command
        .keys()
        .iter()
        .find(|(k, _)| *k == "process")
        .and_then(|(_, d)| *d);
    let process = values.get("process").map(String::as_str).or(default_process);
    let planted = example == Some("planted") || process == Some("planted");
    if planted || command == Command::MarkovProbe {
        "2"
    } else {
        "1"
    }
}

impl RunConfig {
    /// Builds a validated configuration from merged `key -> raw value`
    /// pairs. Unknown keys and missing seeds are errors; command keys with a
    /// default are filled in so that the echo is complete.
    pub fn from_map(
        command: Command,
        example: Option<String>,
        values: &BTreeMap<String, String>,
    ) -> Result<(RunConfig, ExecOptions), ConfigError> {
        match (command, example.as_deref()) {
            (Command::Example, Some(name)) if EXAMPLES.contains(&name) => {}
            (Command::Example, Some(name)) => return Err(config_err(format!("unknown example `{name}`"))),
            (Command::Example, None) => return Err(config_err("example needs a name")),
            (_, Some(_)) => return Err(config_err(format!("{command} takes no example name"))),
            (_, None) => {}
        }
        for key in values.keys() {
            if !is_known(command, example.as_deref(), key) {
                let what = example.as_deref().unwrap_or(command.name());
                return Err(config_err(format!("unknown key `{key}` for {what}")));
            }
        }
        let get = |k: &str| values.get(k).map(String::as_str);

        let seed: u64 = parse_num("seed", get("seed").ok_or_else(|| config_err("--seed is required"))?)?;
        let n_paths = positive_count("paths", get("paths").unwrap_or("10000"))?;
        let steps_default = if command == Command::MarkovProbe { "200" } else { "1000" };
        let steps = positive_count("steps", get("steps").unwrap_or(steps_default))?;
        let t_end: f64 = parse_num(
            "t-end",
            get("t-end").unwrap_or(default_t_end(command, example.as_deref(), values)),
        )?;
        if !(t_end > 0.0) || !t_end.is_finite() {
            return Err(config_err("--t-end must be positive and finite"));
        }

        let exec = ExecOptions {
            threads: get("threads").map(|v| positive_count("threads", v)).transpose()?,
            out: get("out").map(PathBuf::from),
            dump: get("dump").map(PathBuf::from),
            dump_paths: get("dump-paths")
                .map(|v| positive_count("dump-paths", v))
                .transpose()?
                .unwrap_or(10),
        };

        let mut params = BTreeMap::new();
        for (key, default) in command.keys() {
            if let Some(name) = example.as_deref() {
                if !example_keys(name).contains(key) {
                    continue;
                }
            }
            if let Some(raw) = get(key).or(*default) {
                params.insert(key.to_string(), Scalar::parse(raw));
            }
        }
        let cfg = RunConfig {
            command,
            example,
            seed,
            n_paths,
            t_end,
            steps,
            params,
        };
        Ok((cfg, exec))
    }

    pub fn raw(&self, key: &str) -> Option<String> {
        self.params.get(key).map(Scalar::to_string)
    }

    pub fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        let v = match self.params.get(key) {
            Some(Scalar::Int(i)) => *i as f64,
            Some(Scalar::Real(x)) => *x,
            Some(Scalar::Text(s)) => return Err(config_err(format!("--{key}: `{s}` is not a number"))),
            None => return Err(config_err(format!("--{key} is required here"))),
        };
        if !v.is_finite() {
            return Err(config_err(format!("--{key} must be finite")));
        }
        Ok(v)
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.params.get(key).map(|_| self.f64(key)).transpose()
    }

    pub fn count(&self, key: &str) -> Result<usize, ConfigError> {
        match self.params.get(key) {
            Some(Scalar::Int(i)) if *i > 0 => Ok(*i as usize),
            Some(v) => Err(config_err(format!("--{key} must be a positive integer, got `{v}`"))),
            None => Err(config_err(format!("--{key} is required here"))),
        }
    }

    pub fn opt_count(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.params.get(key).map(|_| self.count(key)).transpose()
    }

    pub fn flag(&self, key: &str) -> Result<bool, ConfigError> {
        match self.raw(key).as_deref() {
            None | Some("false") | Some("0") => Ok(false),
            Some("true") | Some("1") => Ok(true),
            Some(v) => Err(config_err(format!("--{key}: expected true or false, got `{v}`"))),
        }
    }

    /// Comma-separated numbers.
    pub fn list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let raw = self
            .raw(key)
            .ok_or_else(|| config_err(format!("--{key} is required here")))?;
        raw.split(',').map(|s| parse_num::<f64>(key, s)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn config_text_round_trip() {
        let kv = parse_config_text("# run\nseed = 7\n\npaths=100  # small\n").unwrap();
        assert_eq!(kv, vec![("seed".into(), "7".into()), ("paths".into(), "100".into())]);
        assert!(parse_config_text("seed 7").is_err());
        assert!(parse_config_text(" = 7").is_err());
    }

    #[test]
    fn seed_is_required_and_counts_are_positive() {
        assert!(RunConfig::from_map(Command::Simulate, None, &map(&[])).is_err());
        assert!(RunConfig::from_map(Command::Simulate, None, &map(&[("seed", "1"), ("steps", "0")])).is_err());
        assert!(RunConfig::from_map(Command::Simulate, None, &map(&[("seed", "1"), ("paths", "-3")])).is_err());
        assert!(RunConfig::from_map(Command::Simulate, None, &map(&[("seed", "1"), ("t-end", "0")])).is_err());
        let (cfg, exec) = RunConfig::from_map(Command::Simulate, None, &map(&[("seed", "1")])).unwrap();
        assert_eq!((cfg.n_paths, cfg.steps, cfg.t_end), (10_000, 1000, 1.0));
        assert_eq!(exec.dump_paths, 10);
    }

    #[test]
    fn unknown_keys_and_examples_are_rejected() {
        assert!(RunConfig::from_map(Command::Simulate, None, &map(&[("seed", "1"), ("delta", "1")])).is_err());
        let ex = |name: &str| RunConfig::from_map(Command::Example, Some(name.into()), &map(&[("seed", "1")]));
        assert!(ex("nope").is_err());
        assert!(ex("refl-bm").is_ok());
        assert_eq!(ex("planted").unwrap().0.t_end, 2.0);
        assert!(ex("planted").unwrap().0.params.is_empty());
        let bad = RunConfig::from_map(
            Command::Example,
            Some("planted".into()),
            &map(&[("seed", "1"), ("n", "4")]),
        );
        assert!(bad.is_err());
    }

    #[test]
    fn defaults_fill_the_echo_and_integers_stay_integers() {
        let (cfg, _) = RunConfig::from_map(Command::AcCheck, None, &map(&[("seed", "7"), ("delta", "0.25")])).unwrap();
        assert_eq!(cfg.params["pairs"], Scalar::Int(10_000));
        assert_eq!(cfg.params["delta"], Scalar::Real(0.25));
        assert_eq!(cfg.params["process"], Scalar::Text("planted".into()));
        assert!(!cfg.params.contains_key("jump-threshold"));
        assert_eq!(cfg.t_end, 2.0);
        assert_eq!(cfg.count("pairs").unwrap(), 10_000);
        assert!(cfg.count("delta").is_err());
    }

    #[test]
    fn lists_and_flags() {
        let (cfg, _) =
            RunConfig::from_map(Command::IneqCheck, None, &map(&[("seed", "1"), ("sweep", "true")])).unwrap();
        assert!(cfg.flag("sweep").unwrap());
        let (cfg, _) = RunConfig::from_map(Command::FddTest, None, &map(&[("seed", "1")])).unwrap();
        assert_eq!(cfg.list("times").unwrap(), vec![0.5, 1.0]);
    }
}
