//! Batch front end for the acdlab library.
//!
//! `acdlab <command> [example] --key value ...` runs one pipeline, writes a
//! JSON report (to `--out` or stdout) and optionally a CSV dump of the first
//! paths (`--dump`). A `--config` file of `key = value` lines supplies the
//! same keys; flags override it.
//!
//! Exit status: 0 when every record passes, 1 when some record fails or a
//! diagnostic could not be computed, 2 for an invalid configuration, 3 for a
//! numerical blowup or an exhausted clock.

// `!(x > 0.0)` style guards reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod pipelines;
pub mod process;
pub mod report;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::time::Instant;

use clap::{Arg, ArgAction};

pub use config::{Command, ConfigError, ExecOptions, RunConfig, Scalar};
pub use report::{Report, ReportError, EXIT_CONFIG, EXIT_FAIL, EXIT_NUMERICAL, EXIT_PASS};

use pipelines::PipelineError;

fn cli() -> clap::Command {
    let mut app = clap::Command::new("acdlab")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Monte Carlo checks for time-changed diffusions and their weak limits")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for command in Command::ALL {
        let mut sub = clap::Command::new(command.name()).about(command.about());
        if command == Command::Example {
            sub = sub.arg(
                Arg::new("name")
                    .required(true)
                    .value_parser(config::EXAMPLES)
                    .help("Which construction to run"),
            );
        }
        sub = sub.arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("File of `key = value` lines; flags override it"),
        );
        let keys = config::COMMON_KEYS
            .iter()
            .copied()
            .chain(command.keys().iter().map(|(k, _)| *k));
        for key in keys {
            let mut arg = Arg::new(key)
                .long(key)
                .value_name("VALUE")
                .action(ArgAction::Set)
                .allow_negative_numbers(true);
            if let Some((_, Some(default))) = command.keys().iter().find(|(k, _)| *k == key) {
                arg = arg.help(format!("[default: {default}]"));
            }
            sub = sub.arg(arg);
        }
        app = app.subcommand(sub);
    }
    app
}

/// Parses arguments and the optional config file into a validated config.
pub fn parse_args<I, T>(args: I) -> Result<(RunConfig, ExecOptions), ParseOutcome>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = cli().try_get_matches_from(args).map_err(ParseOutcome::Clap)?;
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let command = Command::parse(name).expect("subcommands come from the table");
    let mut values = BTreeMap::new();
    if let Some(file) = sub.get_one::<String>("config") {
        let text = fs::read_to_string(file)
            .map_err(|e| ParseOutcome::Config(ConfigError(format!("cannot read {file}: {e}"))))?;
        for (k, v) in config::parse_config_text(&text).map_err(ParseOutcome::Config)? {
            values.insert(k, v);
        }
    }
    for id in sub.ids() {
        let key = id.as_str();
        if key == "config" || key == "name" {
            continue;
        }
        if let Some(v) = sub.get_one::<String>(key) {
            values.insert(key.to_string(), v.clone());
        }
    }
    let example = sub.try_get_one::<String>("name").ok().flatten().cloned();
    RunConfig::from_map(command, example, &values).map_err(ParseOutcome::Config)
}

/// Why [`parse_args`] did not produce a config.
#[derive(Debug)]
pub enum ParseOutcome {
    /// Usage errors, and also `--help` / `--version`.
    Clap(clap::Error),
    Config(ConfigError),
}

/// Runs the pipeline of `cfg`, on a dedicated pool when `exec.threads` is
/// set, and writes the CSV dump if one was requested.
pub fn run(cfg: &RunConfig, exec: &ExecOptions) -> Report {
    let start = Instant::now();
    let mut report = Report::new(cfg.clone());
    let dump = exec.dump.as_ref().map(|_| exec.dump_paths);
    let body = || pipelines::execute(cfg, dump);
    let result = match exec.threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(body),
            Err(e) => Err(PipelineError::Config(ConfigError(format!("thread pool: {e}")))),
        },
        None => body(),
    };
    match result {
        Ok(out) => {
            report.records = out.records;
            report.details = out.details;
            if let (Some(file), Some(paths)) = (&exec.dump, out.dumped) {
                let written = fs::File::create(file).and_then(|f| report::write_csv(BufWriter::new(f), &paths));
                if let Err(e) = written {
                    report.error = Some(ReportError::config(format!("cannot write {}: {e}", file.display())));
                }
            }
        }
        Err(PipelineError::Config(e)) => report.error = Some(ReportError::config(e.0)),
        Err(PipelineError::Core(e)) => report.error = Some(ReportError::from_core(&e)),
    }
    report.finish();
    report.wall_time_seconds = start.elapsed().as_secs_f64();
    report
}

/// Whole program: parse, run, write the report. Returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let (cfg, exec) = match parse_args(args) {
        Ok(v) => v,
        Err(ParseOutcome::Clap(e)) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
        }
        Err(ParseOutcome::Config(e)) => {
            eprintln!("acdlab: {e}");
            return EXIT_CONFIG;
        }
    };
    let report = run(&cfg, &exec);
    if let Some(e) = &report.error {
        eprintln!("acdlab: {}", e.message);
    }
    let json = report.to_json();
    let written = match &exec.out {
        Some(path) => fs::write(path, json + "\n"),
        None => {
            let mut stdout = io::stdout().lock();
            writeln!(stdout, "{json}").and_then(|_| stdout.flush())
        }
    };
    if let Err(e) = written {
        eprintln!("acdlab: cannot write report: {e}");
        return EXIT_CONFIG;
    }
    report.exit_status()
}
