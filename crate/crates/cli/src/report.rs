//! JSON report and CSV dumps.

use std::io::{self, Write};

use acdlab::diagnostics::DiagnosticReport;
use acdlab::Path;
use serde::Serialize;

use crate::config::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportError {
    /// `invalid_config`, `numerical_blowup`, `clock_exhausted` or `diagnostic`.
    pub kind: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path_index: Option<usize>,
}

impl ReportError {
    pub fn from_core(e: &acdlab::Error) -> Self {
        use acdlab::Error as E;
        let kind = match e {
            E::NumericalBlowup { .. } => "numerical_blowup",
            E::ClockExhausted { .. } => "clock_exhausted",
            E::InvalidArgument(_) | E::OutOfRange { .. } | E::Horizon { .. } => "invalid_config",
            _ => "diagnostic",
        };
        Self {
            kind: kind.into(),
            message: e.to_string(),
            path_index: e.path_index(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: "invalid_config".into(),
            message: message.into(),
            path_index: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub version: String,
    pub config: RunConfig,
    pub records: Vec<DiagnosticReport>,
    /// Supporting numbers that carry no verdict of their own.
    pub details: serde_json::Map<String, serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ReportError>,
    pub pass: bool,
    pub wall_time_seconds: f64,
}

impl Report {
    pub fn new(config: RunConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: config.command.name().into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config,
            records: Vec::new(),
            details: serde_json::Map::new(),
            error: None,
            pass: false,
            wall_time_seconds: 0.0,
        }
    }

    /// Sets `pass`: no error, at least one record, every record passing.
    pub fn finish(&mut self) {
        self.pass = self.error.is_none() && !self.records.is_empty() && self.records.iter().all(|r| r.pass);
    }

    pub fn exit_status(&self) -> i32 {
        match &self.error {
            Some(e) if e.kind == "invalid_config" => EXIT_CONFIG,
            Some(e) if e.kind == "numerical_blowup" || e.kind == "clock_exhausted" => EXIT_NUMERICAL,
            _ if self.pass => EXIT_PASS,
            _ => EXIT_FAIL,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// The report with the wall time zeroed, for comparing runs.
pub fn without_wall_time(json: &str) -> serde_json::Result<String> {
    let mut v: serde_json::Value = serde_json::from_str(json)?;
    if let Some(obj) = v.as_object_mut() {
        obj.insert("wall_time_seconds".into(), serde_json::Value::from(0.0));
    }
    serde_json::to_string_pretty(&v)
}

/// `path_index,t,value` rows with 17 significant digits.
pub fn write_csv(mut w: impl Write, paths: &[Path]) -> io::Result<()> {
    writeln!(w, "path_index,t,value")?;
    for (i, p) in paths.iter().enumerate() {
        for (t, v) in p.grid().nodes().zip(p.values()) {
            writeln!(w, "{i},{t:.16e},{v:.16e}")?;
        }
    }
    w.flush()
}
