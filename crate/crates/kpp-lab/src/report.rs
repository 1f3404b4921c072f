//! JSON report envelope shared by the CLI subcommands.
//!
//! Every report carries a `schema_version` so downstream tooling can diff
//! outputs across releases, plus the scenario name and provenance that
//! produced it. The timestamp is optional: suppressing it makes repeated
//! runs byte-identical.

use crate::error::Result;
use crate::scenario::Scenario;
use serde::Serialize;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct Report<T: Serialize> {
    pub schema_version: u32,
    pub command: String,
    pub scenario: String,
    pub provenance: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
    pub results: T,
}

impl<T: Serialize> Report<T> {
    pub fn new(command: &str, scenario: &Scenario, timestamp: bool, results: T) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            scenario: scenario.name.clone(),
            provenance: scenario.provenance.clone(),
            generated_at: timestamp.then(utc_timestamp),
            results,
        }
    }

    /// Pretty JSON with a trailing newline, matching what `write` emits.
    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| crate::error::Error::InvalidInput(format!("JSON encoding: {e}")))?;
        text.push('\n');
        Ok(text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// Current time as `YYYY-MM-DDTHH:MM:SSZ`.
pub fn utc_timestamp() -> String {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0);
    format_utc(secs)
}

/// Civil UTC rendering of a unix timestamp (Howard Hinnant's algorithm).
pub fn format_utc(unix_secs: i64) -> String {
    let days = unix_secs.div_euclid(86_400);
    let rem = unix_secs.rem_euclid(86_400);
    let (y, m, d) = civil_from_days(days);
    format!(
        "{y:04}-{m:02}-{d:02}T{:02}:{:02}:{:02}Z",
        rem / 3600,
        (rem % 3600) / 60,
        rem % 60
    )
}

fn civil_from_days(z: i64) -> (i64, u32, u32) {
    let z = z + 719_468;
    let era = if z >= 0 { z } else { z - 146_096 } / 146_097;
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    (if m <= 2 { y + 1 } else { y }, m, d)
}
