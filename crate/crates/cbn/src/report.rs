//! Report emission: JSON documents with run metadata plus CSV tables.
//!
//! Every output embeds the config hash, master seed, toolkit version and
//! wall clock.  All timing fields are named `wall_clock_secs`, so two runs
//! with the same (config, seed, version) triple are byte-identical once
//! those fields are stripped — regardless of `--threads`.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::Result;

/// Run metadata attached to every output file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Meta {
    pub toolkit_version: String,
    /// SHA-256 of the resolved config JSON.
    pub config_hash: String,
    pub master_seed: u64,
    /// Unix time of emission; the only nondeterministic field.
    pub wall_clock_secs: f64,
}

impl Meta {
    pub fn new(config: &RunConfig, master_seed: u64) -> Self {
        Self {
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash(config),
            master_seed,
            wall_clock_secs: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs_f64())
                .unwrap_or(0.0),
        }
    }
}

/// SHA-256 hex digest of the canonical (serde) JSON form of a config.
pub fn config_hash(config: &RunConfig) -> String {
    let json = serde_json::to_string(config).expect("config serialization cannot fail");
    let digest = Sha256::digest(json.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// A complete JSON report: metadata, resolved config, and a payload.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub meta: Meta,
    pub config: RunConfig,
    pub payload: Value,
}

impl Report {
    pub fn new(config: &RunConfig, master_seed: u64, payload: Value) -> Self {
        Self {
            meta: Meta::new(config, master_seed),
            config: config.clone(),
            payload,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Remove every `wall_clock_secs` field, recursively.  Used to compare
/// reports for byte-identical reproducibility.
pub fn strip_wall_clock(value: &mut Value) {
    match value {
        Value::Object(map) => {
            map.remove("wall_clock_secs");
            for v in map.values_mut() {
                strip_wall_clock(v);
            }
        }
        Value::Array(items) => {
            for v in items {
                strip_wall_clock(v);
            }
        }
        _ => {}
    }
}

/// Canonical comparable form of a report file: parsed, wall clock
/// stripped, re-serialized.
pub fn comparable_form(text: &str) -> Result<String> {
    let mut value: Value = serde_json::from_str(text)?;
    strip_wall_clock(&mut value);
    Ok(serde_json::to_string_pretty(&value)?)
}

/// Write a CSV table with a fixed header.  Fields containing commas or
/// quotes are quoted per RFC 4180.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let escaped: Vec<String> = row.iter().map(|f| escape_csv(f)).collect();
        out.push_str(&escaped.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn escape_csv(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Format a float for CSV with full round-trip precision.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}
