//! Bundle assembly and emission. Bundles are serde_json `Value` trees whose
//! maps are BTree-backed, so identical configs serialize to identical bytes;
//! nothing time- or host-dependent may be inserted here.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use ozcheck_core::report::RelationReport;
use serde_json::{json, Value};

pub fn bundle(command: &str, config: Value, pass: bool, parts: Vec<(&str, Value)>) -> Value {
    let mut v = json!({
        "schema": 1,
        "command": command,
        "config": config,
        "pass": pass,
    });
    for (key, part) in parts {
        v[key] = part;
    }
    v
}

pub fn reports_value(reports: &BTreeMap<String, RelationReport>) -> Value {
    serde_json::to_value(reports).expect("reports serialize")
}

/// Qualified names of all failing entries, for the exit-1 message.
pub fn failing_names(reports: &BTreeMap<String, RelationReport>) -> Vec<String> {
    let mut out = Vec::new();
    for (key, report) in reports {
        for name in report.failing() {
            out.push(format!("{key}.{name}"));
        }
    }
    out
}

/// Write the bundle to `<dir>/bundle.json`, or print it to stdout when no
/// directory is given. Returns the written path for the stderr summary.
pub fn emit(value: &Value, out: Option<&Path>) -> io::Result<Option<PathBuf>> {
    let text = format!("{}\n", serde_json::to_string_pretty(value)?);
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join("bundle.json");
            fs::write(&path, text)?;
            Ok(Some(path))
        }
        None => {
            print!("{text}");
            Ok(None)
        }
    }
}

/// One CSV file of (t, residual) rows per relation entry that carries a
/// per-fibre curve.
pub fn write_csv_curves(
    reports: &BTreeMap<String, RelationReport>,
    dir: &Path,
) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (key, report) in reports {
        for (name, entry) in &report.entries {
            let Some(curve) = &entry.curve else { continue };
            let mut text = String::from("t,residual\n");
            for (t, r) in curve {
                text.push_str(&format!("{t},{r}\n"));
            }
            let path = dir.join(format!("{key}.{name}.csv"));
            fs::write(&path, text)?;
            written.push(path);
        }
    }
    Ok(written)
}
