//! Config resolution shared by all verbs: CLI flag > config file > built-in
//! default. Every run writes the merged result as a snapshot next to its
//! outputs, so a run is reproducible from the snapshot alone.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

/// Verb failures split by exit code: usage errors exit 2, runtime errors 1.
#[derive(Debug)]
pub enum CliErr {
    Usage(String),
    Runtime(anyhow::Error),
}

impl CliErr {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliErr::Usage(msg.into())
    }
}

impl From<ksadapt_core::Error> for CliErr {
    fn from(e: ksadapt_core::Error) -> Self {
        CliErr::Runtime(e.into())
    }
}

impl From<std::io::Error> for CliErr {
    fn from(e: std::io::Error) -> Self {
        CliErr::Runtime(e.into())
    }
}

impl From<serde_json::Error> for CliErr {
    fn from(e: serde_json::Error) -> Self {
        CliErr::Runtime(e.into())
    }
}

pub type CliResult<T> = Result<T, CliErr>;

/// Loads the optional per-verb config file (a flat JSON object whose keys
/// mirror the flag names).
pub fn load_config_file(path: &Option<PathBuf>) -> CliResult<Option<Value>> {
    match path {
        None => Ok(None),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliErr::usage(format!("cannot read config {}: {e}", p.display())))?;
            let v: Value = serde_json::from_str(&text)
                .map_err(|e| CliErr::usage(format!("bad config {}: {e}", p.display())))?;
            if !v.is_object() {
                return Err(CliErr::usage(format!(
                    "config {} must be a JSON object",
                    p.display()
                )));
            }
            Ok(Some(v))
        }
    }
}

pub fn file_str(file: &Option<Value>, key: &str) -> Option<String> {
    file.as_ref()?.get(key)?.as_str().map(str::to_owned)
}

pub fn file_path(file: &Option<Value>, key: &str) -> Option<PathBuf> {
    file_str(file, key).map(PathBuf::from)
}

pub fn file_f64(file: &Option<Value>, key: &str) -> Option<f64> {
    file.as_ref()?.get(key)?.as_f64()
}

pub fn file_u64(file: &Option<Value>, key: &str) -> Option<u64> {
    file.as_ref()?.get(key)?.as_u64()
}

pub fn file_usize(file: &Option<Value>, key: &str) -> Option<usize> {
    file_u64(file, key).map(|v| v as usize)
}

pub fn file_bool(file: &Option<Value>, key: &str) -> Option<bool> {
    file.as_ref()?.get(key)?.as_bool()
}

pub fn file_value(file: &Option<Value>, key: &str) -> Option<Value> {
    file.as_ref()?.get(key).cloned()
}

pub fn required<T>(v: Option<T>, flag: &str) -> CliResult<T> {
    v.ok_or_else(|| CliErr::usage(format!("missing required --{flag}")))
}

/// Snapshot location: `<dir>/config.json` for directory outputs,
/// `<stem>.config.json` next to file outputs.
pub fn snapshot_path(primary_output: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        primary_output.join("config.json")
    } else {
        primary_output.with_extension("config.json")
    }
}

/// Writes the resolved config (verb name + parameters) as pretty JSON.
/// Thread count is deliberately excluded: outputs are thread-independent.
pub fn write_snapshot<T: Serialize>(verb: &str, resolved: &T, path: &Path) -> CliResult<()> {
    let mut doc = serde_json::to_value(resolved)?;
    if let Value::Object(map) = &mut doc {
        map.insert("verb".into(), Value::String(verb.into()));
    }
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, &doc)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}
