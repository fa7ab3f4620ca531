//! Run configuration file: TOML with an `[inputs]` table and a `[run]` table,
//! plus `key=value` overrides applied before deserialization so that unknown
//! keys are rejected either way.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chainsynth::pipeline::RunConfig;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub roster: PathBuf,
    pub stats: PathBuf,
    /// Diary CSV whose chains become few-shot examples. Built-in examples
    /// are used when absent.
    #[serde(default)]
    pub few_shot_diary: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub inputs: Inputs,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub output: Option<Output>,
}

/// Parses `key=value`. The value is read as a TOML value when possible and
/// as a bare string otherwise.
pub fn parse_override(s: &str) -> Result<(String, toml::Value), String> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got '{s}'"))?;
    let key = key.trim();
    if key.is_empty() {
        return Err("empty key in override".into());
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

fn apply_override(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("split yields at least one part");
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => bail!("override {key}: '{p}' is not a table"),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

impl FileConfig {
    /// Loads `path`, applies overrides, and resolves input paths relative to
    /// the file's directory.
    pub fn load(path: &Path, overrides: &[(String, toml::Value)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut table: toml::Table = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        for (k, v) in overrides {
            apply_override(&mut table, k, v.clone())?;
        }
        let mut cfg: FileConfig = toml::Value::Table(table)
            .try_into()
            .with_context(|| format!("invalid configuration in {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.inputs.roster);
        resolve(&mut cfg.inputs.stats);
        if let Some(p) = cfg.inputs.few_shot_diary.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.output.as_mut().and_then(|o| o.dir.as_mut()) {
            resolve(p);
        }
        Ok(cfg)
    }
}
