use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};

use crate::UsageError;

/// One recognized key with its default and a short description.
pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

/// Resolved key=value settings for one command.
///
/// Precedence: explicit flags, then `--set`, then the config file, then defaults.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn resolve(keys: &[Key], file: Option<&Path>, sets: &[String], flags: &[(&str, Option<String>)]) -> Result<Self> {
        let mut values: BTreeMap<String, String> = keys.iter().map(|k| (k.name.to_string(), k.default.to_string())).collect();
        let mut apply = |k: &str, v: &str, origin: &str| -> Result<()> {
            match values.get_mut(k) {
                Some(slot) => {
                    *slot = v.to_string();
                    Ok(())
                }
                None => Err(UsageError(format!("unknown config key '{k}' ({origin})")).into()),
            }
        };
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            for (k, v) in parse_pairs(&text)? {
                apply(&k, &v, &path.display().to_string())?;
            }
        }
        for s in sets {
            let (k, v) = split_pair(s).ok_or_else(|| UsageError(format!("--set expects KEY=VALUE, got '{s}'")))?;
            apply(k, v, "--set")?;
        }
        for (k, v) in flags {
            if let Some(v) = v {
                apply(k, v, "flag")?;
            }
        }
        Ok(Self { values })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.values.get(key).ok_or_else(|| UsageError(format!("missing config key '{key}'")))?;
        raw.parse().map_err(|_| UsageError(format!("bad value for '{key}': '{raw}'")).into())
    }

    pub fn str(&self, key: &str) -> &str {
        self.values.get(key).map_or("", String::as_str)
    }

    pub fn map(&self) -> &BTreeMap<String, String> {
        &self.values
    }

}

fn split_pair(s: &str) -> Option<(&str, &str)> {
    let (k, v) = s.split_once('=')?;
    let k = k.trim();
    (!k.is_empty()).then(|| (k, v.trim()))
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match split_pair(line) {
            Some((k, v)) => out.push((k.to_string(), v.to_string())),
            None => bail!(UsageError(format!("config line {}: expected key = value", i + 1))),
        }
    }
    Ok(out)
}

pub fn describe(keys: &[Key]) -> String {
    let width = keys.iter().map(|k| k.name.len()).max().unwrap_or(0);
    keys.iter().map(|k| format!("  {:width$}  {} (default {})\n", k.name, k.help, k.default)).collect()
}
