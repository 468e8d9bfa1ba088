// SPDX-License-Identifier: Apache-2.0

//! Config files, flag overrides and run manifests.
//!
//! A config file is TOML with one table per subcommand (`[gen]`, `[train]`, …)
//! whose keys are the long flag names with `-` replaced by `_`. A top-level
//! `seed` applies to every subcommand that takes one. Flags win over the file.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Settings of one subcommand after merging the config file and the flags.
pub struct Resolved<T> {
    pub args: T,
    pub table: toml::Table,
}

pub fn load(path: Option<&Path>) -> Result<toml::Table, CliError> {
    let Some(path) = path else {
        return Ok(toml::Table::new());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::new(format!("{}: {e}", path.display())))?;
    text.parse::<toml::Table>()
        .map_err(|e| CliError::new(format!("{}: {e}", path.display())))
}

pub fn resolve<T: Serialize + DeserializeOwned>(
    flags: &T,
    file: &toml::Table,
    section: &str,
) -> Result<Resolved<T>, CliError> {
    let mut table = toml::Table::new();
    if let Some(seed) = file.get("seed") {
        table.insert("seed".into(), seed.clone());
    }
    match file.get(section) {
        None => {}
        Some(toml::Value::Table(t)) => table.extend(t.clone()),
        Some(_) => return Err(CliError::new(format!("config: `{section}` must be a table"))),
    }
    let given = toml::Table::try_from(flags).map_err(|e| CliError::new(format!("flags: {e}")))?;
    table.extend(given);
    let args = table
        .clone()
        .try_into()
        .map_err(|e: toml::de::Error| CliError::new(format!("config [{section}]: {}", e.message())))?;
    Ok(Resolved { args, table })
}

/// Fails with the flag name when a required setting is absent from both sources.
pub fn need<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T, CliError> {
    value
        .as_ref()
        .ok_or_else(|| CliError::new(format!("missing required setting --{flag} (flag or config file)")))
}

/// `key=value` lines: command, version, seed, the effective settings and their hash.
/// `seed` is the value actually used, `None` for commands without randomness.
pub fn manifest(command: &str, table: &toml::Table, seed: Option<u64>) -> String {
    let effective = toml::to_string(table).unwrap_or_default();
    let hash = Sha256::digest(effective.as_bytes());
    let hash: String = hash.iter().map(|b| format!("{b:02x}")).collect();
    let mut s = format!("command={command}\nversion={}\n", env!("CARGO_PKG_VERSION"));
    match seed {
        Some(v) => s.push_str(&format!("seed={v}\n")),
        None => s.push_str("seed=none\n"),
    }
    s.push_str(&format!("config_hash={hash}\n"));
    for (k, v) in table.iter().filter(|(k, _)| k.as_str() != "seed") {
        s.push_str(&format!("{k}={}\n", flat(v)));
    }
    s
}

fn flat(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Array(a) => a.iter().map(flat).collect::<Vec<_>>().join(","),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Serialize, Deserialize, Default)]
    struct Demo {
        #[serde(skip_serializing_if = "Option::is_none")]
        epochs: Option<usize>,
        #[serde(skip_serializing_if = "Option::is_none")]
        lr: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    }

    #[test]
    fn flags_override_file() {
        let file: toml::Table = "seed = 7\n[train]\nepochs = 5\nlr = 0.1\n".parse().unwrap();
        let flags = Demo {
            lr: Some(0.5),
            ..Demo::default()
        };
        let r = resolve(&flags, &file, "train").unwrap();
        assert_eq!((r.args.epochs, r.args.lr, r.args.seed), (Some(5), Some(0.5), Some(7)));
        let m = manifest("train", &r.table, r.args.seed);
        assert!(m.contains("lr=0.5\n") && m.contains("seed=7\n") && m.contains("config_hash="));
    }

    #[test]
    fn manifest_hash_tracks_settings() {
        let a: toml::Table = "x = 1".parse().unwrap();
        let b: toml::Table = "x = 2".parse().unwrap();
        let line = |t: &toml::Table| {
            manifest("c", t, None)
                .lines()
                .find(|l| l.starts_with("config_hash"))
                .unwrap()
                .to_owned()
        };
        assert_ne!(line(&a), line(&b));
        assert_eq!(line(&a), line(&a.clone()));
    }
}
