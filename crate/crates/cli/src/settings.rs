//! Resolution of a run's configuration: preset, then the config file, then `--set`
//! overrides, then `--seed`.

use std::path::{Path, PathBuf};

use gibbsdyn_harness::{ExperimentConfig, ExperimentKind};
use serde::Deserialize;

/// Run-level settings that do not affect results.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub run: RunSection,
}

fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn set_path(root: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), String> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(format!("malformed override key '{key}'"));
    }
    let mut table = root;
    for p in &parts[..parts.len() - 1] {
        let entry = table.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| format!("'{p}' in '{key}' is not a table"))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Builds the configuration for `kind`. Errors are configuration errors.
pub fn resolve(kind: ExperimentKind, file: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<Resolved, String> {
    let preset = ExperimentConfig::preset(kind);
    let mut table = toml::Table::try_from(&preset).map_err(|e| format!("preset does not serialize: {e}"))?;
    let mut run = toml::Table::new();
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let mut user: toml::Table = text.parse().map_err(|e| format!("cannot parse config {}: {e}", path.display()))?;
        if let Some(r) = user.remove("run") {
            run = r.as_table().cloned().ok_or("'run' must be a table")?;
        }
        merge(&mut table, user);
    }
    for o in overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| format!("override '{o}' is not key=value"))?;
        let k = k.trim();
        match k.strip_prefix("run.") {
            Some(rk) => set_path(&mut run, rk, parse_value(v.trim()))?,
            None => set_path(&mut table, k, parse_value(v.trim()))?,
        }
    }
    let mut config: ExperimentConfig = toml::Value::Table(table).try_into().map_err(|e| format!("invalid configuration: {e}"))?;
    if config.experiment != kind {
        return Err(format!("config names experiment '{}' but the command is '{}'", config.experiment.name(), kind.name()));
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    config.validate().map_err(|e| format!("invalid configuration: {e}"))?;
    let run: RunSection = toml::Value::Table(run).try_into().map_err(|e| format!("invalid run section: {e}"))?;
    Ok(Resolved { config, run })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_apply_in_order() {
        let r = resolve(ExperimentKind::Invariance, None, &["flow.gamma=0.5".into(), "observables=[\"one\"]".into()], Some(7)).unwrap();
        assert_eq!(r.config.flow.gamma, 0.5);
        assert_eq!(r.config.observables, vec!["one".to_string()]);
        assert_eq!(r.config.seed, 7);
    }

    #[test]
    fn unknown_keys_fail() {
        assert!(resolve(ExperimentKind::Invariance, None, &["flow.gama=0.5".into()], None).is_err());
        assert!(resolve(ExperimentKind::Invariance, None, &["run.thread=2".into()], None).is_err());
        assert!(resolve(ExperimentKind::Invariance, None, &["experiment=\"ou\"".into()], None).is_err());
    }

    #[test]
    fn file_merges_over_preset() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "[flow]\nh = 0.02\n[run]\nthreads = 3\n").unwrap();
        let r = resolve(ExperimentKind::Invariance, Some(&p), &[], None).unwrap();
        assert_eq!(r.config.flow.h, 0.02);
        assert_eq!(r.config.flow.gamma, 0.1);
        assert_eq!(r.run.threads, Some(3));
        assert!(resolve(ExperimentKind::Invariance, Some(&dir.path().join("missing.toml")), &[], None).is_err());
    }
}
