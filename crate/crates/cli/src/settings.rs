//! Config loading with command-line overrides, and worker limits.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;

use gkdv_core::config::parse_config;
use gkdv_core::RunConfig;

#[derive(Args, Debug, Clone)]
pub struct ConfigArgs {
    /// Run configuration (TOML).
    #[arg(long, alias = "family")]
    pub config: PathBuf,
    /// Override a config key, e.g. `--set evolve.dt=1e-4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap(),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Sets `path` (dotted) in `table`, creating intermediate tables.
pub fn set_key(table: &mut toml::Table, path: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).context("empty override key")?;
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .with_context(|| format!("override `{path}`: `{p}` is not a table"))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Reads the config file and applies `--set` and the dedicated flags, then
/// validates the result.
pub fn load(args: &ConfigArgs, extra: &[(&str, toml::Value)]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let mut sets: Vec<(String, toml::Value)> = Vec::new();
    for o in &args.overrides {
        let (k, v) = o
            .split_once('=')
            .with_context(|| format!("override `{o}` is not KEY=VALUE"))?;
        sets.push((k.trim().to_string(), parse_value(v.trim())));
    }
    for (k, v) in extra {
        sets.push((k.to_string(), v.clone()));
    }
    if let Some(d) = &args.output_dir {
        sets.push(("output_dir".into(), toml::Value::String(d.display().to_string())));
    }
    if let Some(s) = args.seed {
        sets.push(("seed".into(), toml::Value::Integer(s as i64)));
    }
    if sets.is_empty() {
        return Ok(parse_config(&text)?);
    }
    // Syntax errors are reported against the original file.
    let mut table: toml::Table = match toml::from_str(&text) {
        Ok(t) => t,
        Err(_) => return Ok(parse_config(&text)?),
    };
    for (k, v) in sets {
        set_key(&mut table, &k, v)?;
    }
    Ok(parse_config(&toml::to_string(&table)?)?)
}

/// Output directory, created if missing.
pub fn output_dir(path: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(path).map_err(gkdv_core::Error::Io)?;
    Ok(path.to_path_buf())
}

/// `--jobs`, else the available parallelism, capped by `GKDV_LAB_THREADS`.
pub fn worker_count(jobs: Option<usize>) -> usize {
    let default = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut n = jobs.unwrap_or(default).max(1);
    if let Some(cap) = std::env::var("GKDV_LAB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        n = n.min(cap.max(1));
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_override() {
        let mut t: toml::Table = toml::from_str("[evolve]\ndt = 1.0\n").unwrap();
        set_key(&mut t, "evolve.dt", parse_value("2.5e-4")).unwrap();
        set_key(&mut t, "horizons.S", parse_value("20")).unwrap();
        assert_eq!(t["evolve"]["dt"].as_float(), Some(2.5e-4));
        assert_eq!(t["horizons"]["S"].as_integer(), Some(20));
        assert_eq!(parse_value("runs/a"), toml::Value::String("runs/a".into()));
    }
}
