//! On-disk formats: binary field snapshots, CSV tables, sorted-key JSON,
//! trajectory directories and run manifests.
//!
//! A snapshot is a 32-byte header followed by the values as little-endian
//! `f64`:
//!
//! | bytes  | content                 |
//! |--------|-------------------------|
//! | 0..4   | magic `GKDV`            |
//! | 4..8   | format version, `u32`   |
//! | 8..16  | `num_points`, `u64`     |
//! | 16..24 | `domain_length`, `f64`  |
//! | 24..32 | `origin`, `f64`         |

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolver::Trajectory;
use crate::grid::{Field, GridSpec};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"GKDV";
pub const SNAPSHOT_VERSION: u32 = 1;
pub const SCHEMA_VERSION: u32 = 1;
const HEADER_LEN: usize = 32;

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, msg.into()))
}

pub fn encode_snapshot(f: &Field) -> Vec<u8> {
    let g = f.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * f.len());
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    out.extend_from_slice(&(g.num_points as u64).to_le_bytes());
    out.extend_from_slice(&g.domain_length.to_le_bytes());
    out.extend_from_slice(&g.origin.to_le_bytes());
    for v in f.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn le_f64(b: &[u8]) -> f64 {
    f64::from_le_bytes(b.try_into().unwrap())
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<Field> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != SNAPSHOT_MAGIC {
        return Err(corrupt("not a GKDV snapshot"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != SNAPSHOT_VERSION {
        return Err(corrupt(format!("unsupported snapshot version {version}")));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let grid = GridSpec {
        num_points: n,
        domain_length: le_f64(&bytes[16..24]),
        origin: le_f64(&bytes[24..32]),
    };
    let body = &bytes[HEADER_LEN..];
    if body.len() != 8 * n {
        return Err(corrupt(format!(
            "snapshot declares {n} points but holds {} bytes of data",
            body.len()
        )));
    }
    grid.validate()?;
    let values = body.chunks_exact(8).map(le_f64).collect();
    Field::new(grid, values)
}

pub fn write_snapshot(path: &Path, f: &Field) -> Result<()> {
    fs::write(path, encode_snapshot(f))?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Field> {
    decode_snapshot(&fs::read(path)?)
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Two columns `x,value`.
pub fn write_field_csv(path: &Path, f: &Field) -> Result<()> {
    let rows: Vec<Vec<f64>> = f.grid().nodes().zip(f.values()).map(|(x, &v)| vec![x, v]).collect();
    write_table_csv(path, &["x", "value"], &rows)
}

pub fn write_table_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for r in rows {
        if r.len() != header.len() {
            return Err(Error::Argument(format!(
                "row of {} values for {} columns",
                r.len(),
                header.len()
            )));
        }
        let cells: Vec<String> = r.iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Pretty JSON with object keys sorted at every level.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json's default map is ordered by key, so a round trip through
    // `Value` sorts struct fields too.
    let v = serde_json::to_value(value).map_err(|e| Error::Argument(e.to_string()))?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::Argument(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_sorted_json(value)?)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TrajectoryIndex {
    schema_version: u32,
    grid: GridSpec,
    times: Vec<f64>,
    mass: Vec<f64>,
    energy: Vec<f64>,
    kappa: f64,
    snapshots: Vec<String>,
}

/// Writes `dir/trajectory.json` and one snapshot per record under
/// `dir/snapshots/`.
pub fn write_trajectory(dir: &Path, traj: &Trajectory) -> Result<()> {
    let grid = *traj
        .grid()
        .ok_or_else(|| Error::Argument("cannot write an empty trajectory".into()))?;
    let snap_dir = dir.join("snapshots");
    fs::create_dir_all(&snap_dir)?;
    let mut names = Vec::with_capacity(traj.len());
    for (i, f) in traj.snapshots.iter().enumerate() {
        let name = format!("snapshots/{i:06}.bin");
        write_snapshot(&dir.join(&name), f)?;
        names.push(name);
    }
    let index = TrajectoryIndex {
        schema_version: SCHEMA_VERSION,
        grid,
        times: traj.times.clone(),
        mass: traj.mass_series.clone(),
        energy: traj.energy_series.clone(),
        kappa: traj.kappa,
        snapshots: names,
    };
    write_json(&dir.join("trajectory.json"), &index)
}

pub fn read_trajectory(dir: &Path) -> Result<Trajectory> {
    let text = fs::read_to_string(dir.join("trajectory.json"))?;
    let index: TrajectoryIndex =
        serde_json::from_str(&text).map_err(|e| corrupt(format!("trajectory.json: {e}")))?;
    let n = index.times.len();
    if index.snapshots.len() != n || index.mass.len() != n || index.energy.len() != n {
        return Err(corrupt("trajectory.json: series lengths disagree"));
    }
    let mut snapshots = Vec::with_capacity(n);
    for name in &index.snapshots {
        let f = read_snapshot(&dir.join(name))?;
        if *f.grid() != index.grid {
            return Err(corrupt(format!("{name}: grid differs from the index")));
        }
        snapshots.push(f);
    }
    Ok(Trajectory {
        times: index.times,
        snapshots,
        mass_series: index.mass,
        energy_series: index.energy,
        kappa: index.kappa,
    })
}

/// What a run produced. Wall time goes in a separate `timing.json` so two
/// identical runs have identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub versions: std::collections::BTreeMap<String, String>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config_hash: String, seed: u64) -> Self {
        let mut versions = std::collections::BTreeMap::new();
        versions.insert("gkdv-core".to_string(), env!("CARGO_PKG_VERSION").to_string());
        Manifest {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            config_hash,
            seed,
            versions,
            outputs: Vec::new(),
        }
    }

    pub fn write(&mut self, dir: &Path, wall_seconds: f64) -> Result<()> {
        self.outputs.sort();
        self.outputs.dedup();
        write_json(&dir.join("manifest.json"), self)?;
        #[derive(Serialize)]
        struct Timing {
            wall_seconds: f64,
        }
        write_json(&dir.join("timing.json"), &Timing { wall_seconds })
    }
}

pub const PLOT_SCRIPT_NAME: &str = "plot_series.py";

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plots every column of series.csv (and residuals.csv, if present) against t.

Usage: python3 plot_series.py [run_dir]
"""
import csv
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def load(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = {h: [float(r[i]) for r in body] for i, h in enumerate(header)}
    return header, cols


def plot(path, out):
    header, cols = load(path)
    t = cols[header[0]]
    fig, ax = plt.subplots(figsize=(7, 4))
    for h in header[1:]:
        y = [abs(v) for v in cols[h]]
        if any(v > 0 for v in y):
            ax.semilogy(t, y, label=h)
    ax.set_xlabel(header[0])
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(out, dpi=120)


run = sys.argv[1] if len(sys.argv) > 1 else os.path.dirname(os.path.abspath(__file__))
for name in ("series", "residuals"):
    src = os.path.join(run, name + ".csv")
    if os.path.exists(src):
        plot(src, os.path.join(run, name + ".png"))
"#;

/// Writes the static plotting script next to the CSV files it reads.
pub fn write_plot_script(dir: &Path) -> Result<PathBuf> {
    let path = dir.join(PLOT_SCRIPT_NAME);
    let mut f = fs::File::create(&path)?;
    f.write_all(PLOT_SCRIPT.as_bytes())?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn snapshot_header_layout() {
        let g = make_grid(8, 2.0, -1.0).unwrap();
        let f = Field::from_fn(g, |x| x * x);
        let b = encode_snapshot(&f);
        assert_eq!(b.len(), 32 + 64);
        assert_eq!(&b[..4], b"GKDV");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(b[8..16].try_into().unwrap()), 8);
        assert_eq!(decode_snapshot(&b).unwrap(), f);
        assert!(decode_snapshot(&b[..40]).is_err());
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(decode_snapshot(&bad).is_err());
    }

    #[test]
    fn csv_round_trips_digits() {
        let dir = tempfile::tempdir().unwrap();
        let g = make_grid(8, 1.0, 0.0).unwrap();
        let f = Field::from_fn(g, |x| (3.0 * x).sin() / 7.0);
        let p = dir.path().join("f.csv");
        write_field_csv(&p, &f).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,value"));
        for (line, &v) in lines.zip(f.values()) {
            let cell: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
            assert_eq!(cell.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn json_keys_are_sorted() {
        #[derive(Serialize)]
        struct S {
            zeta: u32,
            alpha: u32,
        }
        let s = to_sorted_json(&S { zeta: 1, alpha: 2 }).unwrap();
        assert!(s.find("alpha").unwrap() < s.find("zeta").unwrap());
    }
}
